"""Decision-agreement metrics: Rand index, F-score and Fleiss' kappa."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

__all__ = [
    "ConfusionCounts",
    "RatingMatrix",
    "pair_confusion",
    "rand_index",
    "f_score",
    "fleiss_kappa",
    "rating_matrix",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            v = getattr(self, name)
            if v < 0 or int(v) != v:
                raise DataError(f"{name} must be a non-negative integer, got {v}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_json(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


def pair_confusion(y_true, y_pred) -> ConfusionCounts:
    """Co-assignment decisions over all unordered pairs of items.

    A pair is a positive decision when both items get the same predicted
    label; it is correct when their true labels agree likewise.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise DataError("y_true and y_pred differ in length")
    iu = np.triu_indices(y_true.size, k=1)
    same_t = (y_true[:, None] == y_true[None, :])[iu]
    same_p = (y_pred[:, None] == y_pred[None, :])[iu]
    return ConfusionCounts(
        tp=int(np.sum(same_t & same_p)),
        fp=int(np.sum(~same_t & same_p)),
        tn=int(np.sum(~same_t & ~same_p)),
        fn=int(np.sum(same_t & ~same_p)),
    )


def rand_index(c: ConfusionCounts) -> float:
    """Fraction of correct decisions, ``(TP + TN) / total``."""
    if c.total == 0:
        raise DataError("Rand index undefined for zero decisions")
    return (c.tp + c.tn) / c.total


def f_score(c: ConfusionCounts, beta: float = 1.0) -> float:
    """``(1 + b^2) p r / (b^2 p + r)`` with precision ``p`` and recall ``r``.

    Reported as 0 (with a warning) when precision or recall is undefined.
    """
    if beta < 0:
        raise ConfigError(f"beta must be >= 0, got {beta}")
    if c.tp + c.fp == 0 or c.tp + c.fn == 0:
        logger.warning("F-score undefined (no predicted or no actual positives); reporting 0")
        return 0.0
    p = c.tp / (c.tp + c.fp)
    r = c.tp / (c.tp + c.fn)
    b2 = beta * beta
    denom = b2 * p + r
    if denom == 0:
        return 0.0
    return (1 + b2) * p * r / denom


@dataclass(frozen=True, eq=False)
class RatingMatrix:
    """``N`` subjects by ``k`` categories; entry = raters who chose that category."""

    counts: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.counts)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise DataError("rating matrix must be a non-empty 2-D array")
        if np.any(a < 0) or not np.all(a == np.round(a)):
            raise DataError("rating counts must be non-negative integers")
        a = a.astype(np.int64)
        rows = a.sum(axis=1)
        if np.any(rows != rows[0]):
            raise DataError("every subject needs the same number of ratings")
        a.setflags(write=False)
        object.__setattr__(self, "counts", a)

    @property
    def n_subjects(self) -> int:
        return self.counts.shape[0]

    @property
    def n_raters(self) -> int:
        return int(self.counts[0].sum())


def rating_matrix(ratings, categories=None) -> RatingMatrix:
    """Build a rating matrix from a ``subjects x raters`` array of category labels."""
    ratings = np.asarray(ratings)
    if categories is None:
        categories = np.unique(ratings)
    cats = list(categories)
    counts = np.stack([(ratings == c).sum(axis=1) for c in cats], axis=1)
    return RatingMatrix(counts)


def fleiss_kappa(r: RatingMatrix) -> float:
    """Fleiss' kappa of a rating matrix.

    When the expected agreement is 1 (every rating in one category) kappa
    is 0/0; it is reported as 1, since the observed agreement is then
    perfect too.
    """
    a = r.counts.astype(np.float64)
    N = r.n_subjects
    n = r.n_raters
    if n < 2:
        raise DataError("Fleiss' kappa needs at least 2 ratings per subject")
    p_bar = (np.sum(a * a) - N * n) / (N * n * (n - 1))
    p_e = float(np.sum((a.sum(axis=0) / (N * n)) ** 2))
    if p_e == 1.0:
        logger.warning("degenerate agreement: all ratings in one category")
        return 1.0
    return float((p_bar - p_e) / (1 - p_e))
