"""Similarity histogram and threshold selection by top-down cumulative mass."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .similarity import SimilarityMatrix

__all__ = [
    "SimilarityHistogram",
    "similarity_distribution",
    "select_threshold",
    "delta_schedule",
]

logger = logging.getLogger(__name__)

DEFAULT_INTERVAL = 0.05
# slack for comparing float cumulative mass with a target
_MASS_TOL = 1e-12


def _bin_edges(interval: float) -> np.ndarray:
    nbins = math.ceil(1.0 / interval - 1e-9)
    lower = np.round(np.arange(nbins) * interval, 12)
    return lower


@dataclass(frozen=True, eq=False)
class SimilarityHistogram:
    """Counts of similarity values per ``[lower, lower + interval)`` bin.

    The last bin is closed at 1. ``n_total`` is the number of counted
    entries (N*N for an N-vertex matrix).
    """

    interval: float
    counts: np.ndarray
    n_total: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.size != _bin_edges(self.interval).size:
            raise DataError(f"{counts.size} bins do not match interval {self.interval}")
        if counts.sum() != self.n_total:
            raise DataError("bin counts do not add up to n_total")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_counts(cls, counts, interval: float) -> "SimilarityHistogram":
        counts = np.asarray(counts, dtype=np.int64)
        return cls(interval, counts, int(counts.sum()))

    @property
    def lower(self) -> np.ndarray:
        return _bin_edges(self.interval)

    @property
    def upper(self) -> np.ndarray:
        return np.minimum(np.round(self.lower + self.interval, 12), 1.0)

    @property
    def densities(self) -> np.ndarray:
        return self.counts / self.n_total

    def mass_from(self, j: int) -> float:
        """Fraction of entries in bin ``j`` or above."""
        return float(self.counts[j:].sum() / self.n_total)

    def to_csv(self) -> str:
        lines = ["bin_lower,bin_upper,count,density\n"]
        for lo, hi, c, d in zip(self.lower, self.upper, self.counts, self.densities):
            lines.append(f"{float(lo)!r},{float(hi)!r},{int(c)},{float(d)!r}\n")
        return "".join(lines)


def _check_interval(interval):
    if not (0.0 < interval <= 1.0):
        raise ConfigError(f"interval must lie in (0, 1], got {interval}")


def similarity_distribution(mu, interval: float = DEFAULT_INTERVAL) -> SimilarityHistogram:
    """Histogram of all N*N ordered matrix entries, diagonal included."""
    _check_interval(interval)
    values = mu.values if isinstance(mu, SimilarityMatrix) else np.asarray(mu, dtype=np.float64)
    lower = _bin_edges(interval)
    idx = np.searchsorted(lower, values.ravel(), side="right") - 1
    idx = np.clip(idx, 0, lower.size - 1)
    counts = np.bincount(idx, minlength=lower.size)
    return SimilarityHistogram(interval, counts, int(values.size))


def _check_mass(A):
    if not (0.0 < A < 1.0):
        raise ConfigError(f"mass target A must lie in (0, 1), got {A}")


def _select_bin(h: SimilarityHistogram, A: float) -> int:
    cum = np.cumsum(h.counts[::-1])[::-1] / h.n_total
    ok = np.flatnonzero(cum >= A - _MASS_TOL)
    return int(ok.max())


def select_threshold(h: SimilarityHistogram, A: float) -> float:
    """Largest bin lower edge whose top-down cumulative mass reaches ``A``.

    A larger ``A`` gives a smaller (or equal) threshold.
    """
    _check_mass(A)
    return float(h.lower[_select_bin(h, A)])


def delta_schedule(h: SimilarityHistogram, A_list, warn: bool = True) -> list[float]:
    """Strictly descending thresholds, one per mass target.

    Targets must be non-decreasing. When two targets land on the same bin
    (or the later one would not be lower), the later threshold steps down
    to the bin below its predecessor and a warning is logged. Callers that
    expand one scalar target into a repeated list pass ``warn=False``,
    since the step-down is then expected; it is logged at debug level.
    """
    A_list = [float(a) for a in A_list]
    if not A_list:
        raise ConfigError("at least one mass target is required")
    for a in A_list:
        _check_mass(a)
    if any(b < a for a, b in zip(A_list, A_list[1:])):
        raise ConfigError(f"mass targets must be non-decreasing, got {A_list}")
    nonempty = int(np.count_nonzero(h.counts))
    if len(A_list) > nonempty:
        raise ConfigError(f"{len(A_list)} targets but only {nonempty} non-empty bins")
    bins = []
    for a in A_list:
        j = _select_bin(h, a)
        if bins and j >= bins[-1]:
            j = bins[-1] - 1
            if j < 0:
                raise ConfigError(f"no bin left below threshold {h.lower[bins[-1]]} for target {a}")
            log = logger.warning if warn else logger.debug
            log("threshold for A=%s collides with the previous one; stepped down to %s", a, h.lower[j])
        bins.append(j)
    return [float(h.lower[j]) for j in bins]
