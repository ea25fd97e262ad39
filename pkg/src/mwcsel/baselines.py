"""Comparison selectors: class-wise/global medoid neighbourhoods and
test-driven nearest-neighbour selection.

"Centroids" are medoids under the blended similarity, which keeps every
selector in the same similarity space as the clique method. All rankings
break ties by the lowest trial id.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clique import SelectionResult
from .errors import ConfigError, DataError
from .similarity import SimilarityMatrix

__all__ = [
    "BaselineConfig",
    "medoid",
    "lw_select",
    "gw_select",
    "lrt_select",
    "grt_select",
    "BASELINES",
]

BASELINES = ("lw", "gw", "lrt", "grt")


@dataclass(frozen=True)
class BaselineConfig:
    method: str
    k: int | dict | None = None
    m: int | None = None

    def validate(self) -> None:
        if self.method not in BASELINES:
            raise ConfigError(f"unknown baseline {self.method!r}")
        ks = self.k.values() if isinstance(self.k, dict) else [self.k]
        for k in ks:
            if k is not None and k < 1:
                raise ConfigError(f"k must be >= 1, got {k}")
        if self.method in ("lrt", "grt") and self.m is not None and self.k is not None:
            if self.k > self.m:
                raise ConfigError(f"k={self.k} must not exceed m={self.m}")


def _rank(scores, ids) -> list[int]:
    """Positions ordered by descending score, then ascending id.

    Scores are compared after rounding to 12 decimals so that values
    equal up to floating-point noise tie.
    """
    scores = np.round(np.asarray(scores, dtype=np.float64), 12)
    return sorted(range(len(ids)), key=lambda p: (-scores[p], ids[p]))


def medoid(values: np.ndarray, ids) -> int:
    """Position of the element with the highest mean similarity to the others."""
    n = len(ids)
    if n == 1:
        return 0
    mean = (values.sum(axis=1) - np.diag(values)) / (n - 1)
    return _rank(mean, ids)[0]


def _neighbourhood(values, ids, k) -> list[int]:
    c = medoid(values, ids)
    row = np.array(values[c], dtype=np.float64)
    order = [c] + [p for p in _rank(row, ids) if p != c]
    return [ids[p] for p in order[:k]]


def _result(train, chosen, method, params) -> SelectionResult:
    chosen = set(chosen)
    return SelectionResult(
        cliques=(),
        selected_ids=tuple(i for i in train.ids if i in chosen),
        rejected_ids=tuple(i for i in train.ids if i not in chosen),
        params=params,
        method=method,
    )


def _check_mu(train, mu: SimilarityMatrix):
    if tuple(train.ids) != tuple(mu.ids):
        raise DataError("similarity matrix ids do not match the training set")


def lw_select(train, mu: SimilarityMatrix, k) -> SelectionResult:
    """Per class, the ``k`` trials most similar to the class medoid.

    ``k`` is an int or a ``{label: k}`` mapping. The medoid itself is
    always the first one chosen.
    """
    _check_mu(train, mu)
    labels = train.labels
    ids = train.ids
    chosen = []
    for c, size in train.class_sizes().items():
        kc = k.get(c, 0) if isinstance(k, dict) else k
        if kc == 0 and isinstance(k, dict):
            continue
        if kc < 1:
            raise ConfigError(f"k must be >= 1, got {kc}")
        if kc > size:
            raise ConfigError(f"class {c} has {size} trials, fewer than k={kc}")
        pos = np.flatnonzero(labels == c)
        sub = mu.values[np.ix_(pos, pos)]
        chosen.extend(_neighbourhood(sub, [ids[p] for p in pos], kc))
    params = {"k": dict(sorted(k.items())) if isinstance(k, dict) else k}
    return _result(train, chosen, "lw", params)


def gw_select(train, mu: SimilarityMatrix, k: int) -> SelectionResult:
    """The ``k`` trials most similar to the label-blind global medoid."""
    _check_mu(train, mu)
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if k > len(train):
        raise ConfigError(f"k={k} exceeds the {len(train)} training trials")
    chosen = _neighbourhood(mu.values, train.ids, k)
    return _result(train, chosen, "gw", {"k": k})


def _cross(train, test, sim) -> np.ndarray:
    sim = np.asarray(sim, dtype=np.float64)
    if sim.shape != (len(test), len(train)):
        raise DataError(f"cross-similarity shape {sim.shape} != ({len(test)}, {len(train)})")
    return sim


def _near(row, cols, ids, m, k):
    row = np.round(np.asarray(row, dtype=np.float64), 12)
    ranked = sorted(cols, key=lambda p: (-row[p], ids[p]))
    pool = ranked[:m]
    return [ids[p] for p in sorted(pool, key=lambda p: (-row[p], ids[p]))[:k]]


def lrt_select(train, test, sim, m: int, k: int) -> SelectionResult:
    """For every test trial and class: its ``m`` nearest training trials of
    that class, narrowed to the ``k`` nearest. The union is selected.

    ``sim`` holds test-by-train similarities.
    """
    if not 1 <= k <= m:
        raise ConfigError(f"need 1 <= k <= m, got k={k}, m={m}")
    sim = _cross(train, test, sim)
    labels = train.labels
    ids = train.ids
    by_class = {c: np.flatnonzero(labels == c).tolist() for c in train.class_sizes()}
    for c, cols in by_class.items():
        if m > len(cols):
            raise ConfigError(f"m={m} exceeds the {len(cols)} training trials of class {c}")
    chosen = set()
    for r in range(len(test)):
        for cols in by_class.values():
            chosen.update(_near(sim[r], cols, ids, m, k))
    return _result(train, chosen, "lrt", {"m": m, "k": k})


def grt_select(train, test, sim, m: int, k: int) -> SelectionResult:
    """Label-blind variant of :func:`lrt_select`."""
    if not 1 <= k <= m:
        raise ConfigError(f"need 1 <= k <= m, got k={k}, m={m}")
    if m > len(train):
        raise ConfigError(f"m={m} exceeds the {len(train)} training trials")
    sim = _cross(train, test, sim)
    cols = list(range(len(train)))
    chosen = set()
    for r in range(len(test)):
        chosen.update(_near(sim[r], cols, train.ids, m, k))
    return _result(train, chosen, "grt", {"m": m, "k": k})
