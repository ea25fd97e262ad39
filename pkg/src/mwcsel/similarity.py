"""Discrete Fréchet distance, local-trend correlation and blended similarity.

The blended similarity of two trials is

    s = lam * (1 - norm(dF)) + (1 - lam) * (1 + loct) / 2

where ``dF`` is the discrete Fréchet distance, ``norm`` is min-max scaling
over the pairwise distances of a reference set, and ``loct`` is the cosine
of the two lag-q difference sequences.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError, DataError

__all__ = [
    "SimilarityParams",
    "FrechetNorm",
    "SimilarityMatrix",
    "PairwiseRaw",
    "discrete_frechet",
    "local_trend",
    "blended_similarity",
    "pairwise_raw",
    "cross_raw",
    "similarity_matrix",
    "cross_similarity",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimilarityParams:
    lam: float = 0.5
    q: int = 1
    normalization: str = "min-max-over-set"

    def validate(self, min_length: int | None = None) -> None:
        if not (0.0 <= self.lam <= 1.0) or math.isnan(self.lam):
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lam}")
        if int(self.q) != self.q or self.q < 1:
            raise ConfigError(f"q must be a positive integer, got {self.q}")
        if self.normalization != "min-max-over-set":
            raise ConfigError(f"unsupported normalization {self.normalization!r}")
        if min_length is not None and self.q >= min_length:
            raise ConfigError(f"q={self.q} must be smaller than the shortest trial ({min_length})")


@dataclass(frozen=True)
class FrechetNorm:
    """Min-max context for Fréchet distances."""

    dmin: float
    dmax: float

    @classmethod
    def from_distances(cls, d) -> "FrechetNorm":
        d = np.asarray(d, dtype=np.float64)
        if d.size == 0:
            return cls(0.0, 0.0)
        return cls(float(d.min()), float(d.max()))

    @property
    def degenerate(self) -> bool:
        return not self.dmax > self.dmin

    def __call__(self, d):
        d = np.asarray(d, dtype=np.float64)
        if self.degenerate:
            return np.zeros_like(d)[()]
        return np.clip((d - self.dmin) / (self.dmax - self.dmin), 0.0, 1.0)[()]


# --------------------------------------------------------------------------
# discrete Fréchet
# --------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _dfd_1d(a, b):
    m, n = a.size, b.size
    prev = np.empty(n)
    cur = np.empty(n)
    prev[0] = abs(a[0] - b[0])
    for j in range(1, n):
        prev[j] = max(prev[j - 1], abs(a[0] - b[j]))
    for i in range(1, m):
        cur[0] = max(prev[0], abs(a[i] - b[0]))
        for j in range(1, n):
            c = min(prev[j], cur[j - 1], prev[j - 1])
            cur[j] = max(c, abs(a[i] - b[j]))
        prev, cur = cur, prev
    return prev[n - 1]


def _as_curve(x, name="sequence") -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(x, dtype=np.float64).ravel())
    if arr.size == 0:
        raise DataError(f"{name} must not be empty")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains NaN or infinite values")
    return arr


def discrete_frechet(a, b) -> float:
    """Discrete Fréchet distance between two 1-D sample sequences.

    The minimum, over all monotone couplings of the two index sequences, of
    the largest absolute amplitude difference along the coupling. Computed
    with the O(m*n) Eiter-Mannila recursion.

    Examples
    --------
    >>> discrete_frechet([0, 1, 0], [0, 2, 0])
    1.0
    """
    return float(_dfd_1d(_as_curve(a, "a"), _as_curve(b, "b")))


# --------------------------------------------------------------------------
# local trend
# --------------------------------------------------------------------------

def downsample(x: np.ndarray, p: int) -> np.ndarray:
    """Pick ``p`` points of ``x`` at uniformly spaced indices (ends kept)."""
    if x.size == p:
        return x
    idx = np.rint(np.linspace(0, x.size - 1, p)).astype(np.int64)
    return x[idx]


@njit(cache=True, nogil=True)
def _loct(a, b, q):
    num = 0.0
    sa = 0.0
    sb = 0.0
    for t in range(a.size - q):
        da = a[t + q] - a[t]
        db = b[t + q] - b[t]
        num += da * db
        sa += da * da
        sb += db * db
    if sa == 0.0 or sb == 0.0:
        return np.nan
    r = num / math.sqrt(sa * sb)
    return min(1.0, max(-1.0, r))


def local_trend(a, b, q: int = 1) -> float:
    """Cosine agreement of the lag-``q`` differences of two sequences.

    The longer sequence is first down-sampled to the length of the shorter
    one. Returns ``nan`` when either difference sequence is identically
    zero (a constant trial); callers treat that as an undefined trend.
    """
    a = _as_curve(a, "a")
    b = _as_curve(b, "b")
    p = min(a.size, b.size)
    if not 1 <= q < p:
        raise ConfigError(f"q={q} must satisfy 1 <= q < min length ({p})")
    return float(_loct(downsample(a, p), downsample(b, p), int(q)))


def _blend(norm_d, loct, lam):
    loct = np.where(np.isnan(loct), 0.0, loct)
    s = lam * (1.0 - norm_d) + (1.0 - lam) * (1.0 + loct) / 2.0
    return np.clip(s, 0.0, 1.0)


def blended_similarity(a, b, params: SimilarityParams, frechet_norm: FrechetNorm) -> float:
    """Similarity in [0, 1] of two sequences under a given Fréchet scaling.

    An undefined trend (constant sequence) counts as zero trend.
    """
    params.validate()
    d = discrete_frechet(a, b)
    loct = local_trend(a, b, params.q)
    if np.isnan(loct):
        logger.debug("undefined local trend (constant sequence); using 0")
    return float(_blend(frechet_norm(d), loct, params.lam))


# --------------------------------------------------------------------------
# matrices
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PairwiseRaw:
    """Raw Fréchet distances and local trends for a set of trials.

    Caching these lets several parameter settings, subsets and splits share
    one pass of the quadratic computation.
    """

    ids: tuple[int, ...]
    frechet: np.ndarray
    trend: np.ndarray
    q: int

    def subset(self, positions) -> "PairwiseRaw":
        pos = np.asarray(positions, dtype=np.int64)
        return PairwiseRaw(
            ids=tuple(self.ids[i] for i in pos),
            frechet=self.frechet[np.ix_(pos, pos)],
            trend=self.trend[np.ix_(pos, pos)],
            q=self.q,
        )

    def frechet_norm(self) -> FrechetNorm:
        n = len(self.ids)
        iu = np.triu_indices(n, k=1)
        return FrechetNorm.from_distances(self.frechet[iu])


def _pair_values(x, y, q):
    p = min(x.size, y.size)
    return _dfd_1d(x, y), _loct(downsample(x, p), downsample(y, p), q)


def _curves(trials):
    return [np.ascontiguousarray(t.samples) for t in trials]


def _run_pairs(pairs, curves_a, curves_b, q, workers, fre, trd, symmetric):
    def work(chunk):
        for i, j in chunk:
            d, r = _pair_values(curves_a[i], curves_b[j], q)
            fre[i, j] = d
            trd[i, j] = r
            if symmetric:
                fre[j, i] = d
                trd[j, i] = r

    if workers <= 1 or len(pairs) < 2:
        work(pairs)
        return
    chunks = [pairs[k::workers] for k in range(workers)]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        list(ex.map(work, chunks))


def pairwise_raw(trials, q: int = 1, workers: int = 1) -> PairwiseRaw:
    """Fréchet distance and local trend for every unordered pair, once."""
    if len(trials) == 0:
        raise DataError("cannot compute similarities of an empty trial set")
    if q < 1 or q >= trials.min_length():
        raise ConfigError(f"q={q} must satisfy 1 <= q < shortest trial length ({trials.min_length()})")
    n = len(trials)
    curves = _curves(trials)
    fre = np.zeros((n, n))
    trd = np.ones((n, n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    _run_pairs(pairs, curves, curves, int(q), int(workers), fre, trd, True)
    undefined = int(np.isnan(trd[np.triu_indices(n, 1)]).sum())
    if undefined:
        logger.warning("%d pair(s) with undefined local trend (constant trials); treated as zero trend", undefined)
    return PairwiseRaw(tuple(trials.ids), fre, trd, int(q))


def cross_raw(rows, cols, q: int = 1, workers: int = 1):
    """Fréchet distances and local trends between two trial sets.

    Returns ``(frechet, trend)`` arrays of shape ``(len(rows), len(cols))``.
    """
    a, b = _curves(rows), _curves(cols)
    fre = np.zeros((len(a), len(b)))
    trd = np.zeros((len(a), len(b)))
    pairs = [(i, j) for i in range(len(a)) for j in range(len(b))]
    _run_pairs(pairs, a, b, int(q), int(workers), fre, trd, False)
    return fre, trd


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Symmetric matrix of blended similarities with unit diagonal."""

    ids: tuple[int, ...]
    values: np.ndarray
    params: SimilarityParams | None = None
    norm: FrechetNorm | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        n = len(self.ids)
        if v.shape != (n, n):
            raise DataError(f"matrix shape {v.shape} does not match {n} ids")
        if not np.array_equal(v, v.T):
            raise DataError("similarity matrix must be symmetric")
        if n and (v.min() < 0 or v.max() > 1):
            raise DataError("similarities must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "ids", tuple(int(i) for i in self.ids))

    @property
    def n(self) -> int:
        return len(self.ids)

    def index_of(self, trial_id: int) -> int:
        return self.ids.index(trial_id)

    def submatrix(self, ids) -> "SimilarityMatrix":
        """Restriction to ``ids`` (kept in the given order)."""
        lookup = {t: k for k, t in enumerate(self.ids)}
        pos = np.array([lookup[i] for i in ids], dtype=np.int64)
        return SimilarityMatrix(tuple(ids), self.values[np.ix_(pos, pos)], self.params, self.norm)

    def to_csv(self) -> str:
        return "".join(",".join(repr(float(x)) for x in row) + "\n" for row in self.values)

    def to_json(self) -> dict:
        out = {"ids": list(self.ids), "values": [[float(x) for x in row] for row in self.values]}
        if self.params is not None:
            out["params"] = {"lambda": self.params.lam, "q": self.params.q,
                             "normalization": self.params.normalization}
        if self.norm is not None:
            out["frechet_range"] = [self.norm.dmin, self.norm.dmax]
        return out

    @classmethod
    def from_json(cls, obj) -> "SimilarityMatrix":
        try:
            ids = tuple(int(i) for i in obj["ids"])
            values = np.array(obj["values"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed similarity matrix document: {exc}") from exc
        params = norm = None
        if "params" in obj:
            p = obj["params"]
            params = SimilarityParams(p["lambda"], p["q"], p.get("normalization", "min-max-over-set"))
        if "frechet_range" in obj:
            norm = FrechetNorm(*obj["frechet_range"])
        return cls(ids, values, params, norm)

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def similarity_from_raw(raw: PairwiseRaw, params: SimilarityParams, norm: FrechetNorm | None = None) -> SimilarityMatrix:
    """Blend cached raw pair values into a similarity matrix.

    ``norm`` defaults to min-max over the unordered pairs of ``raw``.
    """
    params.validate()
    if params.q != raw.q:
        raise ConfigError(f"raw values were computed with q={raw.q}, params ask for q={params.q}")
    if norm is None:
        norm = raw.frechet_norm()
    s = _blend(norm(raw.frechet), raw.trend, params.lam)
    s = np.triu(s, 1)
    s = s + s.T
    np.fill_diagonal(s, 1.0)
    return SimilarityMatrix(raw.ids, s, params, norm)


def similarity_matrix(trials, params: SimilarityParams | None = None, workers: int = 1) -> SimilarityMatrix:
    """Blended similarity of all trial pairs.

    Fréchet distances are min-max scaled over every unordered pair of the
    set before blending. Each pair is computed once; parallel workers write
    disjoint cells, so the result does not depend on ``workers``.
    """
    params = params or SimilarityParams()
    if len(trials) == 0:
        raise DataError("cannot compute similarities of an empty trial set")
    params.validate(trials.min_length())
    return similarity_from_raw(pairwise_raw(trials, params.q, workers), params)


def cross_similarity(frechet, trend, params: SimilarityParams, norm: FrechetNorm) -> np.ndarray:
    """Blend raw cross-set values under a reference Fréchet scaling."""
    return _blend(norm(np.asarray(frechet)), np.asarray(trend), params.lam)
