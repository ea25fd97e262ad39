"""Per-class maximum-weight clique growth and multi-round selection.

A clique's weight is the sum of its vertex weights plus the sum of its edge
weights. Growth is greedy: the vertex with the best vertex-weight times
retained-similarity score seeds the clique, then the best-scoring vertex
adjacent (at the class threshold) to every member is admitted until none
is left.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EmptyClassError, InvariantViolation
from .graph import GraphView, WeightedGraph, prune_edges

__all__ = [
    "Clique",
    "SelectionResult",
    "pair_weight",
    "clique_weight",
    "modified_clique_weight",
    "admission_check",
    "grow_clique",
    "mwc_select",
    "default_class_order",
    "exact_max_weight_clique",
]

logger = logging.getLogger(__name__)

WEIGHT_TOL = 1e-9
TIE_TOL = 1e-12


@dataclass(frozen=True)
class Clique:
    label: int
    members: tuple[int, ...]
    delta: float
    weight: float
    # clique weight after each admission, in admission order
    trace: tuple[float, ...] = field(default=(), compare=False, repr=False)

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "delta": self.delta,
            "members": sorted(self.members),
            "weight": self.weight,
        }


@dataclass(frozen=True)
class SelectionResult:
    cliques: tuple[Clique, ...]
    selected_ids: tuple[int, ...]
    rejected_ids: tuple[int, ...]
    params: dict
    method: str = "mwc"

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "params": self.params,
            "cliques": [c.to_json() for c in self.cliques],
            "selected": list(self.selected_ids),
            "rejected": list(self.rejected_ids),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def per_class_counts(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for c in self.cliques:
            out[c.label] = out.get(c.label, 0) + len(c.members)
        return out


def _graph(g) -> WeightedGraph:
    return g.parent if isinstance(g, GraphView) else g


def _positions(g, ids) -> list[int]:
    lookup = {v: k for k, v in enumerate(_graph(g).vertices)}
    return [lookup[i] for i in ids]


def pair_weight(i: int, j: int, g, n_k: int, delta_k: float) -> float:
    """Modified edge weight of vertices ``i`` and ``j`` inside a size-``n_k`` clique.

    ``(eta_i + eta_j) / (n_k - 1) + mu_ij`` when ``mu_ij >= delta_k``, else 0.
    """
    if n_k < 2:
        raise ConfigError(f"clique size must be >= 2, got {n_k}")
    if i == j:
        raise ConfigError("pair_weight needs two distinct vertices")
    G = _graph(g)
    a, b = _positions(G, (i, j))
    mu = G.mu[a, b]
    if mu < delta_k:
        return 0.0
    return float((G.eta[a] + G.eta[b]) / (n_k - 1) + mu)


def clique_weight(g, members) -> float:
    """Sum of member vertex weights plus the sum of member-pair edge weights."""
    G = _graph(g)
    pos = np.asarray(_positions(G, members), dtype=np.int64)
    if pos.size == 0:
        return 0.0
    sub = G.mu[np.ix_(pos, pos)]
    return float(G.eta[pos].sum() + np.triu(sub, 1).sum())


def modified_clique_weight(g, members, delta_k: float) -> float:
    """Sum of :func:`pair_weight` over every member pair."""
    members = list(members)
    n = len(members)
    return float(sum(
        pair_weight(i, j, g, n, delta_k) for i, j in itertools.combinations(members, 2)
    ))


def admission_check(members, v: int, g, delta_k: float) -> tuple[bool, float]:
    """Whether ``v`` may join ``members`` and the resulting weight increase.

    ``v`` is admissible iff its edge weight to every member is at least
    ``delta_k``; the increase is then ``eta_v + sum_i mu_iv``.
    """
    if isinstance(members, Clique):
        members = members.members
    G = _graph(g)
    pv = _positions(G, [v])[0]
    pos = np.asarray(_positions(G, members), dtype=np.int64)
    row = G.mu[pv, pos]
    if pos.size and row.min() < delta_k:
        return False, 0.0
    return True, float(G.eta[pv] + row.sum())


def _check_increment(old_w, new_w, inc, eta_v, row):
    if abs((new_w - old_w) - inc) > WEIGHT_TOL:
        raise InvariantViolation(
            f"weight increment {new_w - old_w!r} differs from eta_v + sum mu = {inc!r}"
        )
    degenerate = eta_v == 0 and not np.any(row)
    if not degenerate and not new_w > old_w:
        raise InvariantViolation(f"admission did not increase the clique weight ({old_w!r} -> {new_w!r})")


def grow_clique(g, label: int, delta: float | None = None) -> Clique:
    """Greedy maximum-weight clique among the ``label`` vertices of ``g``.

    At every step each remaining candidate ``v`` (adjacent to all current
    members at threshold ``delta``) is scored by ``eta_v`` times the sum of
    its retained edge weights to the other candidates and the members. The
    best candidate joins; ties go to the lowest vertex id.
    """
    if isinstance(g, WeightedGraph):
        g = g.view()
    if delta is not None:
        g = prune_edges(g, delta)
    delta = g.delta
    G = g.parent
    cand = g.label_positions(label)
    if cand.size == 0:
        raise EmptyClassError(f"no vertex with label {label} in the graph")

    ids = np.asarray(G.vertices, dtype=np.int64)
    members: list[int] = []
    weight = 0.0
    trace = []
    cand = list(cand)
    while cand:
        pool = np.asarray(cand + members, dtype=np.int64)
        block = G.mu[np.ix_(np.asarray(cand), pool)]
        retained = np.where(block >= delta, block, 0.0)
        # drop self-similarity (column k of the first len(cand) columns)
        retained[np.arange(len(cand)), np.arange(len(cand))] = 0.0
        scores = G.eta[cand] * retained.sum(axis=1)
        top = scores.max()
        # scores equal up to rounding count as tied
        best = np.flatnonzero(scores >= top - TIE_TOL * max(1.0, abs(top)))
        pick = cand[min(best, key=lambda k: ids[cand[k]])]

        row = G.mu[pick, members] if members else np.zeros(0)
        inc = float(G.eta[pick] + row.sum())
        new_members = members + [pick]
        new_w = clique_weight(G, ids[new_members].tolist())
        _check_increment(weight, new_w, inc, G.eta[pick], row)
        members, weight = new_members, new_w
        trace.append(weight)
        cand = [c for c in cand if c != pick and G.mu[c, pick] >= delta]

    return Clique(
        label=int(label),
        members=tuple(int(ids[p]) for p in members),
        delta=float(delta),
        weight=float(weight),
        trace=tuple(trace),
    )


def default_class_order(labels) -> list[int]:
    """Labels by descending class size, ties by ascending label."""
    uniq, counts = np.unique(np.asarray(labels), return_counts=True)
    return [int(u) for u, _ in sorted(zip(uniq, counts), key=lambda x: (-x[1], x[0]))]


def _check_deltas(deltas):
    prev = 1.0
    for k, d in enumerate(deltas):
        if not 0.0 <= d < prev:
            raise ConfigError(
                f"thresholds must satisfy 0 <= delta_k < delta_(k-1) with delta_0 = 1; "
                f"got delta_{k + 1} = {d} after {prev}"
            )
        prev = d


def mwc_select(g: WeightedGraph, deltas, class_order=None, rest_as_clique: bool = False,
               params: dict | None = None) -> SelectionResult:
    """Grow one clique per class on a successively reduced graph.

    Round ``k`` prunes edges below ``deltas[k]``, grows the clique of class
    ``class_order[k]`` and removes its members from the vertex pool.

    Parameters
    ----------
    g : WeightedGraph
    deltas : sequence of float
        Strictly descending thresholds in ``[0, 1)``, one per class.
    class_order : sequence of int, optional
        Defaults to descending class size.
    rest_as_clique : bool
        Allow one threshold fewer than classes; the last class then takes
        ``delta = 0`` so all its remaining vertices form its clique.
    """
    deltas = [float(d) for d in deltas]
    order = list(default_class_order(g.labels) if class_order is None else class_order)
    if len(set(order)) != len(order):
        raise ConfigError("class order lists a class twice")
    if rest_as_clique and len(deltas) == len(order) - 1:
        deltas = deltas + [0.0]
    if len(deltas) != len(order):
        raise ConfigError(f"{len(deltas)} thresholds given for {len(order)} classes")
    _check_deltas(deltas)

    view = g.view()
    cliques = []
    for k, (label, delta) in enumerate(zip(order, deltas), start=1):
        if view.label_positions(label).size == 0:
            raise EmptyClassError(f"round {k}: no remaining vertex with label {label}")
        c = grow_clique(prune_edges(view, delta), label)
        if not c.members:
            logger.warning("round %d: class %s produced an empty clique", k, label)
        cliques.append(c)
        view = view.without(_positions(g, c.members))

    chosen = {v for c in cliques for v in c.members}
    selected = tuple(v for v in g.vertices if v in chosen)
    rejected = tuple(v for v in g.vertices if v not in chosen)
    out_params = {"deltas": deltas, "class_order": [int(x) for x in order]}
    if params:
        out_params.update(params)
    return SelectionResult(tuple(cliques), selected, rejected, out_params, "mwc")


def exact_max_weight_clique(g, label: int, delta: float | None = None, limit: int = 20):
    """Exhaustive maximum-weight threshold-valid clique (small graphs only).

    Returns ``(members, weight)`` with members sorted by id.
    """
    if isinstance(g, WeightedGraph):
        g = g.view()
    if delta is not None:
        g = prune_edges(g, delta)
    G = g.parent
    cand = list(g.label_positions(label))
    if len(cand) > limit:
        raise ConfigError(f"{len(cand)} candidates exceed the enumeration limit {limit}")
    best, best_w = (), -1.0
    for r in range(1, len(cand) + 1):
        for combo in itertools.combinations(cand, r):
            if all(G.mu[a, b] >= g.delta for a, b in itertools.combinations(combo, 2)):
                ids = [G.vertices[p] for p in combo]
                w = clique_weight(G, ids)
                if w > best_w:
                    best, best_w = tuple(sorted(ids)), w
    return best, best_w
