"""Labeled vertex- and edge-weighted trial graph, with threshold views."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .similarity import SimilarityMatrix

__all__ = ["WeightedGraph", "GraphView", "vertex_weights", "build_graph", "prune_edges"]


def vertex_weights(mu) -> np.ndarray:
    """Mean off-diagonal similarity of every vertex; ``[0.]`` for one vertex."""
    values = mu.values if isinstance(mu, SimilarityMatrix) else np.asarray(mu, dtype=np.float64)
    n = values.shape[0]
    if n == 1:
        return np.zeros(1)
    return (values.sum(axis=1) - np.diag(values)) / (n - 1)


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Trials as vertices; ``eta`` vertex weights; ``mu`` edge weights.

    Vertex order equals trial order. ``eta`` is computed once on the full
    graph and never recomputed on subgraphs.
    """

    vertices: tuple[int, ...]
    labels: np.ndarray
    eta: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        n = len(self.vertices)
        if not (len(self.labels) == len(self.eta) == n and self.mu.shape == (n, n)):
            raise DataError("labels, eta and mu must all match the vertex count")
        for name in ("labels", "eta", "mu"):
            getattr(self, name).setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def view(self) -> "GraphView":
        return GraphView(self, np.arange(self.n), 0.0)

    def to_json(self, delta: float | None = None) -> dict:
        out = {
            "vertices": list(self.vertices),
            "labels": [int(x) for x in self.labels],
            "eta": [float(x) for x in self.eta],
            "mu": "similarity-matrix",
        }
        if delta is not None:
            out["delta"] = float(delta)
        return out


def build_graph(trials, mu: SimilarityMatrix) -> WeightedGraph:
    """Assemble the labeled graph of ``trials`` with edge weights ``mu``."""
    if len(trials) == 0:
        raise DataError("cannot build a graph from an empty trial set")
    if tuple(trials.ids) != tuple(mu.ids):
        raise DataError("similarity matrix ids do not match the trial set")
    values = np.array(mu.values)
    return WeightedGraph(
        vertices=tuple(trials.ids),
        labels=np.array(trials.labels),
        eta=vertex_weights(values),
        mu=values,
    )


class GraphView:
    """Read-only restriction of a graph to a vertex subset and threshold.

    Edges with ``mu < delta`` are absent. Positions index into the parent
    graph; no matrix copies are made.
    """

    __slots__ = ("parent", "positions", "delta")

    def __init__(self, parent: WeightedGraph, positions, delta: float):
        self.parent = parent
        self.positions = np.asarray(positions, dtype=np.int64)
        self.delta = float(delta)

    def __len__(self):
        return self.positions.size

    @property
    def eta(self) -> np.ndarray:
        return self.parent.eta

    @property
    def mu(self) -> np.ndarray:
        return self.parent.mu

    def vertex_id(self, pos: int) -> int:
        return self.parent.vertices[pos]

    def label_positions(self, label: int) -> np.ndarray:
        return self.positions[self.parent.labels[self.positions] == label]

    def has_edge(self, i: int, j: int) -> bool:
        """Edge test by parent position; both ends must be in the view."""
        if i == j or not (np.any(self.positions == i) and np.any(self.positions == j)):
            return False
        return bool(self.parent.mu[i, j] >= self.delta)

    def adjacency(self) -> np.ndarray:
        """Boolean adjacency among ``positions`` (in that order)."""
        sub = self.parent.mu[np.ix_(self.positions, self.positions)]
        adj = sub >= self.delta
        np.fill_diagonal(adj, False)
        return adj

    def edges(self) -> set[tuple[int, int]]:
        """Retained edges as ``(id_i, id_j)`` pairs with ``id_i < id_j``."""
        adj = self.adjacency()
        ids = [self.parent.vertices[p] for p in self.positions]
        out = set()
        for a, b in zip(*np.nonzero(np.triu(adj, 1))):
            i, j = ids[a], ids[b]
            out.add((i, j) if i < j else (j, i))
        return out

    def without(self, positions) -> "GraphView":
        drop = np.asarray(list(positions), dtype=np.int64)
        keep = self.positions[~np.isin(self.positions, drop)]
        return GraphView(self.parent, keep, self.delta)

    def with_delta(self, delta: float) -> "GraphView":
        return prune_edges(self, delta)


def prune_edges(g, delta: float) -> GraphView:
    """View of ``g`` without the edges whose weight is below ``delta``.

    Vertex weights are kept as computed on the full graph.
    """
    if not 0.0 <= delta <= 1.0:
        raise ConfigError(f"delta must lie in [0, 1], got {delta}")
    if isinstance(g, WeightedGraph):
        return GraphView(g, np.arange(g.n), delta)
    return GraphView(g.parent, g.positions, delta)
