"""Emotion and identity graph priors.

Builds weighted k-nearest-neighbor graphs over prototype embeddings,
converts similarity weights into edge lengths 1/(w + eps), and derives
all-pairs shortest-path distance matrices. Built graphs are immutable
(arrays are marked read-only) and safe to share across threads.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .errors import (
    ConnectivityError,
    DegenerateInputError,
    DimensionError,
    InsufficientSamplesError,
)
from .numerics import as_matrix, cosine_similarity

__all__ = [
    "GraphConfig",
    "GraphPrior",
    "cluster_prototypes",
    "build_knn_graph",
    "shortest_path_matrix",
    "build_emotion_graph",
    "build_identity_graph",
    "graph_to_dict",
    "graph_from_dict",
]


@dataclass(frozen=True)
class GraphConfig:
    """Knobs for graph construction."""

    k_neighbors: int = 10
    n_prototypes: int = 32
    epsilon_length: float = 1e-6

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise DimensionError("k_neighbors must be >= 1")
        if self.n_prototypes < 2:
            raise DimensionError("n_prototypes must be >= 2")
        if self.epsilon_length <= 0:
            raise DimensionError("epsilon_length must be positive")


@dataclass
class GraphPrior:
    """Prototype embeddings plus weighted adjacency and shortest-path distances.

    ``adjacency_weights[i, j]`` in [0, 1] with 0 meaning "no edge";
    ``distance_matrix`` is None until populated by shortest paths.
    ``labels[i]`` optionally tags node i with a semantic class.
    """

    node_embeddings: np.ndarray
    adjacency_weights: np.ndarray
    distance_matrix: np.ndarray | None = None
    labels: list | None = None

    def __post_init__(self):
        self.node_embeddings = as_matrix(self.node_embeddings, "node_embeddings")
        self.adjacency_weights = as_matrix(self.adjacency_weights, "adjacency_weights")
        n = self.node_embeddings.shape[0]
        if self.adjacency_weights.shape != (n, n):
            raise DimensionError("adjacency must be square and match node count")
        if self.distance_matrix is not None:
            self.distance_matrix = as_matrix(self.distance_matrix, "distance_matrix")
            if self.distance_matrix.shape != (n, n):
                raise DimensionError("distance matrix must match node count")
        if self.labels is not None and len(self.labels) != n:
            raise DimensionError("labels must match node count")
        for arr in (self.node_embeddings, self.adjacency_weights, self.distance_matrix):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.node_embeddings.shape[0]


def cluster_prototypes(points, n_prototypes: int, seed: int) -> np.ndarray:
    """Seeded k-means centroids (k-means++ initialization).

    Every returned centroid is the mean of a nonempty cluster; empty
    clusters are repaired by promoting the point farthest from its
    assigned centroid. Deterministic for a fixed seed.
    """
    pts = as_matrix(points, "points")
    m = pts.shape[0]
    if n_prototypes < 1:
        raise DimensionError("n_prototypes must be >= 1")
    if m < n_prototypes:
        raise InsufficientSamplesError(
            f"need at least {n_prototypes} points, got {m}"
        )
    rng = np.random.default_rng(seed)
    centroids = _kmeans_plusplus(pts, n_prototypes, rng)
    assign = None
    for _ in range(200):
        d2 = _sqdist(pts, centroids)
        new_assign = np.argmin(d2, axis=1)
        # Repair empty clusters with the globally worst-fit point.
        for c in range(n_prototypes):
            if not np.any(new_assign == c):
                worst = int(np.argmax(d2[np.arange(m), new_assign]))
                new_assign[worst] = c
        converged = assign is not None and np.array_equal(new_assign, assign)
        assign = new_assign
        for c in range(n_prototypes):
            centroids[c] = pts[assign == c].mean(axis=0)
        if converged:
            break
    return centroids


def _sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _kmeans_plusplus(pts: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    m = pts.shape[0]
    chosen = [int(rng.integers(m))]
    d2 = _sqdist(pts, pts[chosen])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            probs = d2 / total
            idx = int(rng.choice(m, p=probs))
        else:
            # All remaining points coincide with a centroid; take the
            # first index not picked yet to stay deterministic.
            remaining = sorted(set(range(m)) - set(chosen))
            idx = remaining[0]
        chosen.append(idx)
        d2 = np.minimum(d2, _sqdist(pts, pts[[idx]])[:, 0])
    return pts[chosen].astype(np.float64).copy()


def build_knn_graph(nodes, cfg: GraphConfig, labels=None) -> GraphPrior:
    """Symmetric kNN graph over node embeddings with cosine weights.

    Each node links to its min(k, N-1) most cosine-similar neighbors;
    negative similarities are clamped to 0 (edge dropped) and directed
    weights are symmetrized with the elementwise max. Raises
    ConnectivityError when the result is not a single component.
    """
    emb = as_matrix(nodes, "nodes")
    n = emb.shape[0]
    if n < 2:
        raise DimensionError("need at least 2 nodes")
    sims = cosine_similarity(emb)
    k_eff = min(cfg.k_neighbors, n - 1)
    directed = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        order = np.argsort(-sims[i], kind="stable")
        order = order[order != i][:k_eff]
        directed[i, order] = np.clip(sims[i, order], 0.0, 1.0)
    weights = np.maximum(directed, directed.T)
    np.fill_diagonal(weights, 0.0)
    _check_connected(weights)
    return GraphPrior(node_embeddings=emb, adjacency_weights=weights, labels=labels)


def _check_connected(weights: np.ndarray) -> None:
    n_comp, comp = connected_components(csr_matrix(weights > 0), directed=False)
    if n_comp > 1:
        groups = [np.nonzero(comp == c)[0].tolist() for c in range(n_comp)]
        raise ConnectivityError(
            f"graph has {n_comp} components: {groups}", components=groups
        )


def shortest_path_matrix(g: GraphPrior, epsilon_length: float) -> np.ndarray:
    """All-pairs shortest-path distances over edge lengths 1/(w + eps)."""
    w = g.adjacency_weights
    _check_connected(w)
    lengths = np.zeros_like(w)
    mask = w > 0
    lengths[mask] = 1.0 / (w[mask] + epsilon_length)
    dist = shortest_path(csr_matrix(lengths), method="D", directed=False)
    if not np.all(np.isfinite(dist)):
        raise ConnectivityError("infinite shortest-path distances found")
    dist = 0.5 * (dist + dist.T)
    np.fill_diagonal(dist, 0.0)
    return dist


def build_emotion_graph(va_points, labels, cfg: GraphConfig, seed: int) -> GraphPrior:
    """Emotion graph: cluster points into prototypes, kNN edges, shortest paths.

    Each prototype carries the majority label of its cluster (ties break
    to the smallest label) so endpoint accuracy can be evaluated later.
    """
    pts = as_matrix(va_points, "va_points")
    if labels is None or len(labels) != pts.shape[0]:
        raise DimensionError("labels must be provided, one per point")
    centroids = cluster_prototypes(pts, cfg.n_prototypes, seed)
    assign = np.argmin(_sqdist(pts, centroids), axis=1)
    labels = list(labels)
    proto_labels = []
    for c in range(centroids.shape[0]):
        members = [labels[i] for i in np.nonzero(assign == c)[0]]
        if members:
            counts = Counter(members)
            top = max(counts.values())
            proto_labels.append(sorted(k for k, v in counts.items() if v == top)[0])
        else:
            proto_labels.append(sorted(set(labels))[0])
    graph = build_knn_graph(centroids, cfg, labels=proto_labels)
    dist = shortest_path_matrix(graph, cfg.epsilon_length)
    return GraphPrior(
        node_embeddings=graph.node_embeddings,
        adjacency_weights=graph.adjacency_weights,
        distance_matrix=dist,
        labels=proto_labels,
    )


def build_identity_graph(identity_centroids, cfg: GraphConfig) -> GraphPrior:
    """Identity graph: one node per identity group, kNN edges, shortest paths."""
    emb = as_matrix(identity_centroids, "identity_centroids")
    graph = build_knn_graph(emb, cfg, labels=list(range(emb.shape[0])))
    dist = shortest_path_matrix(graph, cfg.epsilon_length)
    return GraphPrior(
        node_embeddings=graph.node_embeddings,
        adjacency_weights=graph.adjacency_weights,
        distance_matrix=dist,
        labels=graph.labels,
    )


def graph_to_dict(g: GraphPrior) -> dict:
    """JSON-ready dict with nodes, (i, j, weight) edges, distances, labels."""
    edges = []
    w = g.adjacency_weights
    for i in range(g.n_nodes):
        for j in range(i + 1, g.n_nodes):
            if w[i, j] > 0:
                edges.append([int(i), int(j), float(w[i, j])])
    return {
        "nodes": g.node_embeddings.tolist(),
        "edges": edges,
        "distance_matrix": None
        if g.distance_matrix is None
        else g.distance_matrix.tolist(),
        "labels": None if g.labels is None else list(g.labels),
    }


def graph_from_dict(d: dict) -> GraphPrior:
    """Inverse of :func:`graph_to_dict`."""
    nodes = as_matrix(np.array(d["nodes"], dtype=np.float64), "nodes")
    n = nodes.shape[0]
    weights = np.zeros((n, n), dtype=np.float64)
    for i, j, wij in d["edges"]:
        weights[int(i), int(j)] = float(wij)
        weights[int(j), int(i)] = float(wij)
    dist = d.get("distance_matrix")
    return GraphPrior(
        node_embeddings=nodes,
        adjacency_weights=weights,
        distance_matrix=None if dist is None else np.array(dist, dtype=np.float64),
        labels=d.get("labels"),
    )
