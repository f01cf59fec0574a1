"""Latent trajectory generation between graph nodes.

Five path strategies: shortest graph path, direct linear interpolation,
natural cubic spline through the graph path, seeded random simple path,
and the direct hop of a fully-connected unit-weight graph. The identity
factor is never consumed here; trajectories live purely in the attribute
embedding supplied by the caller.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConnectivityError, DimensionError, ValidationError
from .graph_priors import GraphPrior
from .numerics import as_matrix

__all__ = ["STRATEGIES", "TrajectoryRecord", "graph_path", "build_trajectory"]

STRATEGIES = ("graph", "linear", "spline", "random", "full")

# Restarts allowed to the self-avoiding walk before falling back to the
# shortest path (termination guarantee for awkward topologies).
_MAX_WALK_RESTARTS = 1000


@dataclass
class TrajectoryRecord:
    """Latent points plus the graph nodes they are meant to follow."""

    latent_points: np.ndarray
    node_sequence: list[int] | None
    strategy: str
    steps_per_edge: int

    def __post_init__(self):
        self.latent_points = as_matrix(self.latent_points, "latent_points")
        if self.strategy not in STRATEGIES:
            raise ValidationError(f"unknown strategy {self.strategy!r}")
        if self.latent_points.shape[0] < 2:
            raise DimensionError("trajectory needs at least 2 points")


def _edge_lengths(graph: GraphPrior, epsilon_length: float) -> np.ndarray:
    w = graph.adjacency_weights
    lengths = np.full_like(w, np.inf)
    mask = w > 0
    lengths[mask] = 1.0 / (w[mask] + epsilon_length)
    return lengths


def graph_path(
    graph: GraphPrior, source: int, target: int, epsilon_length: float = 1e-6
) -> list[int]:
    """Shortest node path under edge lengths 1/(w + eps).

    Dijkstra with deterministic tie-breaking: among equal-length paths the
    one reaching each node through the lowest predecessor index wins.
    """
    n = graph.n_nodes
    source, target = int(source), int(target)
    for node in (source, target):
        if not 0 <= node < n:
            raise KeyError(f"node {node} not in graph of size {n}")
    if source == target:
        return [source]
    lengths = _edge_lengths(graph, epsilon_length)
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int64)
    dist[source] = 0.0
    heap = [(0.0, source)]
    done = np.zeros(n, dtype=bool)
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v in range(n):
            if np.isinf(lengths[u, v]) or done[v]:
                continue
            cand = d + lengths[u, v]
            if cand < dist[v] or (cand == dist[v] and u < pred[v]):
                dist[v] = cand
                pred[v] = u
                heapq.heappush(heap, (cand, v))
    if np.isinf(dist[target]):
        raise ConnectivityError(f"no path from {source} to {target}")
    path = [target]
    while path[-1] != source:
        path.append(int(pred[path[-1]]))
    return path[::-1]


def _interpolate_polyline(knots: np.ndarray, steps_per_edge: int) -> np.ndarray:
    """Piecewise-linear interpolation with steps_per_edge segments per knot gap."""
    if knots.shape[0] == 1:
        return np.repeat(knots, steps_per_edge + 1, axis=0)
    pieces = [knots[[0]]]
    for a, b in zip(knots[:-1], knots[1:]):
        for s in range(1, steps_per_edge + 1):
            t = s / steps_per_edge
            pieces.append(((1.0 - t) * a + t * b)[None, :])
    return np.vstack(pieces)


def _interpolate_spline(knots: np.ndarray, steps_per_edge: int) -> np.ndarray:
    """Natural cubic through the knots, chord-length parameterized."""
    if knots.shape[0] < 3:
        return _interpolate_polyline(knots, steps_per_edge)
    chord = np.linalg.norm(np.diff(knots, axis=0), axis=1)
    chord = np.where(chord > 0, chord, 1e-12)
    t = np.concatenate([[0.0], np.cumsum(chord)])
    spline = CubicSpline(t, knots, bc_type="natural")
    n_pts = (knots.shape[0] - 1) * steps_per_edge + 1
    samples = spline(np.linspace(t[0], t[-1], n_pts))
    samples[0] = knots[0]
    samples[-1] = knots[-1]
    return samples


def _random_simple_path(
    graph: GraphPrior, source: int, target: int, max_hops: int, rng: np.random.Generator
) -> list[int]:
    """Seeded self-avoiding walk with restart, capped at max_hops."""
    neighbors = [np.nonzero(graph.adjacency_weights[u] > 0)[0] for u in range(graph.n_nodes)]
    for _ in range(_MAX_WALK_RESTARTS):
        path = [source]
        visited = {source}
        while len(path) - 1 < max_hops:
            options = [v for v in neighbors[path[-1]] if v not in visited]
            if not options:
                break
            nxt = int(options[rng.integers(len(options))])
            path.append(nxt)
            visited.add(nxt)
            if nxt == target:
                return path
    return None


def build_trajectory(
    graph: GraphPrior,
    prototype_embeddings,
    source: int,
    target: int,
    strategy: str = "graph",
    steps_per_edge: int = 8,
    seed: int = 0,
    epsilon_length: float = 1e-6,
) -> TrajectoryRecord:
    """Trajectory between two graph nodes in the supplied embedding space.

    ``prototype_embeddings`` gives one embedding row per graph node (the
    rows interpolated are not required to equal the graph's own node
    embeddings, so trajectories can live in a learned space). Every
    strategy starts at the source embedding and ends at the target
    embedding exactly.
    """
    emb = as_matrix(prototype_embeddings, "prototype_embeddings")
    if emb.shape[0] != graph.n_nodes:
        raise DimensionError("one embedding row per graph node required")
    if steps_per_edge < 1:
        raise DimensionError("steps_per_edge must be >= 1")
    if strategy not in STRATEGIES:
        raise ValidationError(f"unknown strategy {strategy!r}")
    source, target = int(source), int(target)

    if strategy == "graph":
        nodes = graph_path(graph, source, target, epsilon_length)
        points = _interpolate_polyline(emb[nodes], steps_per_edge)
    elif strategy == "spline":
        nodes = graph_path(graph, source, target, epsilon_length)
        points = _interpolate_spline(emb[nodes], steps_per_edge)
    elif strategy == "random":
        shortest = graph_path(graph, source, target, epsilon_length)
        rng = np.random.default_rng(seed)
        max_hops = max(1, 2 * (len(shortest) - 1))
        nodes = _random_simple_path(graph, source, target, max_hops, rng)
        if nodes is None:
            nodes = shortest
        points = _interpolate_polyline(emb[nodes], steps_per_edge)
    elif strategy == "full":
        # Fully-connected unit-weight graph: the shortest path is the
        # direct hop from source to target.
        nodes = [source, target] if source != target else [source]
        points = _interpolate_polyline(emb[nodes], steps_per_edge)
    else:  # linear
        nodes = [source, target] if source != target else [source]
        points = _interpolate_polyline(emb[nodes], steps_per_edge)

    node_sequence = _expand_node_sequence(nodes, steps_per_edge)
    if len(node_sequence) != points.shape[0]:
        raise DimensionError("node sequence and trajectory length diverged")
    points[0] = emb[source]
    points[-1] = emb[target]
    return TrajectoryRecord(
        latent_points=points,
        node_sequence=node_sequence,
        strategy=strategy,
        steps_per_edge=steps_per_edge,
    )


def _expand_node_sequence(nodes: list[int], steps_per_edge: int) -> list[int]:
    """Per-point node ids: interpolated points take the nearer knot's id."""
    if len(nodes) == 1:
        return [int(nodes[0])] * (steps_per_edge + 1)
    seq = [int(nodes[0])]
    for a, b in zip(nodes[:-1], nodes[1:]):
        for s in range(1, steps_per_edge + 1):
            seq.append(int(a) if s / steps_per_edge < 0.5 else int(b))
    return seq
