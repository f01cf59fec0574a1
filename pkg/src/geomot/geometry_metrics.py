"""Geometry-aware evaluation metrics.

Endpoint accuracy, identity similarity, verification AUC, trajectory
smoothness (TS), latent disentanglement score (LDS), and geodesic
consistency (GC). All metrics are pure functions of their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateInputError, DimensionError, InsufficientSamplesError
from .numerics import as_matrix, centered_cross_covariance, frobenius_norm

__all__ = [
    "MetricsReport",
    "GeodesicConsistency",
    "emotion_accuracy",
    "identity_similarity",
    "verification_auc",
    "trajectory_smoothness",
    "latent_disentanglement_score",
    "geodesic_consistency",
    "nearest_node_sequence",
]

# Denominator guard used by TS, LDS and GC.
_EPS = 1e-8


@dataclass
class MetricsReport:
    """Flat bundle of the six evaluation scores."""

    acc: float
    id_sim: float
    auc: float
    ts: float
    lds: float
    gc: float

    def to_dict(self) -> dict:
        return {
            "acc": self.acc,
            "id_sim": self.id_sim,
            "auc": self.auc,
            "ts": self.ts,
            "lds": self.lds,
            "gc": self.gc,
        }


def emotion_accuracy(predicted, target) -> float:
    """Fraction of positions where predicted label equals target label."""
    predicted = list(predicted)
    target = list(target)
    if len(predicted) != len(target):
        raise DimensionError("label lists must have equal length")
    if not predicted:
        raise DimensionError("label lists must be non-empty")
    hits = sum(1 for p, t in zip(predicted, target) if p == t)
    return hits / len(predicted)


def identity_similarity(generated_emb, reference_emb) -> float:
    """Mean row-wise cosine similarity between paired embeddings."""
    g = as_matrix(generated_emb, "generated_emb")
    r = as_matrix(reference_emb, "reference_emb")
    if g.shape != r.shape:
        raise DimensionError(f"shape mismatch: {g.shape} vs {r.shape}")
    gn = np.linalg.norm(g, axis=1)
    rn = np.linalg.norm(r, axis=1)
    if np.any(gn <= 0) or np.any(rn <= 0):
        raise DegenerateInputError("zero-norm embedding row")
    sims = np.sum(g * r, axis=1) / (gn * rn)
    return float(np.mean(np.clip(sims, -1.0, 1.0)))


def verification_auc(scores_matched, scores_nonmatched) -> float:
    """Probability that a random matched score exceeds a random non-matched one.

    Ties count 0.5 (the rank-sum form of ROC AUC).
    """
    pos = np.asarray(list(scores_matched), dtype=np.float64)
    neg = np.asarray(list(scores_nonmatched), dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise DimensionError("both score lists must be non-empty")
    wins = np.sum(pos[:, None] > neg[None, :])
    ties = np.sum(pos[:, None] == neg[None, :])
    return float((wins + 0.5 * ties) / (pos.size * neg.size))


def trajectory_smoothness(traj) -> float:
    """One minus the normalized second-difference magnitude of a trajectory.

    Accepts a trajectory record or a raw (T+1, p) array of latent points.
    Trajectories with fewer than three points have no interior curvature
    and score 1.0. A zero-length trajectory with three or more points is
    degenerate and raises.
    """
    z = as_matrix(getattr(traj, "latent_points", traj), "latent_points")
    n = z.shape[0]
    if n < 2:
        raise DimensionError("trajectory needs at least 2 points")
    if n < 3:
        return 1.0
    steps = np.diff(z, axis=0)
    total = float(np.sum(np.linalg.norm(steps, axis=1)))
    if total <= 0:
        raise DegenerateInputError("trajectory has zero total path length")
    second = np.diff(steps, axis=0)
    roughness = np.linalg.norm(second, axis=1) / (total + _EPS)
    ts = 1.0 - float(np.mean(roughness))
    return float(np.clip(ts, 0.0, 1.0))


def latent_disentanglement_score(z_attr, z_id) -> float:
    """One minus the cross-covariance Frobenius ratio between two factors.

    Scores near 1 indicate weak linear dependence between the factors.
    """
    a = as_matrix(z_attr, "z_attr")
    i = as_matrix(z_id, "z_id")
    if a.shape[0] != i.shape[0]:
        raise DimensionError("factor batch sizes differ")
    if a.shape[0] < 2:
        raise InsufficientSamplesError("need at least 2 rows")
    c_cross = frobenius_norm(centered_cross_covariance(a, i))
    c_attr = frobenius_norm(centered_cross_covariance(a, a))
    c_id = frobenius_norm(centered_cross_covariance(i, i))
    ratio = c_cross / (c_cross + c_attr + c_id + _EPS)
    return 1.0 - float(np.clip(ratio, 0.0, 1.0))


class GeodesicConsistency(NamedTuple):
    """GC value plus a flag marking trajectories excluded as degenerate."""

    value: float
    excluded: bool


def nearest_node_sequence(latent_points, node_embeddings) -> list[int]:
    """Assign each trajectory point to its nearest node (ties to lowest index)."""
    z = as_matrix(latent_points, "latent_points")
    emb = as_matrix(node_embeddings, "node_embeddings")
    if z.shape[1] != emb.shape[1]:
        raise DimensionError("latent and node embedding dims differ")
    diff = z[:, None, :] - emb[None, :, :]
    d2 = np.einsum("tnd,tnd->tn", diff, diff)
    return [int(i) for i in np.argmin(d2, axis=1)]


def geodesic_consistency(traj, graph, node_embeddings=None) -> GeodesicConsistency:
    """Mean absolute gap between normalized graph and latent step progress.

    Accepts a trajectory record or a raw (T+1, p) array. When the record
    carries no node sequence, each point is assigned to its nearest node
    in ``node_embeddings`` (defaults to the graph's own embeddings).
    Trajectories with zero total progress on both sides are excluded
    (neutral value 0.0, ``excluded=True``).
    """
    z = as_matrix(getattr(traj, "latent_points", traj), "latent_points")
    node_sequence = getattr(traj, "node_sequence", None)
    if node_sequence is None:
        emb = graph.node_embeddings if node_embeddings is None else node_embeddings
        node_sequence = nearest_node_sequence(z, emb)
    nodes = [int(u) for u in node_sequence]
    if len(nodes) != z.shape[0]:
        raise DimensionError("node sequence length must match trajectory length")
    if z.shape[0] < 2:
        raise DimensionError("trajectory needs at least one step")
    dist = graph.distance_matrix
    if dist is None:
        raise DimensionError("graph has no distance matrix")
    n = dist.shape[0]
    for u in nodes:
        if not 0 <= u < n:
            raise KeyError(f"node {u} not in graph of size {n}")
    graph_steps = np.array(
        [dist[nodes[t - 1], nodes[t]] for t in range(1, len(nodes))]
    )
    latent_steps = np.linalg.norm(np.diff(z, axis=0), axis=1)
    g_total = float(graph_steps.sum())
    l_total = float(latent_steps.sum())
    if g_total <= 0 and l_total <= 0:
        return GeodesicConsistency(0.0, True)
    g_norm = graph_steps / (g_total + _EPS)
    l_norm = latent_steps / (l_total + _EPS)
    return GeodesicConsistency(float(np.mean(np.abs(g_norm - l_norm))), False)
