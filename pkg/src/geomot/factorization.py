"""Learnable factorization heads, the full training objective, and training.

Two 2-layer MLP heads project a shared representation into an attribute
factor and an identity factor. The objective combines relational
alignment of the attribute factor to the emotion-graph metric (fused,
with a feature cost), relational alignment of the identity factor to the
identity-graph metric, an orthogonality penalty between the factors, and
a hinge penalty on decoder expansion. Gradients are computed analytically
with the transport plans held fixed at their solved values (envelope
differentiation); the optimizer is decoupled-weight-decay Adam with
linear warmup, cosine decay, and global-norm gradient clipping.
"""

from __future__ import annotations

import base64
import copy
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateInputError,
    DimensionError,
    MappingError,
    NumericalError,
    ValidationError,
)
from .graph_priors import GraphPrior
from .numerics import as_matrix, l2_normalize_rows, pairwise_distance
from .ot_solvers import FgwConfig, fgw_gradient_wrt_latent, fgw_loss, gw_loss

__all__ = [
    "ProjectionHead",
    "LatentBatch",
    "LossConfig",
    "TrainConfig",
    "init_heads",
    "forward_heads",
    "orthogonality_loss",
    "lipschitz_loss",
    "assign_prototypes",
    "total_loss",
    "backward",
    "train",
    "save_checkpoint",
    "load_checkpoint",
]

_NORM_FLOOR = 1e-12

_ACTIVATIONS = {
    "relu": (lambda x: np.maximum(x, 0.0), lambda x: (x > 0).astype(np.float64)),
    "tanh": (np.tanh, lambda x: 1.0 - np.tanh(x) ** 2),
    "identity": (lambda x: x, lambda x: np.ones_like(x)),
}


@dataclass
class ProjectionHead:
    """Two-layer MLP mapping the shared representation to one factor."""

    layer1_weights: np.ndarray
    layer1_bias: np.ndarray
    layer2_weights: np.ndarray
    layer2_bias: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        self.layer1_weights = as_matrix(self.layer1_weights, "layer1_weights")
        self.layer2_weights = as_matrix(self.layer2_weights, "layer2_weights")
        self.layer1_bias = np.asarray(self.layer1_bias, dtype=np.float64).ravel()
        self.layer2_bias = np.asarray(self.layer2_bias, dtype=np.float64).ravel()
        if self.activation not in _ACTIVATIONS:
            raise ValidationError(f"unknown activation {self.activation!r}")
        d, h = self.layer1_weights.shape
        h2, p = self.layer2_weights.shape
        if h2 != h or self.layer1_bias.size != h or self.layer2_bias.size != p:
            raise DimensionError("head layer shapes do not chain")
        for arr in (self.layer1_bias, self.layer2_bias):
            if not np.all(np.isfinite(arr)):
                raise DegenerateInputError("head bias contains NaN/Inf")

    @property
    def input_dim(self) -> int:
        return self.layer1_weights.shape[0]

    @property
    def output_dim(self) -> int:
        return self.layer2_weights.shape[1]

    def params(self) -> dict:
        return {
            "layer1_weights": self.layer1_weights,
            "layer1_bias": self.layer1_bias,
            "layer2_weights": self.layer2_weights,
            "layer2_bias": self.layer2_bias,
        }

    def forward(self, z: np.ndarray) -> np.ndarray:
        act, _ = _ACTIVATIONS[self.activation]
        return act(z @ self.layer1_weights + self.layer1_bias) @ self.layer2_weights + self.layer2_bias


@dataclass
class LatentBatch:
    """Shared representations with factors, labels, and group ids."""

    z: np.ndarray
    emotion_labels: np.ndarray
    identity_groups: np.ndarray
    z_attr: np.ndarray | None = None
    z_id: np.ndarray | None = None
    va_points: np.ndarray | None = None

    def __post_init__(self):
        self.z = as_matrix(self.z, "z")
        b = self.z.shape[0]
        self.emotion_labels = np.asarray(self.emotion_labels).ravel()
        self.identity_groups = np.asarray(self.identity_groups).ravel()
        if self.emotion_labels.size != b or self.identity_groups.size != b:
            raise DimensionError("labels and groups must match the batch size")
        for name in ("z_attr", "z_id", "va_points"):
            val = getattr(self, name)
            if val is not None:
                val = as_matrix(val, name)
                if val.shape[0] != b:
                    raise DimensionError(f"{name} rows must match batch size")
                setattr(self, name, val)

    @property
    def batch_size(self) -> int:
        return self.z.shape[0]


@dataclass(frozen=True)
class LossConfig:
    lambda_e: float = 1.0
    lambda_i: float = 1.0
    lambda_perp: float = 1.0
    lambda_lip: float = 0.1
    lipschitz_L: float = 1.0
    fgw: FgwConfig = field(default_factory=FgwConfig)
    normalize_factors: bool = True

    def __post_init__(self):
        for name in ("lambda_e", "lambda_i", "lambda_perp", "lambda_lip"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be nonnegative")
        if self.lipschitz_L <= 0:
            raise ValidationError("lipschitz_L must be positive")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    weight_decay: float = 1e-2
    steps: int = 1000
    batch_size: int = 64
    warmup_steps: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValidationError("learning_rate must be nonnegative")
        if self.batch_size < 2:
            raise ValidationError("batch_size must be >= 2")

    def effective_warmup(self) -> int:
        if self.warmup_steps is not None:
            return self.warmup_steps
        # 3k warmup of a 100k-step schedule, scaled to the actual length.
        return max(1, round(0.03 * self.steps))


def init_heads(
    input_dim: int, hidden_dim: int, attr_dim: int, id_dim: int, seed: int
) -> tuple[ProjectionHead, ProjectionHead]:
    """Seeded (attribute, identity) head pair with scaled-normal weights."""
    rng = np.random.default_rng(seed)

    def make(out_dim):
        w1 = rng.normal(0.0, 1.0 / math.sqrt(input_dim), size=(input_dim, hidden_dim))
        w2 = rng.normal(0.0, 1.0 / math.sqrt(hidden_dim), size=(hidden_dim, out_dim))
        return ProjectionHead(w1, np.zeros(hidden_dim), w2, np.zeros(out_dim))

    return make(attr_dim), make(id_dim)


def forward_heads(z, h_attr: ProjectionHead, h_id: ProjectionHead):
    """Deterministic forward pass of both heads."""
    zm = as_matrix(z, "z")
    if zm.shape[1] != h_attr.input_dim or zm.shape[1] != h_id.input_dim:
        raise DimensionError("z width must match head input dims")
    return h_attr.forward(zm), h_id.forward(zm)


def _forward_cached(head: ProjectionHead, z: np.ndarray):
    act, dact = _ACTIVATIONS[head.activation]
    pre = z @ head.layer1_weights + head.layer1_bias
    hidden = act(pre)
    out = hidden @ head.layer2_weights + head.layer2_bias
    return out, (z, pre, hidden, dact)


def _backprop_head(head: ProjectionHead, cache, d_out: np.ndarray) -> dict:
    z, pre, hidden, dact = cache
    d_hidden = d_out @ head.layer2_weights.T
    d_pre = d_hidden * dact(pre)
    return {
        "layer1_weights": z.T @ d_pre,
        "layer1_bias": d_pre.sum(axis=0),
        "layer2_weights": hidden.T @ d_out,
        "layer2_bias": d_out.sum(axis=0),
    }


def orthogonality_loss(z_attr, z_id) -> float:
    """Squared Frobenius norm of z_attr^T z_id, scaled by the batch size."""
    a = as_matrix(z_attr, "z_attr")
    i = as_matrix(z_id, "z_id")
    if a.shape[0] != i.shape[0]:
        raise DimensionError("factor batch sizes differ")
    cross = a.T @ i
    return float(np.sum(cross**2)) / a.shape[0]


def lipschitz_loss(decoder, z_pairs, lipschitz_bound: float) -> float:
    """Mean hinge on decoder expansion beyond the declared ratio.

    ``z_pairs`` is a (U, V) tuple of equally shaped latent matrices; each
    row pair contributes max(0, |g(u)-g(v)| - L |u-v|).
    """
    u, v = z_pairs
    u = as_matrix(u, "pairs_u")
    v = as_matrix(v, "pairs_v")
    if u.shape != v.shape:
        raise DimensionError("pair matrices must have equal shape")
    out_gap = np.linalg.norm(decoder.decode(u) - decoder.decode(v), axis=1)
    in_gap = np.linalg.norm(u - v, axis=1)
    return float(np.mean(np.maximum(0.0, out_gap - lipschitz_bound * in_gap)))


def assign_prototypes(batch: LatentBatch, emotion_graph: GraphPrior) -> np.ndarray:
    """Map each sample to its labeled emotion prototype.

    Candidates are the graph nodes carrying the sample's label; among
    them the nearest in the coordinate space is chosen when the batch
    carries coordinates, otherwise the lowest-index candidate.
    """
    if emotion_graph.labels is None:
        raise MappingError("emotion graph carries no node labels")
    node_labels = list(emotion_graph.labels)
    by_label = {}
    for idx, lab in enumerate(node_labels):
        by_label.setdefault(lab, []).append(idx)
    assigned = np.zeros(batch.batch_size, dtype=np.int64)
    for s in range(batch.batch_size):
        lab = batch.emotion_labels[s]
        lab_key = lab.item() if hasattr(lab, "item") else lab
        candidates = by_label.get(lab_key)
        if not candidates:
            raise MappingError(f"label {lab_key!r} matches no graph prototype")
        if batch.va_points is not None:
            coords = emotion_graph.node_embeddings[candidates]
            gaps = np.linalg.norm(coords - batch.va_points[s], axis=1)
            assigned[s] = candidates[int(np.argmin(gaps))]
        else:
            assigned[s] = candidates[0]
    return assigned


def _group_mean_matrix(y: np.ndarray, proto_ids: np.ndarray):
    """Per-sample matrix of its prototype-group mean plus the group index map."""
    means = np.zeros_like(y)
    groups = {}
    for p in np.unique(proto_ids):
        members = np.nonzero(proto_ids == p)[0]
        groups[int(p)] = members
        means[members] = y[members].mean(axis=0)
    return means, groups


def _normalize_with_cache(x: np.ndarray):
    norms = np.linalg.norm(x, axis=1)
    scale = np.where(norms > _NORM_FLOOR, norms, 1.0)
    normalized = x / scale[:, None]
    return normalized, norms, scale


def _submatrix(dist: np.ndarray, idx: np.ndarray, what: str) -> np.ndarray:
    n = dist.shape[0]
    if np.any(idx < 0) or np.any(idx >= n):
        raise MappingError(f"{what} index outside graph of size {n}")
    return dist[np.ix_(idx, idx)]


def _pair_indices(batch_size: int):
    return np.triu_indices(batch_size, k=1)


class _TermState:
    """Everything the backward pass needs about one evaluated objective."""

    def __init__(self):
        self.terms = {}
        self.fgw_plan = None
        self.gw_plan = None
        self.caches = {}


def _evaluate(batch, priors, decoder, cfg: LossConfig, z_attr, z_id):
    """Compute all objective terms from given factors; returns state."""
    emotion_graph, identity_graph = priors
    state = _TermState()
    terms = state.terms

    if cfg.lambda_e > 0:
        if emotion_graph is None or emotion_graph.distance_matrix is None:
            raise MappingError("emotion graph with distances required")
        proto_ids = assign_prototypes(batch, emotion_graph)
        y_attr, _, _ = (
            _normalize_with_cache(z_attr)
            if cfg.normalize_factors
            else (z_attr, None, None)
        )
        d_lat = pairwise_distance(y_attr)
        d_graph = _submatrix(emotion_graph.distance_matrix, proto_ids, "prototype")
        means, groups = _group_mean_matrix(y_attr, proto_ids)
        diff = means[:, None, :] - y_attr[None, :, :]
        feature_cost = np.einsum("ikd,ikd->ik", diff, diff)
        plan = fgw_loss(d_graph, d_lat, feature_cost, cfg.fgw)
        terms["fgw"] = plan.loss
        state.fgw_plan = plan
        state.caches["fgw"] = (proto_ids, y_attr, d_lat, d_graph, means, groups, feature_cost)
    else:
        terms["fgw"] = 0.0

    if cfg.lambda_i > 0:
        if identity_graph is None or identity_graph.distance_matrix is None:
            raise MappingError("identity graph with distances required")
        group_ids = batch.identity_groups.astype(np.int64)
        y_id, _, _ = (
            _normalize_with_cache(z_id) if cfg.normalize_factors else (z_id, None, None)
        )
        d_lat_i = pairwise_distance(y_id)
        d_graph_i = _submatrix(identity_graph.distance_matrix, group_ids, "group")
        plan_i = gw_loss(d_graph_i, d_lat_i, cfg.fgw)
        terms["gw"] = plan_i.loss
        state.gw_plan = plan_i
        state.caches["gw"] = (y_id, d_lat_i, d_graph_i)
    else:
        terms["gw"] = 0.0

    if cfg.lambda_perp > 0:
        terms["orthogonality"] = orthogonality_loss(z_attr, z_id)
    else:
        terms["orthogonality"] = 0.0

    if cfg.lambda_lip > 0:
        ii, jj = _pair_indices(batch.batch_size)
        u = np.hstack([z_attr, z_id])
        terms["lipschitz"] = lipschitz_loss(
            decoder, (u[ii], u[jj]), cfg.lipschitz_L
        )
        state.caches["lip"] = (u, ii, jj)
    else:
        terms["lipschitz"] = 0.0

    terms["total"] = (
        cfg.lambda_e * terms["fgw"]
        + cfg.lambda_i * terms["gw"]
        + cfg.lambda_perp * terms["orthogonality"]
        + cfg.lambda_lip * terms["lipschitz"]
    )
    return state


def total_loss(batch: LatentBatch, priors, decoder, cfg: LossConfig):
    """Full objective value and per-term breakdown (terms pre-weighting).

    ``priors`` is an (emotion_graph, identity_graph) pair; the batch must
    carry z_attr and z_id. Terms whose weight is zero are skipped and
    reported as 0.0.
    """
    if batch.z_attr is None or batch.z_id is None:
        raise DimensionError("batch must carry z_attr and z_id")
    state = _evaluate(batch, priors, decoder, cfg, batch.z_attr, batch.z_id)
    return state.terms["total"], dict(state.terms)


def _distance_chain(grad_d: np.ndarray, y: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Chain d(objective)/d(D) through D[k,l] = |y_k - y_l| to the rows of y."""
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(d > 0, (grad_d + grad_d.T) / np.where(d > 0, d, 1.0), 0.0)
    return y * w.sum(axis=1)[:, None] - w @ y


def _normalize_chain(d_y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Chain gradients through row normalization y = x / max(|x|, floor)."""
    norms = np.linalg.norm(x, axis=1)
    out = np.empty_like(d_y)
    big = norms > _NORM_FLOOR
    if np.any(big):
        xb = x[big]
        nb = norms[big][:, None]
        yb = xb / nb
        gb = d_y[big]
        out[big] = (gb - yb * np.sum(yb * gb, axis=1, keepdims=True)) / nb
    out[~big] = d_y[~big]
    return out


def _gradients_from_state(batch, decoder, cfg: LossConfig, state, z_attr, z_id):
    """Analytic d(total)/d(z_attr), d(total)/d(z_id) at fixed transport plans."""
    b = batch.batch_size
    d_attr = np.zeros_like(z_attr)
    d_id = np.zeros_like(z_id)

    if cfg.lambda_e > 0:
        proto_ids, y_attr, d_lat, d_graph, means, groups, feature_cost = state.caches["fgw"]
        plan = state.fgw_plan
        grad_d = fgw_gradient_wrt_latent(d_lat, d_graph, plan)
        d_y = _distance_chain(grad_d, y_attr, d_lat)
        # Feature cost C[i,k] = |m_i - y_k|^2 with m the prototype-group means.
        pi = plan.coupling
        alpha = cfg.fgw.alpha
        if alpha != 0.0:
            cs = pi.sum(axis=0)
            d_y += alpha * 2.0 * (cs[:, None] * y_attr - pi.T @ means)
            rs = pi.sum(axis=1)
            d_means = alpha * 2.0 * (rs[:, None] * means - pi @ y_attr)
            for _, members in groups.items():
                pooled = d_means[members].sum(axis=0) / members.size
                d_y[members] += pooled
        d_y *= cfg.lambda_e
        d_attr += _normalize_chain(d_y, z_attr) if cfg.normalize_factors else d_y

    if cfg.lambda_i > 0:
        y_id, d_lat_i, d_graph_i = state.caches["gw"]
        grad_d = fgw_gradient_wrt_latent(d_lat_i, d_graph_i, state.gw_plan)
        d_y = cfg.lambda_i * _distance_chain(grad_d, y_id, d_lat_i)
        d_id += _normalize_chain(d_y, z_id) if cfg.normalize_factors else d_y

    if cfg.lambda_perp > 0:
        cross = z_attr.T @ z_id
        d_attr += cfg.lambda_perp * 2.0 * (z_id @ cross.T) / b
        d_id += cfg.lambda_perp * 2.0 * (z_attr @ cross) / b

    if cfg.lambda_lip > 0:
        u, ii, jj = state.caches["lip"]
        w = decoder.weight
        delta = u[ii] - u[jj]
        wdelta = delta @ w.T
        out_gap = np.linalg.norm(wdelta, axis=1)
        in_gap = np.linalg.norm(delta, axis=1)
        active = (out_gap - cfg.lipschitz_L * in_gap) > 0
        if np.any(active):
            n_pairs = ii.size
            coef = cfg.lambda_lip / n_pairs
            d_u = np.zeros_like(u)
            act_idx = np.nonzero(active)[0]
            safe_out = np.where(out_gap[act_idx] > 0, out_gap[act_idx], 1.0)
            safe_in = np.where(in_gap[act_idx] > 0, in_gap[act_idx], 1.0)
            d_delta = (wdelta[act_idx] / safe_out[:, None]) @ w
            d_delta -= cfg.lipschitz_L * delta[act_idx] / safe_in[:, None]
            d_delta *= coef
            np.add.at(d_u, ii[act_idx], d_delta)
            np.add.at(d_u, jj[act_idx], -d_delta)
            p = z_attr.shape[1]
            d_attr += d_u[:, :p]
            d_id += d_u[:, p:]

    _symmetrize_duplicate_rows(batch, d_attr, d_id)
    return d_attr, d_id


def _symmetrize_duplicate_rows(batch, d_attr, d_id) -> None:
    """Average row gradients over samples that are exact duplicates.

    Tie-broken transport vertices may couple equivalent samples to
    different graph slots; every choice is a valid subgradient, and
    averaging over the duplicate orbit restores the symmetry the batch
    itself has. No-op when all samples are distinct.
    """
    keys = {}
    for s in range(batch.batch_size):
        key = (
            batch.z[s].tobytes(),
            batch.emotion_labels[s].item() if hasattr(batch.emotion_labels[s], "item") else batch.emotion_labels[s],
            batch.identity_groups[s].item() if hasattr(batch.identity_groups[s], "item") else batch.identity_groups[s],
            None if batch.va_points is None else batch.va_points[s].tobytes(),
        )
        keys.setdefault(key, []).append(s)
    for members in keys.values():
        if len(members) > 1:
            d_attr[members] = d_attr[members].mean(axis=0)
            d_id[members] = d_id[members].mean(axis=0)


def _loss_and_gradients(batch, priors, decoder, cfg, h_attr, h_id):
    z_attr, cache_a = _forward_cached(h_attr, batch.z)
    z_id, cache_i = _forward_cached(h_id, batch.z)
    state = _evaluate(batch, priors, decoder, cfg, z_attr, z_id)
    for name, value in state.terms.items():
        if not math.isfinite(value):
            raise NumericalError(f"term {name!r} is {value!r}")
    d_attr, d_id = _gradients_from_state(batch, decoder, cfg, state, z_attr, z_id)
    grads = {
        "h_attr": _backprop_head(h_attr, cache_a, d_attr),
        "h_id": _backprop_head(h_id, cache_i, d_id),
    }
    return state.terms, grads


def backward(batch, priors, decoder, cfg, heads) -> dict:
    """Gradient of the full objective w.r.t. every head parameter.

    ``heads`` is the (h_attr, h_id) pair; transport plans are held fixed
    at their solved values. The decoder is assumed linear (exposes a
    ``weight`` matrix), matching the toy generator contract.
    """
    h_attr, h_id = heads
    _, grads = _loss_and_gradients(batch, priors, decoder, cfg, h_attr, h_id)
    return grads


class _AdamW:
    """Decoupled-weight-decay Adam over named parameter dicts."""

    def __init__(self, params: dict, weight_decay: float):
        self.weight_decay = weight_decay
        self.beta1, self.beta2, self.eps = 0.9, 0.999, 1e-8
        self.step_count = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def update(self, params: dict, grads: dict, lr: float) -> None:
        self.step_count += 1
        bc1 = 1.0 - self.beta1**self.step_count
        bc2 = 1.0 - self.beta2**self.step_count
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g**2
            m_hat = self.m[k] / bc1
            v_hat = self.v[k] / bc2
            params[k] -= lr * (m_hat / (np.sqrt(v_hat) + self.eps))
            params[k] -= lr * self.weight_decay * params[k]


def _lr_at(step: int, cfg: TrainConfig) -> float:
    warmup = cfg.effective_warmup()
    if step < warmup:
        return cfg.learning_rate * (step + 1) / warmup
    span = max(1, cfg.steps - warmup)
    progress = (step - warmup) / span
    return cfg.learning_rate * 0.5 * (1.0 + math.cos(math.pi * progress))


def _clip_global_norm(grad_dicts: list[dict], max_norm: float = 1.0) -> float:
    total = math.sqrt(
        sum(float(np.sum(g**2)) for grads in grad_dicts for g in grads.values())
    )
    if total > max_norm:
        scale = max_norm / total
        for grads in grad_dicts:
            for k in grads:
                grads[k] = grads[k] * scale
    return total


def train(data, priors, decoder, loss_cfg: LossConfig, train_cfg: TrainConfig, heads):
    """Optimize the head pair over a stream of batches.

    ``data`` is an iterable of LatentBatch; training consumes one batch
    per step and stops after ``train_cfg.steps`` steps or when the stream
    ends. Input heads are not mutated; trained copies are returned with a
    per-step loss-breakdown history. A NaN in any term aborts with a
    diagnostic naming the offending term.
    """
    h_attr = copy.deepcopy(heads[0])
    h_id = copy.deepcopy(heads[1])
    history = []
    if train_cfg.steps == 0 or train_cfg.learning_rate == 0.0:
        stream = iter(data)
        for step in range(train_cfg.steps):
            try:
                batch = next(stream)
            except StopIteration:
                break
            terms, _ = _loss_and_gradients(batch, priors, decoder, loss_cfg, h_attr, h_id)
            _check_finite_terms(terms, step)
            history.append({"step": step, "lr": 0.0, **terms})
        return (h_attr, h_id), history

    opt_attr = _AdamW(h_attr.params(), train_cfg.weight_decay)
    opt_id = _AdamW(h_id.params(), train_cfg.weight_decay)
    stream = iter(data)
    for step in range(train_cfg.steps):
        try:
            batch = next(stream)
        except StopIteration:
            break
        terms, grads = _loss_and_gradients(batch, priors, decoder, loss_cfg, h_attr, h_id)
        _check_finite_terms(terms, step)
        _clip_global_norm([grads["h_attr"], grads["h_id"]])
        lr = _lr_at(step, train_cfg)
        opt_attr.update(h_attr.params(), grads["h_attr"], lr)
        opt_id.update(h_id.params(), grads["h_id"], lr)
        history.append({"step": step, "lr": lr, **terms})
    return (h_attr, h_id), history


def _check_finite_terms(terms: dict, step: int) -> None:
    for name, value in terms.items():
        if not math.isfinite(value):
            raise NumericalError(f"step {step}: term {name!r} is {value!r}")


def _encode_array(arr: np.ndarray) -> dict:
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(np.ascontiguousarray(arr, dtype=np.float64).tobytes()).decode(
            "ascii"
        ),
    }


def _decode_array(d: dict) -> np.ndarray:
    arr = np.frombuffer(base64.b64decode(d["data"]), dtype=np.float64)
    return arr.reshape(d["shape"]).copy()


def _head_to_dict(head: ProjectionHead) -> dict:
    out = {k: _encode_array(v) for k, v in head.params().items()}
    out["activation"] = head.activation
    return out


def _head_from_dict(d: dict) -> ProjectionHead:
    return ProjectionHead(
        layer1_weights=_decode_array(d["layer1_weights"]),
        layer1_bias=_decode_array(d["layer1_bias"]),
        layer2_weights=_decode_array(d["layer2_weights"]),
        layer2_bias=_decode_array(d["layer2_bias"]),
        activation=d.get("activation", "relu"),
    )


def save_checkpoint(path, heads, loss_cfg: LossConfig, train_cfg: TrainConfig) -> None:
    """Write both heads plus a config echo as JSON."""
    payload = {
        "h_attr": _head_to_dict(heads[0]),
        "h_id": _head_to_dict(heads[1]),
        "loss_cfg": {
            "lambda_e": loss_cfg.lambda_e,
            "lambda_i": loss_cfg.lambda_i,
            "lambda_perp": loss_cfg.lambda_perp,
            "lambda_lip": loss_cfg.lambda_lip,
            "lipschitz_L": loss_cfg.lipschitz_L,
            "normalize_factors": loss_cfg.normalize_factors,
            "fgw": {
                "alpha": loss_cfg.fgw.alpha,
                "outer_iterations": loss_cfg.fgw.outer_iterations,
                "sinkhorn": {
                    "entropy_epsilon": loss_cfg.fgw.sinkhorn.entropy_epsilon,
                    "max_iterations": loss_cfg.fgw.sinkhorn.max_iterations,
                    "convergence_tol": loss_cfg.fgw.sinkhorn.convergence_tol,
                },
            },
        },
        "train_cfg": {
            "learning_rate": train_cfg.learning_rate,
            "weight_decay": train_cfg.weight_decay,
            "steps": train_cfg.steps,
            "batch_size": train_cfg.batch_size,
            "warmup_steps": train_cfg.warmup_steps,
            "seed": train_cfg.seed,
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)


def load_checkpoint(path) -> tuple[ProjectionHead, ProjectionHead]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return _head_from_dict(payload["h_attr"]), _head_from_dict(payload["h_id"])
