"""Command-line interface and end-to-end experiment orchestration.

Subcommands: ``graph build``, ``ot sinkhorn|gw|fgw``, ``train``,
``traverse``, ``eval``, ``split``, ``bench``, and ``run``. The ``run``
command executes generate -> graphs -> train -> traverse -> eval ->
split -> bench from a single JSON config and writes a manifest with the
config hash and every artifact path. All randomness flows from one root
seed, split deterministically per stage; the environment variable
``GEOMOT_SEED`` overrides the config seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset_splitter import (
    SampleRecord,
    SplitterConfig,
    read_samples_jsonl,
    run_pipeline,
)
from .errors import GeomotError
from .factorization import (
    LatentBatch,
    LossConfig,
    TrainConfig,
    forward_heads,
    init_heads,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .geometry_metrics import (
    MetricsReport,
    emotion_accuracy,
    geodesic_consistency,
    latent_disentanglement_score,
    nearest_node_sequence,
    trajectory_smoothness,
    verification_auc,
)
from .graph_priors import (
    GraphConfig,
    build_emotion_graph,
    build_identity_graph,
    graph_from_dict,
    graph_to_dict,
)
from .numerics import read_matrix_csv
from .ot_solvers import FgwConfig, SinkhornConfig, fgw_loss, gw_loss, sinkhorn
from .synthetic_bench import (
    SyntheticSpec,
    generate,
    make_contractive_decoder,
    verify_bound,
)
from .traversal import STRATEGIES, TrajectoryRecord, build_trajectory

__all__ = ["main", "run_experiment", "default_config", "load_config"]


class StageError(GeomotError):
    """Wraps a failure with the pipeline stage that produced it."""

    def __init__(self, stage, original):
        super().__init__(f"stage {stage!r}: {original}")
        self.stage = stage
        self.original = original


def default_config() -> dict:
    """Shipped default experiment config (desk-scale)."""
    return {
        "seed": 7,
        "output_dir": "geomot_run",
        "synthetic": {
            "n_identities": 12,
            "samples_per_identity": 24,
            "va_noise": 0.08,
            "shared_dim": 32,
            "attr_dim": 6,
            "id_dim": 6,
            "leakage_strength": 0.5,
        },
        "graph": {"k_neighbors": 10, "n_prototypes": 32, "epsilon_length": 1e-6},
        "heads": {"hidden_dim": 32, "attr_dim": 8, "id_dim": 8},
        "decoder": {"output_dim": 16},
        "loss": {
            "lambda_e": 1.0,
            "lambda_i": 1.0,
            "lambda_perp": 1.0,
            "lambda_lip": 0.1,
            "lipschitz_L": 1.0,
            "normalize_factors": True,
            "fgw": {
                "alpha": 1.0,
                "outer_iterations": 5,
                "sinkhorn": {
                    "entropy_epsilon": 0.05,
                    "max_iterations": 50,
                    "convergence_tol": 1e-7,
                },
            },
        },
        "train": {
            "learning_rate": 1e-4,
            "weight_decay": 1e-2,
            "steps": 300,
            "batch_size": 64,
            "warmup_steps": None,
        },
        "splitter": {
            "w_img_text": 0.4,
            "w_img_aud": 0.3,
            "w_text_aud": 0.3,
            "tau_cons": 0.2,
            "tau_dup": 0.95,
            "tau_id": 0.3,
            "ratios": [0.70, 0.15, 0.15],
        },
        "traversal": {
            "strategies": list(STRATEGIES),
            "n_endpoint_pairs": 20,
            "steps_per_edge": 8,
        },
        "bench": {"n_pairs": 200},
    }


def _deep_update(base: dict, override: dict) -> dict:
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value
    return base


def load_config(path=None, overrides=None) -> dict:
    """Default config overlaid with a JSON file and the GEOMOT_SEED env var."""
    cfg = default_config()
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            _deep_update(cfg, json.load(fh))
    if overrides:
        _deep_update(cfg, overrides)
    env_seed = os.environ.get("GEOMOT_SEED")
    if env_seed is not None:
        cfg["seed"] = int(env_seed)
    return cfg


def _config_hash(cfg: dict) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _loss_config_from(cfg: dict) -> LossConfig:
    loss = cfg["loss"]
    fgw = loss["fgw"]
    return LossConfig(
        lambda_e=loss["lambda_e"],
        lambda_i=loss["lambda_i"],
        lambda_perp=loss["lambda_perp"],
        lambda_lip=loss["lambda_lip"],
        lipschitz_L=loss["lipschitz_L"],
        normalize_factors=loss["normalize_factors"],
        fgw=FgwConfig(
            alpha=fgw["alpha"],
            outer_iterations=fgw["outer_iterations"],
            sinkhorn=SinkhornConfig(**fgw["sinkhorn"]),
        ),
    )


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def _trajectory_to_dict(traj: TrajectoryRecord, source, target, gc, ts) -> dict:
    return {
        "strategy": traj.strategy,
        "steps_per_edge": traj.steps_per_edge,
        "source": int(source),
        "target": int(target),
        "latent_points": traj.latent_points.tolist(),
        "node_sequence": [int(u) for u in traj.node_sequence],
        "gc": gc,
        "ts": ts,
    }


def _prototype_attr_embeddings(heads, dataset, emotion_graph, eval_batch, z_attr):
    """One learned attribute embedding per graph node.

    Populated prototypes use the mean attribute factor of their assigned
    evaluation samples (so residual identity content in the attribute
    factor shows up as estimation noise); unpopulated prototypes fall
    back to the head applied to an identity-averaged canonical latent.
    """
    from .factorization import assign_prototypes

    assigned = assign_prototypes(eval_batch, emotion_graph)
    canonical = heads[0].forward(
        dataset.prototype_latents(emotion_graph.node_embeddings)
    )
    out = canonical.copy()
    for node in np.unique(assigned):
        out[int(node)] = z_attr[assigned == node].mean(axis=0)
    return out


def _identity_scores(z_id: np.ndarray, groups: np.ndarray, seed: int):
    """Within-group and cross-group cosine scores for ID-Sim / AUC."""
    rng = np.random.default_rng(seed)
    norms = np.linalg.norm(z_id, axis=1, keepdims=True)
    units = z_id / np.where(norms > 0, norms, 1.0)
    matched, nonmatched = [], []
    group_ids = np.unique(groups)
    for g in group_ids:
        members = np.nonzero(groups == g)[0]
        for a, b in zip(members[:-1], members[1:]):
            matched.append(float(units[a] @ units[b]))
    n = z_id.shape[0]
    trials = 0
    while len(nonmatched) < max(len(matched), 32) and trials < 10000:
        i, j = rng.integers(0, n, size=2)
        trials += 1
        if groups[i] != groups[j]:
            nonmatched.append(float(units[i] @ units[j]))
    return matched, nonmatched


def run_experiment(cfg: dict, output_dir=None) -> dict:
    """Execute the full pipeline and return the written manifest."""
    out = Path(output_dir if output_dir is not None else cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    seed = int(cfg["seed"])
    artifacts = {}

    spec = SyntheticSpec(seed=seed, **cfg["synthetic"])
    dataset = _stage("generate", generate, spec)

    graph_cfg = GraphConfig(**cfg["graph"])
    emotion_graph = _stage(
        "emotion_graph",
        build_emotion_graph,
        dataset.va_points,
        [int(v) for v in dataset.emotion_labels],
        graph_cfg,
        seed + 1,
    )
    identity_graph = _stage(
        "identity_graph", build_identity_graph, dataset.identity_centroids, graph_cfg
    )
    artifacts["emotion_graph"] = str(out / "emotion_graph.json")
    artifacts["identity_graph"] = str(out / "identity_graph.json")
    _write_json(artifacts["emotion_graph"], graph_to_dict(emotion_graph))
    _write_json(artifacts["identity_graph"], graph_to_dict(identity_graph))

    heads_cfg = cfg["heads"]
    loss_cfg = _loss_config_from(cfg)
    train_cfg = TrainConfig(seed=seed + 2, **cfg["train"])
    heads0 = init_heads(
        spec.shared_dim,
        heads_cfg["hidden_dim"],
        heads_cfg["attr_dim"],
        heads_cfg["id_dim"],
        seed + 2,
    )
    decoder = make_contractive_decoder(
        heads_cfg["attr_dim"] + heads_cfg["id_dim"],
        cfg["decoder"]["output_dim"],
        loss_cfg.lipschitz_L,
        seed + 3,
    )
    stream = dataset.batch_stream(train_cfg.batch_size, train_cfg.steps, seed + 4)
    heads, history = _stage(
        "train", train, stream, (emotion_graph, identity_graph), decoder, loss_cfg, train_cfg, heads0
    )
    artifacts["checkpoint"] = str(out / "checkpoint.json")
    save_checkpoint(artifacts["checkpoint"], heads, loss_cfg, train_cfg)

    eval_batch = dataset.full_batch()
    z_attr, z_id = forward_heads(eval_batch.z, heads[0], heads[1])
    learned_protos = _prototype_attr_embeddings(
        heads, dataset, emotion_graph, eval_batch, z_attr
    )

    trav = cfg["traversal"]
    rng = np.random.default_rng(seed + 5)
    n_nodes = emotion_graph.n_nodes
    pairs = []
    while len(pairs) < trav["n_endpoint_pairs"]:
        u, v = rng.integers(0, n_nodes, size=2)
        if u != v:
            pairs.append((int(u), int(v)))
    records = []
    strategy_gc = {s: [] for s in trav["strategies"]}
    strategy_ts = {s: [] for s in trav["strategies"]}
    acc_pred, acc_target = [], []
    for u, v in pairs:
        for strategy in trav["strategies"]:
            traj = _stage(
                "traverse",
                build_trajectory,
                emotion_graph,
                learned_protos,
                u,
                v,
                strategy,
                trav["steps_per_edge"],
                seed + 5,
                graph_cfg.epsilon_length,
            )
            assigned = nearest_node_sequence(traj.latent_points, learned_protos)
            gc = geodesic_consistency(traj.latent_points, emotion_graph, learned_protos)
            ts = trajectory_smoothness(traj)
            if not gc.excluded:
                strategy_gc[strategy].append(gc.value)
            strategy_ts[strategy].append(ts)
            if strategy == "graph":
                acc_pred.append(emotion_graph.labels[assigned[-1]])
                acc_target.append(emotion_graph.labels[v])
            records.append(_trajectory_to_dict(traj, u, v, gc.value, ts))
    artifacts["trajectories"] = str(out / "trajectories.json")
    _write_json(artifacts["trajectories"], {"trajectories": records})

    matched, nonmatched = _identity_scores(z_id, eval_batch.identity_groups, seed + 6)
    report = MetricsReport(
        acc=emotion_accuracy(acc_pred, acc_target),
        id_sim=float(np.mean(matched)) if matched else 1.0,
        auc=verification_auc(matched, nonmatched) if matched and nonmatched else 1.0,
        ts=float(np.mean(strategy_ts.get("graph", [1.0]))),
        lds=latent_disentanglement_score(z_attr, z_id),
        gc=float(np.mean(strategy_gc.get("graph", [0.0]))),
    )
    artifacts["metrics"] = str(out / "metrics.json")
    _write_json(artifacts["metrics"], report.to_dict())

    samples = [
        SampleRecord(
            sample_id=i,
            group_id=int(dataset.identity_groups[i]),
            emotion_label=int(dataset.emotion_labels[i]),
            modality_embeddings={
                m: dataset.modality_embeddings[m][i] for m in ("img", "text", "aud")
            },
            source_tag="synthetic",
        )
        for i in range(dataset.n_samples)
    ]
    splitter_cfg = SplitterConfig(seed=seed + 7, **_splitter_kwargs(cfg["splitter"]))
    assignment = _stage("split", run_pipeline, samples, splitter_cfg)
    artifacts["splits"] = str(out / "splits.json")
    _write_json(
        artifacts["splits"],
        {
            "assignment": {str(k): v for k, v in sorted(assignment.assignment.items())},
            "group_assignment": {
                str(k): v for k, v in sorted(assignment.group_assignment.items())
            },
            "removal_log": [[str(sid), reason] for sid, reason in assignment.removal_log],
            "warnings": assignment.warnings,
            "validation": assignment.validation,
        },
    )

    bound = _stage(
        "bench",
        verify_bound,
        heads,
        (emotion_graph, identity_graph),
        decoder,
        eval_batch,
        cfg["bench"]["n_pairs"],
        seed + 8,
    )
    artifacts["bound_report"] = str(out / "bound_report.json")
    _write_json(artifacts["bound_report"], bound.to_dict())

    manifest = {
        "config": cfg,
        "config_hash": _config_hash(cfg),
        "artifacts": artifacts,
        "n_train_steps": len(history),
    }
    _write_json(out / "manifest.json", manifest)
    return manifest


def _splitter_kwargs(section: dict) -> dict:
    kwargs = dict(section)
    if "ratios" in kwargs:
        kwargs["ratios"] = tuple(kwargs["ratios"])
    return kwargs


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_graph_build(args) -> int:
    points = read_matrix_csv(args.input)
    if args.labels:
        with open(args.labels, "r", encoding="utf-8") as fh:
            labels = [line.strip() for line in fh if line.strip()]
    else:
        labels = [str(i) for i in range(points.shape[0])]
    cfg = GraphConfig(k_neighbors=args.k, n_prototypes=args.prototypes)
    graph = build_emotion_graph(points, labels, cfg, args.seed)
    _write_json(args.out, graph_to_dict(graph))
    print(f"wrote graph with {graph.n_nodes} nodes to {args.out}")
    return 0


def _plan_payload(plan) -> dict:
    return {
        "coupling": plan.coupling.tolist(),
        "loss": plan.loss,
        "iterations_used": plan.iterations_used,
        "converged": plan.converged,
    }


def _cmd_ot(args) -> int:
    sk = SinkhornConfig(entropy_epsilon=args.epsilon, max_iterations=args.iters)
    if args.ot_command == "sinkhorn":
        plan = sinkhorn(read_matrix_csv(args.cost), cfg=sk)
    else:
        cfg = FgwConfig(
            alpha=getattr(args, "alpha", 0.0) or 0.0,
            sinkhorn=sk,
            outer_iterations=args.outer,
        )
        source = read_matrix_csv(args.source)
        target = read_matrix_csv(args.target)
        if args.ot_command == "gw":
            plan = gw_loss(source, target, cfg)
        else:
            plan = fgw_loss(source, target, read_matrix_csv(args.feature_cost), cfg)
    _write_json(args.out, _plan_payload(plan))
    print(f"loss={plan.loss:.6g} iterations={plan.iterations_used} -> {args.out}")
    return 0


def _load_batch_json(path) -> LatentBatch:
    with open(path, "r", encoding="utf-8") as fh:
        d = json.load(fh)
    return LatentBatch(
        z=np.array(d["z"], dtype=np.float64),
        emotion_labels=np.array(d["emotion_labels"]),
        identity_groups=np.array(d["identity_groups"]),
        z_attr=None if d.get("z_attr") is None else np.array(d["z_attr"], dtype=np.float64),
        z_id=None if d.get("z_id") is None else np.array(d["z_id"], dtype=np.float64),
        va_points=None
        if d.get("va_points") is None
        else np.array(d["va_points"], dtype=np.float64),
    )


def _cmd_train(args) -> int:
    cfg = load_config(args.config)
    batch = _load_batch_json(args.data)
    with open(args.emotion_graph, "r", encoding="utf-8") as fh:
        emotion_graph = graph_from_dict(json.load(fh))
    with open(args.identity_graph, "r", encoding="utf-8") as fh:
        identity_graph = graph_from_dict(json.load(fh))
    loss_cfg = _loss_config_from(cfg)
    train_cfg = TrainConfig(seed=cfg["seed"], **cfg["train"])
    heads_cfg = cfg["heads"]
    heads0 = init_heads(
        batch.z.shape[1],
        heads_cfg["hidden_dim"],
        heads_cfg["attr_dim"],
        heads_cfg["id_dim"],
        cfg["seed"],
    )
    decoder = make_contractive_decoder(
        heads_cfg["attr_dim"] + heads_cfg["id_dim"],
        cfg["decoder"]["output_dim"],
        loss_cfg.lipschitz_L,
        cfg["seed"] + 1,
    )

    def stream():
        rng = np.random.default_rng(train_cfg.seed)
        for _ in range(train_cfg.steps):
            idx = rng.integers(0, batch.batch_size, size=train_cfg.batch_size)
            yield LatentBatch(
                z=batch.z[idx],
                emotion_labels=batch.emotion_labels[idx],
                identity_groups=batch.identity_groups[idx],
                va_points=None if batch.va_points is None else batch.va_points[idx],
            )

    heads, history = train(
        stream(), (emotion_graph, identity_graph), decoder, loss_cfg, train_cfg, heads0
    )
    save_checkpoint(args.out, heads, loss_cfg, train_cfg)
    last = history[-1]["total"] if history else float("nan")
    print(f"trained {len(history)} steps, final total loss {last:.6g} -> {args.out}")
    return 0


def _cmd_traverse(args) -> int:
    with open(args.graph, "r", encoding="utf-8") as fh:
        graph = graph_from_dict(json.load(fh))
    traj = build_trajectory(
        graph,
        graph.node_embeddings,
        args.source,
        args.target,
        args.strategy,
        args.steps,
        args.seed,
    )
    payload = {
        "trajectories": [
            _trajectory_to_dict(
                traj,
                args.source,
                args.target,
                geodesic_consistency(traj, graph).value,
                trajectory_smoothness(traj),
            )
        ]
    }
    _write_json(args.out, payload)
    print(f"trajectory with {traj.latent_points.shape[0]} points -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    with open(args.graph, "r", encoding="utf-8") as fh:
        graph = graph_from_dict(json.load(fh))
    with open(args.trajectories, "r", encoding="utf-8") as fh:
        records = json.load(fh)["trajectories"]
    batch = _load_batch_json(args.batch)
    if args.ckpt:
        heads = load_checkpoint(args.ckpt)
        batch.z_attr, batch.z_id = forward_heads(batch.z, heads[0], heads[1])
    if batch.z_attr is None or batch.z_id is None:
        raise GeomotError("batch lacks z_attr/z_id; pass --ckpt to compute them")

    gc_vals, ts_vals, preds, targets = [], [], [], []
    for rec in records:
        points = np.array(rec["latent_points"], dtype=np.float64)
        nodes = rec.get("node_sequence")
        traj_gc = geodesic_consistency(
            points if nodes is None else _record_traj(rec), graph
        )
        if not traj_gc.excluded:
            gc_vals.append(traj_gc.value)
        ts_vals.append(trajectory_smoothness(points))
        target = rec.get("target")
        if target is not None:
            seq = nodes if nodes else nearest_node_sequence(points, graph.node_embeddings)
            if graph.labels is not None:
                preds.append(graph.labels[int(seq[-1])])
                targets.append(graph.labels[int(target)])
    matched, nonmatched = _identity_scores(batch.z_id, batch.identity_groups, seed=0)
    report = MetricsReport(
        acc=emotion_accuracy(preds, targets) if preds else 1.0,
        id_sim=float(np.mean(matched)) if matched else 1.0,
        auc=verification_auc(matched, nonmatched) if matched and nonmatched else 1.0,
        ts=float(np.mean(ts_vals)) if ts_vals else 1.0,
        lds=latent_disentanglement_score(batch.z_attr, batch.z_id),
        gc=float(np.mean(gc_vals)) if gc_vals else 0.0,
    )
    _write_json(args.out, report.to_dict())
    print(f"metrics -> {args.out}")
    return 0


def _record_traj(rec) -> TrajectoryRecord:
    return TrajectoryRecord(
        latent_points=np.array(rec["latent_points"], dtype=np.float64),
        node_sequence=[int(u) for u in rec["node_sequence"]],
        strategy=rec.get("strategy", "graph"),
        steps_per_edge=rec.get("steps_per_edge", 1),
    )


def _cmd_split(args) -> int:
    samples = read_samples_jsonl(args.input)
    with open(args.config, "r", encoding="utf-8") as fh:
        section = json.load(fh)
    cfg = SplitterConfig(**_splitter_kwargs(section))
    assignment = run_pipeline(samples, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(
        out / "splits.json",
        {
            "assignment": {str(k): v for k, v in sorted(assignment.assignment.items())},
            "group_assignment": {
                str(k): v for k, v in sorted(assignment.group_assignment.items())
            },
            "removal_log": [[str(s), r] for s, r in assignment.removal_log],
            "warnings": assignment.warnings,
        },
    )
    _write_json(out / "validation.json", assignment.validation)
    sizes = assignment.split_sizes()
    print(f"splits {sizes} -> {out}")
    return 0


def _cmd_bench(args) -> int:
    with open(args.spec, "r", encoding="utf-8") as fh:
        section = json.load(fh)
    seed = int(os.environ.get("GEOMOT_SEED", section.pop("seed", 0)))
    n_pairs = section.pop("n_pairs", 200)
    graph_section = section.pop("graph", {})
    heads_section = section.pop("heads", {"hidden_dim": 32, "attr_dim": 8, "id_dim": 8})
    spec = SyntheticSpec(seed=seed, **section)
    dataset = generate(spec)
    graph_cfg = GraphConfig(**graph_section) if graph_section else GraphConfig()
    emotion_graph = build_emotion_graph(
        dataset.va_points, [int(v) for v in dataset.emotion_labels], graph_cfg, seed + 1
    )
    identity_graph = build_identity_graph(dataset.identity_centroids, graph_cfg)
    heads = init_heads(
        spec.shared_dim,
        heads_section["hidden_dim"],
        heads_section["attr_dim"],
        heads_section["id_dim"],
        seed + 2,
    )
    decoder = make_contractive_decoder(
        heads_section["attr_dim"] + heads_section["id_dim"], 16, 1.0, seed + 3
    )
    report = verify_bound(
        heads, (emotion_graph, identity_graph), decoder, dataset.full_batch(), n_pairs, seed + 4
    )
    _write_json(args.out, report.to_dict())
    print(f"holds={report.holds} lhs={report.lhs:.6g} rhs={report.rhs:.6g} -> {args.out}")
    return 0


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    manifest = run_experiment(cfg, output_dir=args.out)
    print(f"run complete; manifest hash {manifest['config_hash'][:12]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geomot",
        description="Graph-constrained latent geometry experiments.",
    )
    parser.add_argument("--version", action="version", version=f"geomot {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_graph = sub.add_parser("graph", help="graph prior construction")
    graph_sub = p_graph.add_subparsers(dest="graph_command", required=True)
    p_build = graph_sub.add_parser("build", help="build a graph from points CSV")
    p_build.add_argument("--input", required=True)
    p_build.add_argument("--labels", default=None)
    p_build.add_argument("--k", type=int, default=10)
    p_build.add_argument("--prototypes", type=int, default=32)
    p_build.add_argument("--seed", type=int, default=7)
    p_build.add_argument("--out", required=True)
    p_build.set_defaults(func=_cmd_graph_build)

    p_ot = sub.add_parser("ot", help="optimal transport solvers")
    ot_sub = p_ot.add_subparsers(dest="ot_command", required=True)
    for name in ("sinkhorn", "gw", "fgw"):
        p = ot_sub.add_parser(name)
        if name == "sinkhorn":
            p.add_argument("--cost", required=True)
        else:
            p.add_argument("--source", required=True)
            p.add_argument("--target", required=True)
            p.add_argument("--outer", type=int, default=20)
        if name == "fgw":
            p.add_argument("--feature-cost", dest="feature_cost", required=True)
            p.add_argument("--alpha", type=float, default=1.0)
        p.add_argument("--epsilon", type=float, default=0.05)
        p.add_argument("--iters", type=int, default=50)
        p.add_argument("--out", required=True)
        p.set_defaults(func=_cmd_ot)

    p_train = sub.add_parser("train", help="train factorization heads")
    p_train.add_argument("--data", required=True)
    p_train.add_argument("--emotion-graph", dest="emotion_graph", required=True)
    p_train.add_argument("--identity-graph", dest="identity_graph", required=True)
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--out", required=True)
    p_train.set_defaults(func=_cmd_train)

    p_trav = sub.add_parser("traverse", help="generate a latent trajectory")
    p_trav.add_argument("--graph", required=True)
    p_trav.add_argument("--from", dest="source", type=int, required=True)
    p_trav.add_argument("--to", dest="target", type=int, required=True)
    p_trav.add_argument("--strategy", choices=STRATEGIES, default="graph")
    p_trav.add_argument("--steps", type=int, default=8)
    p_trav.add_argument("--seed", type=int, default=7)
    p_trav.add_argument("--out", required=True)
    p_trav.set_defaults(func=_cmd_traverse)

    p_eval = sub.add_parser("eval", help="compute the metric suite")
    p_eval.add_argument("--trajectories", required=True)
    p_eval.add_argument("--graph", required=True)
    p_eval.add_argument("--batch", required=True)
    p_eval.add_argument("--ckpt", default=None)
    p_eval.add_argument("--out", required=True)
    p_eval.set_defaults(func=_cmd_eval)

    p_split = sub.add_parser("split", help="leakage-safe dataset splitting")
    p_split.add_argument("--input", required=True)
    p_split.add_argument("--config", required=True)
    p_split.add_argument("--out", required=True)
    p_split.set_defaults(func=_cmd_split)

    p_bench = sub.add_parser("bench", help="bound verification on synthetic data")
    p_bench.add_argument("--spec", required=True)
    p_bench.add_argument("--out", required=True)
    p_bench.set_defaults(func=_cmd_bench)

    p_run = sub.add_parser("run", help="full experiment pipeline")
    p_run.add_argument("--config", default=None)
    p_run.add_argument("--out", default=None)
    p_run.set_defaults(func=_cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GeomotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"unexpected error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
