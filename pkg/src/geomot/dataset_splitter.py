"""Leakage-safe dataset construction pipeline on abstract sample records.

Stages: intra-group identity filtering, multimodal consistency scoring,
near-duplicate removal, grouped split assignment (every reference-identity
group lands wholly in one split), conflict repair, cross-split duplicate
removal, and validation. The pipeline is single-threaded and fully
deterministic for a fixed (samples, config, seed).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, DimensionError, SplitError
from .numerics import as_vector

__all__ = [
    "SampleRecord",
    "SplitterConfig",
    "SplitAssignment",
    "consistency_score",
    "filter_identity_consistency",
    "filter_by_consistency",
    "remove_duplicates",
    "assign_splits",
    "repair_conflicts",
    "remove_cross_split_duplicates",
    "validate_splits",
    "run_pipeline",
    "read_samples_jsonl",
    "write_samples_jsonl",
]

SPLITS = ("train", "val", "test")

_MODALITIES = ("img", "text", "aud")


@dataclass
class SampleRecord:
    """One benchmark sample with its three modality embeddings."""

    sample_id: int | str
    group_id: int | str
    emotion_label: int | str
    modality_embeddings: dict
    source_tag: str = ""

    def __post_init__(self):
        missing = [m for m in _MODALITIES if m not in self.modality_embeddings]
        if missing:
            raise DimensionError(f"sample {self.sample_id}: missing modalities {missing}")
        self.modality_embeddings = {
            m: as_vector(self.modality_embeddings[m], m) for m in _MODALITIES
        }


@dataclass(frozen=True)
class SplitterConfig:
    w_img_text: float = 0.4
    w_img_aud: float = 0.3
    w_text_aud: float = 0.3
    tau_cons: float = 0.2
    tau_dup: float = 0.95
    tau_id: float = 0.3
    ratios: tuple = (0.70, 0.15, 0.15)
    seed: int = 0

    def __post_init__(self):
        weights = (self.w_img_text, self.w_img_aud, self.w_text_aud)
        if any(w < 0 for w in weights):
            raise DimensionError("consistency weights must be nonnegative")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise DimensionError("consistency weights must sum to 1")
        if len(self.ratios) != 3 or abs(sum(self.ratios) - 1.0) > 1e-9:
            raise DimensionError("ratios must be three fractions summing to 1")


@dataclass
class SplitAssignment:
    """sample_id -> split plus the removal log and validation summary."""

    assignment: dict = field(default_factory=dict)
    group_assignment: dict = field(default_factory=dict)
    removal_log: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    validation: dict = field(default_factory=dict)

    def split_sizes(self) -> dict:
        sizes = {s: 0 for s in SPLITS}
        for split in self.assignment.values():
            sizes[split] += 1
        return sizes


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu <= 0 or nv <= 0:
        raise DegenerateInputError("zero-norm embedding")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def consistency_score(sample: SampleRecord, cfg: SplitterConfig) -> float:
    """Weighted sum of the three pairwise modality cosine similarities."""
    e = sample.modality_embeddings
    return (
        cfg.w_img_text * _cosine(e["img"], e["text"])
        + cfg.w_img_aud * _cosine(e["img"], e["aud"])
        + cfg.w_text_aud * _cosine(e["text"], e["aud"])
    )


def filter_identity_consistency(samples, tau_id: float):
    """Drop samples whose image embedding strays from their group centroid.

    A sample is removed when the cosine similarity between its image
    embedding and its group's mean image embedding falls below tau_id.
    """
    groups = {}
    for s in samples:
        groups.setdefault(s.group_id, []).append(s)
    kept, removed = [], []
    for s in samples:
        centroid = np.mean([m.modality_embeddings["img"] for m in groups[s.group_id]], axis=0)
        if np.linalg.norm(centroid) <= 0:
            kept.append(s)
            continue
        if _cosine(s.modality_embeddings["img"], centroid) < tau_id:
            removed.append((s.sample_id, "identity_inconsistent"))
        else:
            kept.append(s)
    return kept, removed


def filter_by_consistency(samples, cfg: SplitterConfig):
    """Keep samples whose multimodal consistency score exceeds tau_cons."""
    kept, removed = [], []
    for s in samples:
        if consistency_score(s, cfg) > cfg.tau_cons:
            kept.append(s)
        else:
            removed.append((s.sample_id, "low_consistency"))
    return kept, removed


def remove_duplicates(samples, tau_dup: float):
    """Greedy near-duplicate removal in sample_id order.

    A sample is removed when its image-embedding cosine similarity to any
    earlier kept sample exceeds tau_dup.
    """
    ordered = sorted(samples, key=lambda s: s.sample_id)
    kept, removed = [], []
    kept_matrix = None
    for s in ordered:
        emb = s.modality_embeddings["img"]
        norm = np.linalg.norm(emb)
        if norm <= 0:
            raise DegenerateInputError(f"sample {s.sample_id}: zero-norm image embedding")
        unit = emb / norm
        if kept_matrix is not None and kept_matrix.size:
            sims = kept_matrix @ unit
            if np.any(sims > tau_dup):
                removed.append((s.sample_id, "near_duplicate"))
                continue
        kept.append(s)
        kept_matrix = (
            unit[None, :]
            if kept_matrix is None
            else np.vstack([kept_matrix, unit[None, :]])
        )
    return kept, removed


def assign_splits(samples, cfg: SplitterConfig) -> SplitAssignment:
    """Assign whole reference-identity groups to train/val/test.

    Groups are shuffled by seed and given greedily to the split whose
    sample-count deficit against its target ratio is largest, so no group
    ever spans splits. A single all-absorbing group degenerates to
    everything-in-train with a warning; two groups cannot populate three
    splits and raise.
    """
    samples = list(samples)
    groups = {}
    for s in samples:
        groups.setdefault(s.group_id, []).append(s)
    n_groups = len(groups)
    result = SplitAssignment()
    if n_groups == 0:
        raise SplitError("no samples to assign")
    if n_groups == 1:
        only = next(iter(groups))
        msg = f"single group {only!r} holds every sample; assigning all to train"
        warnings.warn(msg)
        result.warnings.append(msg)
        result.group_assignment[only] = "train"
        for s in samples:
            result.assignment[s.sample_id] = "train"
        return result
    if n_groups < 3:
        raise SplitError(f"cannot form three splits from {n_groups} groups")

    rng = np.random.default_rng(cfg.seed)
    ordered_groups = sorted(groups, key=str)
    order = rng.permutation(len(ordered_groups))
    total = len(samples)
    counts = {s: 0 for s in SPLITS}
    for idx in order:
        gid = ordered_groups[idx]
        deficits = [cfg.ratios[i] * total - counts[s] for i, s in enumerate(SPLITS)]
        split = SPLITS[int(np.argmax(deficits))]
        result.group_assignment[gid] = split
        for s in groups[gid]:
            result.assignment[s.sample_id] = split
        counts[split] += len(groups[gid])
    return result


def repair_conflicts(assignment: SplitAssignment, samples) -> int:
    """Force any group spanning several splits into its majority split.

    Ties remove the group entirely (logged); returns the number of
    conflicted groups encountered.
    """
    by_group = {}
    for s in samples:
        if s.sample_id in assignment.assignment:
            by_group.setdefault(s.group_id, []).append(s)
    conflicts = 0
    for gid, members in by_group.items():
        splits = {assignment.assignment[s.sample_id] for s in members}
        if len(splits) <= 1:
            continue
        conflicts += 1
        tally = {sp: 0 for sp in SPLITS}
        for s in members:
            tally[assignment.assignment[s.sample_id]] += 1
        best = max(tally.values())
        winners = [sp for sp in SPLITS if tally[sp] == best]
        if len(winners) == 1:
            target = winners[0]
            assignment.group_assignment[gid] = target
            for s in members:
                assignment.assignment[s.sample_id] = target
        else:
            assignment.group_assignment.pop(gid, None)
            for s in members:
                assignment.assignment.pop(s.sample_id, None)
                assignment.removal_log.append((s.sample_id, "split_conflict_tie"))
    return conflicts


def remove_cross_split_duplicates(assignment: SplitAssignment, samples, tau_dup: float) -> int:
    """Drop the later member of any cross-split near-duplicate pair."""
    present = [s for s in samples if s.sample_id in assignment.assignment]
    present.sort(key=lambda s: s.sample_id)
    units = np.array(
        [
            s.modality_embeddings["img"] / np.linalg.norm(s.modality_embeddings["img"])
            for s in present
        ]
    )
    dropped = 0
    alive = np.ones(len(present), dtype=bool)
    for j in range(1, len(present)):
        sims = units[:j][alive[:j]] @ units[j]
        earlier = [s for s, ok in zip(present[:j], alive[:j]) if ok]
        for s_i, sim in zip(earlier, sims):
            if sim > tau_dup and (
                assignment.assignment[s_i.sample_id]
                != assignment.assignment[present[j].sample_id]
            ):
                assignment.assignment.pop(present[j].sample_id)
                assignment.removal_log.append((present[j].sample_id, "cross_split_duplicate"))
                alive[j] = False
                dropped += 1
                break
    return dropped


def validate_splits(assignment: SplitAssignment, samples, tau_dup: float) -> dict:
    """Report leakage, cross-split duplicates, modality coverage, histograms."""
    by_id = {s.sample_id: s for s in samples}
    split_groups = {sp: set() for sp in SPLITS}
    histograms = {sp: {} for sp in SPLITS}
    missing_modalities = 0
    for sid, split in assignment.assignment.items():
        s = by_id[sid]
        split_groups[split].add(s.group_id)
        histograms[split][str(s.emotion_label)] = (
            histograms[split].get(str(s.emotion_label), 0) + 1
        )
        if any(m not in s.modality_embeddings for m in _MODALITIES):
            missing_modalities += 1
    overlap = 0
    for i, a in enumerate(SPLITS):
        for b in SPLITS[i + 1 :]:
            overlap += len(split_groups[a] & split_groups[b])

    assigned = [by_id[sid] for sid in assignment.assignment]
    assigned.sort(key=lambda s: s.sample_id)
    cross_dupes = 0
    if assigned:
        units = np.array(
            [
                s.modality_embeddings["img"] / np.linalg.norm(s.modality_embeddings["img"])
                for s in assigned
            ]
        )
        sims = units @ units.T
        for i in range(len(assigned)):
            for j in range(i + 1, len(assigned)):
                if sims[i, j] > tau_dup and (
                    assignment.assignment[assigned[i].sample_id]
                    != assignment.assignment[assigned[j].sample_id]
                ):
                    cross_dupes += 1
    report = {
        "cross_split_group_overlap": overlap,
        "cross_split_near_duplicates": cross_dupes,
        "missing_modality_count": missing_modalities,
        "split_sizes": assignment.split_sizes(),
        "emotion_histograms": histograms,
        "n_groups": {sp: len(split_groups[sp]) for sp in SPLITS},
    }
    assignment.validation = report
    return report


def run_pipeline(samples, cfg: SplitterConfig) -> SplitAssignment:
    """Full construction pipeline: filters, dedup, grouped split, validation."""
    samples = list(samples)
    kept, removed_id = filter_identity_consistency(samples, cfg.tau_id)
    kept, removed_cons = filter_by_consistency(kept, cfg)
    kept, removed_dup = remove_duplicates(kept, cfg.tau_dup)
    assignment = assign_splits(kept, cfg)
    assignment.removal_log = removed_id + removed_cons + removed_dup + assignment.removal_log
    repair_conflicts(assignment, kept)
    remove_cross_split_duplicates(assignment, kept, cfg.tau_dup)
    validate_splits(assignment, samples, cfg.tau_dup)
    return assignment


def write_samples_jsonl(path, samples) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(
                json.dumps(
                    {
                        "sample_id": s.sample_id,
                        "group_id": s.group_id,
                        "emotion_label": s.emotion_label,
                        "modality_embeddings": {
                            m: s.modality_embeddings[m].tolist() for m in _MODALITIES
                        },
                        "source_tag": s.source_tag,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_samples_jsonl(path) -> list[SampleRecord]:
    samples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            samples.append(
                SampleRecord(
                    sample_id=d["sample_id"],
                    group_id=d["group_id"],
                    emotion_label=d["emotion_label"],
                    modality_embeddings=d["modality_embeddings"],
                    source_tag=d.get("source_tag", ""),
                )
            )
    return samples
