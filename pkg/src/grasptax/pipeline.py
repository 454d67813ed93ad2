"""Stage functions behind the command line: prepare, cluster, evaluate, report.

Every stage writes JSON/CSV artifacts stamped with the configuration hash and
refuses inputs stamped with a different one.
"""
from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from .clustering import ClusterModel, fit_engine
from .config import PipelineConfig
from .errors import (
    ConfigHashMismatch,
    EmptyModelWarning,
    MissingLabels,
    MissingStream,
    MissingTaskIds,
    RangeTooNarrow,
    SchemaError,
    ValidationError,
)
from .fusion import FeatureMatrix, NormStats, fuse_views, zscore_normalize
from .ingestion import Dataset, Manifest, load_dataset
from .metrics import (
    fowlkes_mallows,
    maximum_match,
    modal_label,
    nmi,
    purity,
    redundancy,
    sample_for_review,
    silhouette,
    write_review_csv,
)
from .registration import PoseFeatureConfig, pose_feature_rows
from .report import emit_report, select_keyframes
from .selection import estimate_k, filter_small_clusters, select_k_by_silhouette
from .temporal import (
    extract_interactions,
    group_by_task,
    median_filter_binary,
    sample_interactions,
    uniform_task_sample,
    write_segment_table,
)

logger = logging.getLogger(__name__)

_STAGES = {"sampling": 0, "cluster": 1, "review": 2, "report": 3}


def stage_seed(seed: int, stage: str) -> int:
    """Independent integer seed per stage, split off the single config seed."""
    return int(np.random.SeedSequence([seed, _STAGES[stage]]).generate_state(1)[0])


def _dump(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=1) + "\n")


def _load(path: str | Path, config: PipelineConfig) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("config_hash") != config.hash():
        raise ConfigHashMismatch(
            f"{path} was produced with config {doc.get('config_hash')}, current config is {config.hash()}")
    return doc


# --------------------------------------------------------------------------- features

_POSE_SPACES = {
    "pose2d": ("pose2d", PoseFeatureConfig("d2", False)),
    "pose2d_conf": ("pose2d", PoseFeatureConfig("d2", True)),
    "pose3d": ("pose3d", PoseFeatureConfig("d3", False)),
}
_APPEARANCE_SPACES = {"appearance_avg": "average", "appearance_max": "max"}


def _require_stream(manifest: Manifest | None, dataset: Dataset, space: str):
    stream = _POSE_SPACES[space][0] if space in _POSE_SPACES else "appearance"
    if manifest is not None and getattr(manifest, f"{stream}_path") is None:
        raise MissingStream(f"feature space {space!r} needs the {stream} stream, "
                            f"but the manifest has no {stream}_path")
    if space in _APPEARANCE_SPACES:
        have = any(_APPEARANCE_SPACES[space] in r.appearance for r in dataset)
    else:
        have = any(getattr(r, stream) is not None for r in dataset)
    if not have:
        raise MissingStream(f"no frame carries the data needed for feature space {space!r}")


def _view(dataset: Dataset, frame_ids, space: str, thumb_weight: float):
    """Raw (unnormalized) feature rows of one view plus the frame ids that have it."""
    records = [dataset[int(f)] for f in frame_ids]
    if space in _POSE_SPACES:
        stream, cfg = _POSE_SPACES[space]
        cfg = replace(cfg, thumb_weight=thumb_weight)
        rows, kept = pose_feature_rows([getattr(r, stream) for r in records], cfg)
        return rows, np.asarray(frame_ids, dtype=np.int64)[kept], "pose"
    mode = _APPEARANCE_SPACES[space]
    kept = [i for i, r in enumerate(records) if mode in r.appearance]
    if len(kept) < len(records):
        logger.info("appearance (%s): %d frames without features excluded", mode, len(records) - len(kept))
    rows = np.array([records[i].appearance[mode].vector for i in kept]).reshape(len(kept), -1)
    return rows, np.asarray(frame_ids, dtype=np.int64)[kept], "appearance"


def build_features(dataset: Dataset, frame_ids, config: PipelineConfig,
                   manifest: Manifest | None = None) -> FeatureMatrix:
    """Feature matrix for the configured space over ``frame_ids``, normalized (and fused)."""
    frame_ids = np.unique(np.asarray(frame_ids, dtype=np.int64))
    space = config.feature_space
    if space != "fused":
        _require_stream(manifest, dataset, space)
        rows, fids, tag = _view(dataset, frame_ids, space, config.thumb_weight)
        return zscore_normalize(FeatureMatrix(rows, (tag,) * rows.shape[1], frame_ids=fids))
    _require_stream(manifest, dataset, config.fused_pose)
    _require_stream(manifest, dataset, config.fused_appearance)
    p_rows, p_fids, _ = _view(dataset, frame_ids, config.fused_pose, config.thumb_weight)
    a_rows, a_fids, _ = _view(dataset, frame_ids, config.fused_appearance, config.thumb_weight)
    common = np.intersect1d(p_fids, a_fids)
    if common.size < len(frame_ids):
        logger.info("fusion: %d frames lack one of the two views", len(frame_ids) - common.size)
    p_sel = np.searchsorted(p_fids, common)
    a_sel = np.searchsorted(a_fids, common)
    pose = zscore_normalize(FeatureMatrix(p_rows[p_sel], ("pose",) * p_rows.shape[1], frame_ids=common))
    app = zscore_normalize(FeatureMatrix(a_rows[a_sel], ("appearance",) * a_rows.shape[1], frame_ids=common))
    return fuse_views(pose, app, config.pose_weight)


def features_to_dict(m: FeatureMatrix) -> dict:
    return {
        "frame_ids": m.frame_ids.tolist(),
        "provenance": list(m.provenance),
        "column_weight": None if m.column_weight is None else m.column_weight.tolist(),
        "norm_mean": None if m.norm_stats is None else m.norm_stats.mean.tolist(),
        "norm_std": None if m.norm_stats is None else m.norm_stats.std.tolist(),
        "data": m.data.tolist(),
    }


def features_from_dict(d: dict) -> FeatureMatrix:
    try:
        stats = None if d["norm_mean"] is None else NormStats(np.array(d["norm_mean"]), np.array(d["norm_std"]))
        weight = None if d["column_weight"] is None else np.array(d["column_weight"])
        data = np.array(d["data"], dtype=np.float64).reshape(len(d["frame_ids"]), len(d["provenance"]))
        return FeatureMatrix(data, tuple(d["provenance"]), stats, np.array(d["frame_ids"]), weight)
    except (KeyError, ValueError) as exc:
        raise SchemaError(f"bad features document: {exc}") from None


# --------------------------------------------------------------------------- stages


def select_frames(dataset: Dataset, config: PipelineConfig):
    """Apply the configured sampling; returns (frame ids, segments, interaction id per frame)."""
    seed = stage_seed(config.seed, "sampling")
    s = config.sampling
    fids = dataset.frame_ids
    if s.mode == "interactions":
        if all(r.contact is None for r in dataset):
            raise MissingStream("sampling mode 'interactions' needs the contact stream")
        smooth = median_filter_binary(dataset.contact_signal(), s.median_window)
        segments = extract_interactions(smooth, fids)
        chosen = sample_interactions(segments, s.n_intervals, seed)
        interaction = {f: seg.interaction_id for seg in segments for f in seg.frame_ids}
        return np.sort(chosen), segments, interaction
    if s.mode == "task":
        tagged = [r for r in dataset if r.task_id]
        if not tagged:
            raise MissingTaskIds("sampling mode 'task' needs task ids on the pose rows")
        if len(tagged) < len(dataset):
            logger.info("task sampling: %d frames without a task id skipped", len(dataset) - len(tagged))
        groups = group_by_task([r.frame_id for r in tagged], [r.task_id for r in tagged])
        return uniform_task_sample(groups, s.task_cap, seed), [], {}
    return fids, [], {}


def prepare(manifest: Manifest, config: PipelineConfig, outdir: str | Path) -> dict:
    """Sampling, registration, normalization and fusion; writes features.json and frames.csv."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    dataset = load_dataset(manifest)
    frames, segments, interaction = select_frames(dataset, config)
    features = build_features(dataset, frames, config, manifest)
    if features.n_rows < 2:
        raise ValidationError(f"only {features.n_rows} usable frames after preparation")
    if config.sampling.mode == "interactions":
        write_segment_table(segments, out / "segments.csv")
    with open(out / "frames.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame_id", "interaction_id", "task_id"])
        for f in features.frame_ids:
            rec = dataset[int(f)]
            iid = interaction.get(int(f))
            w.writerow([int(f), "" if iid is None else iid, rec.task_id or ""])
    doc = {
        "config_hash": config.hash(),
        "participant_id": dataset.participant_id,
        "hand_side": dataset.hand_side,
        "feature_space": config.feature_space,
        "interaction_ids": [interaction.get(int(f)) for f in features.frame_ids],
        "features": features_to_dict(features),
    }
    _dump(out / "features.json", doc)
    _dump(out / "config.json", config.to_dict())
    return doc


def _clamped_range(config: PipelineConfig, n: int):
    k_min, k_max = config.k_range
    return k_min, min(k_max, n)


def cluster(features_path: str | Path, config: PipelineConfig, outdir: str | Path, workers: int = 1):
    """Fit the configured engine (choosing k if asked); writes model.json."""
    doc = _load(features_path, config)
    features = features_from_dict(doc["features"])
    seed = stage_seed(config.seed, "cluster")
    sweep = None
    if config.selection == "fixed":
        model = fit_engine(features, config.k, config.engine, seed=seed, workers=workers)
    elif config.selection == "bic_elbow":
        k_range = _clamped_range(config, features.n_rows)
        if k_range[1] - k_range[0] < 2:
            raise RangeTooNarrow(f"k range {k_range} too narrow for the BIC elbow")
        sweep = estimate_k(features, k_range, config.engine, seed=seed, workers=workers)
        model = sweep.model
        if config.engine.name != "gmm":
            model = fit_engine(features, sweep.chosen_k, config.engine, seed=seed, workers=workers)
    else:
        sweep = select_k_by_silhouette(features, _clamped_range(config, features.n_rows), config.engine,
                                       seed=seed, workers=workers)
        model = sweep.model
    model = replace(model, frame_ids=features.frame_ids)
    result = {"config_hash": config.hash(), "sweep": None if sweep is None else sweep.to_dict(),
              "model": model.to_dict()}
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "model.json", result)
    return model, sweep


def _load_model(path, config) -> ClusterModel:
    return ClusterModel.from_dict(_load(path, config)["model"])


def evaluate(model_path, features_path, config: PipelineConfig, outdir, labels: dict | None = None,
             image_paths: dict | None = None) -> dict:
    """Validity indices, review sheets and (with labels) purity/redundancy; writes metrics.json."""
    model = _load_model(model_path, config)
    features = features_from_dict(_load(features_path, config)["features"])
    if not np.array_equal(model.row_frame_ids(), features.frame_ids):
        raise ValidationError("model rows do not match the feature rows")
    notes = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyModelWarning)
        filtered = filter_small_clusters(model, config.min_cluster_size)
    assigned = np.flatnonzero(filtered.assignments >= 0)
    metrics = {"silhouette": None, "mm": None, "flk": None, "nmi": None}
    if filtered.k == 0:
        notes.append("no cluster reached min_cluster_size; all metrics are null")
        warnings.warn(notes[-1], EmptyModelWarning, stacklevel=2)
    elif filtered.k == 1:
        notes.append("a single cluster survived filtering; silhouette is undefined")
        warnings.warn(notes[-1], EmptyModelWarning, stacklevel=2)
    else:
        metrics["silhouette"] = silhouette(features.data[assigned], filtered.assignments[assigned])

    labelled = []
    if labels is not None and filtered.k > 0:
        labelled = [i for i in assigned if labels.get(int(features.frame_ids[i])) is not None]
        if labelled:
            pred = filtered.assignments[labelled]
            truth = [labels[int(features.frame_ids[i])] for i in labelled]
            metrics["mm"] = maximum_match(pred, truth)
            metrics["nmi"] = nmi(pred, truth)
            metrics["flk"] = fowlkes_mallows(pred, truth) if len(labelled) >= 2 else None
        else:
            notes.append("labels supplied but none cover clustered frames")

    seed = stage_seed(config.seed, "review")
    sheets = [sample_for_review(filtered, c, config.review_n, seed) for c in range(filtered.k)]
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    write_review_csv(sheets, out / "review.csv", image_paths)

    review = None
    if labels is not None and sheets:
        try:
            per_cluster = [[labels.get(f) for f in s.sampled_frame_ids] for s in sheets]
            missing = [f for s in sheets for f in s.sampled_frame_ids if labels.get(f) is None]
            if missing:
                raise MissingLabels(f"{len(missing)} review frames lack labels (first: {missing[0]})")
            purities = [purity(s, labels) for s in sheets]
            review = {
                "purity": purities,
                "mean_purity": float(np.mean(purities)),
                "dominant_labels": [modal_label(labs)[0] for labs in per_cluster],
                "redundancy": redundancy(per_cluster),
            }
        except MissingLabels as exc:
            notes.append(f"purity/redundancy skipped: {exc}")
    doc = {
        "config_hash": config.hash(),
        "k": filtered.k,
        "n_rows": int(features.n_rows),
        "n_assigned": int(assigned.size),
        "n_labelled": len(labelled),
        "metrics": metrics,
        "review": review,
        "notes": notes,
    }
    _dump(out / "metrics.json", doc)
    return doc


def report(model_path, features_path, manifest: Manifest, config: PipelineConfig, outdir) -> Path:
    """Keyframe report for every cluster that survives the size filter."""
    model = _load_model(model_path, config)
    fdoc = _load(features_path, config)
    dataset = load_dataset(manifest)
    fids = fdoc["features"]["frame_ids"]
    updates = {int(f): {"interaction_id": iid} for f, iid in zip(fids, fdoc["interaction_ids"])
               if iid is not None}
    dataset = dataset.with_updates(updates)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyModelWarning)
        filtered = filter_small_clusters(model, config.min_cluster_size)
    seed = stage_seed(config.seed, "report")
    reports = [select_keyframes(filtered, c, dataset, config.report_intervals, seed)
               for c in range(filtered.k)]
    return emit_report(reports, dataset, outdir, model.algorithm, filtered.k, config.hash())


def run(manifest: Manifest, config: PipelineConfig, outdir, workers: int = 1,
        labels: dict | None = None) -> Path:
    """All four stages into one output directory."""
    out = Path(outdir)
    prepare(manifest, config, out)
    cluster(out / "features.json", config, out, workers)
    dataset_labels = labels
    if dataset_labels is None and manifest.labels_path:
        dataset_labels = {r.frame_id: r.grasp_label for r in load_dataset(manifest) if r.grasp_label}
    evaluate(out / "model.json", out / "features.json", config, out, dataset_labels)
    return report(out / "model.json", out / "features.json", manifest, config, out)
