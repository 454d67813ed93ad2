"""Per-view z-score normalization and weighted intermediate fusion."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NonFiniteValue, NotNormalized, RowMismatch, TooFewRows, ValidationError

POSE_WEIGHT_RANGE = (0.001, 100.0)


@dataclass(frozen=True, eq=False)
class NormStats:
    mean: np.ndarray
    std: np.ndarray  # population std; 0 marks a constant column


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """An n x d feature table with per-column provenance tags.

    ``provenance`` holds one of ``"pose"`` / ``"appearance"`` per column.
    ``column_weight`` is the multiplier applied after normalization (1 unless
    the matrix came out of :func:`fuse_views`).
    """

    data: np.ndarray
    provenance: tuple[str, ...]
    norm_stats: NormStats | None = None
    frame_ids: np.ndarray | None = None
    column_weight: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValidationError(f"feature matrix must be 2D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise NonFiniteValue("feature matrix contains non-finite values")
        object.__setattr__(self, "data", data)
        prov = tuple(self.provenance)
        if len(prov) == 1 and data.shape[1] != 1:
            prov = prov * data.shape[1]
        if len(prov) != data.shape[1]:
            raise ValidationError("provenance must tag every column")
        object.__setattr__(self, "provenance", prov)
        if self.frame_ids is not None:
            fids = np.asarray(self.frame_ids, dtype=np.int64)
            if fids.shape != (data.shape[0],):
                raise RowMismatch("frame_ids must have one entry per row")
            object.__setattr__(self, "frame_ids", fids)

    @property
    def shape(self):
        return self.data.shape

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    def take(self, rows) -> "FeatureMatrix":
        rows = np.asarray(rows)
        fids = None if self.frame_ids is None else self.frame_ids[rows]
        return FeatureMatrix(self.data[rows], self.provenance, self.norm_stats, fids, self.column_weight)


def zscore_normalize(m: FeatureMatrix) -> FeatureMatrix:
    """Scale every column to zero mean and unit population standard deviation.

    Constant columns become all zeros.
    """
    x = m.data
    if x.shape[0] < 2:
        raise TooFewRows("normalization needs at least 2 rows")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    # a tiny spread can underflow to a zero std; such columns count as constant
    constant = (np.ptp(x, axis=0) == 0) | (std == 0)
    std = np.where(constant, 0.0, std)
    scale = np.where(constant, 1.0, std)
    out = (x - mean) / scale
    out[:, constant] = 0.0
    return FeatureMatrix(out, m.provenance, NormStats(mean, std), m.frame_ids)


def fuse_views(pose: FeatureMatrix, appearance: FeatureMatrix, pose_weight: float = 5.0) -> FeatureMatrix:
    """Concatenate ``[pose_weight * pose | appearance]`` column-wise.

    Both views must already be normalized and have the same rows in the same
    order. Squared Euclidean distances in the result equal
    ``pose_weight**2 * d2_pose + d2_appearance``.
    """
    if not pose_weight > 0:
        raise ValidationError("pose_weight must be > 0")
    if pose.norm_stats is None or appearance.norm_stats is None:
        raise NotNormalized("both views must be z-score normalized before fusion")
    if pose.n_rows != appearance.n_rows:
        raise RowMismatch(f"pose has {pose.n_rows} rows, appearance has {appearance.n_rows}")
    if pose.frame_ids is not None and appearance.frame_ids is not None:
        if not np.array_equal(pose.frame_ids, appearance.frame_ids):
            raise RowMismatch("pose and appearance rows are not in the same frame order")
    data = np.hstack([pose_weight * pose.data, appearance.data])
    stats = NormStats(
        np.concatenate([pose.norm_stats.mean, appearance.norm_stats.mean]),
        np.concatenate([pose.norm_stats.std, appearance.norm_stats.std]),
    )
    weights = np.concatenate([np.full(pose.shape[1], float(pose_weight)), np.ones(appearance.shape[1])])
    fids = pose.frame_ids if pose.frame_ids is not None else appearance.frame_ids
    return FeatureMatrix(data, pose.provenance + appearance.provenance, stats, fids, weights)


def write_feature_csv(m: FeatureMatrix, path: str | Path) -> None:
    """Dump ``frame_id`` plus all columns for external inspection."""
    fids = m.frame_ids if m.frame_ids is not None else np.arange(m.n_rows)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame_id"] + [f"{tag}_{j}" for j, tag in enumerate(m.provenance)])
        for fid, row in zip(fids, m.data):
            w.writerow([int(fid)] + [repr(float(v)) for v in row])
