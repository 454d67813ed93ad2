"""Rigid canonicalization of hand poses and flattening into feature rows."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigMismatch, DegeneratePose, ValidationError
from .ingestion import INDEX_MCP, LITTLE_MCP, N_JOINTS, THUMB, WRIST, HandPose

logger = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-9


@dataclass(frozen=True)
class PoseFeatureConfig:
    dimensionality: str = "d2"
    include_confidence: bool = False
    thumb_weight: float = 1.0

    def __post_init__(self):
        if self.dimensionality not in ("d2", "d3"):
            raise ValidationError(f"dimensionality must be 'd2' or 'd3', got {self.dimensionality!r}")
        if self.dimensionality == "d3" and self.include_confidence:
            raise ConfigMismatch("confidence channels exist only for 2D poses")
        if not self.thumb_weight > 0:
            raise ValidationError("thumb_weight must be > 0")

    @property
    def row_length(self) -> int:
        return 63 if (self.dimensionality == "d3" or self.include_confidence) else 42


def register_pose_2d(pose: HandPose) -> HandPose:
    """Move the wrist to the origin and rotate the index MCP onto the +y axis."""
    if pose.dim != 2:
        raise ConfigMismatch("register_pose_2d expects a 2D pose")
    shifted = pose.coords - pose.coords[WRIST]
    v = shifted[INDEX_MCP]
    r = np.hypot(v[0], v[1])
    if r <= DEGENERACY_TOL:
        raise DegeneratePose("wrist and index MCP coincide")
    rot = np.array([[v[1], -v[0]], [v[0], v[1]]]) / r
    coords = shifted @ rot.T
    coords[WRIST] = 0.0
    coords[INDEX_MCP] = (0.0, r)
    return HandPose(coords, pose.confidence, "registered")


def register_pose_3d(pose: HandPose) -> HandPose:
    """3D registration with the roll fixed by the little-finger MCP.

    After registration the wrist is at the origin, the index MCP lies on +y,
    and the little MCP lies in the z = 0 plane with x > 0.
    """
    if pose.dim != 3:
        raise ConfigMismatch("register_pose_3d expects a 3D pose")
    shifted = pose.coords - pose.coords[WRIST]
    v = shifted[INDEX_MCP]
    r = np.linalg.norm(v)
    if r <= DEGENERACY_TOL:
        raise DegeneratePose("wrist and index MCP coincide")
    y_axis = v / r
    little = shifted[LITTLE_MCP]
    w = little - (little @ y_axis) * y_axis
    wn = np.linalg.norm(w)
    if wn <= DEGENERACY_TOL:
        raise DegeneratePose("little MCP is collinear with the wrist-index MCP axis")
    x_axis = w / wn
    z_axis = np.cross(x_axis, y_axis)
    rot = np.vstack([x_axis, y_axis, z_axis])
    coords = shifted @ rot.T
    coords[WRIST] = 0.0
    coords[INDEX_MCP] = (0.0, r, 0.0)
    coords[LITTLE_MCP, 2] = 0.0
    return HandPose(coords, None, "registered")


def register_pose(pose: HandPose) -> HandPose:
    return register_pose_2d(pose) if pose.dim == 2 else register_pose_3d(pose)


def flatten_pose(pose: HandPose, cfg: PoseFeatureConfig) -> np.ndarray:
    """Interleave joint coordinates (and confidences) into one feature row.

    Thumb coordinates (joints 1-4) are scaled by ``cfg.thumb_weight``;
    confidence channels are never scaled.
    """
    if pose.space != "registered":
        raise ConfigMismatch("flatten_pose expects a registered pose")
    want_dim = 2 if cfg.dimensionality == "d2" else 3
    if pose.dim != want_dim:
        raise ConfigMismatch(f"config expects {want_dim}D pose, got {pose.dim}D")
    coords = pose.coords.copy()
    coords[list(THUMB)] *= cfg.thumb_weight
    if cfg.include_confidence:
        if pose.confidence is None:
            raise ConfigMismatch("include_confidence set but pose carries no confidence")
        coords = np.column_stack([coords, pose.confidence])
    return coords.ravel()


def pose_feature_rows(poses: Sequence[HandPose | None], cfg: PoseFeatureConfig):
    """Register and flatten a batch of poses.

    Missing or degenerate poses are dropped and counted in the log.

    Returns
    -------
    rows : ndarray, shape (n_kept, cfg.row_length)
    kept : ndarray of int
        Indices into ``poses`` of the rows that survived.
    """
    rows, kept = [], []
    n_missing = n_degenerate = 0
    for i, pose in enumerate(poses):
        if pose is None:
            n_missing += 1
            continue
        try:
            reg = pose if pose.space == "registered" else register_pose(pose)
        except DegeneratePose:
            n_degenerate += 1
            continue
        rows.append(flatten_pose(reg, cfg))
        kept.append(i)
    if n_missing or n_degenerate:
        logger.info("pose features: %d missing, %d degenerate frames excluded", n_missing, n_degenerate)
    out = np.array(rows, dtype=np.float64).reshape(len(rows), cfg.row_length)
    return out, np.array(kept, dtype=np.int64)


__all__ = [
    "N_JOINTS",
    "PoseFeatureConfig",
    "register_pose_2d",
    "register_pose_3d",
    "register_pose",
    "flatten_pose",
    "pose_feature_rows",
]
