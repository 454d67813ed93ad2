"""Loading and validation of externally produced per-frame artifacts.

A :class:`Manifest` names the files for one participant and hand. Each file is
a CSV with a header row:

* pose2d:     ``frame_id, task_id, j0_x, j0_y, j0_c, ..., j20_x, j20_y, j20_c``
* pose3d:     ``frame_id, task_id, j0_x, j0_y, j0_z, ..., j20_z``
* appearance: ``frame_id, pooling, f0, ..., f1023``
* contact:    ``frame_id, contact``
* labels:     ``frame_id, grasp_label``
* sharpness:  ``frame_id, sharpness``

:func:`load_dataset` aligns all streams on ``frame_id`` into a :class:`Dataset`
and :func:`write_dataset` writes one back out in the same formats.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    DuplicateFrameId,
    EmptyMap,
    MissingFile,
    NonFiniteValue,
    SchemaError,
    ValidationError,
)

logger = logging.getLogger(__name__)

N_JOINTS = 21
WRIST, THUMB, INDEX_MCP, LITTLE_MCP = 0, (1, 2, 3, 4), 5, 17
APPEARANCE_DIM = 1024
GRASP_LABELS = ("power", "precision", "intermediate", "nonprehensile")
POOLING_MODES = ("average", "max")
HAND_SIDES = ("left", "right")

_POOLING_ALIASES = {
    "average": "average", "avg": "average", "mean": "average", "global_average": "average",
    "max": "max", "global_max": "max",
}


@dataclass(frozen=True)
class HandPose:
    """21 hand keypoints in OpenPose order (wrist 0, thumb 1-4, index 5-8, ...).

    ``coords`` has shape (21, 2) or (21, 3); ``confidence`` has shape (21,) for
    2D estimator output and is ``None`` for 3D poses.
    """

    coords: np.ndarray
    confidence: np.ndarray | None = None
    space: str = "raw"

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[0] != N_JOINTS or coords.shape[1] not in (2, 3):
            raise SchemaError(f"pose must have shape (21, 2) or (21, 3), got {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise NonFiniteValue("pose coordinates must be finite")
        object.__setattr__(self, "coords", coords)
        if self.confidence is not None:
            conf = np.asarray(self.confidence, dtype=np.float64)
            if conf.shape != (N_JOINTS,):
                raise SchemaError(f"confidence must have shape (21,), got {conf.shape}")
            if coords.shape[1] != 2:
                raise SchemaError("confidence is only defined for 2D poses")
            if not np.all(np.isfinite(conf)) or np.any(conf < 0) or np.any(conf > 1):
                raise SchemaError("confidence values must lie in [0, 1]")
            object.__setattr__(self, "confidence", conf)
        if self.space not in ("raw", "registered"):
            raise ValidationError(f"unknown pose space {self.space!r}")

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    def __eq__(self, other):
        if not isinstance(other, HandPose):
            return NotImplemented
        if (self.confidence is None) != (other.confidence is None):
            return False
        return (
            self.space == other.space
            and np.array_equal(self.coords, other.coords)
            and (self.confidence is None or np.array_equal(self.confidence, other.confidence))
        )

    __hash__ = None


@dataclass(frozen=True)
class AppearanceFeature:
    vector: np.ndarray
    pooling: str

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=np.float64)
        if vec.shape != (APPEARANCE_DIM,):
            raise SchemaError(f"appearance vector must have length {APPEARANCE_DIM}, got {vec.shape}")
        if not np.all(np.isfinite(vec)):
            raise NonFiniteValue("appearance vector contains non-finite values")
        if self.pooling not in POOLING_MODES:
            raise ValidationError(f"unknown pooling {self.pooling!r}")
        object.__setattr__(self, "vector", vec)

    def __eq__(self, other):
        if not isinstance(other, AppearanceFeature):
            return NotImplemented
        return self.pooling == other.pooling and np.array_equal(self.vector, other.vector)

    __hash__ = None


@dataclass(frozen=True)
class FrameRecord:
    frame_id: int
    task_id: str | None = None
    interaction_id: int | None = None
    contact: bool | None = None
    pose2d: HandPose | None = None
    pose3d: HandPose | None = None
    appearance: Mapping[str, AppearanceFeature] = field(default_factory=dict)
    grasp_label: str | None = None
    sharpness: float | None = None
    image_path: str | None = None

    def __post_init__(self):
        if self.grasp_label is not None and self.grasp_label not in GRASP_LABELS:
            raise SchemaError(f"frame {self.frame_id}: unknown grasp label {self.grasp_label!r}")
        if self.sharpness is not None and not (self.sharpness >= 0):
            raise SchemaError(f"frame {self.frame_id}: sharpness must be >= 0")


@dataclass(frozen=True)
class Manifest:
    participant_id: str
    hand_side: str
    pose2d_path: str | None = None
    pose3d_path: str | None = None
    appearance_path: str | None = None
    contact_path: str | None = None
    labels_path: str | None = None
    images_dir: str | None = None
    sharpness_path: str | None = None

    STREAMS = ("pose2d_path", "pose3d_path", "appearance_path", "contact_path",
               "labels_path", "sharpness_path")

    def __post_init__(self):
        if not self.participant_id:
            raise ValidationError("participant_id must be non-empty")
        if self.hand_side not in HAND_SIDES:
            raise ValidationError(f"hand_side must be 'left' or 'right', got {self.hand_side!r}")

    @classmethod
    def from_json(cls, path: str | Path) -> "Manifest":
        """Read a manifest; relative file paths resolve against the manifest's folder."""
        path = Path(path)
        if not path.exists():
            raise MissingFile(str(path))
        with open(path) as fh:
            raw = json.load(fh)
        known = {"participant_id", "hand_side", "images_dir", *cls.STREAMS}
        unknown = set(raw) - known
        if unknown:
            raise SchemaError(f"unknown manifest fields: {sorted(unknown)}")
        for key in (*cls.STREAMS, "images_dir"):
            if raw.get(key) is not None and not Path(raw[key]).is_absolute():
                raw[key] = str(path.parent / raw[key])
        return cls(**raw)

    def to_dict(self) -> dict:
        return {
            "participant_id": self.participant_id,
            "hand_side": self.hand_side,
            **{k: getattr(self, k) for k in (*self.STREAMS, "images_dir")},
        }


@dataclass(frozen=True)
class Dataset:
    """Frame records of one (participant, hand) stream, keyed and ordered by frame_id."""

    participant_id: str
    hand_side: str
    records: tuple[FrameRecord, ...]
    row_counts: Mapping[str, int] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        ids = [r.frame_id for r in self.records]
        if ids != sorted(ids):
            object.__setattr__(self, "records", tuple(sorted(self.records, key=lambda r: r.frame_id)))
        object.__setattr__(self, "_index", {r.frame_id: i for i, r in enumerate(self.records)})

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, frame_id: int) -> FrameRecord:
        return self.records[self._index[frame_id]]

    def __contains__(self, frame_id) -> bool:
        return frame_id in self._index

    @property
    def frame_ids(self) -> np.ndarray:
        return np.array([r.frame_id for r in self.records], dtype=np.int64)

    def contact_signal(self) -> np.ndarray:
        """Boolean contact per frame (frames without a contact row count as no contact)."""
        return np.array([bool(r.contact) for r in self.records], dtype=bool)

    def with_updates(self, updates: Mapping[int, dict]) -> "Dataset":
        """Copy with per-frame field overrides, e.g. ``{frame_id: {"interaction_id": 3}}``."""
        records = tuple(replace(r, **updates[r.frame_id]) if r.frame_id in updates else r
                        for r in self.records)
        return Dataset(self.participant_id, self.hand_side, records, dict(self.row_counts))


def pool_feature_map(feature_map, mode: str = "average") -> AppearanceFeature:
    """Pool an H x W x 1024 detector feature map into one appearance vector.

    Parameters
    ----------
    feature_map : array_like, shape (H, W, 1024)
    mode : {"average", "max"}
        Global average pooling or global max pooling over the spatial axes.
    """
    fmap = np.asarray(feature_map, dtype=np.float64)
    if fmap.ndim != 3 or fmap.shape[2] != APPEARANCE_DIM:
        raise SchemaError(f"feature map must have shape (H, W, {APPEARANCE_DIM}), got {fmap.shape}")
    if fmap.shape[0] < 1 or fmap.shape[1] < 1:
        raise EmptyMap("feature map has no spatial cells")
    if not np.all(np.isfinite(fmap)):
        raise NonFiniteValue("feature map contains non-finite values")
    mode = _POOLING_ALIASES.get(mode, mode)
    if mode == "average":
        vec = fmap.mean(axis=(0, 1))
    elif mode == "max":
        vec = fmap.max(axis=(0, 1))
    else:
        raise ValidationError(f"unknown pooling mode {mode!r}")
    return AppearanceFeature(vec, mode)


# --------------------------------------------------------------------------- readers


def _read_rows(path: str, name: str) -> Iterable[tuple[int, list[str]]]:
    p = Path(path)
    if not p.exists():
        raise MissingFile(f"{name} file not found: {path}")
    with open(p, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (lineno == 1 and row[0].strip() == "frame_id"):
                continue
            yield lineno, [c.strip() for c in row]


def _frame_id(cell: str, name: str, lineno: int) -> int:
    try:
        return int(cell)
    except ValueError:
        raise SchemaError(f"{name} row {lineno}: frame_id {cell!r} is not an integer") from None


def _floats(cells: list[str], name: str, lineno: int) -> np.ndarray:
    try:
        values = np.array([float(c) for c in cells], dtype=np.float64)
    except ValueError as exc:
        raise SchemaError(f"{name} row {lineno}: {exc}") from None
    if not np.all(np.isfinite(values)):
        raise NonFiniteValue(f"{name} row {lineno}: non-finite value")
    return values


def _check_unique(seen: set, key, name: str, lineno: int):
    if key in seen:
        raise DuplicateFrameId(f"{name} row {lineno}: duplicate frame_id {key}")
    seen.add(key)


def _read_pose(path: str, dim: int) -> dict[int, tuple[str | None, HandPose]]:
    name = f"pose{dim}d"
    n_cols = 2 + 3 * N_JOINTS
    out: dict[int, tuple[str | None, HandPose]] = {}
    seen: set = set()
    for lineno, row in _read_rows(path, name):
        if len(row) != n_cols:
            n_joints = (len(row) - 2) / 3
            raise SchemaError(
                f"{name} row {lineno}: expected {n_cols} columns (21 joints), got {len(row)} "
                f"({n_joints:g} joints)"
            )
        fid = _frame_id(row[0], name, lineno)
        _check_unique(seen, fid, name, lineno)
        values = _floats(row[2:], name, lineno).reshape(N_JOINTS, 3)
        task = row[1] or None
        if dim == 2:
            try:
                pose = HandPose(values[:, :2], values[:, 2])
            except ValidationError as exc:
                raise SchemaError(f"{name} row {lineno}: {exc}") from None
        else:
            pose = HandPose(values)
        out[fid] = (task, pose)
    return out


def _read_appearance(path: str) -> dict[int, dict[str, AppearanceFeature]]:
    name = "appearance"
    n_cols = 2 + APPEARANCE_DIM
    out: dict[int, dict[str, AppearanceFeature]] = {}
    seen: set = set()
    for lineno, row in _read_rows(path, name):
        if len(row) != n_cols:
            raise SchemaError(f"{name} row {lineno}: expected {n_cols} columns, got {len(row)}")
        fid = _frame_id(row[0], name, lineno)
        pooling = _POOLING_ALIASES.get(row[1].lower())
        if pooling is None:
            raise SchemaError(f"{name} row {lineno}: unknown pooling {row[1]!r}")
        _check_unique(seen, (fid, pooling), name, lineno)
        out.setdefault(fid, {})[pooling] = AppearanceFeature(_floats(row[2:], name, lineno), pooling)
    return out


def _read_scalar(path: str, name: str, parse) -> dict[int, object]:
    out: dict[int, object] = {}
    seen: set = set()
    for lineno, row in _read_rows(path, name):
        if len(row) != 2:
            raise SchemaError(f"{name} row {lineno}: expected 2 columns, got {len(row)}")
        fid = _frame_id(row[0], name, lineno)
        _check_unique(seen, fid, name, lineno)
        try:
            out[fid] = parse(row[1])
        except (ValueError, ValidationError) as exc:
            raise SchemaError(f"{name} row {lineno}: {exc}") from None
    return out


def _parse_contact(cell: str) -> bool:
    if cell not in ("0", "1"):
        raise ValueError(f"contact must be 0 or 1, got {cell!r}")
    return cell == "1"


def _parse_label(cell: str) -> str:
    label = cell.lower().replace("-", "").replace("_", "").replace(" ", "")
    if label not in GRASP_LABELS:
        raise ValueError(f"unknown grasp label {cell!r}")
    return label


def _parse_sharpness(cell: str) -> float:
    value = float(cell)
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"sharpness must be finite and >= 0, got {cell!r}")
    return value


def image_path_for(images_dir: str | Path, frame_id: int) -> str:
    """Images are expected as ``<images_dir>/<frame_id>.pgm``."""
    return str(Path(images_dir) / f"{frame_id}.pgm")


def load_dataset(manifest: Manifest) -> Dataset:
    """Load every stream named in ``manifest`` and align them by frame_id.

    Streams that are not declared leave the corresponding record fields unset.
    Differences in row counts between declared streams are logged and kept in
    ``Dataset.row_counts``.
    """
    pose2d = _read_pose(manifest.pose2d_path, 2) if manifest.pose2d_path else {}
    pose3d = _read_pose(manifest.pose3d_path, 3) if manifest.pose3d_path else {}
    appearance = _read_appearance(manifest.appearance_path) if manifest.appearance_path else {}
    contact = _read_scalar(manifest.contact_path, "contact", _parse_contact) if manifest.contact_path else {}
    labels = _read_scalar(manifest.labels_path, "labels", _parse_label) if manifest.labels_path else {}
    sharp = (_read_scalar(manifest.sharpness_path, "sharpness", _parse_sharpness)
             if manifest.sharpness_path else {})
    if manifest.images_dir and not Path(manifest.images_dir).is_dir():
        raise MissingFile(f"images_dir not found: {manifest.images_dir}")

    row_counts = {}
    for key, stream in (("pose2d", pose2d), ("pose3d", pose3d), ("appearance", appearance),
                        ("contact", contact), ("labels", labels), ("sharpness", sharp)):
        if getattr(manifest, f"{key}_path"):
            row_counts[key] = len(stream)
    if len(set(row_counts.values())) > 1:
        logger.warning("stream row counts differ: %s", row_counts)

    ids = sorted(set(pose2d) | set(pose3d) | set(appearance) | set(contact) | set(labels) | set(sharp))
    records = []
    for fid in ids:
        task = None
        if fid in pose2d:
            task = pose2d[fid][0]
        if task is None and fid in pose3d:
            task = pose3d[fid][0]
        records.append(FrameRecord(
            frame_id=fid,
            task_id=task,
            contact=contact.get(fid),
            pose2d=pose2d[fid][1] if fid in pose2d else None,
            pose3d=pose3d[fid][1] if fid in pose3d else None,
            appearance=appearance.get(fid, {}),
            grasp_label=labels.get(fid),
            sharpness=sharp.get(fid),
            image_path=image_path_for(manifest.images_dir, fid) if manifest.images_dir else None,
        ))
    return Dataset(manifest.participant_id, manifest.hand_side, tuple(records), row_counts)


# --------------------------------------------------------------------------- writers


def _fmt(x: float) -> str:
    return repr(float(x))


def write_dataset(dataset: Dataset, directory: str | Path, images_dir: str | None = None) -> Manifest:
    """Write ``dataset`` as manifest + CSV files under ``directory``.

    Only streams present on at least one record are written. Returns the
    manifest (also saved as ``manifest.json``).
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    recs = dataset.records
    paths: dict[str, str | None] = {}

    def dump(name, header, rows):
        path = d / f"{name}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        paths[f"{name}_path"] = str(path)

    if any(r.pose2d is not None for r in recs):
        header = ["frame_id", "task_id"] + [f"j{j}_{c}" for j in range(N_JOINTS) for c in "xyc"]
        dump("pose2d", header, (
            [r.frame_id, r.task_id or ""] + [_fmt(v) for v in np.column_stack(
                [r.pose2d.coords, r.pose2d.confidence if r.pose2d.confidence is not None
                 else np.ones(N_JOINTS)]).ravel()]
            for r in recs if r.pose2d is not None))
    if any(r.pose3d is not None for r in recs):
        header = ["frame_id", "task_id"] + [f"j{j}_{c}" for j in range(N_JOINTS) for c in "xyz"]
        dump("pose3d", header, ([r.frame_id, r.task_id or ""] + [_fmt(v) for v in r.pose3d.coords.ravel()]
                                for r in recs if r.pose3d is not None))
    if any(r.appearance for r in recs):
        header = ["frame_id", "pooling"] + [f"f{i}" for i in range(APPEARANCE_DIM)]
        dump("appearance", header, ([r.frame_id, mode] + [_fmt(v) for v in r.appearance[mode].vector]
                                    for r in recs for mode in POOLING_MODES if mode in r.appearance))
    if any(r.contact is not None for r in recs):
        dump("contact", ["frame_id", "contact"],
             ([r.frame_id, int(r.contact)] for r in recs if r.contact is not None))
    if any(r.grasp_label is not None for r in recs):
        dump("labels", ["frame_id", "grasp_label"],
             ([r.frame_id, r.grasp_label] for r in recs if r.grasp_label is not None))
    if any(r.sharpness is not None for r in recs):
        dump("sharpness", ["frame_id", "sharpness"],
             ([r.frame_id, _fmt(r.sharpness)] for r in recs if r.sharpness is not None))

    manifest = Manifest(dataset.participant_id, dataset.hand_side, images_dir=images_dir, **paths)
    # stream files sit next to manifest.json, so store them relative to it
    doc = manifest.to_dict()
    for key in Manifest.STREAMS:
        if doc[key] is not None:
            doc[key] = Path(doc[key]).name
    with open(d / "manifest.json", "w") as fh:
        json.dump(doc, fh, indent=2)
    return manifest
