"""Per-cluster keyframe reports: a center exemplar plus sharp, interaction-diverse keyframes."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ImageTooSmall, MissingSharpness, SchemaError, ValidationError, WriteFailure

LAPLACIAN_KERNEL = np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=np.float64)


@dataclass(frozen=True)
class Keyframe:
    frame_id: int
    interaction_id: int | None
    likelihood_rank: int
    sharpness: float
    image_path: str | None = None


@dataclass(frozen=True)
class ClusterReport:
    cluster_id: int
    center_frame_id: int
    keyframes: tuple[Keyframe, ...]
    member_count: int
    mean_score: float
    extra: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        kfs = []
        for kf in self.keyframes:
            entry = {"frame_id": kf.frame_id, "interaction_id": kf.interaction_id,
                     "rank": kf.likelihood_rank, "sharpness": kf.sharpness}
            if kf.image_path is not None:
                entry["image_path"] = kf.image_path
            kfs.append(entry)
        return {"cluster_id": self.cluster_id, "center_frame_id": self.center_frame_id,
                "member_count": self.member_count, "keyframes": kfs}


def laplacian_variance(image) -> float:
    """Population variance of the 4-neighbour Laplacian over interior pixels.

    No padding is used, so a W x H image yields (W-2) x (H-2) responses.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValidationError(f"expected a 2D grayscale image, got shape {img.shape}")
    if img.shape[0] < 3 or img.shape[1] < 3:
        raise ImageTooSmall(f"image must be at least 3x3, got {img.shape}")
    resp = (img[:-2, 1:-1] + img[2:, 1:-1] + img[1:-1, :-2] + img[1:-1, 2:]
            - 4.0 * img[1:-1, 1:-1])
    return float(resp.var())


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a binary (P5) 8-bit PGM image into a uint8 array of shape (H, W)."""
    raw = Path(path).read_bytes()
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise SchemaError(f"{path}: truncated PGM header")
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace byte before the raster
    if tokens[0] != b"P5":
        raise SchemaError(f"{path}: only binary P5 PGM is supported")
    width, height, maxval = (int(t) for t in tokens[1:])
    if maxval > 255:
        raise SchemaError(f"{path}: only 8-bit PGM is supported")
    data = np.frombuffer(raw, dtype=np.uint8, count=width * height, offset=pos)
    return data.reshape(height, width)


def write_pgm(image, path: str | Path) -> None:
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValidationError("expected a 2D image")
    img = np.clip(img, 0, 255).astype(np.uint8)
    h, w = img.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + img.tobytes())


def _sharpness(record) -> float:
    value = getattr(record, "sharpness", None)
    if value is not None:
        return float(value)
    path = getattr(record, "image_path", None)
    if path and Path(path).exists():
        return laplacian_variance(read_pgm(path))
    raise MissingSharpness(f"frame {record.frame_id} has neither a sharpness value nor an image")


def select_keyframes(model, cluster_id: int, frames: Mapping, n_intervals: int = 10,
                     seed: int = 0) -> ClusterReport:
    """Build the keyframe report of one cluster.

    Members are ranked by descending ``score_per_row``; the top half
    (``ceil(N/2)``) is cut into ``n_intervals`` contiguous intervals. From each
    interval the sharpest member whose interaction has not yet been used is
    taken, ties broken at random. Frames without an interaction id count as
    their own interaction.

    Parameters
    ----------
    model : ClusterModel
    frames : mapping of frame_id to a record with ``interaction_id`` and
        ``sharpness`` (or a readable ``image_path``), e.g. a Dataset.
    """
    rows = model.members(cluster_id)
    if rows.size == 0:
        raise ValidationError(f"cluster {cluster_id} is empty")
    scores = model.score_per_row[rows]
    order = rows[np.lexsort((rows, -scores))]
    fids = model.row_frame_ids()
    keep = math.ceil(order.size / 2)
    top = order[:keep]
    rng = np.random.default_rng([seed, cluster_id])

    records = {int(fids[r]): frames[int(fids[r])] for r in top}
    sharp = {fid: _sharpness(rec) for fid, rec in records.items()}

    def interaction_key(fid):
        iid = getattr(records[fid], "interaction_id", None)
        return ("interaction", iid) if iid is not None else ("frame", fid)

    used = set()
    keyframes = []
    for part in np.array_split(np.arange(keep), n_intervals):
        cand = [(rank, int(fids[top[rank]])) for rank in part
                if interaction_key(int(fids[top[rank]])) not in used]
        if not cand:
            continue
        best = max(sharp[fid] for _, fid in cand)
        tied = [c for c in cand if sharp[c[1]] == best]
        rank, fid = tied[int(rng.integers(len(tied)))] if len(tied) > 1 else tied[0]
        used.add(interaction_key(fid))
        rec = records[fid]
        keyframes.append(Keyframe(fid, getattr(rec, "interaction_id", None), int(rank), sharp[fid],
                                  getattr(rec, "image_path", None)))
    return ClusterReport(
        cluster_id=cluster_id,
        center_frame_id=int(fids[order[0]]),
        keyframes=tuple(keyframes),
        member_count=int(order.size),
        mean_score=float(scores.mean()),
    )


def emit_report(reports: Sequence[ClusterReport], dataset, destination: str | Path, engine: str,
                k: int | None = None, config_hash: str | None = None) -> Path:
    """Write ``report.json`` and ``contact_sheet.txt`` into ``destination``.

    The JSON document has the layout
    ``{participant_id, hand_side, engine, k, clusters: [...]}`` with clusters in
    id order. Returns the path of the JSON file.
    """
    reports = sorted(reports, key=lambda r: r.cluster_id)
    doc = {
        "participant_id": getattr(dataset, "participant_id", None),
        "hand_side": getattr(dataset, "hand_side", None),
        "engine": engine,
        "k": len(reports) if k is None else int(k),
        "clusters": [r.to_dict() for r in reports],
    }
    if config_hash is not None:
        doc["config_hash"] = config_hash
    dest = Path(destination)
    try:
        dest.mkdir(parents=True, exist_ok=True)
        out = dest / "report.json"
        out.write_text(json.dumps(doc, indent=2) + "\n")
        lines = []
        for r in reports:
            lines.append(f"cluster {r.cluster_id} ({r.member_count} frames), center {r.center_frame_id}")
            for kf in r.keyframes:
                lines.append(f"  {kf.image_path or kf.frame_id}")
        (dest / "contact_sheet.txt").write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise WriteFailure(f"cannot write report to {dest}: {exc}") from exc
    return out
