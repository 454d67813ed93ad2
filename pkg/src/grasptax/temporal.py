"""Contact-signal smoothing, interaction segments and frame sampling."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import EvenWindow, MissingTaskIds, ValidationError

TRANSITORY, STABLE = "transitory", "stable"


@dataclass(frozen=True)
class InteractionSegment:
    interaction_id: int
    frame_ids: tuple[int, ...]
    phase_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.frame_ids:
            raise ValidationError("a segment needs at least one frame")
        f = np.asarray(self.frame_ids)
        if f.size > 1 and not np.all(np.diff(f) == 1):
            raise ValidationError("segment frames must be contiguous and ascending")
        if self.phase_labels is not None and len(self.phase_labels) != len(self.frame_ids):
            raise ValidationError("one phase label per frame")

    def __len__(self):
        return len(self.frame_ids)

    @property
    def start_frame(self) -> int:
        return self.frame_ids[0]

    @property
    def end_frame(self) -> int:
        return self.frame_ids[-1]


def median_filter_binary(signal: Sequence[bool], window: int = 17) -> np.ndarray:
    """Majority vote over a centered window that shrinks at the edges.

    When a shrunken window holds an even number of samples and the vote ties,
    the sample's own value is kept.
    """
    if window < 1 or window % 2 == 0:
        raise EvenWindow(f"window must be odd and >= 1, got {window}")
    s = np.asarray(signal, dtype=bool)
    n = s.size
    if n == 0:
        return s.copy()
    half = window // 2
    csum = np.concatenate([[0], np.cumsum(s, dtype=np.int64)])
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, n)
    ones = csum[hi] - csum[lo]
    total = hi - lo
    out = 2 * ones > total
    tie = 2 * ones == total
    out[tie] = s[tie]
    return out


def extract_interactions(signal: Sequence[bool], frame_ids: Sequence[int] | None = None
                         ) -> list[InteractionSegment]:
    """Maximal runs of True, numbered from 0 in temporal order.

    ``frame_ids`` defaults to positions 0..n-1. Runs are also split where
    consecutive frame ids are not adjacent.
    """
    s = np.asarray(signal, dtype=bool)
    fids = np.arange(s.size) if frame_ids is None else np.asarray(frame_ids, dtype=np.int64)
    if fids.shape != s.shape:
        raise ValidationError("frame_ids must match the signal length")
    segments: list[InteractionSegment] = []
    run: list[int] = []
    for on, fid in zip(s, fids):
        if on and run and fid != run[-1] + 1:
            segments.append(InteractionSegment(len(segments), tuple(run)))
            run = []
        if on:
            run.append(int(fid))
        elif run:
            segments.append(InteractionSegment(len(segments), tuple(run)))
            run = []
    if run:
        segments.append(InteractionSegment(len(segments), tuple(run)))
    return segments


def _stratified_pick(frames: np.ndarray, n_strata: int, rng: np.random.Generator) -> np.ndarray:
    if frames.size <= n_strata:
        return frames.copy()
    return np.array([part[rng.integers(part.size)] for part in np.array_split(frames, n_strata)])


def interval_sample(segment: InteractionSegment | Sequence[int], n_intervals: int = 16,
                    seed: int | np.random.Generator = 0) -> np.ndarray:
    """One random frame from each of ``n_intervals`` near-equal contiguous intervals.

    Segments shorter than ``n_intervals`` are returned whole.
    """
    frames = np.asarray(getattr(segment, "frame_ids", segment), dtype=np.int64)
    if frames.size == 0:
        raise ValidationError("segment is empty")
    if n_intervals < 1:
        raise ValidationError("n_intervals must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return _stratified_pick(frames, n_intervals, rng)


def sample_interactions(segments: Sequence[InteractionSegment], n_intervals: int = 16,
                        seed: int = 0) -> np.ndarray:
    """Apply :func:`interval_sample` to every segment with independent seeded streams."""
    picks = [interval_sample(seg, n_intervals, np.random.default_rng([seed, seg.interaction_id]))
             for seg in segments]
    return np.concatenate(picks) if picks else np.empty(0, dtype=np.int64)


def uniform_task_sample(frames_by_task: Mapping[str, Sequence[int]], max_per_task: int = 16,
                        seed: int = 0) -> np.ndarray:
    """Up to ``max_per_task`` frames per task, one per evenly spaced stratum.

    Returns the selected frame ids in ascending order.
    """
    if max_per_task < 1:
        raise ValidationError("max_per_task must be >= 1")
    if any(t is None or t == "" for t in frames_by_task):
        raise MissingTaskIds("frames without a task id cannot be balanced per task")
    picks = []
    for i, task in enumerate(sorted(frames_by_task)):
        frames = np.sort(np.asarray(frames_by_task[task], dtype=np.int64))
        picks.append(_stratified_pick(frames, max_per_task, np.random.default_rng([seed, i])))
    return np.sort(np.concatenate(picks)) if picks else np.empty(0, dtype=np.int64)


def group_by_task(frame_ids: Sequence[int], task_ids: Sequence[str | None]) -> dict[str, list[int]]:
    missing = [f for f, t in zip(frame_ids, task_ids) if t is None or t == ""]
    if missing:
        raise MissingTaskIds(f"{len(missing)} frames lack a task id (first: {missing[0]})")
    groups: dict[str, list[int]] = {}
    for f, t in zip(frame_ids, task_ids):
        groups.setdefault(t, []).append(int(f))
    return groups


def label_phases(segment: InteractionSegment) -> InteractionSegment:
    """Mark the first and last ceil(10%) of frames transitory, the rest stable."""
    length = len(segment)
    if length < 3:
        labels = [TRANSITORY] * length
    else:
        edge = math.ceil(0.1 * length)
        labels = [TRANSITORY if (i < edge or i >= length - edge) else STABLE for i in range(length)]
    return InteractionSegment(segment.interaction_id, segment.frame_ids, tuple(labels))


def write_segment_table(segments: Sequence[InteractionSegment], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["interaction_id", "start_frame", "end_frame", "n_frames"])
        for seg in segments:
            w.writerow([seg.interaction_id, seg.start_frame, seg.end_frame, len(seg)])


def read_segment_table(path: str | Path) -> list[InteractionSegment]:
    segments = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            start, end = int(row["start_frame"]), int(row["end_frame"])
            segments.append(InteractionSegment(int(row["interaction_id"]), tuple(range(start, end + 1))))
    return segments
