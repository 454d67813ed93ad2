"""Cluster validity indices and the purity/redundancy review protocol.

Internal index: mean silhouette. External indices (need ground truth):
maximum match, Fowlkes-Mallows and NMI with arithmetic-mean normalization.
"""
from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .errors import LengthMismatch, MissingLabels, SingleCluster, ValidationError

_CHUNK = 2048


@dataclass(frozen=True)
class PartitionMetrics:
    silhouette: float | None = None
    mm: float | None = None
    flk: float | None = None
    nmi: float | None = None

    def to_dict(self) -> dict:
        return {"silhouette": self.silhouette, "mm": self.mm, "flk": self.flk, "nmi": self.nmi}


@dataclass(frozen=True)
class ReviewSheet:
    cluster_id: int
    sampled_frame_ids: tuple[int, ...]
    dominant_label: str | None = None


def _as_labels(a) -> np.ndarray:
    return np.asarray(list(a) if not isinstance(a, np.ndarray) else a)


def contingency(pred, truth) -> np.ndarray:
    """Counts table with one row per predicted cluster and one column per class."""
    pred, truth = _as_labels(pred), _as_labels(truth)
    if pred.shape != truth.shape:
        raise LengthMismatch(f"pred has {pred.size} entries, truth has {truth.size}")
    _, pi = np.unique(pred, return_inverse=True)
    _, ti = np.unique(truth, return_inverse=True)
    table = np.zeros((pi.max() + 1 if pi.size else 0, ti.max() + 1 if ti.size else 0), dtype=np.int64)
    np.add.at(table, (pi, ti), 1)
    return table


def silhouette(data, assignments) -> float:
    """Mean silhouette coefficient under Euclidean distance.

    Members of singleton clusters contribute 0.
    """
    x = np.asarray(getattr(data, "data", data), dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    labels = _as_labels(assignments)
    if labels.shape[0] != x.shape[0]:
        raise LengthMismatch("assignments must have one entry per row")
    ids, inv = np.unique(labels, return_inverse=True)
    k = ids.size
    if k < 2:
        raise SingleCluster("silhouette needs at least 2 clusters")
    n = x.shape[0]
    onehot = np.zeros((n, k))
    onehot[np.arange(n), inv] = 1.0
    sizes = onehot.sum(axis=0)
    sums = np.empty((n, k))
    for start in range(0, n, _CHUNK):
        stop = min(n, start + _CHUNK)
        sums[start:stop] = cdist(x[start:stop], x) @ onehot
    own_size = sizes[inv]
    rows = np.arange(n)
    with np.errstate(invalid="ignore", divide="ignore"):
        a = sums[rows, inv] / (own_size - 1)
        means = sums / sizes
    means[rows, inv] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own_size > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(s.mean())


def maximum_match(pred, truth) -> float:
    """Share of rows on the optimal one-to-one cluster-to-class matching."""
    table = contingency(pred, truth)
    if table.sum() == 0:
        raise ValidationError("maximum_match needs at least one row")
    r, c = linear_sum_assignment(table, maximize=True)
    return float(table[r, c].sum() / table.sum())


def _comb2(v) -> float:
    v = np.asarray(v, dtype=np.float64)
    return float((v * (v - 1) / 2).sum())


def fowlkes_mallows(pred, truth) -> float:
    """TP / sqrt((TP + FP)(TP + FN)) over unordered row pairs."""
    table = contingency(pred, truth)
    if table.sum() < 2:
        raise ValidationError("fowlkes_mallows needs at least two rows")
    tp = _comb2(table)
    pred_pairs = _comb2(table.sum(axis=1))
    truth_pairs = _comb2(table.sum(axis=0))
    if tp == 0 or pred_pairs == 0 or truth_pairs == 0:
        return 0.0
    return float(tp / math.sqrt(pred_pairs * truth_pairs))


def _entropy(counts, n) -> float:
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(pred, truth) -> float:
    """Mutual information over the arithmetic mean of the two entropies (natural log)."""
    table = contingency(pred, truth)
    n = table.sum()
    if n == 0:
        raise ValidationError("nmi needs at least one row")
    nonzero = table > 0
    if np.all(nonzero.sum(axis=0) == 1) and np.all(nonzero.sum(axis=1) == 1):
        return 1.0  # the partitions agree up to relabelling
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    h_pred, h_truth = _entropy(rows, n), _entropy(cols, n)
    if h_pred == 0 or h_truth == 0:
        return 0.0
    nz = np.nonzero(table)
    nij = table[nz].astype(np.float64)
    mi = float((nij / n * (np.log(nij * n) - np.log(rows[nz[0]] * cols[nz[1]].astype(np.float64)))).sum())
    return float(min(1.0, max(0.0, mi / ((h_pred + h_truth) / 2))))


def evaluate_partition(data, pred, truth=None) -> PartitionMetrics:
    """Silhouette always; MM, FLK and NMI only when ``truth`` is given."""
    sil = silhouette(data, pred)
    if truth is None:
        return PartitionMetrics(silhouette=sil)
    return PartitionMetrics(sil, maximum_match(pred, truth), fowlkes_mallows(pred, truth), nmi(pred, truth))


# --------------------------------------------------------------------------- review protocol


def sample_for_review(model, cluster_id: int, n: int = 30, seed: int = 0) -> ReviewSheet:
    """Stratified sample of ``n`` members ordered by distance to the cluster center.

    Members are sorted by ascending center distance and cut into contiguous
    groups of ``ceil(N / n)``; one member is drawn uniformly from each group.
    Clusters with at most ``n`` members are returned whole.
    """
    rows = model.members(cluster_id)
    if rows.size == 0:
        raise ValidationError(f"cluster {cluster_id} is empty")
    order = rows[np.argsort(model.center_distance[rows], kind="stable")]
    fids = model.row_frame_ids()[order]
    if order.size <= n:
        return ReviewSheet(cluster_id, tuple(int(f) for f in fids))
    rng = np.random.default_rng([seed, cluster_id])
    size = math.ceil(order.size / n)
    picks = [int(fids[start + rng.integers(min(size, order.size - start))])
             for start in range(0, order.size, size)]
    return ReviewSheet(cluster_id, tuple(picks))


def _frame_labels(frames, labels: Mapping) -> list:
    out = []
    for f in frames:
        lab = labels.get(int(f)) if hasattr(labels, "get") else labels[int(f)]
        if lab is None:
            raise MissingLabels(f"frame {f} has no label")
        out.append(lab)
    return out


def modal_label(values: Sequence) -> tuple[object, float]:
    """Most frequent label (lexicographically smallest on ties) and its share."""
    if len(values) == 0:
        raise MissingLabels("no labels to take a mode of")
    counts = Counter(values)
    top = max(counts.values())
    label = min(lab for lab, c in counts.items() if c == top)
    return label, top / len(values)


def purity(sheet_or_cluster, labels: Mapping[int, str]) -> float:
    """Share of the sheet's (or the given frame ids') frames carrying the modal label."""
    frames = getattr(sheet_or_cluster, "sampled_frame_ids", sheet_or_cluster)
    return modal_label(_frame_labels(frames, labels))[1]


def redundancy(per_cluster_labels: Iterable[Sequence]) -> float:
    """Share of clusters whose majority label already dominates an earlier cluster.

    A cluster counts as redundant when its modal share exceeds 0.5 and an
    earlier cluster has the same modal label with a share above 0.5.
    """
    modes = [modal_label(list(labs)) for labs in per_cluster_labels]
    if not modes:
        raise MissingLabels("redundancy needs at least one cluster")
    seen = set()
    redundant = 0
    for label, share in modes:
        if share > 0.5:
            if label in seen:
                redundant += 1
            seen.add(label)
    return redundant / len(modes)


def write_review_csv(sheets: Sequence[ReviewSheet], path: str | Path,
                     image_paths: Mapping[int, str] | None = None) -> None:
    """Write ``cluster_id, rank, frame_id, image_path`` rows for manual inspection."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster_id", "rank", "frame_id", "image_path"])
        for sheet in sheets:
            for rank, fid in enumerate(sheet.sampled_frame_ids):
                w.writerow([sheet.cluster_id, rank, fid, (image_paths or {}).get(fid, "")])
