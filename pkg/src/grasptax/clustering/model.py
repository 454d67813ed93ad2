from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from ..errors import SchemaError, UnknownCluster, ValidationError

ALGORITHMS = ("kmeans", "gmm", "spectral")
COVARIANCE_TYPES = ("full", "spherical", "diagonal", "tied")


@dataclass(frozen=True, eq=False)
class ClusterModel:
    """Output of one clustering engine fit.

    Attributes
    ----------
    assignments : ndarray of int, shape (n,)
        Cluster index per row; ``-1`` marks rows dropped by
        :func:`grasptax.selection.filter_small_clusters`.
    score_per_row : ndarray, shape (n,)
        Association of each row with its cluster (higher is closer). GMM: log
        responsibility of the assigned component. k-means / spectral: negative
        distance to the assigned center.
    center_distance : ndarray, shape (n,)
        Distance of each row to its cluster center (Lp for k-means, Euclidean
        in the embedding for spectral, Euclidean to the component mean for GMM).
    centers : ndarray, shape (k, d)
        k-means centers, GMM means, or spectral embedding centers.
    source_clusters : tuple of int or None
        Original cluster ids of the surviving clusters for a filtered view.
    """

    algorithm: str
    k: int
    assignments: np.ndarray
    score_per_row: np.ndarray
    center_distance: np.ndarray
    centers: np.ndarray
    seed: int
    converged: bool
    n_iter: int
    covariance_type: str | None = None
    covariances: np.ndarray | None = None
    weights: np.ndarray | None = None
    reg: float | None = None
    log_likelihood: float | None = None
    params: dict = field(default_factory=dict)
    frame_ids: np.ndarray | None = None
    source_clusters: tuple[int, ...] | None = None
    trace: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValidationError(f"unknown algorithm {self.algorithm!r}")
        a = np.asarray(self.assignments, dtype=np.int64)
        object.__setattr__(self, "assignments", a)
        for name in ("score_per_row", "center_distance", "centers", "covariances", "weights", "trace"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, np.asarray(value, dtype=np.float64))
        if self.frame_ids is not None:
            object.__setattr__(self, "frame_ids", np.asarray(self.frame_ids, dtype=np.int64))
        if a.size and (a.max() >= self.k or a.min() < -1):
            raise ValidationError("assignments out of range")
        if self.centers.shape[0] != self.k:
            raise ValidationError(f"expected {self.k} centers, got {self.centers.shape[0]}")

    @property
    def n_rows(self) -> int:
        return self.assignments.shape[0]

    @property
    def filtered(self) -> bool:
        return self.source_clusters is not None

    def cluster_sizes(self) -> np.ndarray:
        a = self.assignments
        return np.bincount(a[a >= 0], minlength=self.k)

    def members(self, cluster_id: int) -> np.ndarray:
        """Row indices of ``cluster_id``."""
        if not 0 <= cluster_id < self.k:
            raise UnknownCluster(f"cluster {cluster_id} not in model with k={self.k}")
        return np.flatnonzero(self.assignments == cluster_id)

    def row_frame_ids(self) -> np.ndarray:
        return self.frame_ids if self.frame_ids is not None else np.arange(self.n_rows)

    # ------------------------------------------------------------------ JSON

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, np.ndarray):
                value = value.tolist()
            elif isinstance(value, tuple):
                value = list(value)
            elif isinstance(value, (np.floating, np.integer)):
                value = value.item()
            out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ClusterModel":
        known = {f.name for f in fields(cls)}
        try:
            kwargs = {k: v for k, v in d.items() if k in known}
            if kwargs.get("source_clusters") is not None:
                kwargs["source_clusters"] = tuple(kwargs["source_clusters"])
            return cls(**kwargs)
        except TypeError as exc:
            raise SchemaError(f"bad model document: {exc}") from None

    def to_json(self, path: str | Path | None = None, **extra) -> str:
        text = json.dumps({**extra, "model": self.to_dict()}, indent=1)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, path: str | Path) -> "ClusterModel":
        with open(path) as fh:
            doc = json.load(fh)
        return cls.from_dict(doc["model"] if "model" in doc else doc)
