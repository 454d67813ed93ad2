"""Pipeline configuration with the published defaults.

Defaults: median window 17, 16 intervals per interaction, 16 frames per task,
clusters under 10 frames dropped, 30 review frames, 10 report intervals,
pose weight 5.0, GMM with tied covariance (100 restarts, 300 steps,
regularization starting at 1e-6), k-means 300 iterations / 1e-4 tolerance.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path

from .clustering.model import COVARIANCE_TYPES
from .errors import MissingFile, ValidationError

FEATURE_SPACES = ("pose2d", "pose2d_conf", "pose3d", "appearance_avg", "appearance_max", "fused")
SELECTION_METHODS = ("fixed", "bic_elbow", "silhouette_max")
SAMPLING_MODES = ("interactions", "task", "none")
ENGINES = ("kmeans", "gmm", "spectral")


@dataclass(frozen=True)
class KMeansConfig:
    p: float = 2.0
    max_iter: int = 300
    rel_tol: float = 1e-4
    n_init: int = 10

    def __post_init__(self):
        if not self.p > 0:
            raise ValidationError("kmeans.p must be > 0")


@dataclass(frozen=True)
class GMMConfig:
    covariance: str = "tied"
    n_init: int = 100
    max_steps: int = 300
    reg: float = 1e-6
    tol: float = 1e-3
    # restarts per k while sweeping k; the chosen k is refit with n_init
    sweep_n_init: int = 10

    def __post_init__(self):
        if self.covariance not in COVARIANCE_TYPES:
            raise ValidationError(f"gmm.covariance must be one of {COVARIANCE_TYPES}")
        if self.n_init < 1 or self.sweep_n_init < 1 or self.max_steps < 0 or not self.reg > 0:
            raise ValidationError("invalid gmm settings")


@dataclass(frozen=True)
class SpectralConfig:
    n_neighbors: int = 20
    n_init: int = 10

    def __post_init__(self):
        if self.n_neighbors < 1:
            raise ValidationError("spectral.n_neighbors must be >= 1")


@dataclass(frozen=True)
class EngineConfig:
    name: str = "gmm"
    kmeans: KMeansConfig = field(default_factory=KMeansConfig)
    gmm: GMMConfig = field(default_factory=GMMConfig)
    spectral: SpectralConfig = field(default_factory=SpectralConfig)

    def __post_init__(self):
        if self.name not in ENGINES:
            raise ValidationError(f"engine must be one of {ENGINES}, got {self.name!r}")


@dataclass(frozen=True)
class SamplingConfig:
    mode: str = "interactions"
    median_window: int = 17
    n_intervals: int = 16
    task_cap: int = 16

    def __post_init__(self):
        if self.mode not in SAMPLING_MODES:
            raise ValidationError(f"sampling.mode must be one of {SAMPLING_MODES}")
        if self.median_window < 1 or self.median_window % 2 == 0:
            raise ValidationError("sampling.median_window must be odd and >= 1")
        if self.n_intervals < 1 or self.task_cap < 1:
            raise ValidationError("sampling counts must be >= 1")


@dataclass(frozen=True)
class PipelineConfig:
    feature_space: str = "fused"
    fused_pose: str = "pose3d"
    fused_appearance: str = "appearance_avg"
    pose_weight: float = 5.0
    thumb_weight: float = 1.0
    engine: EngineConfig = field(default_factory=EngineConfig)
    k: int | None = None
    k_range: tuple[int, int] = (2, 15)
    selection: str = "bic_elbow"
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    min_cluster_size: int = 10
    review_n: int = 30
    report_intervals: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.feature_space not in FEATURE_SPACES:
            raise ValidationError(f"feature_space must be one of {FEATURE_SPACES}")
        if self.fused_pose not in ("pose2d", "pose2d_conf", "pose3d"):
            raise ValidationError("fused_pose must be a pose feature space")
        if self.fused_appearance not in ("appearance_avg", "appearance_max"):
            raise ValidationError("fused_appearance must be an appearance feature space")
        if not 0.001 <= self.pose_weight <= 100.0:
            raise ValidationError("pose_weight must lie in [0.001, 100]")
        if not self.thumb_weight > 0:
            raise ValidationError("thumb_weight must be > 0")
        object.__setattr__(self, "k_range", tuple(int(v) for v in self.k_range))
        if len(self.k_range) != 2 or not 1 <= self.k_range[0] <= self.k_range[1]:
            raise ValidationError("k_range must be [k_min, k_max] with 1 <= k_min <= k_max")
        if self.selection not in SELECTION_METHODS:
            raise ValidationError(f"selection must be one of {SELECTION_METHODS}")
        if self.selection == "fixed" and (self.k is None or self.k < 1):
            raise ValidationError("selection 'fixed' needs k >= 1")
        if self.min_cluster_size < 1 or self.review_n < 1 or self.report_intervals < 1:
            raise ValidationError("min_cluster_size, review_n and report_intervals must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["k_range"] = list(self.k_range)
        return d

    def hash(self) -> str:
        """Short digest of the canonical JSON form; stamped on every stage output."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        return _build(cls, d)

    @classmethod
    def from_json(cls, path: str | Path) -> "PipelineConfig":
        if not Path(path).exists():
            raise MissingFile(str(path))
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def override(self, **changes) -> "PipelineConfig":
        """Apply dotted overrides such as ``{"engine.gmm.n_init": 5}``."""
        d = self.to_dict()
        for key, value in changes.items():
            node = d
            parts = key.split(".")
            for part in parts[:-1]:
                if part not in node or not isinstance(node[part], dict):
                    raise ValidationError(f"unknown config field {key!r}")
                node = node[part]
            if parts[-1] not in node:
                raise ValidationError(f"unknown config field {key!r}")
            node[parts[-1]] = value
        return PipelineConfig.from_dict(d)


def _build(cls, d: dict):
    if not isinstance(d, dict):
        raise ValidationError(f"expected an object for {cls.__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = set(d) - set(known)
    if unknown:
        raise ValidationError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    kwargs = {}
    defaults = cls()
    for name, value in d.items():
        default = getattr(defaults, name)
        kwargs[name] = _build(type(default), value) if is_dataclass(default) else value
    try:
        return replace(defaults, **kwargs)
    except TypeError as exc:
        raise ValidationError(str(exc)) from None
