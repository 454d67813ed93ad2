"""Unsupervised grasp taxonomy discovery from egocentric hand pose and appearance.

Submodules
----------
ingestion     frame records, manifests and CSV readers/writers
registration  rigid pose canonicalization and pose feature rows
fusion        z-score normalization and weighted pose/appearance fusion
clustering    Lp k-means, Gaussian mixture EM and spectral clustering
selection     BIC elbow / silhouette choice of k, small-cluster filtering
metrics       silhouette, maximum match, Fowlkes-Mallows, NMI, review sheets
temporal      contact smoothing, interaction segments and frame sampling
report        sharpness scoring and per-cluster keyframe reports
pipeline      the prepare / cluster / evaluate / report stages
"""
from .clustering import ClusterModel, fit_engine, gmm_em, kmeans_lp, spectral_cluster
from .config import EngineConfig, GMMConfig, KMeansConfig, PipelineConfig, SamplingConfig, SpectralConfig
from .errors import GraspTaxError, NumericalError, ValidationError
from .fusion import FeatureMatrix, fuse_views, zscore_normalize
from .ingestion import (AppearanceFeature, Dataset, FrameRecord, HandPose, Manifest, load_dataset,
                        pool_feature_map, write_dataset)
from .metrics import (evaluate_partition, fowlkes_mallows, maximum_match, nmi, purity, redundancy,
                      sample_for_review, silhouette)
from .registration import PoseFeatureConfig, flatten_pose, pose_feature_rows, register_pose
from .report import emit_report, laplacian_variance, select_keyframes
from .selection import estimate_k, filter_small_clusters, select_k_by_silhouette
from .temporal import extract_interactions, interval_sample, median_filter_binary, uniform_task_sample

__version__ = "0.1.0"

__all__ = [
    "AppearanceFeature", "ClusterModel", "Dataset", "EngineConfig", "FeatureMatrix", "FrameRecord",
    "GMMConfig", "GraspTaxError", "HandPose", "KMeansConfig", "Manifest", "NumericalError",
    "PipelineConfig", "PoseFeatureConfig", "SamplingConfig", "SpectralConfig", "ValidationError",
    "emit_report", "estimate_k", "evaluate_partition", "extract_interactions", "filter_small_clusters",
    "fit_engine", "flatten_pose", "fowlkes_mallows", "fuse_views", "gmm_em", "interval_sample",
    "kmeans_lp", "laplacian_variance", "load_dataset", "maximum_match", "median_filter_binary", "nmi",
    "pool_feature_map", "pose_feature_rows", "purity", "redundancy", "register_pose",
    "sample_for_review", "select_k_by_silhouette", "select_keyframes", "silhouette",
    "spectral_cluster", "uniform_task_sample", "write_dataset", "zscore_normalize",
]
