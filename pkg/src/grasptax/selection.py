"""Choosing the number of clusters and dropping trivially small clusters."""
from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .clustering import ClusterModel, fit_engine, log_likelihood
from .clustering.kmeans import as_array
from .config import EngineConfig
from .errors import (
    DimensionMismatch,
    EmptyModelWarning,
    KExceedsN,
    LowCurvatureWarning,
    RangeTooNarrow,
    ValidationError,
)
from .metrics import silhouette

logger = logging.getLogger(__name__)

# an elbow is "pronounced" if its second difference is at least this share of the BIC span
LOW_CURVATURE_RATIO = 0.25


@dataclass(frozen=True, eq=False)
class KSweepResult:
    k_values: tuple[int, ...]
    criterion: tuple[float, ...]
    chosen_k: int
    method: str
    low_curvature: bool = False
    model: ClusterModel | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {
            "k_values": list(self.k_values),
            "criterion": list(self.criterion),
            "chosen_k": self.chosen_k,
            "method": self.method,
            "low_curvature": self.low_curvature,
        }
        if self.method == "bic_elbow":
            out["criterion_convention"] = "BIC = p*ln(n) - 2*logL, lower is better"
        return out


def n_parameters(k: int, d: int, covariance: str) -> int:
    """Free parameters of a k-component, d-dimensional mixture."""
    cov = {
        "full": k * d * (d + 1) // 2,
        "tied": d * (d + 1) // 2,
        "diagonal": k * d,
        "spherical": k,
    }[covariance]
    return k * d + (k - 1) + cov


def bic(model: ClusterModel, data) -> float:
    """Bayesian information criterion ``p ln(n) - 2 logL`` of a fitted GMM."""
    if model.algorithm != "gmm":
        raise ValidationError("bic needs a GMM model")
    x, _ = as_array(data)
    n, d = x.shape
    if d != model.centers.shape[1]:
        raise DimensionMismatch(f"model has d={model.centers.shape[1]}, data has d={d}")
    return n_parameters(model.k, d, model.covariance_type) * np.log(n) - 2.0 * log_likelihood(model, x)


def _k_values(k_range, n: int) -> list[int]:
    k_min, k_max = int(k_range[0]), int(k_range[-1])
    if k_min < 1 or k_max < k_min:
        raise ValidationError(f"bad k range {k_range!r}")
    if k_max > n:
        raise KExceedsN(f"k_max={k_max} exceeds n={n}")
    return list(range(k_min, k_max + 1))


def _sweep_seeds(seed: int, k_values) -> dict[int, int]:
    state = np.random.SeedSequence(seed).generate_state(len(k_values))
    return {k: int(s) for k, s in zip(k_values, state)}


def _sweep(job, k_values, workers):
    if workers > 1 and len(k_values) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(job, k_values))
    return [job(k) for k in k_values]


def elbow_index(values) -> int:
    """Interior position with the largest discrete second difference (first on ties)."""
    v = np.asarray(values, dtype=np.float64)
    second = v[:-2] - 2.0 * v[1:-1] + v[2:]
    return int(np.argmax(second)) + 1


def estimate_k(data, k_range=(2, 15), engine: EngineConfig | None = None, seed: int = 0,
               workers: int = 1) -> KSweepResult:
    """BIC elbow over a range of GMM fits.

    Each k is fitted with ``engine.gmm.sweep_n_init`` restarts; the chosen k is
    refit with the full ``engine.gmm.n_init`` and returned as ``result.model``.
    """
    engine = engine or EngineConfig()
    if engine.name != "gmm":
        engine = replace(engine, name="gmm")
    x, frame_ids = as_array(data)
    k_values = _k_values(k_range, x.shape[0])
    if len(k_values) < 3:
        raise RangeTooNarrow("the BIC elbow needs at least 3 values of k")
    seeds = _sweep_seeds(seed, k_values)

    def job(k):
        m = fit_engine(x, k, engine, seed=seeds[k], n_init=engine.gmm.sweep_n_init)
        return bic(m, x)

    curve = _sweep(job, k_values, workers)
    pos = elbow_index(curve)
    chosen = k_values[pos]
    span = max(curve) - min(curve)
    second = curve[pos - 1] - 2 * curve[pos] + curve[pos + 1]
    low = bool(span <= 0 or second < LOW_CURVATURE_RATIO * span)
    if low:
        warnings.warn("BIC curve has no pronounced elbow; chosen k is weakly supported",
                      LowCurvatureWarning, stacklevel=2)
    model = fit_engine(x, chosen, engine, seed=seed, workers=workers)
    model = replace(model, frame_ids=frame_ids)
    return KSweepResult(tuple(k_values), tuple(float(c) for c in curve), chosen, "bic_elbow", low, model)


def _safe_silhouette(x, labels) -> float:
    present = np.unique(labels)
    if present.size < 2:
        return -1.0
    return silhouette(x, labels)


def select_k_by_silhouette(data, k_range=(2, 10), engine: EngineConfig | None = None, seed: int = 0,
                           workers: int = 1) -> KSweepResult:
    """Pick the k with the highest mean silhouette (smaller k on ties).

    A fit that collapses to a single non-empty cluster scores -1.
    """
    engine = engine or EngineConfig()
    x, frame_ids = as_array(data)
    k_values = _k_values(k_range, x.shape[0])
    if k_values[0] < 2:
        raise ValidationError("silhouette needs k >= 2")
    seeds = _sweep_seeds(seed, k_values)

    def job(k):
        m = fit_engine(x, k, engine, seed=seeds[k])
        return m, _safe_silhouette(x, m.assignments)

    results = _sweep(job, k_values, workers)
    scores = [s for _, s in results]
    pos = int(np.argmax(scores))
    model = replace(results[pos][0], frame_ids=frame_ids)
    return KSweepResult(tuple(k_values), tuple(float(s) for s in scores), k_values[pos],
                        "silhouette_max", False, model)


def filter_small_clusters(model: ClusterModel, min_size: int = 10) -> ClusterModel:
    """Drop clusters with fewer than ``min_size`` members.

    Rows of dropped clusters get assignment -1; surviving clusters are
    renumbered 0..k'-1 in their original order.
    """
    sizes = model.cluster_sizes()
    keep = np.flatnonzero(sizes >= min_size)
    if keep.size == 0:
        warnings.warn("every cluster is smaller than min_size; nothing left to report",
                      EmptyModelWarning, stacklevel=2)
    dropped = int(sizes[sizes < min_size].sum())
    if dropped:
        logger.info("dropping %d clusters (%d rows) below %d members",
                    model.k - keep.size, dropped, min_size)
    remap = np.full(model.k + 1, -1, dtype=np.int64)
    remap[keep] = np.arange(keep.size)
    assignments = remap[model.assignments]  # index -1 hits the trailing -1
    previous = model.source_clusters or tuple(range(model.k))
    covs = model.covariances
    if covs is not None and model.covariance_type != "tied":
        covs = covs[keep]
    return replace(
        model,
        k=int(keep.size),
        assignments=assignments,
        centers=model.centers[keep],
        covariances=covs,
        weights=None if model.weights is None else model.weights[keep],
        source_clusters=tuple(int(previous[j]) for j in keep),
    )
