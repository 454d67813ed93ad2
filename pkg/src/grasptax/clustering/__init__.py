"""Clustering engines: Lp k-means, Gaussian mixture EM and spectral clustering."""
from .gmm import gmm_em, log_likelihood, responsibilities, run_em
from .kmeans import kmeans_lp, kmeans_plusplus, minkowski
from .model import ClusterModel
from .spectral import knn_affinity, spectral_cluster, spectral_embedding


def fit_engine(data, k: int, engine, seed: int = 0, workers: int = 1, n_init: int | None = None):
    """Fit the engine named by ``engine`` (an :class:`~grasptax.config.EngineConfig`).

    ``n_init`` overrides the engine's restart count (used by k sweeps).
    """
    if engine.name == "kmeans":
        c = engine.kmeans
        return kmeans_lp(data, k, p=c.p, max_iter=c.max_iter, rel_tol=c.rel_tol,
                         n_init=n_init or c.n_init, seed=seed)
    if engine.name == "gmm":
        c = engine.gmm
        return gmm_em(data, k, covariance=c.covariance, n_init=n_init or c.n_init,
                      max_steps=c.max_steps, reg=c.reg, tol=c.tol, seed=seed, workers=workers)
    c = engine.spectral
    return spectral_cluster(data, k, n_neighbors=c.n_neighbors, seed=seed, n_init=n_init or c.n_init)


__all__ = [
    "ClusterModel",
    "fit_engine",
    "gmm_em",
    "kmeans_lp",
    "kmeans_plusplus",
    "knn_affinity",
    "log_likelihood",
    "minkowski",
    "responsibilities",
    "run_em",
    "spectral_cluster",
    "spectral_embedding",
]
