"""Gaussian mixture EM with full / diagonal / spherical / tied covariances.

Each restart is initialized from a single seeded k-means (p=2) run: its
centers become the component means, the data covariance (reduced to the
configured shape) becomes every component's covariance, weights are uniform.
If a covariance is not positive definite after adding ``reg`` to its diagonal,
the restart is rerun with ``reg`` ten times larger, up to ``MAX_REG``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from ..errors import DimensionMismatch, KExceedsN, SingularCovariance, ValidationError
from .kmeans import as_array, kmeans_lp, seed_sequence
from .model import COVARIANCE_TYPES, ClusterModel

MAX_REG = 1e1
_LOG_2PI = np.log(2 * np.pi)


@dataclass
class EMRun:
    means: np.ndarray
    covariances: np.ndarray
    weights: np.ndarray
    log_prob: np.ndarray  # (n, k) log w_k + log N(x | k) at the final parameters
    trace: np.ndarray  # mean per-row log-likelihood before each M-step and at the end
    log_likelihood: float  # total at the final parameters
    reg: float
    converged: bool
    n_iter: int


def _check_cov_type(covariance_type: str):
    if covariance_type not in COVARIANCE_TYPES:
        raise ValidationError(f"covariance must be one of {COVARIANCE_TYPES}, got {covariance_type!r}")


def _cholesky(cov: np.ndarray) -> np.ndarray:
    try:
        return linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError:
        raise SingularCovariance("covariance is not positive definite") from None


def estimate_log_gaussian(x, means, covariances, covariance_type) -> np.ndarray:
    """log N(x_i | mean_k, cov_k) as an (n, k) array."""
    n, d = x.shape
    k = means.shape[0]
    out = np.empty((n, k))
    if covariance_type == "tied":
        # one shared factor: whiten data and means once
        chol = _cholesky(covariances)
        xw = linalg.solve_triangular(chol, x.T, lower=True)
        mw = linalg.solve_triangular(chol, means.T, lower=True)
        logdet = 2.0 * np.log(np.diag(chol)).sum()
        for j in range(k):
            y = xw - mw[:, j, None]
            out[:, j] = -0.5 * (d * _LOG_2PI + logdet + np.einsum("ij,ij->j", y, y))
    elif covariance_type == "full":
        for j in range(k):
            chol = _cholesky(covariances[j])
            y = linalg.solve_triangular(chol, (x - means[j]).T, lower=True)
            logdet = 2.0 * np.log(np.diag(chol)).sum()
            out[:, j] = -0.5 * (d * _LOG_2PI + logdet + np.einsum("ij,ij->j", y, y))
    elif covariance_type == "diagonal":
        if np.any(covariances <= 0):
            raise SingularCovariance("non-positive variance")
        for j in range(k):
            var = covariances[j]
            out[:, j] = -0.5 * (d * _LOG_2PI + np.log(var).sum() + (((x - means[j]) ** 2) / var).sum(axis=1))
    else:
        if np.any(covariances <= 0):
            raise SingularCovariance("non-positive variance")
        for j in range(k):
            var = covariances[j]
            out[:, j] = -0.5 * (d * _LOG_2PI + d * np.log(var) + ((x - means[j]) ** 2).sum(axis=1) / var)
    return out


def _shape_covariance(cov_full: np.ndarray, k: int, covariance_type: str, reg: float) -> np.ndarray:
    d = cov_full.shape[0]
    if covariance_type == "full":
        return np.repeat((cov_full + reg * np.eye(d))[None], k, axis=0)
    if covariance_type == "tied":
        return cov_full + reg * np.eye(d)
    if covariance_type == "diagonal":
        return np.repeat((np.diag(cov_full) + reg)[None], k, axis=0)
    return np.full(k, np.diag(cov_full).mean() + reg)


def _m_step(x, resp, covariance_type, reg):
    n, d = x.shape
    nk = resp.sum(axis=0) + 10 * np.finfo(float).eps
    weights = nk / nk.sum()
    means = (resp.T @ x) / nk[:, None]
    k = means.shape[0]
    if covariance_type == "full":
        cov = np.empty((k, d, d))
        for j in range(k):
            diff = x - means[j]
            cov[j] = (resp[:, j, None] * diff).T @ diff / nk[j]
            cov[j].flat[:: d + 1] += reg
    elif covariance_type == "tied":
        cov = np.zeros((d, d))
        for j in range(k):
            diff = x - means[j]
            cov += (resp[:, j, None] * diff).T @ diff
        cov /= nk.sum()
        cov.flat[:: d + 1] += reg
    elif covariance_type == "diagonal":
        cov = np.empty((k, d))
        for j in range(k):
            cov[j] = resp[:, j] @ ((x - means[j]) ** 2) / nk[j] + reg
    else:
        cov = np.empty(k)
        for j in range(k):
            cov[j] = resp[:, j] @ ((x - means[j]) ** 2).sum(axis=1) / (nk[j] * d) + reg
    return means, cov, weights


def run_em(x: np.ndarray, init_means: np.ndarray, covariance_type: str = "tied", reg: float = 1e-6,
           max_steps: int = 300, tol: float = 1e-3) -> EMRun:
    """One EM run from the given means at a fixed regularization.

    Stops when the mean per-row log-likelihood changes by less than ``tol`` or
    after ``max_steps`` M-steps. Raises :class:`SingularCovariance` if any
    covariance loses positive definiteness.
    """
    _check_cov_type(covariance_type)
    n, d = x.shape
    k = init_means.shape[0]
    cov_full = np.atleast_2d(np.cov(x, rowvar=False, bias=True)) if n > 1 else np.zeros((d, d))
    means = init_means.copy()
    cov = _shape_covariance(cov_full, k, covariance_type, reg)
    weights = np.full(k, 1.0 / k)
    trace = []
    converged = False
    n_iter = 0
    while True:
        log_prob = estimate_log_gaussian(x, means, cov, covariance_type) + np.log(weights)
        log_norm = logsumexp(log_prob, axis=1)
        ll = float(log_norm.sum())
        trace.append(ll / n)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < tol:
            converged = True
            break
        if n_iter >= max_steps:
            break
        resp = np.exp(log_prob - log_norm[:, None])
        means, cov, weights = _m_step(x, resp, covariance_type, reg)
        n_iter += 1
    return EMRun(means, cov, weights, log_prob, np.array(trace), ll, reg, converged, n_iter)


def _restart(x, k, covariance_type, reg, max_steps, tol, child) -> EMRun:
    init = kmeans_lp(x, k, p=2.0, n_init=1, seed=child).centers
    while True:
        try:
            return run_em(x, init, covariance_type, reg, max_steps, tol)
        except SingularCovariance:
            reg *= 10.0
            if reg > MAX_REG * (1 + 1e-9):
                raise SingularCovariance(
                    f"covariance not positive definite even with regularization {MAX_REG:g}") from None


def gmm_em(data, k: int, covariance: str = "tied", n_init: int = 100, max_steps: int = 300,
           reg: float = 1e-6, tol: float = 1e-3, seed: int = 0, workers: int = 1) -> ClusterModel:
    """Fit a Gaussian mixture by EM and keep the best of ``n_init`` restarts.

    Parameters
    ----------
    data : FeatureMatrix or array_like, shape (n, d)
    k : int
        Number of components.
    covariance : {"full", "spherical", "diagonal", "tied"}
    n_init : int
        Independent restarts; the one with the highest final log-likelihood
        wins (earliest restart on ties).
    reg : float
        Starting value added to covariance diagonals.
    workers : int
        Threads used for restarts. The result does not depend on it.
    """
    _check_cov_type(covariance)
    x, frame_ids = as_array(data)
    n = x.shape[0]
    if k < 1:
        raise ValidationError("k must be >= 1")
    if k > n:
        raise KExceedsN(f"k={k} exceeds n={n}")
    children = seed_sequence(seed).spawn(max(1, n_init))

    def job(child):
        return _restart(x, k, covariance, reg, max_steps, tol, child)

    if workers > 1 and len(children) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(job, children))
    else:
        runs = [job(c) for c in children]
    best = runs[0]
    for run in runs[1:]:
        if run.log_likelihood > best.log_likelihood:
            best = run
    return _to_model(x, frame_ids, best, k, covariance, seed,
                     {"n_init": n_init, "max_steps": max_steps, "reg_start": reg, "tol": tol})


def _to_model(x, frame_ids, run: EMRun, k, covariance, seed, params) -> ClusterModel:
    log_norm = logsumexp(run.log_prob, axis=1)
    labels = np.argmax(run.log_prob, axis=1)
    rows = np.arange(x.shape[0])
    log_resp = run.log_prob[rows, labels] - log_norm
    dist = np.linalg.norm(x - run.means[labels], axis=1)
    return ClusterModel(
        algorithm="gmm", k=k, assignments=labels, score_per_row=log_resp, center_distance=dist,
        centers=run.means, seed=seed, converged=run.converged, n_iter=run.n_iter,
        covariance_type=covariance, covariances=run.covariances, weights=run.weights, reg=run.reg,
        log_likelihood=run.log_likelihood, params={"covariance": covariance, **params},
        frame_ids=frame_ids, trace=run.trace,
    )


def log_likelihood(model: ClusterModel, data) -> float:
    """Total log-likelihood ``sum_i log sum_k w_k N(x_i | mean_k, cov_k)``."""
    if model.algorithm != "gmm":
        raise ValidationError("log_likelihood needs a GMM model")
    if model.filtered:
        raise ValidationError("log_likelihood is undefined on a filtered model view")
    x, _ = as_array(data)
    if x.shape[1] != model.centers.shape[1]:
        raise DimensionMismatch(f"model has d={model.centers.shape[1]}, data has d={x.shape[1]}")
    log_prob = estimate_log_gaussian(x, model.centers, model.covariances, model.covariance_type)
    return float(logsumexp(log_prob + np.log(model.weights), axis=1).sum())


def responsibilities(model: ClusterModel, data) -> np.ndarray:
    """Posterior component probabilities, shape (n, k); rows sum to 1."""
    x, _ = as_array(data)
    if x.shape[1] != model.centers.shape[1]:
        raise DimensionMismatch(f"model has d={model.centers.shape[1]}, data has d={x.shape[1]}")
    log_prob = estimate_log_gaussian(x, model.centers, model.covariances, model.covariance_type)
    log_prob += np.log(model.weights)
    return np.exp(log_prob - logsumexp(log_prob, axis=1)[:, None])
