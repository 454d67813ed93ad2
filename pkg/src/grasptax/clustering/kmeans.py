"""Lloyd-style k-means under a Minkowski (Lp) dissimilarity, incl. fractional p."""
from __future__ import annotations

import numpy as np

from ..errors import KExceedsN, NonFiniteValue, ValidationError
from .model import ClusterModel

P_GRID = (2.0, 1.0, 0.5, 0.1)


def as_array(data) -> tuple[np.ndarray, np.ndarray | None]:
    """Accept a FeatureMatrix or an array; return (float64 2D array, frame_ids)."""
    frame_ids = getattr(data, "frame_ids", None)
    x = np.asarray(getattr(data, "data", data), dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValidationError(f"data must be 2D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteValue("data contains non-finite values")
    return x, frame_ids


def seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def minkowski(x: np.ndarray, centers: np.ndarray, p: float) -> np.ndarray:
    """Dissimilarity ``(sum_i |x_i - c_i|**p)**(1/p)`` for every (row, center) pair.

    Returns an (n, k) array. For p < 1 this is not a metric but is still
    symmetric and zero on the diagonal.
    """
    x = np.atleast_2d(x)
    centers = np.atleast_2d(centers)
    out = np.empty((x.shape[0], centers.shape[0]))
    for j, c in enumerate(centers):
        diff = np.abs(x - c)
        if p == 2:
            out[:, j] = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        elif p == 1:
            out[:, j] = diff.sum(axis=1)
        else:
            out[:, j] = (diff ** p).sum(axis=1) ** (1.0 / p)
    return out


def kmeans_plusplus(x: np.ndarray, k: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding with probabilities proportional to the squared Lp distance."""
    n = x.shape[0]
    idx = [int(rng.integers(n))]
    closest = minkowski(x, x[idx[0]], p)[:, 0] ** 2
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=closest / total))
        else:
            # every point coincides with a chosen center
            free = np.setdiff1d(np.arange(n), idx)
            nxt = int(rng.choice(free))
        idx.append(nxt)
        closest = np.minimum(closest, minkowski(x, x[nxt], p)[:, 0] ** 2)
    return x[idx].copy()


def _lloyd(x, k, p, max_iter, rel_tol, rng):
    centers = kmeans_plusplus(x, k, p, rng)
    prev_cost = None
    trace = []
    converged = False
    n_iter = 0
    while True:
        dist = minkowski(x, centers, p)
        labels = np.argmin(dist, axis=1)
        d_own = dist[np.arange(x.shape[0]), labels]
        cost = float(np.sum(d_own ** 2))
        trace.append(cost)
        if prev_cost is not None and abs(prev_cost - cost) <= rel_tol * prev_cost:
            converged = True
            break
        if n_iter >= max_iter:
            break
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, x)
        new = centers.copy()
        nonempty = counts > 0
        new[nonempty] = sums[nonempty] / counts[nonempty, None]
        if not nonempty.all():
            # empty cluster: move its center onto the point farthest from its own center
            far = np.argsort(-d_own, kind="stable")
            for j, src in zip(np.flatnonzero(~nonempty), far):
                new[j] = x[src]
        centers = new
        prev_cost = cost
        n_iter += 1
    return centers, labels, d_own, cost, converged, n_iter, np.array(trace)


def kmeans_lp(data, k: int, p: float = 2.0, max_iter: int = 300, rel_tol: float = 1e-4,
              n_init: int = 10, seed: int = 0) -> ClusterModel:
    """k-means with kmeans++ seeding and an Lp assignment rule.

    Centers are updated to the arithmetic mean of their members for every p.
    A run stops once the total cost (sum of squared Lp distances) changes by
    less than ``rel_tol`` relative to the previous iteration, or after
    ``max_iter`` center updates. The best of ``n_init`` seeded runs is kept.

    Parameters
    ----------
    data : FeatureMatrix or array_like, shape (n, d)
    k : int
    p : float
        Minkowski exponent, e.g. one of 2, 1, 1/2, 1/10.
    seed : int
        Runs draw from independent child streams of ``SeedSequence(seed)``.
    """
    x, frame_ids = as_array(data)
    n = x.shape[0]
    if k < 1:
        raise ValidationError("k must be >= 1")
    if k > n:
        raise KExceedsN(f"k={k} exceeds n={n}")
    if not p > 0:
        raise ValidationError("p must be > 0")
    best = None
    for child in seed_sequence(seed).spawn(max(1, n_init)):
        run = _lloyd(x, k, p, max_iter, rel_tol, np.random.default_rng(child))
        if best is None or run[3] < best[3]:
            best = run
    centers, labels, d_own, cost, converged, n_iter, trace = best
    return ClusterModel(
        algorithm="kmeans", k=k, assignments=labels, score_per_row=-d_own, center_distance=d_own,
        centers=centers, seed=seed if isinstance(seed, int) else -1, converged=converged, n_iter=n_iter,
        params={"p": float(p), "max_iter": max_iter, "rel_tol": rel_tol, "n_init": n_init, "cost": cost},
        frame_ids=frame_ids, trace=trace,
    )
