"""Spectral clustering on a binary symmetric k-nearest-neighbour graph."""
from __future__ import annotations

import warnings

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import eigsh

from ..errors import DisconnectedGraphWarning, KExceedsN, ValidationError
from .kmeans import as_array, kmeans_lp
from .model import ClusterModel

NEIGHBOR_GRID = (20, 40, 60, 80, 100)
EIGEN_TOL = 1e-10
DENSE_EIGEN_LIMIT = 3000
_CHUNK = 1024


def knn_indices(x: np.ndarray, n_neighbors: int) -> np.ndarray:
    """Indices of each row's ``n_neighbors`` nearest other rows (Euclidean).

    Equal distances are resolved towards the lower row index.
    """
    n = x.shape[0]
    sq = np.einsum("ij,ij->i", x, x)
    out = np.empty((n, n_neighbors), dtype=np.int64)
    for start in range(0, n, _CHUNK):
        stop = min(n, start + _CHUNK)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (x[start:stop] @ x.T)
        np.maximum(d2, 0.0, out=d2)
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        out[start:stop] = np.argsort(d2, axis=1, kind="stable")[:, :n_neighbors]
    return out


def knn_affinity(x: np.ndarray, n_neighbors: int) -> sparse.csr_matrix:
    """Binary adjacency with an edge wherever either endpoint lists the other."""
    n = x.shape[0]
    nbrs = knn_indices(x, n_neighbors)
    rows = np.repeat(np.arange(n), n_neighbors)
    a = sparse.csr_matrix((np.ones(rows.size), (rows, nbrs.ravel())), shape=(n, n))
    a = ((a + a.T) > 0).astype(np.float64)
    return sparse.csr_matrix(a)


def spectral_embedding(affinity: sparse.spmatrix, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-normalized eigenvectors of the k smallest eigenvalues of I - D^-1/2 A D^-1/2."""
    n = affinity.shape[0]
    deg = np.asarray(affinity.sum(axis=1)).ravel()
    inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
    d_half = sparse.diags(inv_sqrt)
    norm_adj = d_half @ affinity @ d_half
    if n <= DENSE_EIGEN_LIMIT:
        lap = np.eye(n) - norm_adj.toarray()
        lap = (lap + lap.T) / 2
        vals, vecs = linalg.eigh(lap, subset_by_index=[0, k - 1])
    else:
        # largest eigenvalues of I + N <=> smallest of I - N
        shifted = sparse.identity(n) + norm_adj
        vals, vecs = eigsh(shifted, k=k, which="LA", tol=EIGEN_TOL,
                           v0=np.full(n, 1.0 / np.sqrt(n)))
        vals = 2.0 - vals
    order = np.lexsort((np.arange(vals.size), vals))
    vals, vecs = vals[order], vecs[:, order]
    # deterministic sign: largest-magnitude entry positive
    pivot = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivot, np.arange(vecs.shape[1])])
    vecs = vecs * np.where(signs == 0, 1.0, signs)
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    emb = np.divide(vecs, norms, out=np.zeros_like(vecs), where=norms > 0)
    return emb, vals


def spectral_cluster(data, k: int, n_neighbors: int = 20, seed: int = 0, n_init: int = 10) -> ClusterModel:
    """Spectral clustering: kNN graph, normalized Laplacian, k-means on the embedding.

    Parameters
    ----------
    data : FeatureMatrix or array_like, shape (n, d)
    k : int
        Number of clusters and of eigenvectors.
    n_neighbors : int
        Neighbours per point in the kNN graph; must be < n.
    """
    x, frame_ids = as_array(data)
    n = x.shape[0]
    if k < 1:
        raise ValidationError("k must be >= 1")
    if k > n:
        raise KExceedsN(f"k={k} exceeds n={n}")
    if not 1 <= n_neighbors < n:
        raise ValidationError(f"n_neighbors must be in [1, n), got {n_neighbors} with n={n}")
    affinity = knn_affinity(x, n_neighbors)
    n_comp, _ = connected_components(affinity, directed=False)
    if n_comp > 1:
        warnings.warn(f"kNN graph has {n_comp} connected components", DisconnectedGraphWarning,
                      stacklevel=2)
    emb, vals = spectral_embedding(affinity, k)
    km = kmeans_lp(emb, k, p=2.0, n_init=n_init, seed=seed)
    return ClusterModel(
        algorithm="spectral", k=k, assignments=km.assignments, score_per_row=km.score_per_row,
        center_distance=km.center_distance, centers=km.centers, seed=seed, converged=km.converged,
        n_iter=km.n_iter,
        params={"n_neighbors": n_neighbors, "eigenvalues": vals.tolist(), "n_components": int(n_comp)},
        frame_ids=frame_ids,
    )
