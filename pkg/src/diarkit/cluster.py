"""Multi-kernel consensus spectral clustering of speaker-embedding windows.

The pipeline per kernel is: pairwise affinity -> k-nearest-neighbour
sparsification -> symmetric degree normalization.  The per-kernel affinities
are fused by an elementwise mean, embedded through the normalized-Laplacian
spectrum, and assigned with seeded k-means.  The speaker count is taken from
the largest eigengap when not supplied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, ClusterMixin

from .formats import EmbeddingSet
from .validation import as_float_matrix, as_float_vector, check_square

__all__ = [
    "KERNEL_KINDS",
    "SpectralDecomposition",
    "kernel_affinity",
    "arccos1_raw",
    "knn_sparsify",
    "degree_normalize",
    "spectral_embed",
    "estimate_k",
    "kmeans",
    "consensus_cluster",
    "ConsensusSpectralClustering",
]

KERNEL_KINDS = ("exponential", "arccosine1")

_ZERO_NORM = 1e-30


@dataclass(frozen=True)
class SpectralDecomposition:
    """Smallest eigenpairs of a normalized graph Laplacian.

    Eigenvalues are ascending in [0, 2]; the first one of a connected graph
    is zero to solver precision.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _embedding_rows(X) -> np.ndarray:
    if isinstance(X, EmbeddingSet):
        return as_float_matrix(X.rows, name="embeddings")
    return as_float_matrix(X, name="embeddings")


def kernel_affinity(X, kind: str) -> np.ndarray:
    """Pairwise affinity matrix of embedding rows under one kernel.

    exponential:  exp(-||xi - xj|| / sigma) with sigma the median pairwise
    Euclidean distance (parameter-free and scale-adaptive; an all-identical
    input makes sigma zero and the affinity all-ones).

    arccosine1:  the order-1 arc-cosine kernel
    ||xi|| ||xj|| (sin t + (pi - t) cos t) / pi with t the angle between the
    vectors, rescaled by sqrt(A[i,i] * A[j,j]) so entries lie in [0, 1]; the
    norms cancel and only the angular factor remains.
    """
    rows = _embedding_rows(X)
    n = rows.shape[0]
    if kind == "exponential":
        dist = cdist(rows, rows, metric="euclidean")
        upper = dist[np.triu_indices(n, 1)]
        sigma = float(np.median(upper)) if upper.size else 0.0
        affinity = np.exp(-dist / sigma) if sigma > 0 else np.ones_like(dist)
    elif kind == "arccosine1":
        norms = np.linalg.norm(rows, axis=1)
        bad = np.where(norms < _ZERO_NORM)[0]
        if bad.size:
            raise ValueError(f"zero-norm vector at row {bad[0]}; arccosine1 kernel undefined")
        cos = np.clip((rows @ rows.T) / np.outer(norms, norms), -1.0, 1.0)
        theta = np.arccos(cos)
        affinity = (np.sin(theta) + (np.pi - theta) * np.cos(theta)) / np.pi
    else:
        raise ValueError(f"unknown kernel {kind!r}; expected one of {KERNEL_KINDS}")
    affinity = 0.5 * (affinity + affinity.T)
    np.fill_diagonal(affinity, 1.0)
    return affinity


def arccos1_raw(x, y) -> float:
    """Order-1 arc-cosine kernel value before rescaling.

    Closed form of the Gaussian integral 2*E[relu(w.x) * relu(w.y)] over
    w ~ N(0, I).
    """
    xv, yv = as_float_vector(x), as_float_vector(y)
    nx, ny = np.linalg.norm(xv), np.linalg.norm(yv)
    if nx < _ZERO_NORM or ny < _ZERO_NORM:
        raise ValueError("zero-norm vector; arccosine1 kernel undefined")
    cos = float(np.clip(xv @ yv / (nx * ny), -1.0, 1.0))
    theta = float(np.arccos(cos))
    return nx * ny * (np.sin(theta) + (np.pi - theta) * np.cos(theta)) / np.pi


def knn_sparsify(A, k: int = 15) -> np.ndarray:
    """Keep each row's k strongest off-diagonal entries, symmetrized by max.

    An entry survives iff it is a k-nearest neighbour of either endpoint; the
    diagonal is zeroed (self-loops do not aid partitioning).
    """
    M = check_square(A, name="affinity")
    n = M.shape[0]
    if k >= n:
        raise ValueError(f"k={k} must be smaller than n={n}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    ranked = M.copy()
    np.fill_diagonal(ranked, -np.inf)
    # stable argsort keeps ties deterministic (lowest index wins)
    order = np.argsort(-ranked, axis=1, kind="stable")[:, :k]
    kept = np.zeros_like(M)
    rows = np.repeat(np.arange(n), k)
    kept[rows, order.ravel()] = M[rows, order.ravel()]
    np.fill_diagonal(kept, 0.0)
    return np.maximum(kept, kept.T)


def degree_normalize(A) -> np.ndarray:
    """Symmetric degree normalization D^(-1/2) A D^(-1/2)."""
    M = check_square(A, name="affinity")
    degree = M.sum(axis=1)
    bad = np.where(degree <= 0)[0]
    if bad.size:
        raise ValueError(f"zero-degree node at index {bad[0]}")
    inv_sqrt = 1.0 / np.sqrt(degree)
    N = M * np.outer(inv_sqrt, inv_sqrt)
    return 0.5 * (N + N.T)


def spectral_embed(A, k_max: int) -> SpectralDecomposition:
    """Smallest k_max eigenpairs of L = I - D^(-1/2) A D^(-1/2)."""
    M = check_square(A, name="affinity")
    n = M.shape[0]
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    k_max = min(k_max, n)
    N = degree_normalize(M)
    lap = np.eye(n) - N
    lap = 0.5 * (lap + lap.T)
    values, vectors = scipy.linalg.eigh(lap, subset_by_index=[0, k_max - 1])
    if values.min() < -1e-8 or values.max() > 2.0 + 1e-8:
        raise ArithmeticError(f"Laplacian eigenvalues escaped [0, 2]: {values}")
    return SpectralDecomposition(np.clip(values, 0.0, 2.0), vectors)


def estimate_k(eigenvalues, k_max: int) -> int:
    """Speaker count from the largest gap in the ascending eigenvalues.

    Ties break toward the smaller count.
    """
    values = as_float_vector(eigenvalues, name="eigenvalues")
    if values.size < 2:
        raise ValueError("need at least 2 eigenvalues to estimate k")
    if np.any(np.diff(values) < -1e-12):
        raise ValueError("eigenvalues must be ascending")
    top = min(k_max, values.size)
    gaps = np.diff(values[:top])
    if gaps.size == 0:
        return 1
    return int(np.argmax(gaps)) + 1


def kmeans(points, k: int, seed: int, max_iter: int = 300) -> np.ndarray:
    """Seeded k-means++ with Lloyd iterations to an assignment fixed point.

    Deterministic for a fixed seed; empty clusters are re-seeded with the
    point farthest from its current center.
    """
    P = as_float_matrix(points, name="points")
    n = P.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp(P, k, rng)
    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        d2 = cdist(P, centers, metric="sqeuclidean")
        new_labels = d2.argmin(axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            members = labels == c
            if members.any():
                centers[c] = P[members].mean(axis=0)
            else:
                centers[c] = P[d2.min(axis=1).argmax()]
    return labels


def _kmeans_pp(P: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = P.shape[0]
    centers = np.empty((k, P.shape[1]))
    centers[0] = P[rng.integers(n)]
    d2 = cdist(P, centers[:1], metric="sqeuclidean").ravel()
    for c in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers[c] = P[idx]
        d2 = np.minimum(d2, cdist(P, centers[c : c + 1], metric="sqeuclidean").ravel())
    return centers


def _consensus_pipeline(rows: np.ndarray, kernels, k, knn, seed, k_max):
    """Shared pipeline body: returns (labels, eigenvalues, n_speakers)."""
    n = rows.shape[0]
    if not kernels:
        raise ValueError("at least one kernel is required")
    if n == 1:
        return np.zeros(1, dtype=np.int64), np.zeros(1), 1

    knn_eff = min(knn, n - 1)
    normalized = [
        degree_normalize(knn_sparsify(kernel_affinity(rows, kind), knn_eff))
        for kind in kernels
    ]
    consensus = np.mean(normalized, axis=0)
    consensus = 0.5 * (consensus + consensus.T)

    k_cap = min(k_max, n)
    decomposition = spectral_embed(consensus, k_max=k_cap)
    n_speakers = k if k is not None else estimate_k(decomposition.eigenvalues, k_max=k_cap)
    if not 1 <= n_speakers <= n:
        raise ValueError(f"speaker count {n_speakers} out of range [1, {n}]")

    V = decomposition.eigenvectors[:, :n_speakers]
    norms = np.linalg.norm(V, axis=1, keepdims=True)
    V = V / np.maximum(norms, 1e-12)
    raw = kmeans(V, n_speakers, seed=seed)

    renumber: dict[int, int] = {}
    labels = np.empty(n, dtype=np.int64)
    for i, label in enumerate(raw):
        if int(label) not in renumber:
            renumber[int(label)] = len(renumber)
        labels[i] = renumber[int(label)]
    return labels, decomposition.eigenvalues, n_speakers


def consensus_cluster(
    X,
    kernels=KERNEL_KINDS,
    k: int | None = None,
    knn: int = 15,
    seed: int = 0,
    k_max: int = 10,
) -> list[tuple[int, str]]:
    """Cluster embedding windows into speakers by multi-kernel consensus.

    Each kernel's affinity is kNN-sparsified and degree-normalized; the
    consensus affinity is their elementwise mean.  Labels are renumbered
    speaker_0.. in order of first appearance.  ``knn`` is clamped to n-1 for
    small inputs so the default works on short recordings.
    """
    rows = _embedding_rows(X)
    labels, _, _ = _consensus_pipeline(rows, kernels, k, knn, seed, k_max)
    return [(i, f"speaker_{label}") for i, label in enumerate(labels)]


class ConsensusSpectralClustering(BaseEstimator, ClusterMixin):
    """Estimator wrapper over consensus_cluster.

    Parameters mirror the pipeline defaults: two kernels, 15 neighbours, at
    most 10 speakers, eigengap count estimation unless n_clusters is given.

    Attributes
    ----------
    labels_ : integer cluster index per row, numbered by first appearance
    n_clusters_ : number of clusters used
    eigenvalues_ : consensus Laplacian spectrum used for the k estimate
    """

    def __init__(self, kernels=KERNEL_KINDS, n_clusters=None, knn=15, k_max=10, random_state=0):
        self.kernels = kernels
        self.n_clusters = n_clusters
        self.knn = knn
        self.k_max = k_max
        self.random_state = random_state

    def fit(self, X, y=None):
        del y
        rows = _embedding_rows(X)
        labels, eigenvalues, n_speakers = _consensus_pipeline(
            rows, self.kernels, self.n_clusters, self.knn, self.random_state, self.k_max
        )
        self.labels_ = labels
        self.eigenvalues_ = eigenvalues
        self.n_clusters_ = int(n_speakers)
        return self
