"""K-means over spatial signatures with Davies-Bouldin and cluster-volume diagnostics."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.spatial.distance import cdist

from errors import ClusteringError

logger = logging.getLogger(name=__name__)

DEFAULT_MAX_ITER = 100
DEFAULT_TOL = 1e-3  # relative drop of the within-cluster sum of squares


@dataclass(frozen=True, eq=False)
class ClusterModel:
    k: int
    centroids: np.ndarray  # (k, dimension)
    labels: np.ndarray  # (points,)
    db_history: List[float] = field(default_factory=list)
    volume_ratio_history: List[float] = field(default_factory=list)
    inertia_history: List[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    def __post_init__(self) -> None:
        if self.centroids.shape[0] != self.k:
            raise ClusteringError(f"expected {self.k} centroids, got {self.centroids.shape[0]}")
        if not np.isfinite(self.centroids).all():
            raise ClusteringError("centroids must be finite")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.k):
            raise ClusteringError("every point must be assigned to one of the k clusters")


def _as_matrix(signatures) -> np.ndarray:
    data = np.asarray(getattr(signatures, "vectors", signatures), dtype=float)
    if data.ndim != 2:
        raise ClusteringError(f"signatures must form a 2-D array, got shape {data.shape}")
    return data


def _plus_plus_init(data: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centroids = [data[rng.integers(len(data))]]
    for _ in range(1, k):
        nearest = cdist(data, np.asarray(centroids), metric="sqeuclidean").min(axis=1)
        total = nearest.sum()
        if total > 0:
            index = rng.choice(len(data), p=nearest / total)
        else:
            index = rng.integers(len(data))
        centroids.append(data[index])
    return np.asarray(centroids)


def _assign(data: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return cdist(data, centroids, metric="euclidean").argmin(axis=1)


def _update(data: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Cluster means; an empty cluster is re-seeded at the point farthest from its centroid."""
    k = len(centroids)
    counts = np.bincount(labels, minlength=k)
    sums = np.zeros_like(centroids)
    np.add.at(sums, labels, data)
    updated = np.where(counts[:, None] > 0, sums / np.maximum(counts, 1)[:, None], centroids)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        distance = np.linalg.norm(data - updated[labels], axis=1)
        for cluster, point in zip(empty, np.argsort(distance)[::-1]):
            logger.debug(f"Cluster {cluster} is empty, re-seeding at point {point}")
            updated[cluster] = data[point]
    return updated


def _inertia(data: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> float:
    return float(((data - centroids[labels]) ** 2).sum())


def _spreads(data: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    counts = np.bincount(labels, minlength=len(centroids))
    if np.any(counts == 0):
        raise ClusteringError("every cluster must be non-empty")
    distance = np.linalg.norm(data - centroids[labels], axis=1)
    return np.bincount(labels, weights=distance, minlength=len(centroids)) / counts


def davies_bouldin(data: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> float:
    """(1/k) sum_i max_{j != i} (s_i + s_j) / d(c_i, c_j); coincident centroids give inf."""
    k = len(centroids)
    if k < 2:
        raise ClusteringError("the Davies-Bouldin index needs at least 2 clusters")
    spreads = _spreads(data, labels, centroids)
    separation = cdist(centroids, centroids)
    np.fill_diagonal(separation, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = (spreads[:, None] + spreads[None, :]) / separation
    ratios[separation == 0] = np.inf
    if np.isinf(ratios).any():
        logger.warning("Coincident centroids, Davies-Bouldin term is infinite")
    return float(np.nanmax(ratios, axis=1).mean())


def bounding_volume_ratio(data: np.ndarray, labels: np.ndarray) -> float:
    """Summed per-cluster bounding-box volume over the global one.

    Dimensions with zero global range are left out of every product.
    """
    data = _as_matrix(data)
    span = np.ptp(data, axis=0)
    keep = span > 0
    if not keep.all():
        logger.debug(f"Dropping {int((~keep).sum())} degenerate dimension(s) from the volume ratio")
    if not keep.any():
        return 1.0
    total = 0.0
    for cluster in np.unique(labels):
        members = data[labels == cluster][:, keep]
        total += float(np.prod(np.ptp(members, axis=0) / span[keep]))
    return total


def db_index(model: ClusterModel, signatures) -> float:
    return davies_bouldin(_as_matrix(signatures), model.labels, model.centroids)


def cluster_volume_ratio(model: ClusterModel, signatures) -> float:
    return bounding_volume_ratio(_as_matrix(signatures), model.labels)


def kmeans(
    signatures,
    k: int,
    seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    init: Optional[np.ndarray] = None,
) -> ClusterModel:
    """Lloyd iterations in the (dB) signature space, k-means++ seeding.

    Stops when assignments no longer change or the within-cluster sum of
    squares drops by less than tol relative to its previous value.
    """
    data = _as_matrix(signatures)
    if k < 2:
        raise ClusteringError(f"k must be >= 2, got {k}")
    if len(data) < k:
        raise ClusteringError(f"need at least k={k} signatures, got {len(data)}")
    if not np.isfinite(data).all():
        raise ClusteringError("signatures must be finite")
    rng = np.random.default_rng(seed)
    centroids = _plus_plus_init(data, k, rng) if init is None else np.asarray(init, dtype=float).copy()

    labels = _assign(data, centroids)
    db_history: List[float] = []
    volume_history: List[float] = []
    inertia_history: List[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        centroids = _update(data, labels, centroids)
        new_labels = _assign(data, centroids)
        # centroids stay equal to the member means of the recorded labels
        centroids = _update(data, new_labels, centroids)
        inertia = _inertia(data, new_labels, centroids)
        db_history.append(davies_bouldin(data, new_labels, centroids) if np.unique(new_labels).size == k else np.inf)
        volume_history.append(bounding_volume_ratio(data, new_labels))
        unchanged = np.array_equal(new_labels, labels)
        small_drop = bool(inertia_history) and inertia_history[-1] - inertia <= tol * max(inertia_history[-1], 1e-300)
        inertia_history.append(inertia)
        labels = new_labels
        logger.debug(f"k-means iteration {iterations}: inertia {inertia:.4g}, DB {db_history[-1]:.4f}")
        if unchanged or small_drop:
            converged = True
            break
    if not converged:
        logger.warning(f"k-means stopped after {max_iter} iterations without converging")
    return ClusterModel(
        k=k,
        centroids=centroids,
        labels=labels,
        db_history=db_history,
        volume_ratio_history=volume_history,
        inertia_history=inertia_history,
        iterations=iterations,
        converged=converged,
    )
