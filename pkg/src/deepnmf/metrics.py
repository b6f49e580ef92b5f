"""Clustering of learned representations and external partition scores.

The three scores compare an obtained partition against a reference one
through their confusion matrix: normalized mutual information (symmetric,
in [0, 1]), an indicator-matrix error rate (the square root of the Frobenius
norm of the co-membership difference, taken literally with its outer root),
and naive precision (per reference class, the largest overlap fraction with
any obtained cluster).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from . import kernels

KMEANS_MAX_ITERS = 300


@dataclass(frozen=True)
class Partition:
    """Cluster assignment: one id per sample, ids in [0, n_clusters)."""

    labels: np.ndarray
    n_clusters: int

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        if labels.ndim != 1 or labels.size == 0:
            raise InvalidInputError("labels must be a nonempty 1-d sequence")
        if labels.min() < 0 or labels.max() >= self.n_clusters:
            raise InvalidInputError(
                f"labels must lie in [0, {self.n_clusters}), got range "
                f"[{labels.min()}, {labels.max()}]")

    def __len__(self):
        return self.labels.size


def from_labels(labels):
    """Partition from raw ids, relabeled to consecutive ints by first occurrence."""
    labels = np.asarray(labels)
    _, inverse = np.unique(labels, return_inverse=True)
    order = {}
    out = np.empty(labels.size, dtype=np.int64)
    for i, v in enumerate(inverse):
        out[i] = order.setdefault(int(v), len(order))
    return Partition(out, len(order))


def confusion_matrix(c, c_star):
    """Overlap counts with reference classes as rows, obtained clusters as columns."""
    if len(c) != len(c_star):
        raise InvalidInputError(
            f"partitions cover {len(c_star)} and {len(c)} samples")
    counts = np.zeros((c_star.n_clusters, c.n_clusters), dtype=np.int64)
    np.add.at(counts, (c_star.labels, c.labels), 1)
    return counts


def nmi(c, c_star):
    """Normalized mutual information in [0, 1], natural log, 0*log(0) = 0.

    When both partitions are single-cluster the normalizer vanishes; the
    score is then 1 when the partitions agree (they necessarily do) and 0
    otherwise.
    """
    counts = confusion_matrix(c, c_star)
    n = counts.sum()
    rows = counts.sum(axis=1)
    cols = counts.sum(axis=0)
    numer = 0.0
    for i in range(counts.shape[0]):
        for j in range(counts.shape[1]):
            nij = counts[i, j]
            if nij:
                numer += nij * math.log(nij * n / (rows[i] * cols[j]))
    numer *= -2.0
    denom = sum(r * math.log(r / n) for r in rows if r)
    denom += sum(col * math.log(col / n) for col in cols if col)
    if denom == 0.0:
        return 1.0 if np.array_equal(
            from_labels(c.labels).labels, from_labels(c_star.labels).labels) else 0.0
    return numer / denom


def error_rate(c, c_star, literal_root=True):
    """Co-membership disagreement between the partitions.

    Builds the 0/1 indicator matrices, takes the Frobenius norm of the
    difference of their co-membership matrices, and (by default) applies the
    outer square root on top, as the definition is written. Pass
    ``literal_root=False`` for the plain Frobenius norm.
    """
    if len(c) != len(c_star):
        raise InvalidInputError(
            f"partitions cover {len(c_star)} and {len(c)} samples")
    co = (c.labels[:, None] == c.labels[None, :]).astype(np.float64)
    co_star = (c_star.labels[:, None] == c_star.labels[None, :]).astype(np.float64)
    frob = float(np.linalg.norm(co_star - co))
    return math.sqrt(frob) if literal_root else frob


def naive_precision(c, c_star):
    """Mean over reference classes of (largest overlap) / (class size)."""
    counts = confusion_matrix(c, c_star)
    sizes = counts.sum(axis=1)
    if np.any(sizes == 0):
        empty = int(np.argmin(sizes))
        raise InvalidInputError(f"reference class {empty} is empty")
    return float(np.mean(counts.max(axis=1) / sizes))


def _kmeanspp_centers(points, k, rng):
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers[c] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centers[c]) ** 2, axis=1))
    return centers


def _lloyd(points, centers, max_iters):
    k = centers.shape[0]
    labels = None
    for _ in range(max_iters):
        new_labels, d2 = kernels.kmeans_assign(points, centers)
        # Re-seed empty clusters at the points farthest from their centroid.
        occupied = np.bincount(new_labels, minlength=k) > 0
        if not occupied.all():
            order = np.argsort(-d2)
            taken = 0
            for c in range(k):
                if not occupied[c]:
                    centers[c] = points[order[taken]]
                    taken += 1
            continue
        if labels is not None and np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
        for c in range(k):
            centers[c] = points[labels == c].mean(axis=0)
    _, d2 = kernels.kmeans_assign(points, centers)
    return labels, float(d2.sum())


def kmeans(data, k, restarts=10, seed=0, max_iters=KMEANS_MAX_ITERS):
    """Lloyd's algorithm on the columns of ``data`` (columns are samples).

    Each restart is seeded with k-means++ from its own deterministic
    substream; the partition with the lowest within-cluster sum of squares
    wins, ties going to the lowest restart index.
    """
    data = np.ascontiguousarray(data, dtype=np.float64)
    points = np.ascontiguousarray(data.T)
    n = points.shape[0]
    k = int(k)
    if not 1 <= k <= n:
        raise InvalidInputError(f"k must be in [1, {n}], got {k}")
    if restarts < 1:
        raise InvalidInputError(f"restarts must be >= 1, got {restarts}")

    best_labels, best_wcss = None, math.inf
    for r in range(restarts):
        rng = np.random.default_rng([abs(int(seed)), r])
        centers = _kmeanspp_centers(points, k, rng)
        labels, wcss = _lloyd(points, centers, max_iters)
        if wcss < best_wcss:
            best_labels, best_wcss = labels, wcss
    return Partition(best_labels, k)
