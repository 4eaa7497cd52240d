"""Clustering evaluation: seeded k-means, ACC under the best label mapping, NMI."""

from typing import NamedTuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .errors import DegenerateSingleCluster, EmptyClusterUnrecoverable, LengthMismatch

DEFAULT_RESTARTS = 20
MAX_ITER = 300
MAX_RESEEDS = 10


class Partition(NamedTuple):
    assignment: np.ndarray
    c: int


def as_partition(labels):
    """Canonical form: ids relabelled in order of first appearance."""
    if isinstance(labels, Partition):
        labels = labels.assignment
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError(f"labels must be 1-D, got shape {labels.shape}")
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return Partition(rank[inverse].astype(np.int64), int(order.size))


def contingency(pred, truth):
    """``C[i, j]`` = number of samples with predicted id ``i`` and true id ``j``."""
    a, b = as_partition(pred), as_partition(truth)
    if a.assignment.size != b.assignment.size:
        raise LengthMismatch(f"{a.assignment.size} predictions vs {b.assignment.size} labels")
    C = np.zeros((a.c, b.c), dtype=np.int64)
    np.add.at(C, (a.assignment, b.assignment), 1)
    return C


def acc(pred, truth):
    """Fraction matched under the best one-to-one mapping of cluster ids.

    The contingency table is zero-padded to square when the counts differ.
    """
    C = contingency(pred, truth)
    size = max(C.shape)
    padded = np.zeros((size, size), dtype=np.int64)
    padded[:C.shape[0], :C.shape[1]] = C
    rows, cols = linear_sum_assignment(padded, maximize=True)
    return float(padded[rows, cols].sum()) / float(C.sum())


def nmi(pred, truth):
    """Mutual information over the geometric mean of the two entropies."""
    C = contingency(pred, truth).astype(float)
    if min(C.shape) < 2:
        raise DegenerateSingleCluster("NMI is undefined when a partition has one cluster")
    n = C.sum()
    ni, nj = C.sum(axis=1), C.sum(axis=0)
    nz = C > 0
    mi = np.sum(C[nz] * np.log(n * C[nz] / np.outer(ni, nj)[nz]))
    hi = np.sum(ni * np.log(ni / n))
    hj = np.sum(nj * np.log(nj / n))
    return float(mi / np.sqrt(hi * hj))


def farthest_point_init(Z, c, rng):
    """First center drawn by ``rng``, then greedily the point farthest from all centers."""
    n = Z.shape[0]
    idx = [int(rng.integers(n))]
    dmin = cdist(Z, Z[idx], "sqeuclidean")[:, 0]
    for _ in range(1, c):
        nxt = int(np.argmax(dmin))  # first index on ties
        idx.append(nxt)
        dmin = np.minimum(dmin, cdist(Z, Z[nxt:nxt + 1], "sqeuclidean")[:, 0])
    return Z[idx].copy()


def lloyd(Z, centers, max_iter=MAX_ITER):
    """Lloyd iterations from ``centers``; returns ``(labels, centers, sse)``.

    An empty cluster is reseeded with the point farthest from its current
    center; when that keeps failing the run is abandoned.
    """
    c = centers.shape[0]
    reseeds = 0
    labels = None
    for _ in range(max_iter):
        D = cdist(Z, centers, "sqeuclidean")
        new = np.argmin(D, axis=1)
        counts = np.bincount(new, minlength=c)
        if np.any(counts == 0):
            reseeds += 1
            if reseeds > MAX_RESEEDS:
                raise EmptyClusterUnrecoverable(f"empty cluster persists after {MAX_RESEEDS} reseeds")
            far = np.argsort(-D[np.arange(Z.shape[0]), new], kind="stable")
            taken = set()
            for j in np.flatnonzero(counts == 0):
                pick = next(int(i) for i in far if int(i) not in taken)
                taken.add(pick)
                centers[j] = Z[pick]
            continue
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centers = np.stack([Z[labels == j].mean(axis=0) for j in range(c)])
    D = cdist(Z, centers, "sqeuclidean")
    labels = np.argmin(D, axis=1)
    if np.bincount(labels, minlength=c).min() == 0:
        raise EmptyClusterUnrecoverable("empty cluster at termination")
    sse = float(D[np.arange(Z.shape[0]), labels].sum())
    return labels, centers, sse


def kmeans(data, c, restarts=DEFAULT_RESTARTS, seed=0):
    """Best-of-``restarts`` Lloyd's k-means on ``data`` (features x samples).

    Restart ``r`` seeds its first center from child stream ``r`` of
    ``SeedSequence(seed)``; equal SSE keeps the lower restart index.
    """
    Z = np.atleast_2d(np.asarray(data, dtype=float)).T
    n = Z.shape[0]
    if not 1 <= c <= n:
        raise ValueError(f"c must be in [1, {n}], got {c}")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    best, best_sse, last_err = None, np.inf, None
    for stream in np.random.SeedSequence(seed).spawn(restarts):
        rng = np.random.Generator(np.random.Philox(stream))
        try:
            labels, _, sse = lloyd(Z, farthest_point_init(Z, c, rng))
        except EmptyClusterUnrecoverable as exc:
            last_err = exc
            continue
        if sse < best_sse:
            best, best_sse = labels, sse
    if best is None:
        raise last_err
    return as_partition(best)


def stack_views(views):
    return np.vstack([np.atleast_2d(X) for X in views])


def evaluate(views, labels, c, restarts=DEFAULT_RESTARTS, seed=0):
    """k-means on the stacked views, scored against ``labels``: ``{acc, nmi}``."""
    part = kmeans(stack_views(views), c, restarts, seed)
    return {"acc": acc(part, labels), "nmi": nmi(part, labels)}
