"""Cluster-sorted virtual entity indices and Gaussian negative draws.

Entities are clustered on their concatenated parameter vectors, then
assigned *virtual* indices so that cluster-mates sit in one contiguous
block and nearby clusters (by centroid distance) sit in nearby blocks.
A negative for a positive entity is drawn by adding scaled Gaussian
noise to the positive's virtual index, flooring, and wrapping the index
ring, which concentrates samples on entities with similar embeddings.
Only the virtual<->real mapping changes when clusters move; the
parameter tables never get shuffled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ModelParams, entity_repr_all

# Collision redraws before giving up and sampling uniformly.
MAX_REDRAWS = 16


@dataclass
class ClusterResult:
    labels: np.ndarray       # (N,) cluster id per point
    centroids: np.ndarray    # (k, D)
    inertia: float
    inertia_history: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.centroids)


@dataclass
class VirtualIndexMap:
    virt_to_real: np.ndarray
    real_to_virt: np.ndarray

    @classmethod
    def from_permutation(cls, virt_to_real: np.ndarray) -> "VirtualIndexMap":
        virt_to_real = np.asarray(virt_to_real, dtype=np.int64)
        n = len(virt_to_real)
        real_to_virt = np.empty(n, dtype=np.int64)
        real_to_virt[virt_to_real] = np.arange(n)
        return cls(virt_to_real, real_to_virt)

    @property
    def n(self) -> int:
        return len(self.virt_to_real)


def _squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """(N, k) squared Euclidean distances via the expanded form."""
    p2 = (points * points).sum(axis=1)[:, None]
    c2 = (centroids * centroids).sum(axis=1)[None, :]
    d2 = p2 - 2.0 * points @ centroids.T + c2
    np.maximum(d2, 0.0, out=d2)
    return d2


def _plusplus_init(points: np.ndarray, k: int, gen: np.random.Generator) -> np.ndarray:
    n = len(points)
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    centroids[0] = points[gen.integers(n)]
    d2 = _squared_distances(points, centroids[:1]).ravel()
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = gen.integers(n)  # all remaining points coincide with a centroid
        else:
            idx = int(np.searchsorted(np.cumsum(d2 / total), gen.random()))
            idx = min(idx, n - 1)
        centroids[j] = points[idx]
        d2 = np.minimum(d2, _squared_distances(points, centroids[j:j + 1]).ravel())
    return centroids


def kmeans(reprs: np.ndarray, k: int, max_iters: int = 100, seed: int = 0) -> ClusterResult:
    """Lloyd's algorithm with k-means++ seeding.

    Terminates when no label changes or at ``max_iters``. An empty
    cluster is repaired by handing it the point currently farthest from
    its assigned centroid. Ties in assignment go to the lowest cluster
    id. Deterministic in ``seed``.
    """
    points = np.asarray(reprs, dtype=np.float64)
    n = len(points)
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= n_points, got k={k}, n={n}")
    if not np.isfinite(points).all():
        raise ValueError("non-finite entity representations")
    gen = np.random.default_rng(seed)

    centroids = _plusplus_init(points, k, gen)
    labels = np.argmin(_squared_distances(points, centroids), axis=1)
    history: list[float] = []
    for _ in range(max_iters):
        # centroid update with empty-cluster repair
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros((k, points.shape[1]), dtype=np.float64)
        np.add.at(sums, labels, points)
        nonempty = counts > 0
        centroids[nonempty] = sums[nonempty] / counts[nonempty][:, None]
        for c in np.flatnonzero(~nonempty):
            dist_own = _squared_distances(points, centroids)[np.arange(n), labels]
            farthest = int(np.argmax(dist_own))
            labels[farthest] = c
            centroids[c] = points[farthest]
            counts = np.bincount(labels, minlength=k)

        d2 = _squared_distances(points, centroids)
        new_labels = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(n), new_labels].sum()))
        converged = bool(np.array_equal(new_labels, labels))
        labels = new_labels
        if converged:
            break

    inertia = float(
        _squared_distances(points, centroids)[np.arange(n), labels].sum()
    )
    return ClusterResult(labels=labels, centroids=centroids, inertia=inertia,
                         inertia_history=history)


def reorder(clusters: ClusterResult, seed: int = 0) -> VirtualIndexMap:
    """Assign virtual indices by a nearest-cluster walk.

    The first cluster is chosen uniformly at random; each subsequent
    cluster is the unvisited one whose centroid is nearest (L2) to the
    current cluster's centroid, ties to the lowest cluster id. Within a
    cluster, entities keep ascending real-index order. Virtual indices
    are handed out consecutively along the walk.
    """
    gen = np.random.default_rng(seed)
    k = clusters.k
    current = int(gen.integers(k))
    visited = np.zeros(k, dtype=bool)
    order = [current]
    visited[current] = True
    for _ in range(k - 1):
        d = np.linalg.norm(clusters.centroids - clusters.centroids[order[-1]], axis=1)
        d[visited] = np.inf
        nxt = int(np.argmin(d))  # argmin takes the lowest id on ties
        order.append(nxt)
        visited[nxt] = True

    members = [np.flatnonzero(clusters.labels == c) for c in range(k)]
    virt_to_real = np.concatenate([members[c] for c in order])
    return VirtualIndexMap.from_permutation(virt_to_real)


def sample_eans(vmap: VirtualIndexMap, pos_real: int, sigma: float,
                rng: np.random.Generator) -> int:
    """One negative entity: Gaussian step from the positive's virtual index.

    x' = floor(x + z * sigma) wrapped onto the index ring; a draw that
    lands back on the positive is retried up to MAX_REDRAWS times, then
    replaced by a uniform draw over the other entities.
    """
    n = vmap.n
    x = int(vmap.real_to_virt[pos_real])
    for _ in range(MAX_REDRAWS):
        xp = int(np.floor(x + rng.standard_normal() * sigma)) % n
        if xp != x:
            return int(vmap.virt_to_real[xp])
    xp = int(rng.integers(n - 1))
    if xp >= x:
        xp += 1
    return int(vmap.virt_to_real[xp])


def sample_eans_batch(vmap: VirtualIndexMap, pos_real: np.ndarray, sigma: float,
                      rng: np.random.Generator, n_samples: int) -> np.ndarray:
    """Vectorized sampler with the same per-draw semantics as sample_eans.

    Returns real entity indices of shape ``pos_real.shape + (n_samples,)``.
    """
    n = vmap.n
    pos = np.asarray(pos_real, dtype=np.int64)
    xb = np.broadcast_to(vmap.real_to_virt[pos][..., None], pos.shape + (n_samples,))
    z = rng.standard_normal(xb.shape)
    out = np.floor(xb + z * sigma).astype(np.int64) % n
    colliding = out == xb
    attempts = 1
    while colliding.any() and attempts < MAX_REDRAWS:
        z = rng.standard_normal(int(colliding.sum()))
        out[colliding] = np.floor(xb[colliding] + z * sigma).astype(np.int64) % n
        colliding = out == xb
        attempts += 1
    if colliding.any():
        base = xb[colliding]
        uni = rng.integers(0, n - 1, size=len(base))
        out[colliding] = uni + (uni >= base)
    return vmap.virt_to_real[out]


def refresh(params: ModelParams, k: int, seed: int = 0,
            kmeans_iters: int = 100) -> VirtualIndexMap:
    """Recluster all entity representations and rebuild the virtual map.

    Pure with respect to ``params``; the caller decides when to swap the
    returned map in.
    """
    reprs = entity_repr_all(params)
    clusters = kmeans(reprs, k=k, max_iters=kmeans_iters, seed=seed)
    return reorder(clusters, seed=seed)


def dump_map(vmap: VirtualIndexMap, path) -> None:
    """Audit dump: one `real_index<TAB>virtual_index` line per entity."""
    with open(path, "w", encoding="utf-8") as fh:
        for real in range(vmap.n):
            fh.write(f"{real}\t{int(vmap.real_to_virt[real])}\n")
