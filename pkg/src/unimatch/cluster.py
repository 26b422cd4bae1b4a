"""Per-camera identity merging: agglomerative clustering on cosine distance.

Average linkage, optionally restricted by a k-nearest-neighbor
connectivity graph (only interconnected clusters may merge), plus
silhouette scoring and silhouette-driven cluster-count selection.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._clustercore import merge_constrained, merge_unconstrained
from .errors import InputError, ParameterError, SizeError
from .types import as_embedding_matrix


@dataclass(frozen=True, eq=False)
class ConnectivityGraph:
    """Symmetric neighbor graph in CSR form (no self-loops, sorted rows)."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray

    def __post_init__(self) -> None:
        if self.indptr.shape != (self.n + 1,):
            raise SizeError("indptr length must be n + 1")
        a = np.repeat(np.arange(self.n), np.diff(self.indptr))
        b = self.indices
        if a.shape != b.shape:
            raise SizeError("indices length inconsistent with indptr")
        if np.any(a == b):
            raise InputError("connectivity graph must not contain self-loops")
        for i in range(self.n):
            row = self.indices[self.indptr[i]:self.indptr[i + 1]]
            if row.size and np.any(np.diff(row) <= 0):
                raise InputError(f"node {i}: neighbor list must be sorted and duplicate-free")
        forward = np.sort(a * self.n + b)
        backward = np.sort(b * self.n + a)
        if not np.array_equal(forward, backward):
            raise InputError("connectivity graph must be symmetric")

    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)


@dataclass(frozen=True, eq=False)
class Dendrogram:
    """Ordered merge steps; merged clusters get fresh ids n, n+1, ...

    ``complete`` is False when a connectivity constraint ran out of
    admissible merges before reaching a single cluster.
    """

    n_points: int
    cluster_a: np.ndarray
    cluster_b: np.ndarray
    distance: np.ndarray
    new_size: np.ndarray
    complete: bool

    @property
    def n_steps(self) -> int:
        return int(self.cluster_a.size)


def _normalized(embeddings: np.ndarray) -> np.ndarray:
    x = as_embedding_matrix(embeddings).astype(np.float64)
    norms = np.linalg.norm(x, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise InputError(f"zero-norm embedding row {zero[0]}")
    return np.ascontiguousarray(x / norms[:, None])


def knn_connectivity(embeddings: np.ndarray, k_c: int) -> ConnectivityGraph:
    """Connect each point to its k_c nearest neighbors by cosine distance,
    then symmetrize by union.  Ties resolve to the lowest index."""
    if k_c < 1:
        raise ParameterError(f"k_c must be >= 1, got {k_c}")
    x = _normalized(embeddings)
    n = x.shape[0]
    if n < 2:
        raise SizeError(f"need at least 2 points for a neighbor graph, got {n}")
    dist = 1.0 - x @ x.T
    np.fill_diagonal(dist, np.inf)
    k = min(k_c, n - 1)
    order = np.argsort(dist, axis=1, kind="stable")[:, :k]
    rows = np.repeat(np.arange(n), k)
    cols = order.ravel()
    key = np.unique(np.concatenate([rows * n + cols, cols * n + rows]))
    a = key // n
    b = key % n
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, a + 1, 1)
    return ConnectivityGraph(n=n, indptr=np.cumsum(indptr), indices=b.astype(np.int64))


def build_dendrogram(embeddings: np.ndarray,
                     connectivity: Optional[ConnectivityGraph] = None) -> Dendrogram:
    """Run the bottom-up merging to completion (or to component granularity)."""
    x = _normalized(embeddings)
    n = x.shape[0]
    if connectivity is not None:
        if connectivity.n != n:
            raise SizeError(f"connectivity graph has {connectivity.n} nodes, embeddings have {n}")
        a, b, d, s = merge_constrained(x, connectivity.indptr, connectivity.indices, 1)
    else:
        a, b, d, s = merge_unconstrained(x, 1)
    return Dendrogram(n_points=n, cluster_a=a, cluster_b=b, distance=d, new_size=s,
                      complete=a.size == n - 1)


def cut_dendrogram(dendrogram: Dendrogram, n_clusters: int) -> np.ndarray:
    """Labels after replaying merges until n_clusters remain.

    If the dendrogram stopped early (disconnected components) and
    n_clusters is below the component count, the component-granularity
    partition is returned.  Labels are renumbered by first occurrence.
    """
    n = dendrogram.n_points
    if not 1 <= n_clusters <= n:
        raise ParameterError(f"n_clusters must be in [1, {n}], got {n_clusters}")
    take = min(n - n_clusters, dendrogram.n_steps)
    parent = np.arange(2 * n - 1, dtype=np.int64)
    for t in range(take):
        nxt = n + t
        parent[dendrogram.cluster_a[t]] = nxt
        parent[dendrogram.cluster_b[t]] = nxt

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    roots = np.array([find(i) for i in range(n)], dtype=np.int64)
    _, first = np.unique(roots, return_index=True)
    order = {roots[idx]: rank for rank, idx in enumerate(np.sort(first))}
    return np.array([order[r] for r in roots], dtype=np.int64)


def agglomerate(embeddings: np.ndarray, n_clusters: int,
                connectivity: Optional[ConnectivityGraph] = None) -> np.ndarray:
    """Average-linkage clustering into n_clusters groups.

    Under a connectivity constraint, only clusters joined by at least one
    graph edge may merge; when the graph's components outnumber
    n_clusters the achievable component-granularity partition is
    returned and a warning is emitted.
    """
    x = _normalized(embeddings)
    n = x.shape[0]
    if not 1 <= n_clusters <= n:
        raise ParameterError(f"n_clusters must be in [1, {n}], got {n_clusters}")
    if connectivity is not None:
        if connectivity.n != n:
            raise SizeError(f"connectivity graph has {connectivity.n} nodes, embeddings have {n}")
        a, b, d, s = merge_constrained(x, connectivity.indptr, connectivity.indices, n_clusters)
        if a.size < n - n_clusters:
            warnings.warn(
                f"connectivity leaves {n - a.size} components; requested {n_clusters} clusters "
                "is unreachable, returning component-granularity partition",
                stacklevel=2)
    else:
        a, b, d, s = merge_unconstrained(x, n_clusters)
    dg = Dendrogram(n_points=n, cluster_a=a, cluster_b=b, distance=d, new_size=s,
                    complete=False)
    return cut_dendrogram(dg, max(n_clusters, n - a.size))


def silhouette(embeddings: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette score under cosine distance.

    Per point, s = (b - a) / max(a, b) with a the mean distance to its own
    cluster (excluding itself) and b the smallest mean distance to another
    cluster.  Singletons score 0; so do points where a = b = 0.
    """
    x = _normalized(embeddings)
    n = x.shape[0]
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise SizeError(f"labels shape {labels.shape} does not match {n} points")
    uniq, lab = np.unique(labels, return_inverse=True)
    k = uniq.size
    if k < 2:
        raise ParameterError(f"silhouette needs at least 2 clusters, got {k}")
    sizes = np.bincount(lab, minlength=k).astype(np.float64)
    sums = np.zeros((k, x.shape[1]))
    np.add.at(sums, lab, x)
    # mean cosine distance from point i to cluster c = 1 - <x_i, S_c> / |c|
    dot = x @ sums.T
    mean_dist = 1.0 - dot / sizes[None, :]
    own = lab
    own_size = sizes[own]
    with np.errstate(invalid="ignore", divide="ignore"):
        a = np.where(own_size > 1,
                     1.0 - (dot[np.arange(n), own] - 1.0) / (own_size - 1.0),
                     0.0)
    other = mean_dist.copy()
    other[np.arange(n), own] = np.inf
    b = other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own_size > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(np.clip(s, -1.0, 1.0).mean())


def default_search_range(n: int, images_per_identity: int) -> Optional[tuple[int, int]]:
    """Cluster-count search window around n / images_per_identity."""
    lo = max(2, int(np.floor(0.5 * n / images_per_identity)))
    hi = min(n - 1, int(np.ceil(2.0 * n / images_per_identity)))
    if lo > hi:
        return None
    return lo, hi


def select_cluster_count(embeddings: np.ndarray,
                         connectivity: Optional[ConnectivityGraph],
                         search_min: int,
                         search_max: int,
                         max_candidates: Optional[int] = None) -> int:
    """Pick the cluster count in [search_min, search_max] with the best
    mean silhouette; ties go to the smallest count.

    One dendrogram is built and cut at every candidate level.  With
    ``max_candidates`` the range is subsampled to at most that many
    evenly spaced counts (endpoints always included).
    """
    x = _normalized(embeddings)
    n = x.shape[0]
    if not (2 <= search_min <= search_max <= n - 1):
        raise ParameterError(
            f"need 2 <= search_min <= search_max <= {n - 1}, got [{search_min}, {search_max}]")
    if max_candidates is not None and max_candidates < 1:
        raise ParameterError(f"max_candidates must be >= 1, got {max_candidates}")
    dg = build_dendrogram(x, connectivity)
    if max_candidates is None or search_max - search_min + 1 <= max_candidates:
        candidates = np.arange(search_min, search_max + 1)
    else:
        candidates = np.unique(np.linspace(search_min, search_max, max_candidates).round().astype(int))
    best_count = int(candidates[0])
    best_score = -np.inf
    for k in candidates:
        labels = cut_dendrogram(dg, int(k))
        if np.unique(labels).size < 2:
            continue
        score = silhouette(x, labels)
        if score > best_score:
            best_score = score
            best_count = int(k)
    return best_count
