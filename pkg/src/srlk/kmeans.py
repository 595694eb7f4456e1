"""k-means cost, Lloyd's solver with seeded restarts, and an exact enumeration oracle."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .core import CenterSet, Clustering, Dataset, ValidationError, as_centers, images_of, nearest_center
from .partition import delta

logger = logging.getLogger(__name__)

MAX_ITER = 500
COST_TOL = 1e-12
TIE_TOL = 1e-12
EXACT_LIMIT = 10**6
AUTO_EXACT_LIMIT = 10**5


@dataclass(frozen=True, eq=False)
class KMeansSolution:
    centers: CenterSet
    clustering: Clustering
    cost: float
    restarts_used: int
    is_exact: bool
    # filled in by the exact oracle only
    second_cost: float | None = None
    second_clustering: Clustering | None = None
    n_optimal: int | None = None
    n_partitions: int | None = None
    cost_history: tuple = field(default=(), repr=False)

    @property
    def unique(self) -> bool | None:
        return None if self.n_optimal is None else self.n_optimal == 1

    @property
    def second_delta(self) -> float | None:
        if self.second_clustering is None:
            return None
        return delta(self.clustering, self.second_clustering).value

    @property
    def method(self) -> str:
        return "exact" if self.is_exact else "lloyd"


def cost_centers(X: Dataset, f, mu) -> float:
    """Mean squared distance from each mapped point to its nearest center."""
    _, d2 = nearest_center(images_of(f, X), as_centers(mu))
    return float(d2.mean())


def _block_costs(Y: np.ndarray, labels: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-block sum of squared deviations from the centroid, and the centroids."""
    centroids = np.zeros((k, Y.shape[1]))
    costs = np.zeros(k)
    for j in range(k):
        members = Y[labels == j]
        if len(members):
            centroids[j] = members.mean(axis=0)
            costs[j] = ((members - centroids[j]) ** 2).sum()
    return costs, centroids


def cost_partition(X: Dataset, f, C: Clustering) -> float:
    """k-means cost of a fixed partition; each block is charged to its own centroid."""
    if not np.array_equal(C.ids, X.ids):
        raise ValidationError("clustering must partition all of the dataset's ids")
    costs, _ = _block_costs(images_of(f, X), C.labels, C.k)
    return float(costs.sum() / X.n)


# --------------------------------------------------------------------------
# Lloyd

def _kmeanspp(Y: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = Y.shape[0]
    centers = np.empty((k, Y.shape[1]))
    centers[0] = Y[rng.integers(n)]
    d2 = ((Y - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers[j] = Y[idx]
        d2 = np.minimum(d2, ((Y - centers[j]) ** 2).sum(axis=1))
    return centers


def _repair_empty(Y, centers, labels, d2):
    counts = np.bincount(labels, minlength=centers.shape[0])
    empty = np.flatnonzero(counts == 0)
    if not empty.size:
        return centers, False
    d2 = d2.copy()
    changed = False
    for j in empty:
        far = int(np.argmax(d2))
        if d2[far] <= 0:
            break
        centers[j] = Y[far]
        d2[far] = 0.0
        changed = True
    return centers, changed


def lloyd(Y: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = MAX_ITER, tol: float = COST_TOL):
    """One Lloyd run from a k-means++ start. Returns (centers, labels, cost, history)."""
    centers = _kmeanspp(Y, k, rng)
    labels, d2 = nearest_center(Y, centers)
    cost = d2.mean()
    history = [cost]
    for _ in range(max_iter):
        new = centers.copy()
        for j in range(k):
            members = Y[labels == j]
            if len(members):
                new[j] = members.mean(axis=0)
        new_labels, new_d2 = nearest_center(Y, new)
        new, repaired = _repair_empty(Y, new, new_labels, new_d2)
        if repaired:
            new_labels, new_d2 = nearest_center(Y, new)
        new_cost = new_d2.mean()
        history.append(new_cost)
        stable = np.array_equal(new_labels, labels)
        improvement = cost - new_cost
        centers, labels, d2, cost = new, new_labels, new_d2, new_cost
        if stable or improvement < tol:
            break
    return centers, labels, float(cost), history


def solve(X: Dataset, f, k: int, seed: int = 0, restarts: int = 10) -> KMeansSolution:
    """Best of ``restarts`` seeded Lloyd runs; ties go to the lowest restart index."""
    if k < 1 or restarts < 1:
        raise ValidationError("k and restarts must be >= 1")
    Y = images_of(f, X)
    streams = np.random.SeedSequence(seed).spawn(restarts)
    best = None
    for r, ss in enumerate(streams):
        run = lloyd(Y, k, np.random.default_rng(ss))
        if best is None or run[2] < best[2]:
            best = run
    centers, labels, cost, history = best
    return KMeansSolution(
        centers=CenterSet(centers),
        clustering=Clustering(k, X.ids, labels),
        cost=cost,
        restarts_used=restarts,
        is_exact=False,
        cost_history=tuple(history),
    )


# --------------------------------------------------------------------------
# exact enumeration

@lru_cache(maxsize=None)
def partition_count(n: int, k: int) -> int:
    """Number of set partitions of n items into at most k non-empty blocks."""
    # S[j] = Stirling numbers of the second kind S(m, j) for the current m
    S = [1] + [0] * k
    for _ in range(n):
        S = [0] + [j * S[j] + S[j - 1] for j in range(1, k + 1)]
    return sum(S[1:])


@lru_cache(maxsize=16)
def _rgs_cached(n: int, k: int) -> np.ndarray:
    labels = np.zeros((1, 1), dtype=np.int8)
    mx = np.zeros(1, dtype=np.int64)
    for _ in range(1, n):
        cnt = np.minimum(mx + 2, k)
        P = labels.shape[0]
        parent = np.repeat(np.arange(P), cnt)
        starts = np.repeat(np.cumsum(cnt) - cnt, cnt)
        offs = np.arange(parent.size) - starts
        labels = np.hstack([labels[parent], offs[:, None].astype(np.int8)])
        mx = np.maximum(mx[parent], offs)
    labels.setflags(write=False)
    return labels


def restricted_growth_strings(n: int, k: int) -> np.ndarray:
    """All partitions of n items into <= k blocks, one label row each, lexicographic."""
    if n < 1 or k < 1:
        raise ValidationError("need n >= 1 and k >= 1")
    count = partition_count(n, k)
    if count > EXACT_LIMIT:
        raise ValidationError(f"{count} partitions of {n} points into <= {k} blocks exceeds limit {EXACT_LIMIT}")
    return _rgs_cached(n, k)


def _costs_for_labels(Y: np.ndarray, L: np.ndarray, k: int, chunk: int = 200_000) -> np.ndarray:
    Y = Y - Y.mean(axis=0)
    sq = (Y**2).sum(axis=1)
    out = np.empty(L.shape[0])
    for lo in range(0, L.shape[0], chunk):
        part = L[lo : lo + chunk]
        total = np.zeros(part.shape[0])
        for j in range(k):
            M = (part == j).astype(float)
            cnt = M.sum(axis=1)
            s = M @ Y
            total += M @ sq - (s**2).sum(axis=1) / np.maximum(cnt, 1)
        out[lo : lo + chunk] = total
    return np.maximum(out, 0.0) / Y.shape[0]


def enumerate_costs(X: Dataset, f, k: int) -> tuple[np.ndarray, np.ndarray]:
    """(labels, costs) for every partition of X into <= k blocks.

    Costs close to the minimum are recomputed with the two-pass centroid formula
    so tie detection at TIE_TOL is not swamped by cancellation error.
    """
    Y = images_of(f, X)
    L = restricted_growth_strings(X.n, k)
    costs = _costs_for_labels(Y, L, k)
    near = np.flatnonzero(costs <= costs.min() + 1e-9 * max(1.0, abs(costs.min())))
    for p in near:
        costs[p] = _block_costs(Y, L[p], k)[0].sum() / X.n
    return L, costs


def _centers_for(Y: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    """Centroids of the blocks; empty blocks get a center far from every point."""
    _, centroids = _block_costs(Y, labels, k)
    counts = np.bincount(labels, minlength=k)
    if np.any(counts == 0):
        far = np.abs(Y).max() + 1.0 + np.ptp(Y)
        for r, j in enumerate(np.flatnonzero(counts == 0)):
            centroids[j] = 0.0
            centroids[j, 0] = far * (r + 2)
    return centroids


def solve_exact(X: Dataset, f, k: int) -> KMeansSolution:
    """Global optimum over all partitions into <= k blocks (padded to k with empty blocks).

    Among cost-tied optima the lexicographically first label string wins.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    Y = images_of(f, X)
    L, costs = enumerate_costs(X, f, k)
    order = np.argsort(costs, kind="stable")
    best = int(order[0])
    opt = float(costs[best])
    n_opt = int(np.count_nonzero(np.abs(costs - opt) < TIE_TOL))
    second = int(order[1]) if len(order) > 1 else None
    centers = _centers_for(Y, L[best].astype(np.int64), k)
    clustering = Clustering(k, X.ids, L[best])
    # Voronoi of the centroids can differ from the partition only on exact
    # distance ties; the partition itself is what the oracle certifies.
    return KMeansSolution(
        centers=CenterSet(centers),
        clustering=clustering,
        cost=opt,
        restarts_used=0,
        is_exact=True,
        second_cost=None if second is None else float(costs[second]),
        second_clustering=None if second is None else Clustering(k, X.ids, L[second]),
        n_optimal=n_opt,
        n_partitions=int(L.shape[0]),
    )


def kmeans(X: Dataset, f, k: int, policy: str = "auto", seed: int = 0, restarts: int = 10) -> KMeansSolution:
    """C^f_X under a solver policy: 'exact', 'lloyd', or 'auto' (exact when small)."""
    if policy == "exact":
        return solve_exact(X, f, k)
    if policy == "lloyd":
        return solve(X, f, k, seed=seed, restarts=restarts)
    if policy == "auto":
        if partition_count(X.n, k) <= AUTO_EXACT_LIMIT:
            return solve_exact(X, f, k)
        return solve(X, f, k, seed=seed, restarts=restarts)
    raise ValidationError(f"unknown solver policy {policy!r}")


def delta_mappings(f1, f2, X: Dataset, k: int, policy: str = "auto", seed: int = 0, restarts: int = 10) -> float:
    """Difference between the k-means clusterings of X under two mappings."""
    s1 = kmeans(X, f1, k, policy, seed, restarts)
    s2 = kmeans(X, f2, k, policy, seed, restarts)
    return delta(s1.clustering, s2.clustering).value
