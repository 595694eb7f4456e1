"""(eta, eps)-uniqueness of k-means optima, and numeric checks of the stability bounds under perturbation.

A solution is (eta, eps)-unique when the optimal partition is a singleton and
every partition whose cost is within eta of optimal lies within eps of it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Clustering, Dataset, ValidationError, as_centers, images_of, voronoi_partition
from .kmeans import (
    AUTO_EXACT_LIMIT,
    TIE_TOL,
    _costs_for_labels,
    cost_centers,
    cost_partition,
    enumerate_costs,
    lloyd,
    partition_count,
    solve_exact,
)
from .mapping_class import l1_distance
from .partition import delta, delta_batch

EXACT = "exact-enumeration"
LOCAL = "local-search"


class PreconditionError(ValidationError):
    """Hypotheses of a verifier do not hold (or cannot be certified) on this instance."""


@dataclass(frozen=True, eq=False)
class UniquenessVerdict:
    unique: bool
    eta: float
    eps: float
    method: str
    opt_cost: float
    optimum: Clustering
    second_cost: float | None
    degenerate: bool
    witness: Clustering | None = None
    witness_cost: float | None = None
    witness_delta: float | None = None
    n_candidates: int = 0

    @property
    def definitive(self) -> bool:
        return self.method == EXACT or not self.unique

    def record(self) -> dict:
        return {
            "unique": self.unique,
            "method": self.method,
            "eta": self.eta,
            "eps": self.eps,
            "opt_cost": self.opt_cost,
            "second_cost": self.second_cost,
            "degenerate": self.degenerate,
            "witness_cost": self.witness_cost,
            "witness_delta": self.witness_delta,
            "n_candidates": self.n_candidates,
        }


def _canonical(L: np.ndarray) -> np.ndarray:
    """Relabel each row so blocks are numbered by first appearance."""
    out = np.empty_like(L)
    for r, row in enumerate(L):
        _, first = np.unique(row, return_index=True)
        order = np.argsort(first)
        remap = np.empty(row.max() + 1, dtype=L.dtype)
        remap[np.unique(row)[order]] = np.arange(order.size)
        out[r] = remap[row]
    return out


def _local_candidates(Y: np.ndarray, k: int, seed: int, restarts: int, n_swaps: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    runs = [lloyd(Y, k, np.random.default_rng(ss))[1] for ss in np.random.SeedSequence(seed).spawn(restarts)]
    L = np.array(runs)
    best = L[np.argmin(_costs_for_labels(Y, L, k))]
    moves = []
    for i in range(len(best)):
        for b in range(k):
            if b != best[i]:
                m = best.copy()
                m[i] = b
                moves.append(m)
    for _ in range(n_swaps):
        i, j = rng.choice(len(best), 2, replace=False)
        if best[i] != best[j]:
            m = best.copy()
            m[i], m[j] = best[j], best[i]
            moves.append(m)
    allL = np.vstack([L] + ([np.array(moves)] if moves else []))
    return np.unique(_canonical(allL), axis=0)


def check_uniqueness(
    X: Dataset,
    f,
    k: int,
    eta: float,
    eps: float,
    method: str = "auto",
    seed: int = 0,
    restarts: int = 50,
    n_swaps: int = 200,
) -> UniquenessVerdict:
    """Decide (eta, eps)-uniqueness at partition level.

    ``method`` is 'exact' (enumerate every partition), 'local' (Lloyd restarts,
    single-point moves and random swaps around the best found), or 'auto'.
    A local-search "unique" only means no counterexample was found.
    """
    if not (eta > 0 and eps > 0):
        raise ValidationError("eta and eps must be positive")
    if method == "auto":
        method = "exact" if partition_count(X.n, k) <= AUTO_EXACT_LIMIT else "local"
    if method == "exact":
        L, costs = enumerate_costs(X, f, k)
        tag = EXACT
    elif method == "local":
        Y = images_of(f, X)
        L = _local_candidates(Y, k, seed, restarts, n_swaps)
        costs = _costs_for_labels(Y, L, k)
        tag = LOCAL
    else:
        raise ValidationError(f"unknown method {method!r}")

    order = np.argsort(costs, kind="stable")
    best = int(order[0])
    opt = float(costs[best])
    optimum = Clustering(k, X.ids, L[best])
    degenerate = int(np.count_nonzero(np.abs(costs - opt) < TIE_TOL)) > 1
    second = float(costs[order[1]]) if len(order) > 1 else None

    near = np.flatnonzero(costs < opt + eta)
    deltas = delta_batch(L[best].astype(np.int64), L[near].astype(np.int64), k)
    violators = near[deltas >= eps]
    violators = violators[np.argsort(costs[violators], kind="stable")]

    witness = w_cost = w_delta = None
    for p in violators:
        P = Clustering(k, X.ids, L[p])
        c = cost_partition(X, f, P)
        dv = delta(optimum, P).value
        if c < opt + eta and dv >= eps:
            witness, w_cost, w_delta = P, c, dv
            break

    unique = not degenerate and len(violators) == 0
    return UniquenessVerdict(
        unique=unique,
        eta=eta,
        eps=eps,
        method=tag,
        opt_cost=opt,
        optimum=optimum,
        second_cost=second,
        degenerate=degenerate,
        witness=witness,
        witness_cost=w_cost,
        witness_delta=w_delta,
        n_candidates=int(L.shape[0]),
    )


def _require_unit_cube(Y: np.ndarray, what: str) -> None:
    if not (np.all(Y > 0) and np.all(Y < 1)):
        raise ValidationError(f"{what} must lie in the open unit cube")


@dataclass(frozen=True)
class CostStabilityReport:
    d_l1: float
    cost_gap: float
    ratio: float
    holds: bool
    eta: float | None = None
    eta_holds: bool | None = None


def verify_cost_stability(f1, f2, mu, X: Dataset, eta: float | None = None) -> CostStabilityReport:
    """|COST(f1, mu) - COST(f2, mu)| against 3 * d_L1(f1, f2), for images and centers in (0,1)^n.

    With ``eta`` and d_L1 < eta/6, also checks the gap is below eta/2.
    """
    _require_unit_cube(images_of(f1, X), "images of f1")
    _require_unit_cube(images_of(f2, X), "images of f2")
    _require_unit_cube(as_centers(mu), "centers")
    d = l1_distance(f1, f2, X)
    c = abs(cost_centers(X, f1, mu) - cost_centers(X, f2, mu))
    ratio = c / d if d > 0 else 0.0
    eta_holds = None
    if eta is not None and d < eta / 6:
        eta_holds = c < eta / 2
    return CostStabilityReport(d, c, ratio, c <= 3 * d + 1e-9, eta, eta_holds)


@dataclass(frozen=True)
class ClusteringStabilityReport:
    d_l1: float
    delta: float
    term_same_mapping: float
    term_same_centers: float
    cost_gap: float
    eta: float
    eps: float

    @property
    def holds(self) -> bool:
        return self.delta < 2 * self.eps and self.term_same_mapping < self.eps and self.term_same_centers < self.eps

    @property
    def triangle_holds(self) -> bool:
        return self.delta <= self.term_same_mapping + self.term_same_centers + 1e-12


def verify_clustering_stability(f1, f2, X: Dataset, k: int, eta: float, eps: float) -> ClusteringStabilityReport:
    """Check that nearby (eta, eps)-unique mappings give nearby k-means clusterings.

    Both mappings must be certified unique by enumeration and satisfy
    d_L1 < eta/12. Besides the conclusion (difference < 2 eps), the two
    intermediate bounds are evaluated: mapping f1 with its own vs f2's optimal
    centers, and f2's optimal centers under f1 vs under f2.
    """
    _require_unit_cube(images_of(f1, X), "images of f1")
    _require_unit_cube(images_of(f2, X), "images of f2")
    d = l1_distance(f1, f2, X)
    if not d < eta / 12:
        raise PreconditionError(f"d_L1={d} is not below eta/12={eta / 12}")
    for name, f in (("f1", f1), ("f2", f2)):
        if partition_count(X.n, k) > AUTO_EXACT_LIMIT:
            raise PreconditionError("instance too large to certify uniqueness exactly")
        if not check_uniqueness(X, f, k, eta, eps, method="exact").unique:
            raise PreconditionError(f"{name} is not ({eta}, {eps})-unique on X")

    s1, s2 = solve_exact(X, f1, k), solve_exact(X, f2, k)
    own = voronoi_partition(f1, s1.centers, X)
    mixed = voronoi_partition(f1, s2.centers, X)
    other = voronoi_partition(f2, s2.centers, X)
    return ClusteringStabilityReport(
        d_l1=d,
        delta=delta(s1.clustering, s2.clustering).value,
        term_same_mapping=delta(own, mixed).value,
        term_same_centers=delta(mixed, other).value,
        cost_gap=cost_centers(X, f1, s2.centers) - cost_centers(X, f1, s1.centers),
        eta=eta,
        eps=eps,
    )
