"""Difference between clusterings under the best label matching.

The mismatch of two k-clusterings over a domain D is

    min over permutations s of [k] of  (1/|D|) * sum_i |A_i symdiff B_s(i)|

computed exactly with integer costs: |A_i symdiff B_j| = |A_i| + |B_j| - 2 N_ij,
so the minimum is 2 * (|D| - max-weight matching of the confusion matrix N).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import Clustering, ValidationError, restrict

BRUTEFORCE_MAX_K = 8


@dataclass(frozen=True)
class PermutationMatch:
    sigma: tuple[int, ...]
    per_block: tuple[int, ...]
    size: int

    @property
    def numerator(self) -> int:
        return sum(self.per_block)

    @property
    def exact(self) -> Fraction:
        return Fraction(self.numerator, self.size)

    @property
    def value(self) -> float:
        return self.numerator / self.size


def confusion(C1: Clustering, C2: Clustering) -> np.ndarray:
    """N[i, j] = |C1_i intersect C2_j|."""
    _check_pair(C1, C2)
    k = C1.k
    return np.bincount(C1.labels * k + C2.labels, minlength=k * k).reshape(k, k)


def _check_pair(C1: Clustering, C2: Clustering) -> None:
    if C1.k != C2.k:
        raise ValidationError(f"clusterings have different k ({C1.k} vs {C2.k})")
    if not np.array_equal(C1.ids, C2.ids):
        raise ValidationError("clusterings are over different id sets")
    if C1.n == 0:
        raise ValidationError("difference over an empty domain is undefined")


def _mismatch_matrix(C1: Clustering, C2: Clustering) -> np.ndarray:
    N = confusion(C1, C2)
    return N.sum(axis=1)[:, None] + N.sum(axis=0)[None, :] - 2 * N


def delta(C1: Clustering, C2: Clustering) -> PermutationMatch:
    """Optimal matching between the blocks of C1 and C2 (assignment solver)."""
    cost = _mismatch_matrix(C1, C2)
    rows, cols = linear_sum_assignment(cost)
    sigma = tuple(int(c) for c in cols[np.argsort(rows)])
    per_block = tuple(int(cost[i, sigma[i]]) for i in range(C1.k))
    return PermutationMatch(sigma, per_block, C1.n)


def delta_sample(C1: Clustering, C2: Clustering, S: Iterable[int]) -> float:
    """Difference of the two clusterings restricted to S, normalised by |S|."""
    S = np.unique(np.fromiter(S, dtype=np.int64)) if not isinstance(S, np.ndarray) else np.unique(S)
    if S.size == 0:
        raise ValidationError("sample must be non-empty")
    return delta(restrict(C1, S), restrict(C2, S)).value


def delta_bruteforce(C1: Clustering, C2: Clustering) -> Fraction:
    """Exact value by trying all k! label permutations."""
    if C1.k > BRUTEFORCE_MAX_K:
        raise ValidationError(f"k={C1.k} too large for enumeration (max {BRUTEFORCE_MAX_K})")
    cost = _mismatch_matrix(C1, C2)
    k = C1.k
    best = min(sum(int(cost[i, s[i]]) for i in range(k)) for s in itertools.permutations(range(k)))
    return Fraction(best, C1.n)


def h_value(C1: Clustering, C2: Clustering, sigma: Sequence[int], x: int) -> int:
    """1 if x lies in some C1_i symdiff C2_sigma(i), else 0."""
    return int(C2.label_of(x) != sigma[C1.label_of(x)])


def h_vector(C1: Clustering, C2: Clustering, sigma: Sequence[int]) -> np.ndarray:
    """h_value for every id of the common domain, in id order."""
    _check_pair(C1, C2)
    sigma = np.asarray(sigma, dtype=np.int64)
    return (sigma[C1.labels] != C2.labels).astype(np.int64)


def h_mean(C1: Clustering, C2: Clustering, sigma: Sequence[int], S: Iterable[int]) -> float:
    S = list(S)
    if not S:
        raise ValidationError("sample must be non-empty")
    return sum(h_value(C1, C2, sigma, x) for x in S) / len(S)


# Batched variants used by the experiment loops. ``ref`` is (n,), ``cands`` is
# (P, n); all label arrays are over the same ordered domain.

def agreement_counts(ref: np.ndarray, cands: np.ndarray, k: int) -> np.ndarray:
    """Max matched agreement per candidate: max_s sum_i N[i, s(i)]."""
    cands = np.atleast_2d(cands)
    P = cands.shape[0]
    N = np.empty((P, k, k), dtype=np.int64)
    ref_masks = [ref == i for i in range(k)]
    for j in range(k):
        cj = cands == j
        for i in range(k):
            N[:, i, j] = np.count_nonzero(cj & ref_masks[i], axis=1)
    if k <= 6:
        perms = np.array(list(itertools.permutations(range(k))), dtype=np.int64)
        rows = np.arange(k)
        return N[:, rows[None, :], perms].sum(axis=2).max(axis=1)
    out = np.empty(P, dtype=np.int64)
    for p in range(P):
        r, c = linear_sum_assignment(N[p], maximize=True)
        out[p] = N[p][r, c].sum()
    return out


def delta_batch(ref: np.ndarray, cands: np.ndarray, k: int) -> np.ndarray:
    """Difference between ``ref`` and every row of ``cands`` (floats in [0, 2])."""
    n = ref.shape[0]
    if n == 0:
        raise ValidationError("difference over an empty domain is undefined")
    return 2.0 * (n - agreement_counts(ref, cands, k)) / n


def n_permutations(k: int) -> int:
    return math.factorial(k)
