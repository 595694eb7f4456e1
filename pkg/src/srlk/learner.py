"""Transductive ERM over a finite set of candidate mappings, plus regret and
sample representativeness."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Clustering, Dataset, ValidationError, restrict
from .kmeans import kmeans
from .partition import delta_batch


class CandidateError(RuntimeError):
    def __init__(self, index: int, cause: Exception):
        super().__init__(f"k-means failed for candidate {index}: {cause}")
        self.index = index


def candidate_clusterings(
    X: Dataset, candidates: Sequence, k: int, policy: str = "auto", seed: int = 0, restarts: int = 10
) -> list[Clustering]:
    """C^f_X for every candidate mapping f, in candidate order."""
    out = []
    for i, f in enumerate(candidates):
        try:
            out.append(kmeans(X, f, k, policy=policy, seed=seed, restarts=restarts).clustering)
        except Exception as exc:  # noqa: BLE001 - re-raised with the candidate index
            raise CandidateError(i, exc) from exc
    return out


def label_matrix(clusterings: Sequence[Clustering]) -> np.ndarray:
    return np.vstack([C.labels for C in clusterings])


def draw_sample(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """m ids drawn uniformly without replacement from 0..n-1, sorted."""
    if not 1 <= m <= n:
        raise ValidationError(f"sample size {m} must be in [1, {n}]")
    return np.sort(rng.choice(n, size=m, replace=False))


@dataclass(frozen=True, eq=False)
class LearnProblem:
    X: Dataset
    S: np.ndarray
    Y: Clustering
    candidates: Sequence
    k: int
    policy: str = "auto"
    seed: int = 0
    restarts: int = 10
    clusterings: Sequence[Clustering] | None = None

    def __post_init__(self):
        S = np.unique(np.asarray(self.S, dtype=np.int64))
        if S.size == 0:
            raise ValidationError("the clustered sample is empty")
        if S[0] < 0 or S[-1] >= self.X.n:
            raise ValidationError("sample ids outside the dataset")
        if not np.array_equal(self.Y.ids, S):
            raise ValidationError("the sample clustering must partition exactly the sample ids")
        if self.Y.k != self.k:
            raise ValidationError(f"sample clustering has k={self.Y.k}, problem has k={self.k}")
        if len(self.candidates) == 0:
            raise ValidationError("the candidate set is empty")
        if self.clusterings is not None and len(self.clusterings) != len(self.candidates):
            raise ValidationError("one precomputed clustering per candidate is required")
        object.__setattr__(self, "S", S)

    def full_clusterings(self) -> list[Clustering]:
        if self.clusterings is not None:
            return list(self.clusterings)
        return candidate_clusterings(self.X, self.candidates, self.k, self.policy, self.seed, self.restarts)


@dataclass(frozen=True, eq=False)
class LearnResult:
    index: int
    f_hat: object
    empirical_loss: float
    full_clustering: Clustering
    per_candidate_losses: np.ndarray


def term_learn(problem: LearnProblem) -> LearnResult:
    """Pick the candidate whose k-means clustering of the whole domain best
    agrees with the expert's labels on the sample. Ties go to the lowest index."""
    clusterings = problem.full_clusterings()
    L = label_matrix(clusterings)
    losses = delta_batch(problem.Y.labels, L[:, problem.S], problem.k)
    best = int(np.argmin(losses))
    return LearnResult(best, problem.candidates[best], float(losses[best]), clusterings[best], losses)


def _resolve(X, F_cover, k, **solver):
    if all(isinstance(c, Clustering) for c in F_cover):
        return list(F_cover)
    return candidate_clusterings(X, F_cover, k, **solver)


def true_losses(C_star: Clustering, clusterings: Sequence[Clustering]) -> np.ndarray:
    return delta_batch(C_star.labels, label_matrix(clusterings), C_star.k)


def sample_losses(C_star: Clustering, clusterings: Sequence[Clustering], S) -> np.ndarray:
    S = np.unique(np.asarray(S, dtype=np.int64))
    if S.size == 0:
        raise ValidationError("sample must be non-empty")
    return delta_batch(C_star.labels[S], label_matrix(clusterings)[:, S], C_star.k)


def representativeness(S, X: Dataset, F_cover: Sequence, C_star: Clustering, **solver) -> float:
    """Smallest eps for which S is eps-representative: max over the candidates of
    |true difference to C_star - sample difference to C_star|.

    ``F_cover`` may hold mappings or their precomputed clusterings of X.
    """
    clusterings = _resolve(X, F_cover, C_star.k, **solver)
    gaps = np.abs(true_losses(C_star, clusterings) - sample_losses(C_star, clusterings, S))
    return float(gaps.max())


def regret(X: Dataset, C_star: Clustering, result: LearnResult, F_cover: Sequence, **solver) -> tuple[float, float]:
    """(learned mapping's true difference minus the best in the candidate set, that best)."""
    clusterings = _resolve(X, F_cover, C_star.k, **solver)
    truth = true_losses(C_star, clusterings)
    best = float(truth.min())
    mine = float(true_losses(C_star, [result.full_clustering])[0])
    return mine - best, best


def expert_labels(C_star: Clustering, S) -> Clustering:
    return restrict(C_star, S)
