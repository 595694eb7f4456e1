from fractions import Fraction

import numpy as np
import pytest

from srlk.core import Clustering, Dataset, TableMapping, ValidationError, collapse_mapping, restrict
from srlk.learner import (
    CandidateError,
    LearnProblem,
    draw_sample,
    expert_labels,
    regret,
    representativeness,
    term_learn,
)
from srlk.partition import delta_bruteforce

from helpers import random_clustering


def six_points():
    """Target {0,1,2},{3,4,5}; candidate A agrees on the sample {0, 3} only, B everywhere."""
    X = Dataset(np.zeros((6, 1)))
    C_star = Clustering.from_blocks([[0, 1, 2], [3, 4, 5]])
    A = TableMapping([[0.0], [0.0], [1.0], [1.0], [1.0], [1.0]])
    B = TableMapping([[0.0], [0.0], [0.0], [1.0], [1.0], [1.0]])
    return X, C_star, A, B


def problem(X, C_star, S, candidates, **kw):
    return LearnProblem(X, S, expert_labels(C_star, S), candidates, C_star.k, policy="exact", **kw)


class TestTerm:
    def test_realizable(self):
        rng = np.random.default_rng(0)
        C = random_clustering(rng, 8, 2)
        X = Dataset(np.zeros((8, 1)))
        others = [TableMapping(rng.uniform(0.1, 0.9, (8, 1))) for _ in range(3)]
        cands = others + [collapse_mapping(C, 2)]
        res = term_learn(problem(X, C, [0, 2, 5], cands))
        assert res.empirical_loss == 0
        r, best = regret(X, C, res, cands, policy="exact")
        assert best == 0 and r >= 0

    def test_singleton_class(self):
        X, C_star, A, _ = six_points()
        res = term_learn(problem(X, C_star, [0, 1, 3], [A]))
        assert res.index == 0 and res.f_hat is A

    def test_sample_blind_tie(self):
        X, C_star, A, B = six_points()
        res = term_learn(problem(X, C_star, [0, 3], [A, B]))
        assert res.per_candidate_losses.tolist() == [0.0, 0.0]
        assert res.index == 0
        r, best = regret(X, C_star, res, [A, B], policy="exact")
        assert best == 0
        assert r == pytest.approx(1 / 3)
        # reversing the order picks B and the regret disappears
        res = term_learn(problem(X, C_star, [0, 3], [B, A]))
        assert regret(X, C_star, res, [B, A], policy="exact")[0] == 0

    def test_full_sample_no_regret(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            X = Dataset(np.zeros((7, 1)))
            C = random_clustering(rng, 7, 2)
            cands = [TableMapping(rng.uniform(0.05, 0.95, (7, 2))) for _ in range(6)]
            res = term_learn(problem(X, C, range(7), cands))
            assert regret(X, C, res, cands, policy="exact")[0] == 0

    def test_enlarging_class_never_hurts_fit(self):
        rng = np.random.default_rng(2)
        X = Dataset(np.zeros((8, 1)))
        C = random_clustering(rng, 8, 3)
        cands = [TableMapping(rng.uniform(0.05, 0.95, (8, 2))) for _ in range(8)]
        S = [1, 3, 4, 6]
        losses = [term_learn(problem(X, C, S, cands[:j])).empirical_loss for j in range(1, 9)]
        assert all(b <= a for a, b in zip(losses, losses[1:]))

    def test_validation(self):
        X, C_star, A, _ = six_points()
        with pytest.raises(ValidationError):
            problem(X, C_star, [0, 3], [])
        with pytest.raises(ValidationError):
            LearnProblem(X, [0, 3], expert_labels(C_star, [0, 4]), [A], 2)
        with pytest.raises(ValidationError):
            LearnProblem(X, [], Clustering(2, [], []), [A], 2)

    def test_failing_candidate_identified(self):
        X, C_star, A, _ = six_points()
        bad = TableMapping(np.zeros((3, 1)))
        with pytest.raises(CandidateError) as info:
            term_learn(problem(X, C_star, [0, 3], [A, bad]))
        assert info.value.index == 1


class TestRepresentativeness:
    def test_full_sample(self):
        X, C_star, A, B = six_points()
        assert representativeness(np.arange(6), X, [A, B], C_star, policy="exact") == 0

    def test_target_in_class(self):
        X, C_star, _, B = six_points()
        assert representativeness([0, 4], X, [B], C_star, policy="exact") == 0

    def test_six_points(self):
        X, C_star, A, B = six_points()
        # A: 1/3 on X, 0 on S
        assert representativeness([0, 3], X, [A, B], C_star, policy="exact") == pytest.approx(1 / 3)

    def test_against_bruteforce(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            C_star = random_clustering(rng, 12, 3)
            cands = [random_clustering(rng, 12, 3) for _ in range(2)]
            S = np.sort(rng.choice(12, 6, replace=False))
            expect = max(
                abs(delta_bruteforce(C_star, c) - delta_bruteforce(restrict(C_star, S), restrict(c, S))) for c in cands
            )
            got = representativeness(S, None, cands, C_star)
            assert Fraction(got).limit_denominator(1000) == expect

    def test_empty_sample(self):
        X, C_star, A, _ = six_points()
        with pytest.raises(ValidationError):
            representativeness([], X, [A], C_star, policy="exact")


def test_draw_sample():
    rng = np.random.default_rng(0)
    S = draw_sample(10, 4, rng)
    assert len(set(S.tolist())) == 4 and list(S) == sorted(S)
    with pytest.raises(ValidationError):
        draw_sample(3, 5, rng)
