from __future__ import annotations

import math

import numpy as np
import pytest

from perturbed_leader.exact import (ExactComputationError, PenalizedScore, choice_probabilities,
                                    choice_probabilities_batch, choice_probabilities_monte_carlo,
                                    choice_probabilities_quadrature,
                                    choice_probabilities_subset_sum, expected_loss)
from perturbed_leader.perturbation import replica_rng

TWO_EXPERT = 1 - math.exp(-1) / 2  # P[I=1] for scores (0, 1), eta = 1


class TestSubsetSum:
    def test_symmetric_three(self):
        np.testing.assert_allclose(choice_probabilities_subset_sum([2.0, 2.0, 2.0], 0.7), [1 / 3] * 3)

    def test_two_experts(self):
        p = choice_probabilities_subset_sum([0.0, 1.0], 1.0)
        assert p[0] == pytest.approx(TWO_EXPERT, abs=1e-15)
        assert p[0] == pytest.approx(0.816060, abs=1e-6)

    def test_single(self):
        assert choice_probabilities_subset_sum([3.0], 1.0).tolist() == [1.0]

    def test_cap(self):
        with pytest.raises(ExactComputationError):
            choice_probabilities_subset_sum(np.arange(16.0), 1.0)

    def test_inactive_experts_get_zero(self):
        p = choice_probabilities_subset_sum([0.0, np.inf, 1.0], 1.0)
        assert p[1] == 0.0
        assert p[0] == pytest.approx(TWO_EXPERT)


class TestQuadrature:
    def test_two_experts(self):
        q = choice_probabilities_quadrature([0.0, 1.0], 1.0)
        np.testing.assert_allclose(q, choice_probabilities_subset_sum([0.0, 1.0], 1.0), atol=1e-9)

    def test_ten_random_sum(self):
        s = replica_rng(3).uniform(0, 20, 10)
        assert abs(choice_probabilities_quadrature(s, 0.3).sum() - 1) <= 1e-7

    def test_single(self):
        assert choice_probabilities_quadrature([5.0], 2.0).tolist() == [1.0]

    def test_agrees_with_subset_sum(self):
        rng = replica_rng(21)
        for _ in range(60):
            n = int(rng.integers(1, 13))
            s = rng.uniform(0, 20, n)
            eta = float(rng.uniform(0.05, 2.0))
            np.testing.assert_allclose(choice_probabilities_quadrature(s, eta),
                                       choice_probabilities_subset_sum(s, eta), atol=1e-8)

    def test_batch_matches(self):
        rng = replica_rng(5)
        s = rng.uniform(0, 10, (20, 7))
        eta = rng.uniform(0.1, 2.0, 20)
        batch = choice_probabilities_batch(s, eta)
        for r in range(20):
            np.testing.assert_allclose(batch[r], choice_probabilities_subset_sum(s[r], eta[r]),
                                       atol=1e-12)

    def test_large_pool(self):
        s = replica_rng(6).uniform(0, 5, 200)
        p = choice_probabilities(s, 0.5)
        assert abs(p.sum() - 1) <= 1e-9 and p.min() >= 0


class TestMonteCarloAgreement:
    @pytest.mark.parametrize("scores,eta", [([0.0, 1.0], 1.0), ([0.3, 0.0, 1.2, 2.0], 0.8)])
    def test_within_four_sigma(self, scores, eta):
        draws = 10 ** 6
        exact = choice_probabilities_subset_sum(scores, eta)
        mc = choice_probabilities_monte_carlo(scores, eta, draws, replica_rng(17))
        sigma = np.sqrt(exact * (1 - exact) / draws)
        assert np.all(np.abs(mc - exact) <= 4 * sigma + 1e-12)


class TestStructure:
    def test_monotone_in_own_score(self):
        rng = replica_rng(9)
        for _ in range(30):
            s = rng.uniform(0, 5, 5)
            i = int(rng.integers(5))
            lower = s.copy()
            lower[i] -= 0.3
            p, q = choice_probabilities_subset_sum(s, 0.9), choice_probabilities_subset_sum(lower, 0.9)
            assert q[i] > p[i]
            others = np.arange(5) != i
            assert np.all(q[others] <= p[others] + 1e-12)

    def test_concentrates_for_large_eta(self):
        p = choice_probabilities_subset_sum([1.0, 1.5, 2.0], 50.0)
        assert p[0] >= 0.99

    def test_order_preserved(self):
        p = choice_probabilities_subset_sum([0.0, 0.4, 0.9], 1.3)
        assert p[0] > p[1] > p[2]


class TestExpectedLoss:
    def test_all_ones(self):
        assert expected_loss([0.0, 0.7, 3.0], 1.0, [1, 1, 1]) == pytest.approx(1.0)

    def test_all_zeros(self):
        assert expected_loss([0.0, 0.7, 3.0], 1.0, [0, 0, 0]) == 0.0

    def test_two_experts(self):
        assert expected_loss([0.0, 1.0], 1.0, [0, 1]) == pytest.approx(0.1839, abs=1e-4)

    def test_score_type(self):
        score = PenalizedScore.from_state([0.0, 0.0], [0.0, 1.0], 1.0)
        assert score.s.tolist() == [0.0, 1.0] and score.s_min == 0.0

    def test_no_active(self):
        with pytest.raises(ExactComputationError):
            PenalizedScore([np.inf, np.inf])
