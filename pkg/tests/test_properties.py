"""Property-based checks of the invariants that must hold for every input."""

from __future__ import annotations

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from perturbed_leader.core import GameState, accumulate, best_expert_in_hindsight
from perturbed_leader.exact import (choice_probabilities_quadrature,
                                    choice_probabilities_subset_sum)
from perturbed_leader.harness import exact_sequence_losses
from perturbed_leader.perturbation import shifted_max_cdf, shifted_max_tail_bound
from perturbed_leader.predictors import (best_decision, decision_rule_identity,
                                         nonnegative_regret_gap, perturbed_leader,
                                         zero_regret_gap)
from perturbed_leader.scenarios import random_complexities

unit = st.floats(0, 1, allow_nan=False)
signed = st.floats(-5, 5, allow_nan=False)


def loss_tables(elements, max_n=8, max_T=8):
    return st.tuples(st.integers(1, max_T), st.integers(1, max_n)).flatmap(
        lambda shape: arrays(float, shape, elements=elements))


class TestStateProperties:
    @given(loss_tables(unit), st.integers(0, 8))
    def test_prefix_split(self, losses, cut):
        cut = min(cut, len(losses))
        one = GameState(losses.shape[1])
        for row in losses:
            one = accumulate(one, row)
        head = GameState(losses.shape[1])
        for row in losses[:cut]:
            head = accumulate(head, row)
        tail = head.copy()
        for row in losses[cut:]:
            tail = accumulate(tail, row)
        np.testing.assert_allclose(one.cum_loss, losses.sum(axis=0), atol=1e-12)
        np.testing.assert_allclose(tail.cum_loss, one.cum_loss, atol=1e-12)
        assert tail.t == one.t and np.all(one.cum_loss >= one.cum_min)

    @given(loss_tables(unit))
    def test_best_expert_is_minimal(self, losses):
        st_ = GameState(losses.shape[1])
        for row in losses:
            st_ = accumulate(st_, row)
        i, loss = best_expert_in_hindsight(st_)
        assert np.all(loss <= st_.cum_loss) and st_.cum_loss[i] == loss


class TestProbabilityProperties:
    @settings(max_examples=60, deadline=None)
    @given(arrays(float, st.integers(1, 10), elements=st.floats(0, 20)), st.floats(0.05, 2.0))
    def test_methods_agree(self, scores, eta):
        p = choice_probabilities_subset_sum(scores, eta)
        q = choice_probabilities_quadrature(scores, eta)
        assert abs(p.sum() - 1) <= 1e-9 and np.all((p >= 0) & (p <= 1))
        np.testing.assert_allclose(p, q, atol=1e-8)

    @given(st.floats(-2, 5), arrays(float, st.integers(1, 10), elements=st.floats(0, 5)))
    def test_tail_bound_dominates_cdf(self, a, k):
        assert shifted_max_tail_bound(a, k) >= shifted_max_cdf(a, k) - 1e-12

    @given(arrays(float, 4, elements=st.floats(0, 10)), arrays(float, 4, elements=st.floats(0, 5)),
           st.floats(-50, 50), st.floats(0.05, 3))
    def test_leader_shift_invariant(self, cum, q, c, eta):
        k = np.full(4, math.log(4))
        assert perturbed_leader(cum, k, eta, q)[0] == perturbed_leader(cum + c, k, eta, q)[0]


class TestRegretProperties:
    @given(loss_tables(signed))
    def test_decomposition_identity(self, losses):
        a, b = decision_rule_identity(best_decision, losses)
        assert abs(a - b) <= 1e-9

    @given(loss_tables(signed))
    def test_zero_regret(self, losses):
        assert zero_regret_gap(losses) <= 1e-9

    @given(loss_tables(signed))
    def test_nonnegative_regret(self, losses):
        assert nonnegative_regret_gap(losses) >= -1e-9

    @settings(max_examples=60, deadline=None)
    @given(loss_tables(unit, max_n=6), st.integers(0, 2 ** 32 - 1))
    def test_ifpl_and_lower_bounds(self, losses, seed):
        rng = np.random.default_rng(seed)
        T, n = losses.shape
        k = random_complexities(n, rng)
        etas = np.sort(rng.uniform(0.05, 2.0, T))[::-1]
        ell, r = exact_sequence_losses(losses, k, etas)
        assert math.fsum(r) <= np.min(losses.sum(axis=0) + k / etas[-1]) + 1e-9
        assert np.all(ell <= np.exp(etas) * r + 1e-9)
        uniform = np.full(n, math.log(n))
        ell_u, _ = exact_sequence_losses(losses, uniform, etas)
        assert math.fsum(ell_u) >= losses.sum(axis=0).min() - math.log(n) / etas[-1] - 1e-9
