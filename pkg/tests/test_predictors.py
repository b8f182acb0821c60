from __future__ import annotations

import math

import numpy as np
import pytest

from perturbed_leader.core import GameState, make_countable_pool, make_pool, make_uniform_pool
from perturbed_leader.environments import make_fl_killer
from perturbed_leader.harness import play
from perturbed_leader.perturbation import replica_rng
from perturbed_leader.predictors import (FollowTheLeader, HierarchicalFpl, NoActiveExperts,
                                         best_decision, decision_rule_identity, fl_decide,
                                         fpl_decide, hierarchical_decide, ifpl_decide,
                                         make_predictor, nonnegative_regret_gap, perturbed_leader,
                                         weight_vector, zero_regret_gap)


def state(cum, t=1):
    return GameState(len(cum), t=t, cum_loss=np.array(cum, dtype=float))


class TestFplDecide:
    def test_single_expert(self):
        pool = make_uniform_pool(1)
        assert fpl_decide(state([7.0]), pool, 0.3, [2.0]).chosen_index == 0

    # k = [0, 0] and k = [0, 10] are not valid pools, so these use the bare rule
    def test_perturbation_vs_loss(self):
        assert perturbed_leader([[0.0, 5.0]], [0.0, 0.0], 1.0, [[0.2, 0.1]]).tolist() == [0]

    def test_penalty_dominates(self):
        assert perturbed_leader([[0.0, 0.0]], [0.0, 10.0], 0.1, [[0.0, 0.0]]).tolist() == [0]

    def test_shift_invariance(self):
        rng = replica_rng(1)
        k = np.full(4, math.log(4))
        for _ in range(50):
            cum = rng.uniform(0, 10, 4)
            q = rng.exponential(size=4)
            a = perturbed_leader(cum, k, 0.4, q)
            b = perturbed_leader(cum + rng.uniform(-5, 5), k, 0.4, q)
            assert a.tolist() == b.tolist()

    def test_rejects_negative_perturbation(self):
        with pytest.raises(ValueError):
            fpl_decide(state([0.0, 0.0]), make_uniform_pool(2), 1.0, [-1.0, 0.0])

    def test_respects_entering_times(self):
        pool = make_countable_pool(3, finitized=True)
        assert fpl_decide(GameState(3), pool, 1.0, [0.0, 50.0, 50.0]).chosen_index == 0

    def test_no_active(self):
        with pytest.raises(NoActiveExperts):
            perturbed_leader([[0.0]], [0.0], 1.0, [[0.0]], active=np.array([False]))


class TestIfpl:
    def test_uses_current_loss(self):
        pool = make_uniform_pool(2)
        assert ifpl_decide(state([0.0, 0.0]), pool, 1.0, [0.0, 0.0], [1.0, 0.0]).chosen_index == 1

    def test_zero_loss_equals_fpl(self):
        pool = make_uniform_pool(3)
        st, q = state([1.0, 0.5, 2.0]), [0.3, 0.1, 0.9]
        assert ifpl_decide(st, pool, 0.7, q, [0, 0, 0]) == fpl_decide(st, pool, 0.7, q)

    def test_brute_force(self):
        rng = replica_rng(2)
        pool = make_uniform_pool(4)
        for _ in range(50):
            cum, s, q = rng.uniform(0, 5, 4), rng.random(4), rng.exponential(size=4)
            score = cum + s + (pool.complexities - q) / 0.6
            best = min(range(4), key=lambda i: (score[i], i))
            assert ifpl_decide(state(cum), pool, 0.6, q, s).chosen_index == best

    def test_not_a_playable_predictor(self):
        with pytest.raises(ValueError):
            make_predictor("ifpl", make_uniform_pool(2))


class TestFollowTheLeader:
    def test_leader(self):
        assert fl_decide(state([2.0, 1.0, 3.0]), make_uniform_pool(3)).chosen_index == 1

    def test_first_round(self):
        assert fl_decide(GameState(3), make_uniform_pool(3)).chosen_index == 0

    def test_fl_killer_loss(self):
        T = 1000
        res = play(FollowTheLeader(make_uniform_pool(2)), make_fl_killer(), T)
        assert res.u_total[0] >= T - 2


class TestWeightVector:
    def test_two_equal(self):
        np.testing.assert_allclose(weight_vector(state([1.0, 1.0]), make_uniform_pool(2), 0.5).weights,
                                   [0.5, 0.5])

    def test_three_equal(self):
        np.testing.assert_allclose(weight_vector(state([0.0] * 3), make_uniform_pool(3), 2.0).weights,
                                   [1 / 3] * 3)

    def test_two_experts(self):
        w = weight_vector(state([0.0, 1.0]), make_uniform_pool(2), 1.0).weights
        np.testing.assert_allclose(w, [1 - math.exp(-1) / 2, math.exp(-1) / 2], atol=1e-12)

    def test_sums_to_one_and_orders(self):
        rng = replica_rng(4)
        pool = make_uniform_pool(5)
        for _ in range(20):
            cum = rng.uniform(0, 10, 5)
            w = weight_vector(state(cum), pool, 0.8).weights
            assert abs(w.sum() - 1) <= 1e-9
            order = np.argsort(cum)
            assert np.all(np.diff(w[order]) < 0)


class TestHierarchy:
    def test_single_class_matches_inner(self):
        pool = make_pool([0.9, 0.9])
        h = HierarchicalFpl(pool)
        assert list(h.classes) == [1]
        q = np.array([0.4, 1.3, 0.2])
        st = state([1.0, 1.2], t=4)
        d = hierarchical_decide(h, st, 5, q)
        inner = perturbed_leader(st.cum_loss, pool.complexities, math.sqrt(1 / 10), q[:2])[0]
        assert d.chosen_index == inner

    def test_two_classes(self):
        pool = make_pool([0.5, 0.5 + 2 * math.log(2)])
        h = HierarchicalFpl(pool)
        assert h.classes == {1: [0], 2: [1]}
        np.testing.assert_allclose(h.meta_k, [0.5, 0.5 + 2 * math.log(2)])

    def test_class_of_expert_100(self):
        h = HierarchicalFpl(make_countable_pool(100))
        assert 99 in h.classes[10]
        assert math.ceil(0.5 + 2 * math.log(100)) == 10

    def test_meta_weights_valid(self):
        h = HierarchicalFpl(make_countable_pool(100))
        assert np.exp(-h.meta_k).sum() <= 1

    def test_zero_complexity_joins_first_class(self):
        h = HierarchicalFpl(make_pool([0.0]))
        assert h.classes == {1: [0]}

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            HierarchicalFpl(make_uniform_pool(2), mode="c")


def _random_losses(rng):
    n, T = int(rng.integers(1, 9)), int(rng.integers(1, 9))
    return rng.uniform(-5, 5, (T, n))


class TestStructuralIdentities:
    def test_decomposition_identity_leader(self):
        rng = replica_rng(30)
        for _ in range(300):
            a, b = decision_rule_identity(best_decision, _random_losses(rng))
            assert abs(a - b) <= 1e-9

    def test_decomposition_identity_smooth_rule(self):
        rng = replica_rng(31)

        def soft(s):
            z = np.exp(-(s - s.min()))
            return z / z.sum()

        for _ in range(300):
            a, b = decision_rule_identity(soft, _random_losses(rng))
            assert abs(a - b) <= 1e-9

    def test_zero_regret(self):
        rng = replica_rng(32)
        for _ in range(300):
            assert zero_regret_gap(_random_losses(rng)) <= 1e-9

    def test_nonnegative_regret(self):
        rng = replica_rng(33)
        for _ in range(300):
            assert nonnegative_regret_gap(_random_losses(rng)) >= -1e-9

    def test_fl_killer_gap(self):
        losses = np.array([make_fl_killer().losses(t) for t in range(1, 11)])
        assert nonnegative_regret_gap(losses) == pytest.approx(9 - 4.5)
