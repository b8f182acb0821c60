"""Decision makers.

Two layers live here. The ``*_decide`` functions are the one-round decision
rules on plain state. The predictor classes wrap a rule together with its
learning-rate schedule for the game engine in :mod:`perturbed_leader.harness`;
they operate on a batch of replicas at once (arrays with one row per
replica) and hold no randomness of their own: the engine hands them the
perturbation for each round.
"""

from __future__ import annotations

import math

import numpy as np

from .core import Decision, ExpertPool, GameState, check_losses
from .exact import PenalizedScore, choice_probabilities, choice_probabilities_batch
from .schedules import Kind, Observables, Schedule, eta_adaptive_min_penalized, \
    eta_adaptive_smin, eta_dynamic_t


class NoActiveExperts(RuntimeError):
    pass


def best_decision(s) -> np.ndarray:
    """Unit vector of the smallest component (lowest index on ties)."""
    s = np.asarray(s, dtype=float)
    d = np.zeros(s.shape[-1])
    d[int(np.argmin(s))] = 1.0
    return d


def perturbed_leader(cum_loss, k, eta, q, active=None) -> np.ndarray:
    """Arg min of ``cum + (k - q)/eta`` row by row; rows are replicas."""
    cum = np.atleast_2d(np.asarray(cum_loss, dtype=float))
    eta = np.asarray(eta, dtype=float).reshape(-1, 1)
    if np.any(eta <= 0):
        raise ValueError("eta must be positive")
    score = cum + (np.asarray(k) - np.atleast_2d(q)) / eta
    if active is not None:
        if not np.any(active):
            raise NoActiveExperts("no expert has entered yet")
        score = np.where(active, score, np.inf)
    return np.argmin(score, axis=-1)


def fpl_decide(state: GameState, pool: ExpertPool, eta: float, q) -> Decision:
    """Follow the perturbed leader on the past losses held in ``state``."""
    q = np.asarray(q, dtype=float)
    if np.any(q < 0):
        raise ValueError("perturbations are nonnegative")
    active = pool.active(state.t + 1)
    i = perturbed_leader(state.cum_loss, pool.complexities, eta, q, active)[0]
    return Decision(chosen_index=int(i))


def ifpl_decide(state: GameState, pool: ExpertPool, eta: float, q, s_t) -> Decision:
    """Diagnostic only: the same rule with the current round's losses already added."""
    s = check_losses(s_t, pool.n)
    active = pool.active(state.t + 1)
    i = perturbed_leader(state.cum_loss + s, pool.complexities, eta, q, active)[0]
    return Decision(chosen_index=int(i))


def fl_decide(state: GameState, pool: ExpertPool) -> Decision:
    """Unperturbed leader on penalized past loss."""
    score = np.where(pool.active(state.t + 1), state.cum_loss + pool.complexities, np.inf)
    return Decision(chosen_index=int(np.argmin(score)))


def weight_vector(state: GameState, pool: ExpertPool, eta: float, method: str = "auto",
                  draws: int = 0, rng=None) -> Decision:
    """Simplex decision ``w^i = P[I = i]`` for the current round."""
    score = PenalizedScore.from_state(state.cum_loss, pool.complexities, eta,
                                      pool.active(state.t + 1))
    if method == "monte-carlo":
        from .exact import choice_probabilities_monte_carlo
        w = choice_probabilities_monte_carlo(score, eta, draws, rng)
    else:
        w = choice_probabilities(score, eta, method)
    return Decision(weights=w)


class Fpl:
    """Follow the perturbed leader over the whole pool."""

    kind = "fpl"
    supports_exact = True

    def __init__(self, pool: ExpertPool, schedule: Schedule):
        self.pool = pool
        self.schedule = schedule

    @property
    def width(self) -> int:
        return self.pool.n

    def reset(self, replicas: int):
        pass

    def eta(self, t: int, cum: np.ndarray, learner_prev) -> np.ndarray:
        return self.schedule.eta(Observables(t, cum, learner_prev), self.pool.complexities)

    def decide(self, t, cum, eta, q) -> np.ndarray:
        return perturbed_leader(cum, self.pool.complexities, eta, q, self.pool.active(t))

    def probabilities(self, t, cum, eta) -> np.ndarray:
        active = self.pool.active(t)
        scores = np.where(active, cum + self.pool.complexities / eta[:, None], np.inf)
        return choice_probabilities_batch(scores, eta)

    def observe(self, s_t, chosen):
        pass

    def describe(self) -> dict:
        return {"kind": self.kind, "schedule": self.schedule.describe()}


class FollowTheLeader(Fpl):
    """Penalized leader without perturbation (conceptually eta = infinity)."""

    kind = "fl"

    def __init__(self, pool: ExpertPool):
        self.pool = pool
        self.schedule = None

    @property
    def width(self) -> int:
        return 0

    def eta(self, t, cum, learner_prev):
        return np.full(cum.shape[0], np.inf)

    def decide(self, t, cum, eta, q):
        score = np.where(self.pool.active(t), cum + self.pool.complexities, np.inf)
        return np.argmin(score, axis=-1)

    def probabilities(self, t, cum, eta):
        idx = self.decide(t, cum, eta, None)
        w = np.zeros_like(cum)
        w[np.arange(cum.shape[0]), idx] = 1.0
        return w

    def describe(self):
        return {"kind": self.kind}


class DeterministicWeights(Fpl):
    """Plays the simplex point ``w_t`` itself; its loss is ``w_t . s_t`` for sure."""

    kind = "deterministic-weights"
    deterministic = True

    @property
    def width(self) -> int:
        return 0


class HierarchicalFpl:
    """Meta perturbed leader over per-complexity-class perturbed leaders.

    Class ``K`` holds the experts with ``ceil(k^i) == K`` (experts with
    ``k^i = 0`` join class 1). Every inner learner plays each round; the
    meta learner's loss for class ``K`` is the inner learner's realized loss,
    or its expected loss when ``meta_loss='expected'``.

    ``mode='a'``: inner ``sqrt(K/2t)``, meta ``1/sqrt(t)``.
    ``mode='b'``: inner ``sqrt(1/2) min(1, sqrt(K/s_min))`` over the class,
    meta ``1/min_K(k~ + sqrt(k~^2 + 2 s~ + 2))``.
    """

    kind = "hierarchical-fpl"
    supports_exact = False

    def __init__(self, pool: ExpertPool, mode: str = "a", meta_loss: str = "realized"):
        if mode not in ("a", "b"):
            raise ValueError("mode is 'a' or 'b'")
        if meta_loss not in ("realized", "expected"):
            raise ValueError("meta_loss is 'realized' or 'expected'")
        self.pool = pool
        self.mode = mode
        self.meta_loss = meta_loss
        k = pool.complexities
        labels = np.maximum(1, np.ceil(k - 1e-12)).astype(int)
        self.class_ids = np.unique(labels)
        self.members = [np.flatnonzero(labels == K) for K in self.class_ids]
        self.meta_k = 0.5 + 2.0 * np.log(self.class_ids.astype(float))
        self._meta_cum = None
        self._inner = None
        self._inner_eta = None

    @property
    def classes(self) -> dict:
        return {int(K): m.tolist() for K, m in zip(self.class_ids, self.members)}

    @property
    def width(self) -> int:
        return self.pool.n + len(self.class_ids)

    def reset(self, replicas: int):
        self._meta_cum = np.zeros((replicas, len(self.class_ids)))

    def _inner_etas(self, t, cum):
        out = []
        for K, m in zip(self.class_ids, self.members):
            if self.mode == "a":
                e = np.full(cum.shape[0], eta_dynamic_t(t, float(K)))
            else:
                e = eta_adaptive_smin(cum[:, m].min(axis=1), float(K))
            out.append(e)
        return np.stack(out, axis=1)

    def eta(self, t, cum, learner_prev):
        self._inner_eta = self._inner_etas(t, cum)
        if self.mode == "a":
            return np.full(cum.shape[0], float(eta_dynamic_t(t)))
        return eta_adaptive_min_penalized(self._meta_cum, self.meta_k)

    def decide(self, t, cum, eta, q):
        n = self.pool.n
        active = self.pool.active(t)
        k = self.pool.complexities
        inner = np.empty((cum.shape[0], len(self.class_ids)), dtype=np.int64)
        live = np.zeros(len(self.class_ids), dtype=bool)
        for c, m in enumerate(self.members):
            act = active[m]
            live[c] = act.any()
            if not live[c]:
                inner[:, c] = m[0]
                continue
            e = self._inner_eta[:, c:c + 1]
            score = np.where(act, cum[:, m] + (k[m] - q[:, m]) / e, np.inf)
            inner[:, c] = m[np.argmin(score, axis=1)]
        if not live.any():
            raise NoActiveExperts("all classes are empty")
        meta = self._meta_cum + (self.meta_k - q[:, n:]) / eta[:, None]
        meta = np.where(live, meta, np.inf)
        self._inner = inner
        self._live = live
        self._inner_cum = cum
        chosen_class = np.argmin(meta, axis=1)
        return inner[np.arange(cum.shape[0]), chosen_class]

    def observe(self, s_t, chosen):
        rows = np.arange(s_t.shape[0])[:, None]
        if self.meta_loss == "realized":
            loss = s_t[rows, self._inner]
        else:
            loss = np.empty_like(self._meta_cum)
            k = self.pool.complexities
            for c, m in enumerate(self.members):
                e = self._inner_eta[:, c]
                scores = self._inner_cum[:, m] + k[m] / e[:, None]
                w = choice_probabilities_batch(scores, e)
                loss[:, c] = (w * s_t[:, m]).sum(axis=1)
        self._meta_cum = self._meta_cum + np.where(self._live, loss, 0.0)

    def describe(self) -> dict:
        return {
            "kind": self.kind, "mode": self.mode, "meta_loss": self.meta_loss,
            "classes": {str(K): len(m) for K, m in zip(self.class_ids, self.members)},
        }


def hierarchical_decide(hfpl: HierarchicalFpl, state: GameState, t: int, q) -> Decision:
    """One hierarchical decision for a single game; ``q`` covers experts then classes."""
    if hfpl._meta_cum is None:
        hfpl.reset(1)
    cum = np.atleast_2d(state.cum_loss)
    eta = hfpl.eta(t, cum, None)
    return Decision(chosen_index=int(hfpl.decide(t, cum, eta, np.atleast_2d(q))[0]))


def make_predictor(kind: str, pool: ExpertPool, schedule: Schedule | None = None, **options):
    if kind == "fpl":
        return Fpl(pool, schedule)
    if kind == "fl":
        return FollowTheLeader(pool)
    if kind == "deterministic-weights":
        return DeterministicWeights(pool, schedule)
    if kind == "hierarchical-fpl":
        return HierarchicalFpl(pool, **options)
    if kind == "ifpl":
        raise ValueError("ifpl is a diagnostic: run fpl in exact-expected mode with diagnostics")
    raise ValueError(f"unknown predictor {kind!r}")


def decision_rule_identity(rule, losses) -> tuple[float, float]:
    """Both sides of the regret decomposition of a deterministic ``rule``.

    ``rule`` maps a cumulative loss vector to a point of the decision space.
    Returns (learner loss, hindsight term + two correction terms).
    """
    losses = np.asarray(losses, dtype=float)
    T, n = losses.shape
    before = np.zeros(n)
    lhs, beh_gap, smooth_gap = [], [], []
    for t in range(T):
        after = before + losses[t]
        d_before, d_after = rule(before), rule(after)
        lhs.append(d_before @ losses[t])
        beh_gap.append((d_before - d_after) @ before)
        smooth_gap.append((d_before - d_after) @ losses[t])
        before = after
    total = losses.sum(axis=0)
    rhs = math.fsum([rule(total) @ total, math.fsum(beh_gap), math.fsum(smooth_gap)])
    return math.fsum(lhs), rhs


def zero_regret_gap(losses) -> float:
    """``sum_t M(s_{1:t}).s_t - M(s_{1:T}).s_{1:T}``; never positive."""
    losses = np.asarray(losses, dtype=float)
    cum = np.cumsum(losses, axis=0)
    played = math.fsum(best_decision(cum[t]) @ losses[t] for t in range(len(losses)))
    return float(played - best_decision(cum[-1]) @ cum[-1])


def nonnegative_regret_gap(losses) -> float:
    """``sum_t M(s_{<t}).s_t - M(s_{1:T}).s_{1:T}``; never negative (``M(0) = e_1``)."""
    losses = np.asarray(losses, dtype=float)
    cum = np.vstack([np.zeros(losses.shape[1]), np.cumsum(losses, axis=0)])
    played = math.fsum(best_decision(cum[t]) @ losses[t] for t in range(len(losses)))
    return float(played - best_decision(cum[-1]) @ cum[-1])


__all__ = [
    "Fpl", "FollowTheLeader", "DeterministicWeights", "HierarchicalFpl",
    "best_decision", "perturbed_leader", "fpl_decide", "ifpl_decide", "fl_decide",
    "weight_vector", "hierarchical_decide", "make_predictor", "NoActiveExperts", "Kind",
]
