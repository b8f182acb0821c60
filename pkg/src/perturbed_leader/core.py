"""Expert pools, loss vectors, cumulative game state and hindsight accounting.

Experts are indexed from 0 internally. Anything printed for humans
(reports, CSV traces) uses the same 0-based indices; the docstrings below
mention 1-based numbering only where it matches the usual textbook notation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

VALIDITY_SLACK = 1e-12


class PoolError(ValueError):
    """An expert pool violates its construction constraints."""


class LossError(ValueError):
    """A loss vector has the wrong shape or leaves [0, 1]."""


@dataclass(frozen=True)
class ExpertPool:
    """Finite set of experts with complexities ``k`` and entering times ``tau``.

    ``cap`` is set when the pool is a finite truncation of a countable class;
    it is echoed in every report so truncation effects stay visible.
    """

    complexities: np.ndarray
    entering_times: np.ndarray | None = None
    cap: int | None = None

    def __post_init__(self):
        k = np.asarray(self.complexities, dtype=float).copy()
        if k.ndim != 1 or k.size == 0:
            raise PoolError("an expert pool needs at least one expert")
        if not np.all(np.isfinite(k)) or np.any(k < 0):
            raise PoolError("complexities must be finite and nonnegative")
        weight = math.fsum(np.exp(-k))
        if weight > 1 + VALIDITY_SLACK:
            raise PoolError(f"sum of exp(-k) is {weight:.15g} > 1")
        k.setflags(write=False)
        object.__setattr__(self, "complexities", k)
        if self.entering_times is not None:
            tau = np.asarray(self.entering_times, dtype=np.int64).copy()
            if tau.shape != k.shape:
                raise PoolError("entering_times must have one entry per expert")
            if np.any(tau < 1):
                raise PoolError("entering times must be >= 1")
            tau.setflags(write=False)
            object.__setattr__(self, "entering_times", tau)

    @property
    def n(self) -> int:
        return int(self.complexities.size)

    @property
    def weight_sum(self) -> float:
        return math.fsum(np.exp(-self.complexities))

    @property
    def max_complexity(self) -> float:
        return float(self.complexities.max())

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.complexities == self.complexities[0]))

    def active(self, t: int) -> np.ndarray:
        """Boolean mask of experts that have entered by round ``t``."""
        if self.entering_times is None:
            return np.ones(self.n, dtype=bool)
        return self.entering_times <= t

    def describe(self) -> dict:
        return {
            "n": self.n,
            "cap": self.cap,
            "uniform": self.is_uniform,
            "max_complexity": self.max_complexity,
            "weight_sum": self.weight_sum,
            "finitized": self.entering_times is not None,
        }


def make_uniform_pool(n: int) -> ExpertPool:
    """``n`` experts with ``k = ln n`` each."""
    if n < 1:
        raise PoolError("n must be >= 1")
    return ExpertPool(np.full(n, math.log(n)))


def make_countable_pool(cap: int, finitized: bool = False) -> ExpertPool:
    """First ``cap`` experts of the countable class ``k^i = 1/2 + 2 ln i``.

    With ``finitized`` set, expert ``i`` enters at round ``ceil(k^i)``.
    """
    if cap < 1:
        raise PoolError("cap must be >= 1")
    i = np.arange(1, cap + 1, dtype=float)
    k = 0.5 + 2.0 * np.log(i)
    tau = np.maximum(1, np.ceil(k)).astype(np.int64) if finitized else None
    return ExpertPool(k, entering_times=tau, cap=cap)


def make_pool(complexities) -> ExpertPool:
    return ExpertPool(np.asarray(complexities, dtype=float))


def check_losses(s_t, n: int | None = None) -> np.ndarray:
    """Validate one round's losses (or a batch of rows) and return them as floats."""
    s = np.asarray(s_t, dtype=float)
    if n is not None and s.shape[-1] != n:
        raise LossError(f"expected {n} losses per round, got {s.shape[-1]}")
    if not np.all(np.isfinite(s)) or np.any(s < 0) or np.any(s > 1):
        raise LossError("losses must lie in [0, 1]")
    return s


@dataclass(frozen=True)
class LossVector:
    values: np.ndarray

    def __post_init__(self):
        s = check_losses(self.values).copy()
        if s.ndim != 1:
            raise LossError("a loss vector is one-dimensional")
        s.setflags(write=False)
        object.__setattr__(self, "values", s)


@dataclass
class GameState:
    """Cumulative bookkeeping of one game.

    ``learner_cum_expected`` only advances when the caller supplies an
    expected loss; in actual-loss play it stays at zero.
    """

    n: int
    t: int = 0
    cum_loss: np.ndarray = field(default=None)
    learner_cum_expected: float = 0.0
    learner_cum_actual: float = 0.0

    def __post_init__(self):
        if self.cum_loss is None:
            self.cum_loss = np.zeros(self.n)
        else:
            self.cum_loss = np.asarray(self.cum_loss, dtype=float).copy()

    @property
    def cum_min(self) -> float:
        return float(self.cum_loss.min())

    def copy(self) -> GameState:
        return GameState(
            self.n, self.t, self.cum_loss.copy(),
            self.learner_cum_expected, self.learner_cum_actual,
        )


def accumulate(state: GameState, s_t, actual: float | None = None,
               expected: float | None = None) -> GameState:
    """Return the state after one more round with losses ``s_t``."""
    s = check_losses(s_t, state.n)
    if s.ndim != 1:
        raise LossError("accumulate takes a single round of losses")
    out = state.copy()
    out.cum_loss = out.cum_loss + s
    out.t += 1
    if actual is not None:
        out.learner_cum_actual += float(actual)
    if expected is not None:
        out.learner_cum_expected += float(expected)
    return out


def best_expert_in_hindsight(state: GameState, pool: ExpertPool | None = None):
    """Index and cumulative loss of the best expert so far (lowest index on ties)."""
    if state.t < 1:
        raise ValueError("no rounds played yet")
    i = int(np.argmin(state.cum_loss))
    return i, float(state.cum_loss[i])


@dataclass(frozen=True)
class Decision:
    """A pure decision: either one expert index or a point on the simplex."""

    chosen_index: int | None = None
    weights: np.ndarray | None = None

    def __post_init__(self):
        if (self.chosen_index is None) == (self.weights is None):
            raise ValueError("a decision is either an index or a weight vector")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if np.any(w < -1e-12) or np.any(w > 1 + 1e-12) or abs(w.sum() - 1) > 1e-9:
                raise ValueError("weights must lie on the simplex")
            object.__setattr__(self, "weights", w)

    def as_vector(self, n: int) -> np.ndarray:
        if self.weights is not None:
            return self.weights
        v = np.zeros(n)
        v[self.chosen_index] = 1.0
        return v

    def loss(self, s_t) -> float:
        s = np.asarray(s_t, dtype=float)
        if self.weights is not None:
            return float(self.weights @ s)
        return float(s[self.chosen_index])
