"""Learning-rate rules.

Every rule is a pure function of observables the game loop hands in, so the
same code serves a single game and a batch of replicas (arrays along the
first axis). ``1/eta_0`` is taken to be exactly 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

SQRT_HALF = math.sqrt(0.5)


class ScheduleError(ValueError):
    pass


class Kind(str, enum.Enum):
    STATIC_L = "static-L"
    STATIC_KL = "static-KL"
    STATIC_RATIO = "static-ratio"
    DYNAMIC_T = "dynamic-t"
    DYNAMIC_KT = "dynamic-Kt"
    SELF_CONFIDENT = "self-confident"
    SELF_CONFIDENT_K = "self-confident-K"
    ADAPTIVE_MIN_PENALIZED = "adaptive-min-penalized"
    ADAPTIVE_SMIN_K = "adaptive-smin-K"


class LossSource(str, enum.Enum):
    """Where a self-confident rule takes the learner's past loss from."""

    EXACT = "exact"
    MONTE_CARLO = "monte-carlo"
    ACTUAL = "actual"


def _positive(name, value):
    if value is None or not value > 0:
        raise ScheduleError(f"{name} must be positive, got {value!r}")


def eta_static(kind, K: float | None = None, L: float | None = None,
               ratio: float | None = None) -> float:
    kind = Kind(kind)
    if kind is Kind.STATIC_L:
        _positive("L", L)
        return 1.0 / math.sqrt(L)
    if kind is Kind.STATIC_KL:
        _positive("K", K)
        _positive("L", L)
        return math.sqrt(K / L)
    if kind is Kind.STATIC_RATIO:
        # only k^i / L is needed
        _positive("ratio", ratio)
        return math.sqrt(ratio)
    raise ScheduleError(f"{kind.value} is not a static schedule")


def eta_dynamic_t(t, K: float | None = None):
    t = np.asarray(t, dtype=float)
    if np.any(t < 1):
        raise ScheduleError("rounds start at t = 1")
    if K is None:
        return 1.0 / np.sqrt(t)
    _positive("K", K)
    return np.sqrt(K / (2.0 * t))


def eta_self_confident(ell_prev, K: float | None = None, previous=None):
    """``1/sqrt(2(l+1))``, or ``sqrt(K/(2(l+1)))`` when ``K`` is given.

    ``previous`` is the observable fed on the preceding call, if the caller
    wants the nondecreasing precondition checked.
    """
    ell = np.asarray(ell_prev, dtype=float)
    if np.any(ell < 0):
        raise ScheduleError("past loss must be nonnegative")
    if previous is not None and np.any(ell < np.asarray(previous) - 1e-12):
        raise ScheduleError("past loss decreased between calls")
    if K is None:
        return 1.0 / np.sqrt(2.0 * (ell + 1.0))
    _positive("K", K)
    return np.sqrt(K / (2.0 * (ell + 1.0)))


def eta_adaptive_min_penalized(cum_loss, k):
    """``1 / min_i (k^i + sqrt((k^i)^2 + 2 s^i + 2))``; ``cum_loss`` is (..., n)."""
    s = np.asarray(cum_loss, dtype=float)
    k = np.asarray(k, dtype=float)
    if k.size == 0:
        raise ScheduleError("empty pool")
    if np.any(s < 0):
        raise ScheduleError("cumulative losses must be nonnegative")
    return 1.0 / np.min(k + np.sqrt(k * k + 2.0 * s + 2.0), axis=-1)


def eta_adaptive_smin(s_min_prev, K: float):
    """``sqrt(1/2) * min(1, sqrt(K / s_min))``; equals sqrt(1/2) at s_min = 0."""
    _positive("K", K)
    s = np.asarray(s_min_prev, dtype=float)
    if np.any(s < 0):
        raise ScheduleError("best past loss must be nonnegative")
    with np.errstate(divide="ignore"):
        ratio = np.where(s > 0, K / np.where(s > 0, s, 1.0), np.inf)
    return SQRT_HALF * np.minimum(1.0, np.sqrt(ratio))


@dataclass(frozen=True)
class Observables:
    """What a schedule may look at when choosing eta for round ``t``.

    Arrays carry one row per replica. ``learner_prev`` is the past learner
    loss from whichever source the schedule was configured with.
    """

    t: int
    cum_loss: np.ndarray
    learner_prev: np.ndarray | None = None


@dataclass(frozen=True)
class Schedule:
    kind: Kind
    K: float | None = None
    L: float | None = None
    ratio: float | None = None
    loss_source: LossSource = LossSource.EXACT
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "loss_source", LossSource(self.loss_source))
        needs_K = {Kind.STATIC_KL, Kind.DYNAMIC_KT, Kind.SELF_CONFIDENT_K, Kind.ADAPTIVE_SMIN_K}
        if self.kind in needs_K:
            _positive("K", self.K)
        if self.kind in (Kind.STATIC_L, Kind.STATIC_KL):
            _positive("L", self.L)
        if self.kind is Kind.STATIC_RATIO:
            _positive("ratio", self.ratio)

    @property
    def self_confident(self) -> bool:
        return self.kind in (Kind.SELF_CONFIDENT, Kind.SELF_CONFIDENT_K)

    def eta(self, obs: Observables, complexities) -> np.ndarray:
        rows = np.asarray(obs.cum_loss).shape[0]
        kind = self.kind
        if kind in (Kind.STATIC_L, Kind.STATIC_KL, Kind.STATIC_RATIO):
            value = eta_static(kind, self.K, self.L, self.ratio)
        elif kind is Kind.DYNAMIC_T:
            value = eta_dynamic_t(obs.t)
        elif kind is Kind.DYNAMIC_KT:
            value = eta_dynamic_t(obs.t, self.K)
        elif kind is Kind.SELF_CONFIDENT:
            value = eta_self_confident(obs.learner_prev)
        elif kind is Kind.SELF_CONFIDENT_K:
            value = eta_self_confident(obs.learner_prev, self.K)
        elif kind is Kind.ADAPTIVE_MIN_PENALIZED:
            value = eta_adaptive_min_penalized(obs.cum_loss, complexities)
        else:
            value = eta_adaptive_smin(np.min(obs.cum_loss, axis=-1), self.K)
        return np.broadcast_to(np.asarray(value, dtype=float), (rows,)).copy()

    def describe(self) -> dict:
        return {
            "kind": self.kind.value, "K": self.K, "L": self.L, "ratio": self.ratio,
            "loss_source": self.loss_source.value if self.self_confident else None,
        }


def dynamic(K: float | None = None) -> Schedule:
    return Schedule(Kind.DYNAMIC_KT, K=K) if K is not None else Schedule(Kind.DYNAMIC_T)
