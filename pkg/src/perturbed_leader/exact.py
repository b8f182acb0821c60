"""Exact choice probabilities and expected loss of the perturbed leader.

With penalized scores ``s = s_{<t} + k/eta`` and ``d = s - min(s)``, the
probability that expert ``i`` is the perturbed leader is

    P[I = i] = sum over subsets M containing i of
               (-1)^{|M|-1} / |M| * exp(-eta * sum_{j in M} d_j)

or, equivalently, the one-dimensional integral over the leader's perturbed
score. Substituting ``v = exp(-eta (s_min - m))`` maps that integral onto
(0, 1]:

    P[I = i] = a_i * integral_0^1 prod_{j != i} (1 - a_j v) dv,
    a_j = exp(-eta d_j).

The integrand is a polynomial of degree n - 1, so Gauss-Legendre with at
least n/2 nodes integrates it exactly up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SUBSET_CAP = 15
QUAD_TOL = 1e-10
RENORMALIZE_LIMIT = 1e-7
MAX_NODES = 4096


class ExactComputationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class PenalizedScore:
    """Penalized cumulative losses; ``inf`` marks experts not yet entered."""

    s: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float).copy()
        if s.ndim != 1 or s.size == 0:
            raise ValueError("scores must be a nonempty vector")
        if not np.any(np.isfinite(s)):
            raise ExactComputationError("no active experts")
        object.__setattr__(self, "s", s)

    @classmethod
    def from_state(cls, cum_loss, k, eta: float, active=None) -> PenalizedScore:
        s = np.asarray(cum_loss, dtype=float) + np.asarray(k, dtype=float) / eta
        if active is not None:
            s = np.where(active, s, np.inf)
        return cls(s)

    @property
    def s_min(self) -> float:
        return float(self.s[np.isfinite(self.s)].min())

    @property
    def active(self) -> np.ndarray:
        return np.isfinite(self.s)


def _as_score(score) -> PenalizedScore:
    return score if isinstance(score, PenalizedScore) else PenalizedScore(score)


def _check_sum(p: np.ndarray, tol: float) -> np.ndarray:
    total = math.fsum(p)
    if abs(total - 1.0) > tol or np.any(p < -tol) or np.any(p > 1 + tol):
        raise ExactComputationError(f"probabilities sum to {total!r}")
    return np.clip(p, 0.0, 1.0)


def choice_probabilities_subset_sum(score, eta: float, cap: int = SUBSET_CAP) -> np.ndarray:
    """Inclusion-exclusion over all subsets; terms are summed per subset size."""
    score = _as_score(score)
    if eta <= 0:
        raise ValueError("eta must be positive")
    act = np.flatnonzero(score.active)
    n = act.size
    if n > cap:
        raise ExactComputationError(f"{n} active experts exceeds subset cap {cap}")
    d = score.s[act] - score.s_min
    out = np.zeros(score.s.size)
    for pos, i in enumerate(act):
        others = np.delete(d, pos)
        sums = np.zeros(1)
        sizes = np.zeros(1, dtype=np.int64)
        for x in others:
            sums = np.concatenate([sums, sums + x])
            sizes = np.concatenate([sizes, sizes + 1])
        terms = np.exp(-eta * (d[pos] + sums)) / (sizes + 1)
        groups = [math.fsum(terms[sizes == m]) for m in range(n)]
        out[i] = math.fsum(g if m % 2 == 0 else -g for m, g in enumerate(groups))
    return _check_sum(out, 1e-9)


@lru_cache(maxsize=64)
def _unit_nodes(m: int):
    x, w = np.polynomial.legendre.leggauss(m)
    return (x + 1.0) / 2.0, w / 2.0


def _excluded_products(factors: np.ndarray) -> np.ndarray:
    """``prod_{j != i} factors[..., j, :]`` for every i, without division."""
    n = factors.shape[-2]
    ones = np.ones_like(factors[..., :1, :])
    prefix = np.cumprod(np.concatenate([ones, factors[..., :-1, :]], axis=-2), axis=-2)
    suffix = np.cumprod(np.concatenate([ones, factors[..., :0:-1, :]], axis=-2), axis=-2)
    return prefix * suffix[..., ::-1, :][..., :n, :]


def _gauss_probabilities(a: np.ndarray, nodes: int) -> np.ndarray:
    """Batched quadrature; ``a`` has shape (..., n), zero for inactive experts."""
    v, w = _unit_nodes(nodes)
    factors = 1.0 - a[..., :, None] * v
    return a * (_excluded_products(factors) @ w)


def choice_probabilities_quadrature(score, eta: float, tol: float = QUAD_TOL) -> np.ndarray:
    """Gauss-Legendre on the substituted domain, doubling nodes from 8 until stable."""
    score = _as_score(score)
    if eta <= 0:
        raise ValueError("eta must be positive")
    act = score.active
    a = np.where(act, np.exp(-eta * (np.where(act, score.s, 0.0) - score.s_min)), 0.0)
    nodes = 8
    p = _gauss_probabilities(a, nodes)
    while True:
        if nodes * 2 > MAX_NODES:
            raise ExactComputationError("quadrature did not converge")
        nodes *= 2
        q = _gauss_probabilities(a, nodes)
        done = np.max(np.abs(q - p)) <= tol
        p = q
        if done:
            break
    total = math.fsum(p)
    if abs(total - 1.0) > RENORMALIZE_LIMIT:
        raise ExactComputationError(f"quadrature mass {total!r} is not 1")
    return np.clip(p / total, 0.0, 1.0)


def exact_nodes(n: int) -> int:
    """Gauss-Legendre node count that integrates the degree n-1 integrand exactly."""
    return max(8, (n + 1) // 2 + 1)


def choice_probabilities_batch(scores: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Probabilities for a batch of score rows (inf = inactive); shape (R, n).

    Uses a fixed node count that is exact for the polynomial integrand.
    """
    scores = np.asarray(scores, dtype=float)
    eta = np.asarray(eta, dtype=float).reshape(-1, 1)
    act = np.isfinite(scores)
    smin = np.min(np.where(act, scores, np.inf), axis=-1, keepdims=True)
    a = np.where(act, np.exp(-eta * (np.where(act, scores, smin) - smin)), 0.0)
    p = _gauss_probabilities(a, exact_nodes(scores.shape[-1]))
    return p / p.sum(axis=-1, keepdims=True)


def choice_probabilities(score, eta: float, method: str = "auto") -> np.ndarray:
    score = _as_score(score)
    if method == "auto":
        method = "subset-sum" if score.active.sum() <= SUBSET_CAP else "quadrature"
    if method == "subset-sum":
        return choice_probabilities_subset_sum(score, eta)
    if method == "quadrature":
        return choice_probabilities_quadrature(score, eta)
    raise ValueError(f"unknown method {method!r}")


def choice_probabilities_monte_carlo(score, eta: float, draws: int,
                                     rng: np.random.Generator, chunk: int = 1 << 16):
    """Empirical frequencies of the perturbed arg min (independent of the formulas)."""
    from .perturbation import sample_exponential

    score = _as_score(score)
    counts = np.zeros(score.s.size, dtype=np.int64)
    for start in range(0, draws, chunk):
        m = min(chunk, draws - start)
        q = sample_exponential(rng, (m, score.s.size))
        counts += np.bincount(np.argmin(score.s - q / eta, axis=1), minlength=score.s.size)
    return counts / draws


def expected_loss(score, eta: float, s_t, method: str = "auto") -> float:
    w = choice_probabilities(score, eta, method)
    s = np.asarray(s_t, dtype=float)
    return float(min(1.0, max(0.0, math.fsum(w * s))))
