"""Seeded exponential perturbations and maxima of shifted exponentials.

Random streams
--------------
Every random quantity is drawn from a PCG64 generator seeded by
``SeedSequence(master_seed, spawn_key=(replica, stream))``. Replica ``r``
therefore owns a substream that does not depend on how many other replicas
run, and draws come out identical whether a caller asks for one round at a
time or for a block of rounds (numpy fills arrays in C order from the same
bit stream).
"""

from __future__ import annotations

import enum
import math

import numpy as np

PERTURBATION_STREAM = 0
ENVIRONMENT_STREAM = 1
ESTIMATE_STREAM = 2


class Regime(str, enum.Enum):
    INITIAL_ONCE = "initial-once"
    FRESH_PER_STEP = "fresh-per-step"


def replica_rng(seed: int, replica: int = 0, stream: int = PERTURBATION_STREAM):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replica), int(stream)))
    return np.random.Generator(np.random.PCG64(ss))


def uniform_open_closed(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniform draws on (0, 1]."""
    return 1.0 - rng.random(shape)


def sample_exponential(rng: np.random.Generator, shape) -> np.ndarray:
    """Exp(1) draws by inverse CDF, ``-ln u`` with ``u`` in (0, 1]."""
    return -np.log(uniform_open_closed(rng, shape))


def sample_exponential_vector(n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    return sample_exponential(rng, n)


class Perturbation:
    """Perturbation vector of a single game in either regime.

    ``advance()`` must be called once per round before ``current`` is read;
    under the initial-once regime it returns the same array every time.
    """

    def __init__(self, n: int, regime: Regime | str = Regime.FRESH_PER_STEP,
                 seed: int = 0, replica: int = 0):
        self.n = n
        self.regime = Regime(regime)
        self.seed = seed
        self._rng = replica_rng(seed, replica)
        self.current = None
        self.rounds = 0
        if self.regime is Regime.INITIAL_ONCE:
            self.current = sample_exponential_vector(n, self._rng)
            self.current.setflags(write=False)

    def advance(self) -> np.ndarray:
        if self.regime is Regime.FRESH_PER_STEP:
            self.current = sample_exponential_vector(self.n, self._rng)
        self.rounds += 1
        return self.current


class PerturbationBank:
    """Perturbations for a batch of replicas, served in blocks of rounds.

    Replica ``r`` of the bank is the same stream a standalone
    :class:`Perturbation` with ``replica=r`` would see.
    """

    def __init__(self, width: int, replicas, regime: Regime | str, seed: int):
        self.width = width
        self.replicas = list(replicas)
        self.regime = Regime(regime)
        self._rngs = [replica_rng(seed, r) for r in self.replicas]
        self._initial = None
        if self.regime is Regime.INITIAL_ONCE:
            self._initial = np.stack([sample_exponential(g, width) for g in self._rngs])

    def block(self, rounds: int) -> np.ndarray:
        """Array of shape (replicas, rounds, width)."""
        if self._initial is not None:
            return np.broadcast_to(self._initial[:, None, :],
                                   (len(self._rngs), rounds, self.width))
        return np.stack([sample_exponential(g, (rounds, self.width)) for g in self._rngs])


def weight_sum(k) -> float:
    return math.fsum(np.exp(-np.asarray(k, dtype=float)))


def shifted_max_cdf(a: float, k) -> float:
    """Exact ``P[max_i (q^i - k^i) >= a]`` for independent Exp(1) ``q``."""
    k = np.asarray(k, dtype=float)
    below = np.maximum(0.0, -np.expm1(-a - k))
    return float(1.0 - np.prod(below))


def shifted_max_tail_bound(a: float, k) -> float:
    """Union bound ``min(1, u e^{-a})`` with ``u = sum_i e^{-k^i}``."""
    return min(1.0, weight_sum(k) * math.exp(-a))


def shifted_max_expectation_bound(k) -> float:
    """Upper bound ``1 + ln u`` on ``E[max_i (q^i - k^i)]``."""
    return 1.0 + math.log(weight_sum(k))


def sample_shifted_max(k, size: int, rng: np.random.Generator, chunk: int = 1 << 17):
    """``size`` independent draws of ``max_i (q^i - k^i)``."""
    k = np.asarray(k, dtype=float)
    out = np.empty(size)
    for start in range(0, size, chunk):
        m = min(chunk, size - start)
        out[start:start + m] = (sample_exponential(rng, (m, k.size)) - k).max(axis=1)
    return out
