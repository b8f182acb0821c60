"""Loss-sequence generators.

An environment serves a batch of replicas. ``batch_losses(t, history)``
returns an array of shape (replicas, n) for round ``t`` (1-based), where
``history`` holds each replica's decisions for rounds ``1..t-1`` only.
Oblivious kinds ignore ``history``.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Callable

import numpy as np

from .core import check_losses
from .perturbation import ENVIRONMENT_STREAM, replica_rng


class EnvError(ValueError):
    pass


class Environment:
    kind = "abstract"
    adaptive = False

    def __init__(self, n: int):
        self.n = n
        self.replicas = 1

    def reset(self, replicas: int, replica_ids=None, seed: int = 0):
        self.replicas = replicas

    def losses(self, t: int) -> np.ndarray:
        """Oblivious kinds: the (n,) loss vector of round ``t``."""
        raise NotImplementedError

    def batch_losses(self, t: int, history: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.losses(t), (self.replicas, self.n))

    def next_losses(self, t: int, decision_history) -> np.ndarray:
        """Single-game interface: losses of round ``t`` given decisions ``I_1..I_{t-1}``."""
        history = np.asarray(decision_history, dtype=np.int64).reshape(1, -1)
        if t < 1 or history.shape[1] != t - 1:
            raise EnvError(f"round {t} needs exactly {t - 1} past decisions")
        return check_losses(np.array(self.batch_losses(t, history)[0]), self.n)

    def describe(self) -> dict:
        return {"kind": self.kind, "n": self.n}


class FixedSequence(Environment):
    kind = "fixed"

    def __init__(self, losses):
        s = check_losses(losses)
        if s.ndim != 2:
            raise EnvError("a fixed sequence is a (rounds, experts) table")
        super().__init__(s.shape[1])
        self.sequence = s

    @classmethod
    def from_csv(cls, path) -> FixedSequence:
        rows = []
        with open(Path(path), newline="") as fh:
            for line_no, row in enumerate(csv.reader(fh), 1):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append([float(x) for x in row])
                except ValueError as exc:
                    raise EnvError(f"{path}:{line_no}: {exc}") from None
        if not rows or len({len(r) for r in rows}) != 1:
            raise EnvError(f"{path}: rows must be nonempty and of equal length")
        return cls(np.array(rows))

    def losses(self, t):
        if t > len(self.sequence):
            raise EnvError(f"sequence has only {len(self.sequence)} rounds")
        return self.sequence[t - 1]

    def describe(self):
        return {"kind": self.kind, "n": self.n, "rounds": len(self.sequence)}


class FlKiller(Environment):
    """Expert 1 loses 0,1,0,1,...; expert 2 loses 1/2,0,1,0,1,..."""

    kind = "fl-killer"

    def __init__(self, n: int = 2):
        if n != 2:
            raise EnvError("the FL-killer sequence is defined for two experts")
        super().__init__(2)

    def losses(self, t):
        if t == 1:
            return np.array([0.0, 0.5])
        return np.array([1.0, 0.0]) if t % 2 == 0 else np.array([0.0, 1.0])


class Bernoulli(Environment):
    """Independent 0/1 losses, ``P[s^i = 1] = p^i``.

    With ``shared=True`` every replica faces the same sequence (the game is
    oblivious and the replicas only average over the learner's randomness);
    otherwise replica ``r`` draws its own sequence from its environment
    substream.
    """

    kind = "bernoulli"

    def __init__(self, p, shared: bool = True, block: int = 1024):
        p = np.asarray(p, dtype=float)
        if p.ndim != 1 or np.any(p < 0) or np.any(p > 1):
            raise EnvError("p must be a vector of probabilities")
        super().__init__(p.size)
        self.p = p
        self.shared = shared
        self.block = block
        self.reset(1)

    def reset(self, replicas, replica_ids=None, seed: int = 0):
        self.replicas = replicas
        ids = list(range(replicas)) if replica_ids is None else list(replica_ids)
        if self.shared:
            ids = [0]
        self._rngs = [replica_rng(seed, r, ENVIRONMENT_STREAM) for r in ids]
        self._cache = np.empty((len(ids), 0, self.n))
        self._seed = seed
        self._ids = ids

    def _ensure(self, t):
        while self._cache.shape[1] < t:
            new = np.stack([(g.random((self.block, self.n)) < self.p).astype(float)
                            for g in self._rngs])
            self._cache = np.concatenate([self._cache, new], axis=1)

    def losses(self, t):
        if not self.shared:
            raise EnvError("per-replica Bernoulli sequences are served by batch_losses")
        self._ensure(t)
        return self._cache[0, t - 1]

    def batch_losses(self, t, history):
        self._ensure(t)
        return np.broadcast_to(self._cache[:, t - 1], (self.replicas, self.n))

    def describe(self):
        return {"kind": self.kind, "n": self.n, "p": self.p.tolist(), "shared": self.shared}


class AdaptiveEnvironment(Environment):
    """Losses from a pure transition ``fn(t, past_decisions) -> losses``."""

    kind = "custom-adaptive"
    adaptive = True

    def __init__(self, n: int, fn: Callable[[int, np.ndarray], np.ndarray]):
        super().__init__(n)
        self.fn = fn

    def batch_losses(self, t, history):
        history = np.asarray(history)
        if history.shape[1] != t - 1:
            raise EnvError(f"round {t} needs exactly {t - 1} past decisions")
        out = np.stack([check_losses(self.fn(t, row.copy()), self.n) for row in history])
        return out


class LastChoicePunisher(AdaptiveEnvironment):
    """Loss 1 for the expert chosen in the previous round, 0 elsewhere."""

    kind = "last-choice-punisher"

    def __init__(self, n: int = 2):
        Environment.__init__(self, n)

    def batch_losses(self, t, history):
        history = np.asarray(history)
        if history.shape[1] != t - 1:
            raise EnvError(f"round {t} needs exactly {t - 1} past decisions")
        out = np.zeros((history.shape[0], self.n))
        if t > 1:
            out[np.arange(history.shape[0]), history[:, -1]] = 1.0
        return out


def make_fl_killer() -> FlKiller:
    return FlKiller()


def make_environment(kind: str, n: int, **params) -> Environment:
    if kind == "fl-killer":
        return FlKiller(n)
    if kind == "bernoulli":
        p = params.get("p", 0.5)
        p = np.full(n, float(p)) if np.ndim(p) == 0 else np.asarray(p, dtype=float)
        if p.size != n:
            raise EnvError(f"bernoulli needs {n} probabilities, got {p.size}")
        return Bernoulli(p, shared=params.get("shared", True))
    if kind == "last-choice-punisher":
        return LastChoicePunisher(n)
    if kind == "fixed":
        env = FixedSequence.from_csv(params["path"]) if "path" in params \
            else FixedSequence(params["losses"])
        if env.n != n:
            raise EnvError(f"sequence has {env.n} experts, pool has {n}")
        return env
    raise EnvError(f"unknown environment {kind!r}")
