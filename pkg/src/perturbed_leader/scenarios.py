"""Built-in verification scenarios, one per acceptance check.

Each scenario is self-contained with pinned seeds and returns a
:class:`ScenarioResult` whose ``metrics`` hold every number the verdict was
computed from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import make_countable_pool, make_uniform_pool
from .environments import Bernoulli, LastChoicePunisher, make_fl_killer
from .exact import (choice_probabilities_monte_carlo, choice_probabilities_quadrature,
                    choice_probabilities_subset_sum)
from .harness import (ACTUAL, EXACT, EXACT_SLACK, MC_SIGMAS, evaluate_bound,
                      exact_sequence_losses, high_probability_check, mean_and_stderr,
                      monte_carlo_regret, play)
from .perturbation import Regime, replica_rng, sample_shifted_max
from .predictors import (Fpl, FollowTheLeader, HierarchicalFpl, best_decision,
                         decision_rule_identity, nonnegative_regret_gap, zero_regret_gap)
from .schedules import Schedule

EULER_GAMMA = 0.57721


@dataclass
class ScenarioResult:
    name: str
    citation: str
    verdict: str
    metrics: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {"scenario": self.name, "citation": self.citation,
                "verdict": self.verdict, "metrics": self.metrics}


@dataclass(frozen=True)
class Scenario:
    name: str
    citation: str
    run: Callable[..., ScenarioResult]


SCENARIOS: dict[str, Scenario] = {}


def scenario(name: str, citation: str):
    def register(fn):
        def run(seed: int | None = None, replicas: int | None = None) -> ScenarioResult:
            verdict, metrics = fn(seed, replicas)
            return ScenarioResult(name, citation, "pass" if verdict else "fail", metrics)

        SCENARIOS[name] = Scenario(name, citation, run)
        return fn

    return register


def list_scenarios() -> list[dict]:
    return [{"name": s.name, "citation": s.citation} for s in SCENARIOS.values()]


def _or(value, default):
    return default if value is None else value


# --- random instances ---------------------------------------------------------

def random_complexities(n: int, rng) -> np.ndarray:
    """Nonuniform complexities with ``sum exp(-k) <= 1``."""
    w = rng.dirichlet(np.ones(n)) * rng.uniform(0.5, 1.0)
    return -np.log(w)


def random_sequence_instance(rng, uniform: bool):
    n = int(rng.integers(2, 7))
    T = int(rng.integers(1, 9))
    losses = rng.random((T, n))
    k = np.full(n, math.log(n)) if uniform else random_complexities(n, rng)
    etas = np.sort(rng.uniform(0.05, 2.0, T))[::-1]
    return losses, k, etas


# --- scenarios ------------------------------------------------------------------

@scenario("exact-probability-selftest",
          "Choice-probability representation (subset sum and integral); scores (0,1), eta=1")
def _exact_probability(seed, replicas):
    draws = _or(replicas, 10 ** 6)
    scores, eta = np.array([0.0, 1.0]), 1.0
    closed = 1.0 - math.exp(-1.0) / 2.0
    subset = choice_probabilities_subset_sum(scores, eta)
    quad = choice_probabilities_quadrature(scores, eta)
    mc = choice_probabilities_monte_carlo(scores, eta, draws, replica_rng(_or(seed, 11)))
    sigma = math.sqrt(subset[0] * (1 - subset[0]) / draws)
    z = float(abs(mc[0] - subset[0]) / sigma)
    ok = abs(subset[0] - closed) <= 1e-12 and np.max(np.abs(quad - subset)) <= 1e-9 and z <= 4
    return ok, {"closed_form": closed, "subset_sum": subset.tolist(),
                "quadrature": quad.tolist(), "monte_carlo": mc.tolist(), "draws": draws,
                "mc_sigma": sigma, "mc_z": z}


@scenario("lemma1-expectation-sandwich",
          "Lemma: maximum of shifted exponentials, E[max q] in [0.57721 + ln n, 1 + ln n]")
def _lemma1(seed, replicas):
    draws, n = _or(replicas, 10 ** 6), 10
    x = sample_shifted_max(np.zeros(n), draws, replica_rng(_or(seed, 12)))
    mean, se = mean_and_stderr(x)
    lo, hi = EULER_GAMMA + math.log(n), 1.0 + math.log(n)
    ok = lo - MC_SIGMAS * se <= mean <= hi + MC_SIGMAS * se
    return ok, {"n": n, "draws": draws, "mean": mean, "stderr": se, "lower": lo, "upper": hi}


@scenario("fl-killer-thm6",
          "Theorem: dynamic eta = sqrt(K/2t), part (ii); FL-killer sequence, T = 10^4")
def _fl_killer_thm6(seed, replicas):
    T, R = 10 ** 4, _or(replicas, 200)
    pool = make_uniform_pool(2)
    fpl = Fpl(pool, Schedule("dynamic-Kt", K=math.log(2)))
    mean, se, res = monte_carlo_regret(fpl, make_fl_killer(), T, R, seed=_or(seed, 13))
    report = evaluate_bound("thm6ii", res, pool, fpl, mode=ACTUAL)
    limit = 2 * math.sqrt(2 * T * math.log(2))
    ok = mean <= limit + MC_SIGMAS * se and report.passed
    return ok, {"T": T, "replicas": R, "mean_regret": mean, "stderr": se,
                "regret_bound": limit, "report": report.to_dict()}


@scenario("fl-failure", "Follow the Leader on the FL-killer sequence suffers linear regret")
def _fl_failure(seed, replicas):
    T = 1000
    res = play(FollowTheLeader(make_uniform_pool(2)), make_fl_killer(), T)
    regret = float(res.regret()[0])
    return regret >= 0.4 * T, {"T": T, "regret": regret, "threshold": 0.4 * T,
                               "learner_loss": float(res.u_total[0]),
                               "best_loss": float(res.best_loss[0])}


@scenario("thm4-exact", "Theorem: FPL bounded by IFPL, l_t <= e^eta r_t (and 1+eta+eta^2 for eta <= 1)")
def _thm4(seed, replicas):
    rng = replica_rng(_or(seed, 14))
    count = _or(replicas, 100)
    worst_exp, worst_quad = -np.inf, -np.inf
    for _ in range(count):
        n = int(rng.integers(2, 7))
        scores = rng.uniform(0, 10, n)
        eta = float(rng.choice([0.1, 0.5, 1.0]))
        s_t = rng.random(n)
        ell = float(choice_probabilities_subset_sum(scores, eta) @ s_t)
        r = float(choice_probabilities_subset_sum(scores + s_t, eta) @ s_t)
        worst_exp = max(worst_exp, ell - math.exp(eta) * r)
        worst_quad = max(worst_quad, ell - (1 + eta + eta * eta) * r)
    ok = worst_exp <= EXACT_SLACK and worst_quad <= EXACT_SLACK
    return ok, {"instances": count, "worst_exp_gap": worst_exp, "worst_quadratic_gap": worst_quad}


def _sequence_check(seed, count, uniform, check):
    rng = replica_rng(seed)
    worst = -np.inf
    for _ in range(count):
        losses, k, etas = random_sequence_instance(rng, uniform)
        ell, r = exact_sequence_losses(losses, k, etas)
        worst = max(worst, check(losses, k, etas, ell, r))
    return worst


@scenario("cor3-exact", "Corollary: IFPL bounded by BEH, r_{1:T} <= s^i + k^i/eta_T for every i")
def _cor3(seed, replicas):
    count = _or(replicas, 200)

    def gap(losses, k, etas, ell, r):
        return float(np.max(math.fsum(r) - (losses.sum(axis=0) + k / etas[-1])))

    worst = _sequence_check(_or(seed, 15), count, False, gap)
    return worst <= EXACT_SLACK, {"instances": count, "worst_gap": worst}


@scenario("cor11-exact", "Corollary: FPL lower-bounded by BEH, l_{1:T} >= s^min - ln n/eta_T")
def _cor11(seed, replicas):
    count = _or(replicas, 200)

    def gap(losses, k, etas, ell, r):
        n = losses.shape[1]
        return float(losses.sum(axis=0).min() - math.log(n) / etas[-1] - math.fsum(ell))

    worst = _sequence_check(_or(seed, 16), count, True, gap)
    return worst <= EXACT_SLACK, {"instances": count, "worst_gap": worst}


@scenario("thm7-self-confident",
          "Theorem: self-confident eta = sqrt(K/2(l+1)), part (ii); Bernoulli(0.5), n=10, T=10^4")
def _thm7(seed, replicas):
    T, R, n = 10 ** 4, _or(replicas, 50), 10
    pool = make_uniform_pool(n)
    fpl = Fpl(pool, Schedule("self-confident-K", K=math.log(n), loss_source="exact"))
    env = Bernoulli(np.full(n, 0.5), shared=False)
    res = play(fpl, env, T, mode=EXACT, seed=_or(seed, 17), replicas=R)
    s_best = res.best_loss
    K = math.log(n)
    rhs = s_best + 2 * np.sqrt(2 * (s_best + 1) * K) + 8 * K
    slack = rhs - res.ell_total
    report = evaluate_bound("thm7ii", res, pool, fpl, mode=EXACT)
    ok = bool(np.all(slack >= -EXACT_SLACK)) and report.passed
    return ok, {"T": T, "replicas": R, "min_slack": float(slack.min()),
                "mean_expected_loss": float(res.ell_total.mean()),
                "mean_best_loss": float(s_best.mean()), "report": report.to_dict()}


@scenario("hierarchy-bound",
          "Hierarchy of experts: explicit chained bound; 100 experts, k = 1/2 + 2 ln i, T=10^4")
def _hierarchy(seed, replicas):
    T, R, n = 10 ** 4, _or(replicas, 100), 100
    pool = make_countable_pool(n)
    hfpl = HierarchicalFpl(pool, mode="a")
    env = Bernoulli(np.linspace(0.7, 0.3, n), shared=True)
    res = play(hfpl, env, T, seed=_or(seed, 18), replicas=R)
    report = evaluate_bound("hier", res, pool, hfpl, mode=ACTUAL, all_experts=True)
    mean, se = mean_and_stderr(res.u_total)
    rhs_all = report.details["rhs_per_expert"]
    ok = mean <= float(np.min(rhs_all)) + MC_SIGMAS * se and report.passed
    report.details["rhs_per_expert"] = None
    return ok, {"T": T, "replicas": R, "mean_loss": mean, "stderr": se,
                "tightest_rhs": float(np.min(rhs_all)),
                "tightest_expert": int(np.argmin(rhs_all)), "report": report.to_dict()}


@scenario("high-probability-coverage",
          "Chernoff-Hoeffding deviation bound (c=3) and Markov bound (c=2) on realized loss")
def _coverage(seed, replicas):
    R, n, T = _or(replicas, 10 ** 4), 10, 1000
    pool = make_uniform_pool(n)
    fpl = Fpl(pool, Schedule("dynamic-Kt", K=math.log(n)))
    env = Bernoulli(np.full(n, 0.5), shared=True)
    rep = high_probability_check(fpl, env, T, 3.0, R, seed=_or(seed, 19), markov_c=2.0)
    return rep.verdict == "pass", rep.to_dict() | {"n": n, "T": T}


@scenario("adaptive-adversary",
          "Corollary: bounds hold against an adaptive adversary with fresh per-step perturbations")
def _adaptive(seed, replicas):
    T, R = 5000, _or(replicas, 200)
    pool = make_uniform_pool(2)
    fpl = Fpl(pool, Schedule("dynamic-Kt", K=math.log(2)))
    seed = _or(seed, 20)
    mean, se, res = monte_carlo_regret(fpl, LastChoicePunisher(2), T, R, seed=seed)
    report = evaluate_bound("thm6ii", res, pool, fpl, mode=ACTUAL)
    once_mean, once_se, _ = monte_carlo_regret(fpl, LastChoicePunisher(2), T, R, seed=seed,
                                               regime=Regime.INITIAL_ONCE)
    limit = 2 * math.sqrt(2 * T * math.log(2))
    ok = mean <= limit + MC_SIGMAS * se and report.passed
    return ok, {"T": T, "replicas": R, "mean_regret": mean, "stderr": se,
                "regret_bound": limit, "report": report.to_dict(),
                "initial_once_observation": {"mean_regret": once_mean, "stderr": once_se}}


@scenario("structural-identities",
          "Regret decomposition identity, zero regret of M(s_{1:t}), nonnegative regret of M(s_{<t})")
def _identities(seed, replicas):
    rng = replica_rng(_or(seed, 21))
    count = _or(replicas, 1000)
    worst_identity = worst_zero = worst_nonneg = 0.0
    for _ in range(count):
        n, T = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        signed = rng.uniform(-5, 5, (T, n))
        beta = rng.uniform(0.1, 5.0)

        def soft(s, beta=beta):
            z = np.exp(-beta * (s - s.min()))
            return z / z.sum()

        for rule in (best_decision, soft):
            a, b = decision_rule_identity(rule, signed)
            worst_identity = max(worst_identity, abs(a - b))
        worst_zero = max(worst_zero, zero_regret_gap(signed))
        worst_nonneg = max(worst_nonneg, -nonnegative_regret_gap(signed))
    ok = worst_identity <= EXACT_SLACK and worst_zero <= EXACT_SLACK and worst_nonneg <= EXACT_SLACK
    return ok, {"instances": count, "identity_max_abs_error": worst_identity,
                "zero_regret_worst_gap": worst_zero, "nonnegative_regret_worst_gap": worst_nonneg}


def run_scenario(name: str, seed: int | None = None, replicas: int | None = None) -> ScenarioResult:
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; known: {', '.join(SCENARIOS)}")
    return SCENARIOS[name].run(seed, replicas)


__all__ = ["SCENARIOS", "ScenarioResult", "list_scenarios", "run_scenario",
           "random_complexities", "random_sequence_instance"]
