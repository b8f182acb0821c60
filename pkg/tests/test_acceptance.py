"""Acceptance criteria at their stated scale and tolerances.

Each criterion runs its built-in scenario with the pinned seeds. A summary
with one pass/fail line per criterion is printed at the end of the pytest
run; ``python tests/test_acceptance.py`` prints the same lines directly.
"""

from __future__ import annotations

import sys
import time

import pytest

from perturbed_leader.scenarios import run_scenario

# (criterion, scenario, runtime limit in seconds or None, headline metric)
CRITERIA = [
    (1, "exact-probability-selftest", 5, "mc_z"),
    (2, "lemma1-expectation-sandwich", 10, "mean"),
    (3, "fl-killer-thm6", 60, "mean_regret"),
    (4, "fl-failure", 1, "regret"),
    (5, "thm4-exact", 10, "worst_exp_gap"),
    (6, "cor3-exact", None, "worst_gap"),
    (7, "cor11-exact", None, "worst_gap"),
    (8, "thm7-self-confident", 300, "min_slack"),
    (9, "hierarchy-bound", 600, "mean_loss"),
    (10, "high-probability-coverage", None, "ch_frequency"),
    (11, "adaptive-adversary", None, "mean_regret"),
    (12, "structural-identities", None, "identity_max_abs_error"),
]

SUMMARY: list[str] = []


def check(number, name, limit, headline):
    start = time.perf_counter()
    result = run_scenario(name)
    elapsed = time.perf_counter() - start
    in_time = limit is None or elapsed < limit
    ok = result.passed and in_time
    budget = f" (limit {limit}s)" if limit is not None else ""
    line = (f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {name}: "
            f"{headline}={result.metrics[headline]:.6g}, {elapsed:.1f}s{budget}")
    SUMMARY.append(line)
    return ok, result, elapsed, line


@pytest.mark.acceptance
@pytest.mark.parametrize("number,name,limit,headline", CRITERIA,
                         ids=[f"criterion-{c[0]:02d}-{c[1]}" for c in CRITERIA])
def test_criterion(number, name, limit, headline):
    ok, result, elapsed, line = check(number, name, limit, headline)
    print(line)
    assert result.passed, f"{name}: {result.metrics}"
    if limit is not None:
        assert elapsed < limit, f"{name} took {elapsed:.1f}s, limit {limit}s"


def test_adaptive_report_records_initial_once_regret():
    result = run_scenario("adaptive-adversary", replicas=20)
    observed = result.metrics["initial_once_observation"]
    assert set(observed) == {"mean_regret", "stderr"}


if __name__ == "__main__":
    failures = 0
    for criterion in CRITERIA:
        ok, *_, line = check(*criterion)
        print(line, flush=True)
        failures += not ok
    sys.exit(1 if failures else 0)
