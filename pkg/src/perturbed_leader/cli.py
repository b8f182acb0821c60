"""Command-line experiment runner.

Experiments are described by an INI file::

    [experiment]
    schema = perturbed-leader-experiment/1
    horizon = 10000
    replicas = 200
    seed = 13
    regime = fresh-per-step        ; or initial-once
    mode = actual                  ; or exact-expected
    theorems = thm6ii              ; comma separated, may be empty

    [pool]
    kind = uniform                 ; uniform (n), countable (cap, finitized) or explicit (k)
    n = 2

    [predictor]
    kind = fpl                     ; fpl, fl, deterministic-weights, hierarchical-fpl

    [schedule]
    kind = dynamic-Kt
    K = auto                       ; auto = largest complexity in the pool

    [environment]
    kind = fl-killer               ; fl-killer, bernoulli (p, shared), last-choice-punisher, fixed (path)

    [output]
    trace = trace.csv
    report = report.json

Exit status is 0 when every requested bound holds, 1 when any fails (the
failures are printed as JSON on stderr) and 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import re
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .core import ExpertPool, PoolError, make_countable_pool, make_pool, make_uniform_pool
from .environments import EnvError, make_environment
from .harness import (ACTUAL, BOUNDS, EXACT, HypothesisError, check_hypotheses,
                      evaluate_bound, mean_and_stderr, play)
from .perturbation import Regime
from .predictors import make_predictor
from .schedules import Kind, LossSource, Schedule, ScheduleError
from .scenarios import SCENARIOS, list_scenarios, run_scenario

SCHEMA = "perturbed-leader-experiment/1"
OUTPUT_ENV = "FPL_OUTPUT_DIR"

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

KEYS = {
    "experiment": {"schema", "horizon", "replicas", "seed", "regime", "mode", "theorems",
                   "bound_expert", "batch_size"},
    "pool": {"kind", "n", "cap", "finitized", "k"},
    "predictor": {"kind", "hierarchy_mode", "meta_loss"},
    "schedule": {"kind", "k", "l", "ratio", "loss_source"},
    "environment": {"kind", "p", "shared", "path"},
    "output": {"trace", "report", "trace_replica"},
}
REQUIRED = {"experiment": {"schema", "horizon"}, "pool": {"kind"}, "predictor": {"kind"},
            "environment": {"kind"}}


class ConfigError(ValueError):
    """Invalid configuration; the message names the file, line and field."""


@dataclass
class ExperimentConfig:
    horizon: int
    replicas: int
    seed: int
    regime: Regime
    mode: str
    theorems: list[str]
    pool: ExpertPool
    predictor: object
    environment: object
    bound_expert: int | None = None
    batch_size: int = 1024
    trace: str | None = "trace.csv"
    report: str = "report.json"
    trace_replica: int = 0
    resolved: dict = field(default_factory=dict)


def _line_index(text: str) -> dict:
    """(section, key) -> line number, for diagnostics."""
    where, section = {}, None
    for no, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#;":
            continue
        m = re.match(r"\[(.+)\]$", stripped)
        if m:
            section = m.group(1).strip()
            where[(section, None)] = no
        elif section is not None:
            key = re.split(r"[=:]", stripped, maxsplit=1)[0].strip().lower()
            where[(section, key)] = no
    return where


class _Fields:
    """Typed access to a parsed config with line-numbered errors."""

    def __init__(self, parser, lines, source):
        self.parser, self.lines, self.source = parser, lines, source

    def fail(self, section, key, message):
        no = self.lines.get((section, key)) or self.lines.get((section, None))
        at = f"{self.source}:{no}" if no else self.source
        label = f"[{section}] {key}" if key else f"[{section}]"
        raise ConfigError(f"{at}: {label}: {message}")

    def has(self, section, key):
        return self.parser.has_option(section, key) and self.raw(section, key) != ""

    def raw(self, section, key):
        return self.parser.get(section, key).strip()

    def get(self, section, key, default=None, cast=str):
        if not self.has(section, key):
            if default is None and key in REQUIRED.get(section, ()):
                self.fail(section, key, "is required")
            return default
        value = self.raw(section, key)
        try:
            return cast(value)
        except (ValueError, TypeError) as exc:
            self.fail(section, key, f"cannot read {value!r}: {exc}")

    def choice(self, section, key, options, default=None):
        value = self.get(section, key, default)
        if value not in options:
            self.fail(section, key, f"{value!r} is not one of {', '.join(map(str, options))}")
        return value


def _boolean(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true or false")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise ValueError("must be >= 1")
    return value


def load_config(path, seed: int | None = None, replicas: int | None = None) -> ExperimentConfig:
    """Parse and validate an experiment file; raises :class:`ConfigError`."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config(text, str(path), seed=seed, replicas=replicas)


def parse_config(text: str, source: str = "<config>", *, seed: int | None = None,
                 replicas: int | None = None) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None,
                                       inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    f = _Fields(parser, _line_index(text), source)
    for section in parser.sections():
        if section not in KEYS:
            f.fail(section, None, f"unknown section; expected one of {', '.join(KEYS)}")
        for key in parser.options(section):
            if key not in KEYS[section]:
                f.fail(section, key, "unknown field")
    for section in REQUIRED:
        if not parser.has_section(section):
            raise ConfigError(f"{source}: missing section [{section}]")

    schema = f.get("experiment", "schema")
    if schema != SCHEMA:
        f.fail("experiment", "schema", f"expected {SCHEMA!r}, got {schema!r}")
    T = f.get("experiment", "horizon", cast=_positive_int)
    R = replicas if replicas is not None else f.get("experiment", "replicas", 1, _positive_int)
    master = seed if seed is not None else f.get("experiment", "seed", 0, int)
    regime = Regime(f.choice("experiment", "regime", [r.value for r in Regime],
                             Regime.FRESH_PER_STEP.value))
    mode = f.choice("experiment", "mode", [ACTUAL, EXACT], ACTUAL)
    theorems = [x.strip() for x in f.get("experiment", "theorems", "").split(",") if x.strip()]
    for th in theorems:
        if th not in BOUNDS:
            f.fail("experiment", "theorems", f"unknown theorem {th!r}; known: {', '.join(BOUNDS)}")
    bound_expert = f.get("experiment", "bound_expert", None, int)
    batch_size = f.get("experiment", "batch_size", 1024, _positive_int)

    pool = _build_pool(f)
    schedule = _build_schedule(f, pool, T) if parser.has_section("schedule") else None
    pkind = f.choice("predictor", "kind", ["fpl", "fl", "deterministic-weights", "hierarchical-fpl"])
    options = {}
    if pkind == "hierarchical-fpl":
        options = {"mode": f.choice("predictor", "hierarchy_mode", ["a", "b"], "a"),
                   "meta_loss": f.choice("predictor", "meta_loss", ["realized", "expected"],
                                         "realized")}
    elif pkind in ("fpl", "deterministic-weights") and schedule is None:
        raise ConfigError(f"{source}: predictor {pkind} needs a [schedule] section")
    predictor = make_predictor(pkind, pool, schedule, **options)

    ekind = f.choice("environment", "kind",
                     ["fl-killer", "bernoulli", "last-choice-punisher", "fixed"])
    params = {}
    if ekind == "bernoulli":
        p = f.get("environment", "p", [0.5], _floats)
        params = {"p": p[0] if len(p) == 1 else np.array(p),
                  "shared": f.get("environment", "shared", True, _boolean)}
    elif ekind == "fixed":
        rel = f.get("environment", "path")
        if rel is None:
            f.fail("environment", "path", "is required for a fixed sequence")
        base = Path(source).parent if source != "<config>" else Path.cwd()
        params = {"path": base / rel}
    try:
        env = make_environment(ekind, pool.n, **params)
    except (EnvError, OSError) as exc:
        f.fail("environment", "kind", str(exc))
    if ekind == "fixed" and env.sequence.shape[0] < T:
        f.fail("experiment", "horizon", f"the fixed sequence has only {env.sequence.shape[0]} rounds")

    for th in theorems:
        try:
            check_hypotheses(th, pool, predictor, mode=mode, T=T, expert=bound_expert)
        except HypothesisError as exc:
            f.fail("experiment", "theorems", f"{th}: {exc}")

    trace = f.get("output", "trace", "trace.csv") if parser.has_section("output") else "trace.csv"
    report = f.get("output", "report", "report.json") if parser.has_section("output") else "report.json"
    trace_replica = f.get("output", "trace_replica", 0, int) if parser.has_section("output") else 0
    if not 0 <= trace_replica < R:
        f.fail("output", "trace_replica", f"must lie in [0, {R - 1}]")

    resolved = {
        "schema": SCHEMA, "horizon": T, "replicas": R, "seed": master, "regime": regime.value,
        "mode": mode, "theorems": theorems, "bound_expert": bound_expert,
        "pool": pool.describe() | {"complexities": pool.complexities.tolist()},
        "predictor": {"kind": pkind, **options},
        "schedule": schedule.describe() if schedule is not None else None,
        "environment": {k: (str(v) if isinstance(v, Path) else v)
                        for k, v in env.describe().items()},
        "output": {"trace": trace, "report": report, "trace_replica": trace_replica},
    }
    return ExperimentConfig(T, R, master, regime, mode, theorems, pool, predictor, env,
                            bound_expert, batch_size, trace, report, trace_replica, resolved)


def _build_pool(f: _Fields) -> ExpertPool:
    kind = f.choice("pool", "kind", ["uniform", "countable", "explicit"])
    try:
        if kind == "uniform":
            n = f.get("pool", "n", None, _positive_int)
            if n is None:
                f.fail("pool", "n", "is required for a uniform pool")
            return make_uniform_pool(n)
        if kind == "countable":
            cap = f.get("pool", "cap", None, _positive_int)
            if cap is None:
                f.fail("pool", "cap", "is required for a countable pool")
            return make_countable_pool(cap, f.get("pool", "finitized", False, _boolean))
        k = f.get("pool", "k", None, _floats)
        if not k:
            f.fail("pool", "k", "is required for an explicit pool")
        return make_pool(k)
    except PoolError as exc:
        f.fail("pool", "kind", str(exc))


def _build_schedule(f: _Fields, pool: ExpertPool, T: int) -> Schedule:
    kind = f.choice("schedule", "kind", [k.value for k in Kind])
    K_text = f.get("schedule", "k", None)
    if K_text is None or K_text == "auto":
        K = pool.max_complexity if kind in ("static-KL", "dynamic-Kt", "self-confident-K",
                                            "adaptive-smin-K") else None
    else:
        K = f.get("schedule", "k", cast=float)
    L = f.get("schedule", "l", None, float)
    if L is None and kind in ("static-L", "static-KL"):
        L = float(T)
    ratio = f.get("schedule", "ratio", None, float)
    source = f.choice("schedule", "loss_source", [s.value for s in LossSource],
                      LossSource.EXACT.value)
    try:
        return Schedule(kind, K=K, L=L, ratio=ratio, loss_source=source)
    except ScheduleError as exc:
        f.fail("schedule", "kind", str(exc))


def run_experiment(config: ExperimentConfig, out_dir) -> tuple[int, dict]:
    """Play the configured games, evaluate bounds and write the outputs."""
    diagnostics = config.mode == EXACT and any(th in ("thm4", "cor3") for th in config.theorems)
    record = bool(config.trace) or "thm4" in config.theorems
    res = play(config.predictor, config.environment, config.horizon, mode=config.mode,
               seed=config.seed, regime=config.regime, replicas=config.replicas,
               record=record, diagnostics=diagnostics, batch_size=config.batch_size)
    reports, failures = [], []
    for th in config.theorems:
        try:
            rep = evaluate_bound(th, res, config.pool, config.predictor, mode=config.mode,
                                 expert=config.bound_expert)
        except HypothesisError as exc:
            raise ConfigError(f"{th}: {exc}") from None
        reports.append(rep.to_dict())
        if not rep.passed:
            failures.append({"theorem": th, "lhs": rep.lhs, "rhs": rep.rhs, "slack": rep.slack})
    summary = {"mean_learner_loss": float(res.u_total.mean()),
               "mean_best_loss": float(res.best_loss.mean())}
    if config.replicas >= 2:
        summary["mean_regret"], summary["regret_stderr"] = mean_and_stderr(res.regret())
    else:
        summary["mean_regret"] = float(res.regret()[0])
    if np.all(np.isfinite(res.ell_total)):
        summary["mean_expected_loss"] = float(res.ell_total.mean())
    document = {"schema": SCHEMA, "config": config.resolved, "summary": summary,
                "reports": reports, "failures": failures,
                "verdict": "fail" if failures else "pass"}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if config.trace:
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        csv_text = res.game_trace(config.trace_replica).to_csv(header=f"generated {stamp}")
        (out / config.trace).write_text(csv_text)
    (out / config.report).write_text(dump_json(document))
    return (EXIT_FAIL if failures else EXIT_OK), document


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _finite(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    return x


def dump_json(document) -> str:
    plain = json.loads(json.dumps(document, default=_jsonable))
    return json.dumps(_finite(plain), indent=2, sort_keys=True) + "\n"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="perturbed-leader",
        description="Run perturbed-leader experiments and check their regret bounds.")
    what = p.add_mutually_exclusive_group(required=True)
    what.add_argument("--config", type=Path, help="experiment file (INI)")
    what.add_argument("--scenario", help="run a built-in verification scenario")
    what.add_argument("--list-scenarios", action="store_true", help="print the scenario catalog")
    p.add_argument("--out-dir", type=Path, default=None,
                   help=f"output directory (default ${OUTPUT_ENV} or ./fpl-output)")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--replicas", type=int, default=None, help="override the replica count")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.list_scenarios:
        print(json.dumps(list_scenarios(), indent=2))
        return EXIT_OK
    if args.replicas is not None and args.replicas < 1:
        print("error: --replicas must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    out_dir = args.out_dir or Path(os.environ.get(OUTPUT_ENV, "fpl-output"))

    if args.scenario:
        if args.scenario not in SCENARIOS:
            print(f"error: unknown scenario {args.scenario!r}; see --list-scenarios",
                  file=sys.stderr)
            return EXIT_USAGE
        result = run_scenario(args.scenario, seed=args.seed, replicas=args.replicas)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"{args.scenario}.json").write_text(dump_json(result.to_dict()))
        print(f"{result.name}: {result.verdict}")
        if not result.passed:
            print(dump_json({"failures": [result.name]}), file=sys.stderr, end="")
            return EXIT_FAIL
        return EXIT_OK

    try:
        config = load_config(args.config, seed=args.seed, replicas=args.replicas)
        status, document = run_experiment(config, out_dir)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for rep in document["reports"]:
        print(f"{rep['theorem']}: {rep['verdict']} (lhs {rep['lhs']:.6g}, rhs {rep['rhs']:.6g})")
    if status != EXIT_OK:
        print(dump_json({"failures": document["failures"]}), file=sys.stderr, end="")
    return status


if __name__ == "__main__":
    sys.exit(main())
