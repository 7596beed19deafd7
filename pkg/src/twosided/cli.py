"""Command-line entry point: scenario files in, numbers and tables out.

Subcommands: analyze (closed forms), simulate (Monte Carlo estimates),
validate (analytic / Monte Carlo / dynamic-program comparison with pass-fail
tolerances), optimize (best attraction factor), sweep (payoff surface to CSV
or JSON).  Exit codes: 0 success, 1 usage or configuration error, 2
validation tolerance breach.  The CLI adds no arithmetic of its own; every
printed number is produced by a library call.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass

import numpy as np
import yaml

from .exceptions import ConfigError, DomainError
from .model import DelayDistribution, FunctionalArgs, PlatformConfig, RateParams
from .exceedance import mean_customers_capped, phi_functional, supplier_pmf
from .openmodel import PayoffParams
from .oracle import dp_oracle
from .payoff import DpOracleEngine, MonteCarloEngine, OpenFormEngine, optimize_alpha, payoff, sweep_surface
from .simulate import RunSeed, empirical_pmf, estimate

_MODEL_KEYS = {
    "lambda_a", "lambda_b", "lambda_a0", "lambda_b0",
    "delta", "tau0", "capacity", "alpha", "b0", "coupling", "c0", "c1",
}
_RUN_KEYS = {
    "mode", "reps", "seed", "out", "format", "tol",
    "alpha_grid", "m_grid", "workers", "engine",
}


@dataclass
class Scenario:
    config: PlatformConfig
    pay: PayoffParams
    run: dict


def _parse_delay(raw, key: str) -> DelayDistribution:
    if not isinstance(raw, dict) or len(raw) != 1:
        raise ConfigError(f"{key} must be a one-key mapping {{exp: rate}} or {{det: duration}}")
    (kind, value), = raw.items()
    if kind == "exp":
        return DelayDistribution.exponential(float(value))
    if kind == "det":
        return DelayDistribution.deterministic(float(value))
    raise ConfigError(f"{key} kind must be 'exp' or 'det', got {kind!r}")


def load_scenario(path: str) -> Scenario:
    """Strictly parsed scenario file; unknown keys are rejected."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"no such config file: {path}") from None
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" (line {mark.line + 1})" if mark is not None else ""
        raise ConfigError(f"malformed YAML in {path}{where}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("scenario file must be a mapping")

    unknown = set(raw) - _MODEL_KEYS - {"run"}
    if unknown:
        raise ConfigError(f"unknown keys in scenario file: {sorted(unknown)}")
    run = raw.get("run") or {}
    if not isinstance(run, dict):
        raise ConfigError("'run' must be a mapping")
    unknown_run = set(run) - _RUN_KEYS
    if unknown_run:
        raise ConfigError(f"unknown keys under run: {sorted(unknown_run)}")

    missing = {"lambda_a", "lambda_b", "delta", "tau0", "capacity"} - set(raw)
    if missing:
        raise ConfigError(f"missing required keys: {sorted(missing)}")
    try:
        rates = RateParams(
            lambda_a=float(raw["lambda_a"]),
            lambda_b=float(raw["lambda_b"]),
            lambda_a0=float(raw.get("lambda_a0", 0.0)),
            lambda_b0=float(raw.get("lambda_b0", 0.0)),
        )
        config = PlatformConfig(
            rates=rates,
            delta=_parse_delay(raw["delta"], "delta"),
            tau0=_parse_delay(raw["tau0"], "tau0"),
            capacity=int(raw["capacity"]),
            alpha=float(raw.get("alpha", 1.0)),
            b0=float(raw.get("b0", 0.0)),
            coupling=str(raw.get("coupling", "static")),
        )
    except DomainError as exc:
        raise ConfigError(f"invalid model parameters: {exc}") from None
    pay = PayoffParams(c0=float(raw.get("c0", 1.0)), c1=float(raw.get("c1", 0.0)))
    return Scenario(config=config, pay=pay, run=dict(run))


def _parse_alpha_grid(spec: str) -> np.ndarray:
    try:
        lo, hi, steps = spec.split(":")
        return np.linspace(float(lo), float(hi), int(steps))
    except ValueError:
        raise ConfigError(f"--alpha-grid wants lo:hi:steps, got {spec!r}") from None


def _parse_m_grid(spec: str) -> range:
    try:
        lo, hi = spec.split(":")
        return range(int(lo), int(hi) + 1)
    except ValueError:
        raise ConfigError(f"--m-grid wants lo:hi, got {spec!r}") from None


def _run_setting(args, scenario: Scenario, key: str, default):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    return scenario.run.get(key, default)


def _cmd_analyze(args, scenario: Scenario) -> int:
    config = scenario.config
    m = config.capacity
    p_first = phi_functional(config, FunctionalArgs(), m)
    pmf = supplier_pmf(config, m)
    mean_a = mean_customers_capped(config, m)
    print(f"capacity: {m}")
    print(f"P(customer side exits first): {p_first!r}")
    print(f"mean customers at exit given customer-first: {mean_a!r}")
    print("supplier snapshot pmf (defective, count -> mass):")
    for k, mass in enumerate(pmf.mass):
        print(f"  {k}: {mass!r}")
    print(f"pmf total: {pmf.total!r}")
    return 0


def _cmd_simulate(args, scenario: Scenario) -> int:
    config = scenario.config
    reps = int(_run_setting(args, scenario, "reps", 10**5))
    seed = RunSeed(int(_run_setting(args, scenario, "seed", 0)))
    first = estimate(config, "mu_first", reps, seed)
    print(f"replications: {reps}")
    print(f"P(customer side exits first): {first.mean!r} (se {first.std_error:.3e})")
    a_exit = estimate(config, "a_exit", reps, seed)
    print(f"mean customers at exit (all paths): {a_exit.mean!r} (se {a_exit.std_error:.3e})")
    pmf = empirical_pmf(config, "b_mu_prev_on_mu_first", reps, seed, config.capacity)
    print("empirical supplier snapshot pmf (defective):")
    for k, mass in enumerate(pmf.mass):
        print(f"  {k}: {mass!r}")
    return 0


def _cmd_validate(args, scenario: Scenario) -> int:
    config = scenario.config
    if config.coupling != "static":
        raise ConfigError("validate requires a static-coupling scenario")
    reps = int(_run_setting(args, scenario, "reps", 10**5))
    seed = RunSeed(int(_run_setting(args, scenario, "seed", 0)))
    m_spec = _run_setting(args, scenario, "m_grid", "1:8")
    ms = _parse_m_grid(m_spec) if isinstance(m_spec, str) else m_spec
    tol_dp = float(_run_setting(args, scenario, "tol", 1e-8))

    failures = 0
    header = f"{'M':>3} {'analytic':>14} {'dp':>14} {'mc':>14} {'3*ci':>10} verdict"
    print(header)
    for m in ms:
        analytic = phi_functional(config, FunctionalArgs(), m)
        dp = dp_oracle(config, m).p_mu_first if m <= 12 else float("nan")
        mc = estimate(config.with_capacity(m), "mu_first", reps, seed)
        band = 3.0 * mc.std_error
        ok_dp = (abs(analytic - dp) <= tol_dp) if np.isfinite(dp) else True
        ok_mc = abs(analytic - mc.mean) <= max(band, 1e-12)
        verdict = "pass" if (ok_dp and ok_mc) else "FAIL"
        if verdict == "FAIL":
            failures += 1
        print(f"{m:>3} {analytic:>14.9f} {dp:>14.9f} {mc.mean:>14.9f} {band:>10.2e} {verdict}")
    if failures:
        print(f"{failures} row(s) breached tolerance")
        return 2
    print("all rows within tolerance")
    return 0


def _engine_from_args(args, scenario: Scenario):
    name = _run_setting(args, scenario, "engine", None)
    if name is None:
        name = "dp" if scenario.config.capacity <= 12 else "mc"
    if name == "dp":
        return DpOracleEngine()
    if name == "open":
        return OpenFormEngine()
    if name == "mc":
        reps = int(_run_setting(args, scenario, "reps", 10**4))
        seed = RunSeed(int(_run_setting(args, scenario, "seed", 0)))
        return MonteCarloEngine(reps, seed)
    raise ConfigError(f"unknown engine {name!r} (expected mc, dp, or open)")


def _cmd_optimize(args, scenario: Scenario) -> int:
    engine = _engine_from_args(args, scenario)
    tol = float(_run_setting(args, scenario, "tol", 0.05))
    result = optimize_alpha(scenario.config, scenario.pay, engine, tol=tol)
    print(f"engine: {type(engine).__name__}")
    print(f"alpha*: {result.alpha!r}")
    print(f"payoff(alpha*): {result.value!r}")
    print(f"at bound: {result.at_bound}")
    if result.ci_overlap:
        print("grid factors with overlapping confidence bands:")
        print("  " + ", ".join(f"{a:g}" for a in result.ci_overlap))
    return 0


def _cmd_sweep(args, scenario: Scenario) -> int:
    engine = _engine_from_args(args, scenario)
    alpha_spec = _run_setting(args, scenario, "alpha_grid", "1:10:19")
    m_spec = _run_setting(args, scenario, "m_grid", "2:8")
    alphas = _parse_alpha_grid(alpha_spec) if isinstance(alpha_spec, str) else alpha_spec
    ms = _parse_m_grid(m_spec) if isinstance(m_spec, str) else m_spec
    workers = int(_run_setting(args, scenario, "workers", 1))
    out = _run_setting(args, scenario, "out", None)
    fmt = _run_setting(args, scenario, "format", "csv")
    if out is None:
        raise ConfigError("sweep needs --out FILE (or run.out in the scenario)")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown format {fmt!r}")
    surface = sweep_surface(
        scenario.config, scenario.pay, alphas, list(ms), engine, workers=workers
    )
    if fmt == "csv":
        surface.to_csv(out)
    else:
        surface.to_json(out)
    print(f"wrote {len(list(surface.rows()))} cells to {out}")
    print(f"argmax: alpha={surface.argmax[0]:g} M={surface.argmax[1]}")
    if surface.errors:
        print(f"{len(surface.errors)} cell(s) failed and were excluded")
    return 0


_COMMANDS = {
    "analyze": _cmd_analyze,
    "simulate": _cmd_simulate,
    "validate": _cmd_validate,
    "optimize": _cmd_optimize,
    "sweep": _cmd_sweep,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twosided",
        description="two-sided platform exit analytics, simulation and payoff sweeps",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="scenario YAML file")
        p.add_argument("--seed", type=int, default=None, help="64-bit master seed")
        p.add_argument("--reps", type=int, default=None, help="Monte Carlo replications")
        p.add_argument("--out", default=None, help="output file path")
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--tol", type=float, default=None, help="tolerance override")
        p.add_argument("--alpha-grid", dest="alpha_grid", default=None, help="lo:hi:steps")
        p.add_argument("--m-grid", dest="m_grid", default=None, help="lo:hi")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--engine", choices=("mc", "dp", "open"), default=None)
    return parser


def run(argv=None) -> int:
    """Entry point returning the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; the contract reserves 2 for
        # validation failures, so usage problems map to 1
        return 0 if exc.code in (0, None) else 1
    try:
        scenario = load_scenario(args.config)
        return _COMMANDS[args.command](args, scenario)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DomainError as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
