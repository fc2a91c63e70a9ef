"""Command-line interface.

Exit codes: 0 ok, 1 input or validation error, 2 resource cap exceeded,
3 policy precondition violated, 4 oracle mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .artifacts import atomic_write, svg_chart, to_json, trace_csv
from .capacity import build_lp, max_intensity, membership
from .errors import CapExceeded, ConfigError, OracleMismatch, PolicyPreconditionError, SwitchError
from .oracles import DEFAULT_MAX_N, MUTATIONS, run_oracle_checks
from .sim import Scenario, TrajectoryStats, preset, resolve_rates, run_experiment, scenario_metadata

EXIT_OK, EXIT_INPUT, EXIT_CAP, EXIT_PRECONDITION, EXIT_ORACLE = 0, 1, 2, 3, 4


def load_scenario(path: str) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: scenario must be a JSON object")
    return Scenario.from_dict(data)


def _unwrap(exc: BaseException) -> BaseException:
    # simulation aborts wrap the error that decides the exit code
    while exc.__cause__ is not None and isinstance(exc.__cause__, SwitchError):
        exc = exc.__cause__
    return exc


def exit_code(exc: BaseException) -> int:
    exc = _unwrap(exc)
    if isinstance(exc, CapExceeded):
        return EXIT_CAP
    if isinstance(exc, PolicyPreconditionError):
        return EXIT_PRECONDITION
    if isinstance(exc, OracleMismatch):
        return EXIT_ORACLE
    return EXIT_INPUT


def write_run(out: Path, scenario: Scenario, stats: TrajectoryStats) -> None:
    stem = scenario.name
    atomic_write(out / f"{stem}.csv", trace_csv(stats.mean, stats.stderr))
    atomic_write(out / f"{stem}.json", to_json(scenario_metadata(scenario, stats)))
    atomic_write(out / f"{stem}.svg", svg_chart([(scenario.policy.label, stats.mean)], title=stem))


def cmd_capacity(args) -> int:
    scenario = load_scenario(args.scenario)
    config = scenario.config
    lp = build_lp(config)
    rho, cert = max_intensity(config, scenario.direction, lp)
    rates, _ = resolve_rates(scenario)
    inside, margin = membership(config, rates, lp)
    residual = float(np.abs(cert.reconstruct_rate(config) - cert.lp_rate).max())
    doc = {
        "scenario": scenario.name,
        "rho_star": rho,
        "intensity": scenario.intensity,
        "rates": [float(x) for x in rates],
        "inside": inside,
        "stability_margin": margin,
        "certificate": cert.to_json(config),
    }
    out = Path(args.out)
    atomic_write(out / "certificate.json", to_json(doc))
    summary = "\n".join(
        [
            f"scenario: {scenario.name}",
            f"clients N={config.n_clients}, memories M={config.n_memories}, classes R={config.n_classes}",
            f"LP columns: {lp.n_columns + 1}",
            f"rho*: {rho:.6f}",
            f"intensity: {scenario.intensity:g} ({'inside' if inside else 'outside'} the capacity region)",
            f"stability margin: {margin:.6g}",
            f"certificate residual: {residual:.3e}",
        ]
    )
    atomic_write(out / "summary.txt", summary + "\n")
    print(summary)
    return EXIT_OK


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    changes = {}
    if args.seed is not None:
        changes["base_seed"] = args.seed
    if args.horizon is not None:
        changes["horizon"] = args.horizon
    if args.replications is not None:
        changes["replications"] = args.replications
    scenario = scenario.replace(**changes)
    scenario.policy.validate(scenario.config)
    stats, _ = run_experiment(scenario, workers=args.workers)
    write_run(Path(args.out), scenario, stats)
    verdict = "stable" if stats.is_stable() else "not stable"
    print(f"{scenario.name}: time-average backlog {stats.time_average:.3f}, proxy {verdict}")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    scenarios = preset(args.name, horizon=args.horizon, replications=args.replications, base_seed=args.seed)
    out = Path(args.out)
    curves = []
    for scenario in scenarios:
        stats, _ = run_experiment(scenario, workers=args.workers)
        write_run(out, scenario, stats)
        curves.append((f"{scenario.policy.label} {round(scenario.intensity * 100)}%", stats.mean))
        verdict = "stable" if stats.is_stable() else "not stable"
        print(
            f"{scenario.name}: final-quarter mean {stats.final_window_mean:.2f}, "
            f"middle-quarter mean {stats.middle_window_mean:.2f}, proxy {verdict}",
            flush=True,
        )
    atomic_write(out / f"{args.name}.svg", svg_chart(curves, title=args.name))
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    capped = MUTATIONS[args.mutation] if args.mutation else None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        kwargs = {"capped": capped} if capped else {}
        try:
            report = run_oracle_checks(max_n=args.max_n, seed=args.seed, **kwargs)
        except OracleMismatch as exc:
            print(f"oracle mismatch: {exc}", file=sys.stderr)
            print(f"counterexample: {exc.instance!r}", file=sys.stderr)
            return EXIT_ORACLE
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    for name, count in report.checks.items():
        print(f"{name}: {count} passed")
    print(f"all {report.total} oracle comparisons passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qswitch", description="Entanglement switch scheduling simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capacity", help="solve the capacity LP for a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("simulate", help="run all replications of a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, help="override base_seed")
    p.add_argument("--horizon", type=int, help="override horizon")
    p.add_argument("--replications", type=int, help="override replications")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reproduce", help="run a preset experiment")
    p.add_argument("name", choices=["sim1", "sim2", "sim3"])
    p.add_argument("--out", required=True)
    p.add_argument("--horizon", type=int, default=20_000)
    p.add_argument("--replications", type=int, default=10)
    p.add_argument("--seed", type=int, default=1, help="base seed")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("oracle-check", help="compare exact solvers against brute force")
    p.add_argument("--max-n", type=int, default=DEFAULT_MAX_N)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mutation", choices=sorted(MUTATIONS), help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (SwitchError, ValueError) as exc:
        code = exit_code(exc)
        print(f"error: {_unwrap(exc)}", file=sys.stderr)
        return code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
