"""Command-line front end.

Subcommands: generate (random scenario files), solve (allocation for one
scenario), simulate (policy trajectories), fit (learning-curve regression),
sweep (re-solve across values of one generation parameter).  All randomness
flows from --seed; fixed-seed runs are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

from .ce_optimizer import CEConfig, POLICIES, solve_p1
from .errors import (
    ConfigError,
    InfeasibleBandwidth,
    InfeasibleBudget,
    NoFeasibleRegion,
    PlannerError,
    PolicyInfeasible,
)
from .harness import (
    comparison_summary,
    run_policy,
    write_trajectory_csv,
)
from .learning_curve import CurveParams, fit_power_law, read_fit_samples
from .system_model import (
    Scenario,
    ScenarioConfig,
    allocation_to_json,
    device_csv_string,
    generate_scenario,
    scenario_from_json,
    scenario_to_json,
    write_device_csv,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE_BUDGET = 2
EXIT_INFEASIBLE_BANDWIDTH = 3
EXIT_NO_FEASIBLE_REGION = 4
EXIT_CONFIG = 5


def _parse_scalar(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _coerce(value, current):
    """Coerce an override to the type of the field it replaces."""
    if isinstance(current, bool):
        return bool(value)
    if isinstance(current, int) and not isinstance(value, bool):
        return int(value)
    if isinstance(current, float):
        return float(value)
    if isinstance(current, tuple):
        return tuple(value)
    return value


def _apply_overrides(obj, overrides: dict):
    """Replace dataclass fields, descending into dotted names (curve.alpha)."""
    direct, nested = {}, {}
    for key, value in overrides.items():
        if "." in key:
            head, rest = key.split(".", 1)
            nested.setdefault(head, {})[rest] = value
        else:
            direct[key] = value
    for key, value in direct.items():
        if key not in {f.name for f in dataclasses.fields(obj)}:
            raise ConfigError(key, f"unknown field on {type(obj).__name__}")
        direct[key] = _coerce(value, getattr(obj, key))
    for head, sub in nested.items():
        if not hasattr(obj, head):
            raise ConfigError(head, f"unknown field on {type(obj).__name__}")
        direct[head] = _apply_overrides(getattr(obj, head), sub)
    return dataclasses.replace(obj, **direct) if direct else obj


def _split_sets(pairs):
    """--set strings -> (scenario-ish overrides, ce overrides)."""
    main, ce = {}, {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError("--set", f"expected FIELD=VALUE, got {pair!r}")
        key, _, raw = pair.partition("=")
        value = _parse_scalar(raw)
        if key.startswith("ce."):
            ce[key[3:]] = value
        else:
            main[key] = value
    return main, ce


def _load_scenario(args) -> Scenario:
    if not args.config:
        raise ConfigError("--config", "a scenario file is required")
    path = Path(args.config)
    if not path.exists():
        raise ConfigError("--config", f"no such file: {path}")
    scenario = scenario_from_json(path.read_text())
    main, _ = _split_sets(args.set)
    return _apply_overrides(scenario, main)


def _ce_config(args, base_seed: int) -> CEConfig:
    _, ce_over = _split_sets(args.set)
    cfg = CEConfig(seed=base_seed)
    return _apply_overrides(cfg, ce_over)


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_text(path: Path, text: str):
    path.write_text(text)


def cmd_generate(args) -> int:
    config = ScenarioConfig()
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError("--config", f"no such file: {path}")
        raw = json.loads(path.read_text())
        if "curve" in raw and isinstance(raw["curve"], dict):
            raw["curve"] = CurveParams.from_dict(raw["curve"])
        config = _apply_overrides(config, raw)
    main, _ = _split_sets(args.set)
    config = _apply_overrides(config, main)
    scenario = generate_scenario(config, args.seed)

    out = _out_dir(args)
    _write_text(out / "scenario.json", scenario_to_json(scenario))
    write_device_csv(out / "devices.csv", scenario.devices)
    sys.stdout.write(device_csv_string(scenario.devices))
    return EXIT_OK


def cmd_solve(args) -> int:
    scenario = _load_scenario(args)
    ce = _ce_config(args, args.seed)
    policy = args.policy or "FIMI"
    alloc, report = solve_p1(scenario, ce, policy=policy)

    out = _out_dir(args)
    _write_text(out / "allocation.json", allocation_to_json(alloc))
    with open(out / "ce_trace.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "best_objective", "mean_sigma"])
        for it, best, sigma in report.trace:
            writer.writerow([it, repr(best), repr(sigma)])
    checks = {
        name: {"ok": bool(ok), "value": value}
        for name, (ok, value) in report.checks.items()
    }
    _write_text(
        out / "checks.json",
        json.dumps(
            {
                "policy": policy,
                "objective_j": report.objective,
                "iterations": report.iterations,
                "termination": report.termination,
                "error_budget": report.budget,
                "checks": checks,
            },
            indent=2,
        )
        + "\n",
    )
    sys.stdout.write(
        f"objective_j={report.objective!r} iterations={report.iterations} "
        f"termination={report.termination}\n"
    )
    return EXIT_OK


def cmd_simulate(args) -> int:
    scenario = _load_scenario(args)
    ce = _ce_config(args, args.seed)
    policies = list(POLICIES) if args.policy in (None, "all") else [args.policy]

    out = _out_dir(args)
    results = {}
    for policy in policies:
        _alloc, traj = run_policy(policy, scenario, ce)
        results[policy] = traj
        write_trajectory_csv(out / f"trajectory_{policy}.csv", traj)
    summary = comparison_summary(scenario, results, scenario.delta_max)
    _write_text(out / "summary.json", json.dumps(summary, indent=2) + "\n")
    for policy in policies:
        sys.stdout.write(
            f"{policy}: per_round_energy_j="
            f"{results[policy].per_round.energy_j!r}\n"
        )
    return EXIT_OK


def cmd_fit(args) -> int:
    if not args.config:
        raise ConfigError("--config", "a samples CSV file is required")
    path = Path(args.config)
    if not path.exists():
        raise ConfigError("--config", f"no such file: {path}")
    samples = read_fit_samples(path)
    result = fit_power_law(samples)
    payload = {
        "alpha": result.alpha,
        "beta": result.beta,
        "gamma": result.gamma,
        "residual_norm": result.residual_norm,
    }
    out = _out_dir(args)
    _write_text(out / "fit.json", json.dumps(payload, indent=2) + "\n")
    sys.stdout.write(json.dumps(payload) + "\n")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if not args.values:
        raise ConfigError("--values", "sweep needs a non-empty value list")
    base = ScenarioConfig()
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError("--config", f"no such file: {path}")
        raw = json.loads(path.read_text())
        if "curve" in raw and isinstance(raw["curve"], dict):
            raw["curve"] = CurveParams.from_dict(raw["curve"])
        base = _apply_overrides(base, raw)
    main, ce_over = _split_sets(args.set)
    base = _apply_overrides(base, main)
    ce = _apply_overrides(CEConfig(seed=args.seed), ce_over)
    policies = list(POLICIES) if args.policy in (None, "all") else [args.policy]
    values = [_parse_scalar(v) for v in args.values.split(",") if v]

    rows = []
    for value in values:
        config = _apply_overrides(base, {args.field: value})
        scenario = generate_scenario(config, args.seed)
        for policy in policies:
            from .harness import NOT_REACHED, metrics_at_target

            try:
                _alloc, traj = run_policy(policy, scenario, ce)
            except PolicyInfeasible as exc:
                sys.stderr.write(
                    f"sweep point {args.field}={value} {policy}: {exc}\n"
                )
                rows.append(
                    [args.field, value, policy, "NA", "NA", "NA", "NA", "NA"]
                )
                continue
            hit = metrics_at_target(traj, scenario.delta_max)
            if hit is NOT_REACHED:
                energy, latency, rounds = "NA", "NA", "NA"
            else:
                energy, latency, _uplink, rounds = hit
                energy, latency = repr(energy), repr(latency)
            rows.append(
                [
                    args.field,
                    value,
                    policy,
                    repr(traj.per_round.energy_j),
                    repr(traj.per_round.latency_s),
                    rounds,
                    energy,
                    latency,
                ]
            )

    out = _out_dir(args)
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "field",
                "value",
                "policy",
                "per_round_energy_j",
                "per_round_latency_s",
                "rounds_to_target",
                "energy_to_target_j",
                "latency_to_target_s",
            ]
        )
        writer.writerows(rows)
    sys.stdout.write(f"wrote {len(rows)} sweep rows\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedaug",
        description=(
            "Planner and desk-scale simulator for data-augmented federated "
            "learning over wireless edge devices."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="input file (see subcommand docs)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="output directory (default: cwd)")
        p.add_argument(
            "--set",
            action="append",
            metavar="FIELD=VALUE",
            help="override a config field; prefix ce. for search settings",
        )
        p.add_argument("--policy", choices=(*POLICIES, "all"))

    p_gen = sub.add_parser("generate", help="draw a random scenario")
    common(p_gen)
    p_gen.set_defaults(func=cmd_generate)

    p_solve = sub.add_parser("solve", help="compute the optimal allocation")
    common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_sim = sub.add_parser("simulate", help="run policy trajectories")
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_fit = sub.add_parser("fit", help="fit the learning-curve parameters")
    common(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_sweep = sub.add_parser("sweep", help="re-solve across parameter values")
    common(p_sweep)
    p_sweep.add_argument("--field", required=True, help="generation field to vary")
    p_sweep.add_argument(
        "--values", required=True, help="comma-separated value list"
    )
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleBudget as exc:
        sys.stderr.write(f"infeasible error budget: {exc}\n")
        return EXIT_INFEASIBLE_BUDGET
    except InfeasibleBandwidth as exc:
        sys.stderr.write(f"infeasible bandwidth: {exc}\n")
        return EXIT_INFEASIBLE_BANDWIDTH
    except NoFeasibleRegion as exc:
        sys.stderr.write(f"no feasible region: {exc}\n")
        return EXIT_NO_FEASIBLE_REGION
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except PlannerError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ERROR
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
