"""Command-line interface: analyze / simulate / optimize / waste / reproduce.

Exit codes: 0 success, 2 usage or validation error, 1 computation error
(e.g. an unattainable optimizer target without --clip, or a simulation that
never succeeds).  Results go to stdout in the chosen format; diagnostics go
to stderr.  The default seed is 0; the CRANKBACK_SEED environment variable
overrides it, an explicit [sim] block in the scenario file overrides the
environment, and the --seed flag wins over everything.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from .analysis import (
    ReturnProfile,
    Scenario,
    ScenarioError,
    approx_profile,
    return_profile_grid,
    return_profile_quadrature,
)
from .planner import OptimizeError, optimize_ptr, waste_per_success, waste_report
from .scenario_io import ScenarioFileError, golden_tables, load_scenario, write_report
from .simulate import NoSuccessError, SimConfig, simulate_profile

REPRODUCE_TRIALS = 1_000_000
REPRODUCE_SEED = 0

_SCENARIO_FLAGS = ("n", "hop_mean", "hop_var", "deadline", "p_tr", "hop_distance")


class _UsageError(ValueError):
    pass


def _add_scenario_args(sub, need_p_tr=True):
    sub.add_argument("--scenario", metavar="PATH", help="scenario file (TOML)")
    sub.add_argument("--n", type=int, help="node count (end node index)")
    sub.add_argument("--hop-mean", type=float, dest="hop_mean", help="mean hop delay")
    sub.add_argument("--hop-var", type=float, dest="hop_var", help="hop delay variance")
    sub.add_argument("--deadline", type=float, help="total delay budget")
    if need_p_tr:
        sub.add_argument("--p-tr", type=float, dest="p_tr", help="turn-back probability threshold")
    sub.add_argument(
        "--hop-distance", type=float, dest="hop_distance",
        help="distance between nodes (default: hop mean)",
    )
    sub.add_argument(
        "--format", choices=("table", "csv", "json"), default="table",
        help="output format (default: table)",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crankback",
        description="Turn-back routing analysis under a hard delay budget.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("analyze", help="analytic first-return profile")
    _add_scenario_args(p)
    p.add_argument("--method", choices=("grid", "quadrature", "approx"), default="grid")
    p.add_argument("--grid-points", type=int, default=None, help="grid resolution (grid method)")
    p.add_argument("--max-depth", type=int, default=None, help="deepest node entry (quadrature)")
    p.add_argument("--tol", type=float, default=None, help="absolute tolerance per entry (quadrature)")
    p.set_defaults(handler=_cmd_analyze)

    p = subs.add_parser("simulate", help="Monte Carlo first-return profile")
    _add_scenario_args(p)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--policy", choices=("quantile", "rest-time"), default=None)
    p.add_argument("--t-tr", type=float, dest="t_tr", default=None,
                   help="residual-time constant (rest-time policy)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(handler=_cmd_simulate)

    p = subs.add_parser("optimize", help="find p_tr achieving a target success probability")
    _add_scenario_args(p, need_p_tr=False)
    p.add_argument("--target", type=float, required=True, help="required success probability")
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--clip", action="store_true",
                   help="accept the nearest endpoint when the target is unattainable")
    p.set_defaults(handler=_cmd_optimize)

    p = subs.add_parser("waste", help="expected retry travel accounting")
    _add_scenario_args(p)
    p.add_argument("--profile-source", choices=("analytic", "simulated"), default="analytic",
                   dest="profile_source")
    p.add_argument("--trials", type=int, default=None, help="trials (simulated source)")
    p.add_argument("--seed", type=int, default=None, help="seed (simulated source)")
    p.set_defaults(handler=_cmd_waste)

    p = subs.add_parser("reproduce", help="evaluate the embedded reference tables")
    p.add_argument("--format", choices=("table", "csv", "json"), default="table")
    p.set_defaults(handler=_cmd_reproduce)

    return parser


def _resolve_scenario(args, default_p_tr=None):
    file_scenario = file_cfg = None
    if args.scenario:
        file_scenario, file_cfg = load_scenario(args.scenario)
    overrides = {}
    for name in _SCENARIO_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if file_scenario is not None:
        scenario = replace(file_scenario, **overrides) if overrides else file_scenario
    else:
        if "p_tr" not in overrides and default_p_tr is not None:
            overrides["p_tr"] = default_p_tr
        missing = [k for k in ("n", "hop_mean", "hop_var", "deadline", "p_tr") if k not in overrides]
        if missing:
            flags = ", ".join("--" + m.replace("_", "-") for m in missing)
            raise _UsageError(f"missing scenario parameters: {flags} (or use --scenario)")
        scenario = Scenario(**overrides)
    return scenario, file_cfg


def _resolve_seed(args, file_cfg) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    if file_cfg is not None:
        return file_cfg.seed
    env = os.environ.get("CRANKBACK_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise _UsageError(f"CRANKBACK_SEED must be an integer, got {env!r}")
    return 0


def _resolve_trials(args, file_cfg) -> int:
    if getattr(args, "trials", None) is not None:
        return args.trials
    if file_cfg is not None:
        return file_cfg.trials
    return 1_000_000


def _cmd_analyze(args) -> int:
    if args.method != "grid" and args.grid_points is not None:
        raise _UsageError("--grid-points applies only to --method grid")
    if args.method != "quadrature" and (args.max_depth is not None or args.tol is not None):
        raise _UsageError("--max-depth/--tol apply only to --method quadrature")
    scenario, _ = _resolve_scenario(args)
    if args.method == "grid":
        kwargs = {} if args.grid_points is None else {"grid_points": args.grid_points}
        profile = return_profile_grid(scenario, **kwargs)
    elif args.method == "quadrature":
        kwargs = {}
        if args.max_depth is not None:
            kwargs["max_depth"] = args.max_depth
        if args.tol is not None:
            kwargs["tol"] = args.tol
        profile = return_profile_quadrature(scenario, **kwargs)
    else:
        profile = approx_profile(scenario)
    write_report(profile, args.format)
    return 0


def _cmd_simulate(args) -> int:
    scenario, file_cfg = _resolve_scenario(args)
    policy = args.policy.replace("-", "_") if args.policy else None
    if policy is None:
        policy = file_cfg.policy if file_cfg is not None else "quantile"
    t_tr = args.t_tr
    if t_tr is None and file_cfg is not None:
        t_tr = file_cfg.t_tr
    if policy == "quantile" and t_tr is not None:
        raise _UsageError("--t-tr conflicts with the quantile policy")
    if policy == "rest_time" and t_tr is None:
        raise _UsageError("rest-time policy requires --t-tr")
    cfg = SimConfig(
        trials=_resolve_trials(args, file_cfg),
        seed=_resolve_seed(args, file_cfg),
        policy=policy,
        t_tr=t_tr,
    )
    report = simulate_profile(scenario, cfg, workers=args.workers)
    write_report(report, args.format)
    return 0


def _emit_mapping(data: dict, fmt: str) -> None:
    if fmt == "json":
        sys.stdout.write(json.dumps(data, indent=2) + "\n")
        return
    def show(v):
        if isinstance(v, bool):
            return str(v).lower()
        if isinstance(v, float):
            return f"{v:.6g}"
        return str(v)
    if fmt == "csv":
        sys.stdout.write("metric,value\n")
        for key, value in data.items():
            if key in ("schema_version", "kind"):
                continue
            sys.stdout.write(f"{key},{show(value)}\n")
        return
    width = max(len(k) for k in data if k not in ("schema_version", "kind"))
    for key, value in data.items():
        if key in ("schema_version", "kind"):
            continue
        sys.stdout.write(f"{key:<{width}} {show(value)}\n")


def _cmd_optimize(args) -> int:
    scenario, _ = _resolve_scenario(args, default_p_tr=0.5)
    result = optimize_ptr(scenario, args.target, tol=args.tol)
    if result.clipped and not args.clip:
        sys.stderr.write(
            f"target {args.target:.6g} unattainable: nearest achievable success "
            f"probability is {result.achieved:.6g} at p_tr={result.p_tr:.6g} "
            "(pass --clip to accept the endpoint)\n"
        )
        return 1
    _emit_mapping(
        {
            "schema_version": 1,
            "kind": "optimize_result",
            "p_tr": result.p_tr,
            "achieved_h": result.achieved,
            "target": result.target,
            "clipped": result.clipped,
            "iterations": result.iterations,
        },
        args.format,
    )
    return 0


def _cmd_waste(args) -> int:
    if args.profile_source == "analytic" and (args.trials is not None or args.seed is not None):
        raise _UsageError("--trials/--seed apply only to --profile-source simulated")
    scenario, file_cfg = _resolve_scenario(args)
    if args.profile_source == "analytic":
        profile = return_profile_grid(scenario)
    else:
        cfg = SimConfig(trials=_resolve_trials(args, file_cfg), seed=_resolve_seed(args, file_cfg))
        profile = simulate_profile(scenario, cfg).profile
    report = waste_report(profile, scenario.hop_distance, scenario.n, source=args.profile_source)
    write_report(report, args.format)
    return 0


def _reproduce_rows() -> tuple[list[dict], bool]:
    rows = []
    cache: dict[float, tuple] = {}

    def engines(scenario):
        if scenario.deadline not in cache:
            grid = return_profile_grid(scenario)
            sim = simulate_profile(
                scenario, SimConfig(trials=REPRODUCE_TRIALS, seed=REPRODUCE_SEED)
            )
            cache[scenario.deadline] = (grid, sim)
        return cache[scenario.deadline]

    for table in golden_tables():
        if table.scenario is not None:
            grid, sim = engines(table.scenario)
            approx = approx_profile(table.scenario)
        for gv in table.values:
            if gv.basis == "waste":
                reference = ReturnProfile(
                    table.waste_profile, table.waste_p_success, "reference"
                )
                artifact = waste_per_success(reference, 1.0)
                simulated = None
            else:
                k = None if gv.label == "success" else int(gv.label[1:])
                if gv.basis == "approx":
                    artifact = approx.entry(k)
                    simulated = sim.profile.entry(k)
                elif gv.label == "success":
                    artifact = grid.p_success
                    simulated = sim.profile.p_success
                else:
                    artifact = grid.entry(k)
                    simulated = sim.profile.entry(k)
            delta = abs(artifact - gv.expected)
            rows.append(
                {
                    "table": table.name,
                    "label": gv.label,
                    "basis": gv.basis,
                    "reference": gv.expected,
                    "artifact": artifact,
                    "simulated": simulated,
                    "delta": delta,
                    "tol": gv.tol,
                    "status": "PASS" if delta <= gv.tol else "FAIL",
                }
            )
    return rows, all(r["status"] == "PASS" for r in rows)


def _cmd_reproduce(args) -> int:
    rows, all_pass = _reproduce_rows()
    if args.format == "json":
        sys.stdout.write(
            json.dumps(
                {"schema_version": 1, "kind": "reproduction", "rows": rows, "all_pass": all_pass},
                indent=2,
            )
            + "\n"
        )
    elif args.format == "csv":
        sys.stdout.write("table,label,basis,reference,artifact,simulated,delta,tol,status\n")
        for r in rows:
            sim = "" if r["simulated"] is None else f"{r['simulated']:.6g}"
            sys.stdout.write(
                f"{r['table']},{r['label']},{r['basis']},{r['reference']:.6g},"
                f"{r['artifact']:.6g},{sim},{r['delta']:.6g},{r['tol']:.6g},{r['status']}\n"
            )
    else:
        sys.stdout.write(
            f"{'table':<16} {'label':<18} {'basis':<11} {'reference':>10} "
            f"{'artifact':>10} {'simulated':>10} {'tol':>8} {'status':>6}\n"
        )
        for r in rows:
            sim = "" if r["simulated"] is None else f"{r['simulated']:.6g}"
            sys.stdout.write(
                f"{r['table']:<16} {r['label']:<18} {r['basis']:<11} {r['reference']:>10.6g} "
                f"{r['artifact']:>10.6g} {sim:>10} {r['tol']:>8.6g} {r['status']:>6}\n"
            )
        sys.stdout.write("all rows PASS\n" if all_pass else "some rows FAILED\n")
    return 0 if all_pass else 1


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except _UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (ScenarioFileError, ScenarioError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (OptimizeError, NoSuccessError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


def entrypoint() -> None:  # console_scripts shim
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
