"""Command-line front end.

Exit codes: 0 success, 1 runtime failure, 2 bad flags or configuration.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
import time
from pathlib import Path

import jsonschema

from . import kernels
from .bnb import BUDGET_EXHAUSTED, solve_exact
from .errors import ConfigError, MecSchedError, WorkloadError
from .experiment import (RUNTIME_NOTE, Scenario, bench_csv, emit_plot_data, run_experiment,
                         runtime_benchmark, solve, write_results, ResultTable)
from .ga import GaParams, run_ga, write_fitness_history
from .milp import build_model, export_lp
from .model import ObjectiveWeights, compute_metrics, validate_schedule
from .workload import Distribution, WorkloadConfig, generate_workload, read_taskset, write_taskset

OUTPUT_DIR_ENV = "MECSCHED_OUTPUT_DIR"

FULL_GRID_USERS = [10, 100, 500, 1000]
FULL_GRID_TASKS_PER_USER = [1, 5, 10]

DEFAULT_CONFIG = {
    "users": [20],
    "tasks_per_user": [5],
    "m_cpus": 2,
    "lambda": 0.5,
    "algorithms": ["FCFS", "STF", "GA", "MILP"],
    "n_runs": 10,
    "base_seed": 0,
    "level": 0.95,
    "workers": 1,
    "workload": {
        "arrival_rate": 0.004,
        "packet_size": 1000.0,
        "datarate": 50000.0,
        "proc_time_dist": {"kind": "uniform", "params": [10, 100]},
        "slack_factor_dist": {"kind": "uniform", "params": [1.5, 4.0]},
        "slot_ms": 1,
    },
    "ga": {
        "population": 100,
        "generations": 100,
        "mutation_rate": 0.01,
        "tournament_size": 3,
        "crossover_rate": 1.0,
        "seed": 0,
        "seed_with_greedy": True,
    },
    "milp": {"node_limit": 100000, "time_limit": None},
    "output_dir": None,
    "verbosity": 0,
}

_DIST = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "params"],
    "properties": {
        "kind": {"enum": ["uniform", "constant", "exponential"]},
        "params": {"type": "array", "items": {"type": "number"}, "minItems": 1, "maxItems": 2},
    },
}
_POS_INT_LIST = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "users": _POS_INT_LIST,
        "tasks_per_user": _POS_INT_LIST,
        "m_cpus": {"type": "integer", "minimum": 1},
        "lambda": {"type": "number", "minimum": 0, "maximum": 1},
        "algorithms": {"type": "array", "minItems": 1, "uniqueItems": True,
                       "items": {"enum": ["FCFS", "STF", "GA", "MILP"]}},
        "n_runs": {"type": "integer", "minimum": 1},
        "base_seed": {"type": "integer"},
        "level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "workers": {"type": "integer", "minimum": 1},
        "workload": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "arrival_rate": {"type": "number", "exclusiveMinimum": 0},
                "packet_size": {"type": "number", "minimum": 0},
                "datarate": {"type": "number", "exclusiveMinimum": 0},
                "proc_time_dist": _DIST,
                "slack_factor_dist": _DIST,
                "slot_ms": {"type": "integer", "minimum": 1},
            },
        },
        "ga": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "population": {"type": "integer", "minimum": 2},
                "generations": {"type": "integer", "minimum": 0},
                "mutation_rate": {"type": "number", "minimum": 0, "maximum": 1},
                "tournament_size": {"type": "integer", "minimum": 1},
                "crossover_rate": {"type": "number", "minimum": 0, "maximum": 1},
                "seed": {"type": "integer"},
                "seed_with_greedy": {"type": "boolean"},
            },
        },
        "milp": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "node_limit": {"type": ["integer", "null"], "minimum": 1},
                "time_limit": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
        },
        "output_dir": {"type": ["string", "null"]},
        "verbosity": {"type": "integer", "minimum": 0, "maximum": 2},
    },
}


def load_config(path: str | None) -> dict:
    """Defaults overlaid with the JSON document at ``path``; validated before use."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is None:
        return cfg
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        loc = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {loc}: {e.message}") from None
    for key, val in doc.items():
        if isinstance(val, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(val)
        else:
            cfg[key] = val
    return cfg


def scenario_from_config(cfg: dict) -> Scenario:
    try:
        wl = cfg["workload"]
        workload = WorkloadConfig(
            arrival_rate=wl["arrival_rate"], packet_size=wl["packet_size"], datarate=wl["datarate"],
            proc_time_dist=Distribution.from_dict(wl["proc_time_dist"]),
            slack_factor_dist=Distribution.from_dict(wl["slack_factor_dist"]),
            slot_ms=wl["slot_ms"],
        )
        return Scenario(
            users=tuple(cfg["users"]), tasks_per_user=tuple(cfg["tasks_per_user"]), workload=workload,
            m_cpus=cfg["m_cpus"], weights=ObjectiveWeights(cfg["lambda"]),
            algorithms=tuple(cfg["algorithms"]), n_runs=cfg["n_runs"], base_seed=cfg["base_seed"],
            ga_params=GaParams(**cfg["ga"]), milp_node_limit=cfg["milp"]["node_limit"],
            milp_time_limit=cfg["milp"]["time_limit"], level=cfg["level"], workers=cfg["workers"],
        )
    except (ValueError, WorkloadError) as e:
        raise ConfigError(str(e)) from None


def _output_dir(arg: str | None, cfg: dict | None = None) -> Path:
    if arg:
        return Path(arg)
    if cfg and cfg.get("output_dir"):
        return Path(cfg["output_dir"])
    return Path(os.environ.get(OUTPUT_DIR_ENV, "results"))


def _read_instance(path: str):
    try:
        return read_taskset(path)
    except OSError as e:
        raise ConfigError(f"cannot read instance {path}: {e}") from None
    except WorkloadError as e:
        raise ConfigError(str(e)) from None


# -- subcommands ------------------------------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = load_config(args.config)
    scenario = scenario_from_config(cfg)
    users = args.users if args.users is not None else cfg["users"][0]
    tpu = args.tasks_per_user if args.tasks_per_user is not None else cfg["tasks_per_user"][0]
    overrides = {"n_users": users, "tasks_per_user": tpu, "seed": args.seed}
    if args.arrival_rate is not None:
        overrides["arrival_rate"] = args.arrival_rate
    try:
        wl = scenario.workload.with_(**overrides)
    except WorkloadError as e:
        raise ConfigError(str(e)) from None
    ts = generate_workload(wl)
    if args.output:
        write_taskset(ts, args.output)
    else:
        from .workload import taskset_to_csv
        sys.stdout.write(taskset_to_csv(ts))
    return 0


def cmd_schedule(args) -> int:
    ts = _read_instance(args.instance)
    weights = ObjectiveWeights(args.lam)
    algo = args.algo.upper()
    status = "heuristic"
    t0 = time.perf_counter()
    if algo == "GA":
        params = GaParams(population=args.population, generations=args.generations,
                          mutation_rate=args.mutation_rate, seed=args.seed)
        res = run_ga(ts, args.cpus, weights, params)
        sched = res.schedule
        if args.history:
            write_fitness_history(res.fitness_history, args.history)
    elif algo == "MILP":
        model = build_model(ts, args.cpus, weights, slot_ms=args.slot_ms)
        if args.export_lp:
            Path(args.export_lp).write_text(export_lp(model))
        res = solve_exact(model, node_limit=args.node_limit, time_limit=args.time_limit)
        sched, status = res.schedule, res.status
    else:
        scenario = Scenario(m_cpus=args.cpus, weights=weights, algorithms=(algo,))
        sched, status = solve(algo, ts, scenario, args.seed)
    runtime = (time.perf_counter() - t0) * 1000.0

    violations = validate_schedule(sched, ts)
    if violations:
        print("invalid schedule: " + "; ".join(map(str, violations)), file=sys.stderr)
        return 1
    met = compute_metrics(sched, ts, weights, runtime)
    out = {"algorithm": algo, "n_tasks": len(ts), "mean_delay": met.mean_delay,
           "dropped_ratio": met.dropped_ratio, "objective": met.objective, "status": status}
    if args.json:
        print(json.dumps(out, sort_keys=True))
    else:
        print(f"algorithm {algo}")
        print(f"mean_delay {met.mean_delay:.6g}")
        print(f"dropped_ratio {met.dropped_ratio:.6g}")
        print(f"objective {met.objective:.6g}")
        print(f"status {status}")
    if args.schedule_out:
        lines = ["task_id,cpu_id,start_ms,waiting_ms"]
        lines += [f"{a.task_id},{a.cpu_id},{a.start},{a.waiting}" for a in sched.assignments]
        lines += [f"{tid},0,," for tid in sorted(sched.dropped)]
        Path(args.schedule_out).write_text("\n".join(lines) + "\n")
    if status == BUDGET_EXHAUSTED and args.require_optimal:
        print("node/time budget exhausted before optimality was proven", file=sys.stderr)
        return 1
    return 0


def cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    if args.full_grid:
        cfg["users"], cfg["tasks_per_user"] = FULL_GRID_USERS, FULL_GRID_TASKS_PER_USER
    if args.workers is not None:
        cfg["workers"] = args.workers
    _set_verbosity(max(args.verbose, cfg["verbosity"]))
    scenario = scenario_from_config(cfg)
    outdir = _output_dir(args.out, cfg)
    table = run_experiment(scenario)
    write_results(table, outdir, timings=args.timings)
    expected = [(u, k, a) for u, k in scenario.cells() for a in scenario.algorithms]
    for metric in ("delay", "dropped_ratio"):
        emit_plot_data(table, metric, outdir, expected)
    print(f"wrote results for {len(scenario.cells())} grid cell(s) x {scenario.n_runs} run(s) to {outdir}")
    return 0


def cmd_export_lp(args) -> int:
    ts = _read_instance(args.instance)
    model = build_model(ts, args.cpus, ObjectiveWeights(args.lam), slot_ms=args.slot_ms)
    text = export_lp(model)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    if args.runs is not None:
        cfg["n_runs"] = args.runs
    scenario = scenario_from_config(cfg)
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s]
    except ValueError:
        raise ConfigError(f"--sizes must be comma-separated integers, got {args.sizes!r}") from None
    rows = runtime_benchmark(sizes, scenario, algorithms=args.algorithms.split(","))
    text = bench_csv(rows)
    sys.stdout.write(text)
    print(f"# {RUNTIME_NOTE} Decoder backend: {kernels.BACKEND}.")
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "bench.csv").write_text(text)
    return 0


def cmd_plot_data(args) -> int:
    try:
        table = ResultTable.from_json(Path(args.results).read_text())
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise ConfigError(f"cannot read results {args.results}: {e}") from None
    paths = emit_plot_data(table, args.metric, _output_dir(args.out))
    for p in paths:
        print(p)
    return 0


def cmd_default_config(args) -> int:
    print(json.dumps(DEFAULT_CONFIG, indent=2))
    return 0


def _set_verbosity(level: int) -> None:
    logging.basicConfig(level={0: logging.WARNING, 1: logging.INFO}.get(level, logging.DEBUG),
                        format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mecsched", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a task set as CSV")
    g.add_argument("--config")
    g.add_argument("--users", type=int)
    g.add_argument("--tasks-per-user", type=int)
    g.add_argument("--arrival-rate", type=float, help="tasks per ms, per user")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("schedule", help="run one algorithm on one instance")
    s.add_argument("--algo", required=True, choices=["fcfs", "stf", "ga", "milp"], type=str.lower)
    s.add_argument("--instance", required=True)
    s.add_argument("--cpus", type=int, default=2)
    s.add_argument("--lambda", dest="lam", type=float, default=0.5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--population", type=int, default=100)
    s.add_argument("--generations", type=int, default=100)
    s.add_argument("--mutation-rate", type=float, default=0.01)
    s.add_argument("--history", help="write the GA fitness history CSV here")
    s.add_argument("--node-limit", type=int, default=None)
    s.add_argument("--time-limit", type=float, default=None, help="seconds")
    s.add_argument("--slot-ms", type=int, default=1)
    s.add_argument("--export-lp", metavar="PATH", help="also write the MILP in LP format")
    s.add_argument("--require-optimal", action="store_true")
    s.add_argument("--schedule-out", metavar="PATH")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_schedule)

    e = sub.add_parser("experiment", help="run a replicated scenario")
    e.add_argument("--config")
    e.add_argument("--out")
    e.add_argument("--workers", type=int)
    e.add_argument("--full-grid", action="store_true", help="users 10..1000 x tasks 1,5,10")
    e.add_argument("--timings", action="store_true",
                   help="also write wall-clock runtimes to timings.csv (not reproducible)")
    e.add_argument("-v", "--verbose", action="count", default=0)
    e.set_defaults(func=cmd_experiment)

    x = sub.add_parser("export-lp", help="write the time-indexed model in LP format")
    x.add_argument("--instance", required=True)
    x.add_argument("--cpus", type=int, default=2)
    x.add_argument("--lambda", dest="lam", type=float, default=0.5)
    x.add_argument("--slot-ms", type=int, default=1)
    x.add_argument("-o", "--output")
    x.set_defaults(func=cmd_export_lp)

    b = sub.add_parser("bench", help="runtime table for MILP and GA")
    b.add_argument("--config")
    b.add_argument("--sizes", default="10,50,100")
    b.add_argument("--runs", type=int)
    b.add_argument("--algorithms", default="MILP,GA")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)

    pd = sub.add_parser("plot-data", help="per-tasks-per-user CSVs from a results.json")
    pd.add_argument("--results", required=True)
    pd.add_argument("--metric", choices=["delay", "dropped_ratio", "objective"], default="delay")
    pd.add_argument("--out")
    pd.set_defaults(func=cmd_plot_data)

    dc = sub.add_parser("default-config", help="print the default configuration")
    dc.set_defaults(func=cmd_default_config)
    return p


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if getattr(args, "lam", None) is not None and not 0 <= args.lam <= 1:
            raise ConfigError("--lambda must lie in [0, 1]")
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (MecSchedError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
