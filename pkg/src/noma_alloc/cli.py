"""Batch experiment driver.

Subcommands:

* ``gen``    write a problem-instance JSON file from scenario parameters
* ``solve``  run one solver on one instance file, JSON result on stdout
* ``sweep``  run an experiment spec (power or user-count sweep) to CSV

Exit codes: 0 success, 1 validation error, 2 solver failure, 3 I/O error.
Instance files carry exactly the fields ``K``, ``N_F``, ``p_max_watts``,
``weights``, ``gains`` (rows per subcarrier) and optionally
``noise_watts``.  The ``NOMA_ALLOC_THREADS`` environment variable caps
the sweep worker count.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import json
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import baselines, oracle, polyblock, sca
from .model import ProblemInstance
from .scenario import ScenarioConfig, dbm_to_watts, instance_for_drop
from .solvers import SolverError

CSV_HEADER = "sweep_value,solver,drop,objective_bps_hz,wall_ms,iterations,status"
SOLVER_NAMES = ("optimal", "sca", "oma", "random_pairing", "oracle")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_IO = 3


def _fmt(x: float) -> str:
    """Nine significant digits, trailing zeros kept (1.0 -> 1.00000000)."""
    return format(float(x), "#.9g")


# ---------------------------------------------------------------------------
# Instance file round trip
# ---------------------------------------------------------------------------


def write_instance(instance: ProblemInstance, path: str) -> None:
    doc = {
        "K": instance.num_users,
        "N_F": instance.num_subcarriers,
        "p_max_watts": instance.p_max,
        "weights": instance.weights.tolist(),
        "gains": instance.gains.tolist(),
    }
    if instance.noise_watts is not None:
        doc["noise_watts"] = instance.noise_watts
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def read_instance(path: str) -> ProblemInstance:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    missing = {"K", "N_F", "p_max_watts", "weights", "gains"} - set(doc)
    if missing:
        raise ValueError(f"instance file {path} missing fields {sorted(missing)}")
    return ProblemInstance(
        int(doc["K"]),
        int(doc["N_F"]),
        float(doc["p_max_watts"]),
        np.asarray(doc["weights"], dtype=float),
        np.asarray(doc["gains"], dtype=float),
        noise_watts=doc.get("noise_watts"),
    )


# ---------------------------------------------------------------------------
# Experiment specification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: ScenarioConfig
    solvers: tuple[str, ...]
    sweep_axis: str  # "p_max_dbm" or "num_users"
    sweep_values: tuple[float, ...]
    drops: int
    output: str
    seed: int
    p_max_dbm: float | None = None  # fixed budget for user-count sweeps
    solver_options: dict | None = None

    def __post_init__(self) -> None:
        if not self.solvers:
            raise ValueError("solver list must not be empty")
        unknown = set(self.solvers) - set(SOLVER_NAMES)
        if unknown:
            raise ValueError(f"unknown solvers {sorted(unknown)}")
        if self.sweep_axis not in ("p_max_dbm", "num_users"):
            raise ValueError(f"unknown sweep axis {self.sweep_axis!r}")
        if not self.sweep_values:
            raise ValueError("sweep needs at least one point")
        if self.drops < 1:
            raise ValueError("drops must be >= 1")
        if self.sweep_axis == "num_users" and self.p_max_dbm is None:
            raise ValueError("user-count sweeps need a fixed p_max_dbm")
        if "oracle" in self.solvers:
            cfg = oracle.OracleConfig()
            max_k = (
                max(int(v) for v in self.sweep_values)
                if self.sweep_axis == "num_users"
                else self.scenario.num_users
            )
            if self.scenario.num_subcarriers > cfg.max_subcarriers or max_k > cfg.max_users:
                raise ValueError("oracle solver requested outside its size caps")


def read_spec(path: str) -> ExperimentSpec:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        scenario = ScenarioConfig(**doc["scenario"])
        sweep = doc["sweep"]
        return ExperimentSpec(
            scenario=scenario,
            solvers=tuple(doc["solvers"]),
            sweep_axis=str(sweep["axis"]),
            sweep_values=tuple(sweep["values"]),
            drops=int(doc["drops"]),
            output=str(doc["output"]),
            seed=int(doc["seed"]),
            p_max_dbm=doc.get("p_max_dbm"),
            solver_options=doc.get("solver_options"),
        )
    except KeyError as exc:
        raise ValueError(f"experiment spec {path} missing field {exc}") from exc
    except TypeError as exc:
        raise ValueError(f"experiment spec {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Solver runners
# ---------------------------------------------------------------------------


def _derived_seed(*entropy: int) -> int:
    return int(np.random.SeedSequence(list(entropy)).generate_state(1)[0])


def run_solver(
    name: str, instance: ProblemInstance, *, seed: int = 0, options: dict | None = None
) -> tuple[float, int]:
    """(objective, iteration count) for one solver invocation."""
    opts = dict(options or {})
    if name == "optimal":
        run = polyblock.solve_optimal_run(
            instance,
            float(opts.get("epsilon", 1e-3)),
            max_vertices=int(opts.get("max_vertices", 10_000)),
        )
        return run.allocation.objective, run.projections
    if name == "sca":
        cfg = sca.ScaConfig(
            eta=opts.get("eta"),
            max_iterations=int(opts.get("max_iterations", 50)),
        )
        run = sca.solve_sca_run(instance, cfg)
        return run.allocation.objective, run.iterations
    if name == "oma":
        run = polyblock.solve_optimal_run(
            instance,
            float(opts.get("epsilon", 1e-3)),
            max_vertices=int(opts.get("max_vertices", 10_000)),
            allowed=baselines.singleton_mask(instance),
        )
        return run.allocation.objective, run.projections
    if name == "random_pairing":
        alloc = baselines.solve_random_pairing(instance, seed)
        return alloc.objective, 1
    if name == "oracle":
        run = oracle.brute_force_run(instance)
        return run.allocation.objective, run.evaluations
    raise ValueError(f"unknown solver {name!r}")


@dataclass(frozen=True)
class ResultRow:
    point_index: int
    sweep_value: float
    solver: str
    drop: int
    objective: float | None
    wall_ms: float
    iterations: int
    status: str


@dataclass(frozen=True)
class SweepResults:
    rows: tuple[ResultRow, ...]
    summary: tuple[dict, ...]  # per (sweep point, solver): mean and std error


def _task(spec: ExperimentSpec, point_index: int, drop: int) -> list[ResultRow]:
    value = spec.sweep_values[point_index]
    if spec.sweep_axis == "p_max_dbm":
        users = spec.scenario.num_users
        p_max = dbm_to_watts(float(value))
    else:
        users = int(value)
        p_max = dbm_to_watts(float(spec.p_max_dbm))
    scenario = dataclasses.replace(
        spec.scenario,
        num_users=users,
        seed=_derived_seed(spec.seed, point_index),
    )
    instance = instance_for_drop(scenario, p_max, drop_index=drop)
    rows = []
    opts = spec.solver_options or {}
    for solver in spec.solvers:
        seed = _derived_seed(spec.seed, point_index, drop, 7)
        start = time.perf_counter()
        try:
            objective, iterations = run_solver(
                solver, instance, seed=seed, options=opts.get(solver)
            )
            status = "ok"
        except Exception as exc:  # recorded per row, the sweep continues
            objective, iterations, status = None, 0, f"error:{type(exc).__name__}"
        wall_ms = 1000.0 * (time.perf_counter() - start)
        rows.append(
            ResultRow(point_index, float(value), solver, drop, objective, wall_ms, iterations, status)
        )
    return rows


def _worker_count() -> int:
    env = os.environ.get("NOMA_ALLOC_THREADS")
    if env:
        return max(1, int(env))
    return max(1, min(os.cpu_count() or 1, 8))


def run_sweep(spec: ExperimentSpec) -> SweepResults:
    """All (point, drop, solver) runs plus per-point summary statistics."""
    tasks = [
        (point, drop) for point in range(len(spec.sweep_values)) for drop in range(spec.drops)
    ]
    workers = _worker_count()
    rows: list[ResultRow] = []
    if workers == 1 or len(tasks) == 1:
        for point, drop in tasks:
            rows.extend(_task(spec, point, drop))
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_task, spec, point, drop) for point, drop in tasks]
            for fut in futures:
                rows.extend(fut.result())
    rows.sort(key=lambda r: (r.point_index, r.solver, r.drop))
    summary = []
    for point in range(len(spec.sweep_values)):
        for solver in spec.solvers:
            vals = [
                r.objective
                for r in rows
                if r.point_index == point and r.solver == solver and r.objective is not None
            ]
            if vals:
                arr = np.asarray(vals)
                se = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
                summary.append(
                    {
                        "sweep_value": float(spec.sweep_values[point]),
                        "solver": solver,
                        "mean_objective": float(arr.mean()),
                        "std_error": se,
                        "completed": int(arr.size),
                    }
                )
    return SweepResults(tuple(rows), tuple(summary))


def emit_csv(results: SweepResults, path: str, *, include_timings: bool = False) -> None:
    """Write result rows; timings are zeroed by default so that identical
    (spec, seed) runs produce byte-identical files."""
    if not results.rows:
        raise ValueError("refusing to write an empty results table")
    lines = [CSV_HEADER]
    for r in results.rows:
        objective = "" if r.objective is None else _fmt(r.objective)
        wall = _fmt(r.wall_ms if include_timings else 0.0)
        lines.append(
            f"{r.sweep_value:g},{r.solver},{r.drop},{objective},{wall},{r.iterations},{r.status}"
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Argument parsing and subcommands
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse defaults to exit code 2
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="noma-alloc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a problem instance file")
    gen.add_argument("--config", help="scenario config JSON (field names of ScenarioConfig)")
    gen.add_argument("--users", "-k", type=int, help="number of users")
    gen.add_argument("--subcarriers", "-n", type=int, help="number of subcarriers")
    gen.add_argument("--p-max-dbm", type=float, default=45.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--drop-index", type=int, default=0)
    gen.add_argument("--out", required=True)

    solve = sub.add_parser("solve", help="run one solver on one instance")
    solve.add_argument("--instance", required=True)
    solve.add_argument("--solver", required=True, choices=SOLVER_NAMES)
    solve.add_argument("--epsilon", type=float, default=1e-3)
    solve.add_argument("--max-vertices", type=int, default=10_000)
    solve.add_argument("--seed", type=int, default=0, help="seed for random_pairing")
    solve.add_argument("--trace", help="iteration trace CSV (optimal/oma only)")

    sweep = sub.add_parser("sweep", help="run an experiment spec to CSV")
    sweep.add_argument("--spec", required=True)
    sweep.add_argument(
        "--timings",
        action="store_true",
        help="record wall-clock times (breaks byte-level reproducibility)",
    )
    return parser


def _cmd_gen(args: argparse.Namespace) -> int:
    fields = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            fields.update(json.load(fh))
    if args.users is not None:
        fields["num_users"] = args.users
    if args.subcarriers is not None:
        fields["num_subcarriers"] = args.subcarriers
    fields.setdefault("seed", args.seed)
    if "num_users" not in fields:
        raise ValueError("number of users required (--users or config file)")
    config = ScenarioConfig(**fields)
    instance = instance_for_drop(
        config, dbm_to_watts(args.p_max_dbm), drop_index=args.drop_index
    )
    write_instance(instance, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_solve(args: argparse.Namespace) -> int:
    instance = read_instance(args.instance)
    trace: list[dict] | None = [] if args.trace else None
    start = time.perf_counter()
    if args.solver in ("optimal", "oma") and trace is not None:
        allowed = baselines.singleton_mask(instance) if args.solver == "oma" else None
        run = polyblock.solve_optimal_run(
            instance, args.epsilon, max_vertices=args.max_vertices, allowed=allowed, trace=trace
        )
        objective, iterations = run.allocation.objective, run.projections
        polyblock.write_trace_csv(trace, args.trace)
    else:
        objective, iterations = run_solver(
            args.solver,
            instance,
            seed=args.seed,
            options={"epsilon": args.epsilon, "max_vertices": args.max_vertices},
        )
    wall_ms = 1000.0 * (time.perf_counter() - start)
    json.dump(
        {
            "solver": args.solver,
            "objective_bps_hz": objective,
            "iterations": iterations,
            "wall_ms": wall_ms,
            "status": "ok",
        },
        sys.stdout,
        indent=2,
    )
    print()
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    spec = read_spec(args.spec)
    results = run_sweep(spec)
    emit_csv(results, spec.output, include_timings=args.timings)
    for row in results.summary:
        print(
            f"{spec.sweep_axis}={row['sweep_value']:g} {row['solver']}: "
            f"mean {row['mean_objective']:.4f} bits/s/Hz "
            f"(+/- {row['std_error']:.4f}, {row['completed']} drops)"
        )
    print(f"wrote {spec.output}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"gen": _cmd_gen, "solve": _cmd_solve, "sweep": _cmd_sweep}
    try:
        return handlers[args.command](args)
    except (ValueError, KeyError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SolverError, RuntimeError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
