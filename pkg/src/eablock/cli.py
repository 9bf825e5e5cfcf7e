"""Command-line front end.

Every subcommand writes its numeric output as CSV next to a JSON manifest
(``<output>.manifest.json``) recording the command, the full parameter set,
seeds, tool version, paths and wall-clock time. Exit status: 0 success,
1 validation failure, 2 usage error or refused input.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, bounds, dynamics, gibbs, spectral
from ._accel import backend_name
from .influence import WeightParams, aggregate_influence, block_vertices, check_upsilon_property, vertex_log_weights
from .instance import beta_critical, gen_instance, load_instance, save_instance, validate_couplings
from .partition import BlockPartition, Failure, build_partition, graph_diameter, load_partition, save_partition, validate_partition
from .streams import generator

OUTPUT_ENV = "EABLOCK_OUTPUT_DIR"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
RADIUS_FLAGS = ("block_range", "short_cycle_max_len", "cycle_buffer_radius", "cycle_separation", "tree_reach", "cycle_reach")


class Refusal(Exception):
    """Input is well-formed but outside what the command will compute."""


def _output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "."))


def _resolve_output(path: str | None, default_name: str) -> Path:
    if path:
        return Path(path)
    out = _output_dir()
    out.mkdir(parents=True, exist_ok=True)
    return out / default_name


def _manifest_path(output: Path) -> Path:
    return output.with_name(output.name + ".manifest.json")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, Path):
        return str(x)
    return x


class Run:
    """Collects what a subcommand did and writes the manifest."""

    def __init__(self, args: argparse.Namespace):
        self.command = args.command
        self.args = {k: v for k, v in vars(args).items() if k not in ("func",)}
        self.params: dict = {}
        self.seeds: dict = {}
        self.inputs: list[str] = []
        self.outputs: list[str] = []
        self.report: dict = {}
        self.t0 = time.perf_counter()

    def manifest(self) -> dict:
        return _jsonable({
            "command": self.command,
            "arguments": self.args,
            "parameters": self.params,
            "seeds": self.seeds,
            "tool": "eablock",
            "version": __version__,
            "backend": backend_name(),
            "inputs": self.inputs,
            "outputs": self.outputs,
            "wall_clock_seconds": time.perf_counter() - self.t0,
            "report": self.report,
        })

    def finish(self, primary: Path) -> Path:
        path = _manifest_path(primary)
        path.write_text(json.dumps(self.manifest(), indent=1) + "\n", encoding="utf-8")
        print(json.dumps(self.manifest(), indent=1))
        return path


def _write_csv(path: Path, header, rows, manifest_name: str) -> Path:
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# manifest {manifest_name}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return path


def _beta_from(args) -> float:
    if args.beta is not None:
        if args.beta < 0:
            raise Refusal("--beta must be non-negative")
        return float(args.beta)
    return float(args.beta_frac) * beta_critical(args.d)


def _instance_d(instance, path: Path, given: float | None) -> float:
    if given is not None:
        return float(given)
    side = _manifest_path(path)
    if side.exists():
        data = json.loads(side.read_text(encoding="utf-8"))
        d = data.get("parameters", {}).get("d")
        if d is not None:
            return float(d)
    return 2.0 * instance.graph.m / instance.n


def _params_from(args, instance, d: float) -> WeightParams:
    overrides = {k: getattr(args, k) for k in RADIUS_FLAGS if getattr(args, k, None) is not None}
    params = WeightParams.defaults(instance.n, d, args.epsilon, **overrides)
    if getattr(args, "cap_diameter", False):
        params = params.capped(graph_diameter(instance.graph))
    return params


def _load(run: Run, path: str):
    run.inputs.append(str(path))
    return load_instance(path)


def _maybe_partition(run: Run, instance, path: str | None):
    if not path:
        return None
    run.inputs.append(str(path))
    return load_partition(instance.graph, path)


def _initial(instance, init: str, seed: int) -> np.ndarray:
    if init == "plus":
        return np.ones(instance.n, dtype=np.int8)
    if init == "minus":
        return -np.ones(instance.n, dtype=np.int8)
    rng = generator(seed, "initial")
    return np.where(rng.random(instance.n) < 0.5, 1, -1).astype(np.int8)


# --- subcommands -----------------------------------------------------------


def cmd_gen(args) -> int:
    run = Run(args)
    beta = _beta_from(args)
    inst = gen_instance(args.n, args.d, beta, args.seed, coupling_seed=args.coupling_seed)
    out = _resolve_output(args.output, f"instance-n{args.n}-d{args.d:g}-s{args.seed}.ea")
    run.params = {"n": args.n, "d": args.d, "beta": beta, "beta_frac": args.beta_frac,
                  "beta_critical": beta_critical(args.d)}
    run.seeds = {"graph": args.seed, "couplings": args.seed if args.coupling_seed is None else args.coupling_seed}
    save_instance(inst, out, manifest=_manifest_path(out).name)
    run.outputs.append(str(out))
    run.report = {"edges": inst.graph.m, "mean_degree": 2 * inst.graph.m / inst.n}
    run.finish(out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    run = Run(args)
    inst = _load(run, args.instance)
    d = _instance_d(inst, Path(args.instance), args.d)
    params = _params_from(args, inst, d)
    table = aggregate_influence(inst)
    logw = vertex_log_weights(table.aggregate, params)
    mask = block_vertices(inst, params, logw)
    ups = check_upsilon_property(inst, d)
    coup = validate_couplings(inst)
    out = _resolve_output(args.output, Path(args.instance).stem + ".analysis.csv")
    deg = inst.graph.degrees()
    _write_csv(out, ("vertex", "degree", "aggregate", "log_weight", "block_vertex"),
               ((v, int(deg[v]), float(table.aggregate[v]), float(logw[v]), int(mask[v])) for v in range(inst.n)),
               _manifest_path(out).name)
    run.outputs.append(str(out))
    run.params = {"d": d, **params.as_dict()}
    run.report = {
        "block_vertices": int(mask.sum()),
        "heavy_vertices": int((table.aggregate > params.heavy_threshold).sum()),
        "mean_aggregate": float(table.aggregate.mean()),
        "upsilon": ups.__dict__,
        "couplings": coup.__dict__,
    }
    run.finish(out)
    return EXIT_OK if ups.passed and coup.passed else EXIT_FAIL


def cmd_partition(args) -> int:
    run = Run(args)
    inst = _load(run, args.instance)
    d = _instance_d(inst, Path(args.instance), args.d)
    params = _params_from(args, inst, d)
    run.params = {"d": d, **params.as_dict()}
    res = build_partition(inst, params)
    out = _resolve_output(args.output, Path(args.instance).stem + ".partition.json")
    if isinstance(res, Failure):
        run.report = {"built": False, "failure": res.to_json()}
        report = out.with_name(out.name + ".failure.json")
        report.write_text(json.dumps(_jsonable({**res.to_json(), "manifest": _manifest_path(out).name}), indent=1) + "\n",
                          encoding="utf-8")
        run.outputs.append(str(report))
        run.finish(out)
        return EXIT_FAIL
    rep = validate_partition(inst, res, params)
    save_partition(res, out)
    run.outputs.append(str(out))
    kinds = {k: sum(b.kind == k for b in res.blocks) for k in ("singleton", "tree", "unicyclic")}
    run.report = {"built": True, "blocks": len(res), "kinds": kinds, "validation": rep.checks, "valid": rep.passed}
    run.finish(out)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_run(args) -> int:
    run = Run(args)
    inst = _load(run, args.instance)
    part = _maybe_partition(run, inst, args.partition)
    if args.dynamics == "block" and part is None:
        raise Refusal("block dynamics needs --partition")
    init = _initial(inst, args.init, args.seed)
    res = dynamics.run_chain(inst, init, args.steps, args.seed, partition=part if args.dynamics == "block" else None,
                             stride=args.stride)
    out = _resolve_output(args.output, Path(args.instance).stem + f".{args.dynamics}.trace.csv")
    tr = res.trace
    _write_csv(out, dynamics.Trace.COLUMNS[:4],
               zip(tr.step.tolist(), tr.updated_unit.tolist(), tr.energy.tolist(), tr.magnetization.tolist()),
               _manifest_path(out).name)
    run.outputs.append(str(out))
    run.seeds = {"chain": args.seed}
    run.params = {"beta": inst.beta, "steps": args.steps, "stride": args.stride}
    run.report = {"final_energy": float(gibbs.energy(inst, res.final)), "final_magnetization": float(res.final.mean())}
    run.finish(out)
    return EXIT_OK


def cmd_couple(args) -> int:
    run = Run(args)
    inst = _load(run, args.instance)
    part = _maybe_partition(run, inst, args.partition)
    run.seeds = {"experiment": args.seed}
    if args.experiment == "contraction":
        kind = "file"
        if part is None:
            d = _instance_d(inst, Path(args.instance), args.d)
            params = _params_from(args, inst, d)
            built = build_partition(inst, params)
            if isinstance(built, Failure):
                part, kind = BlockPartition.singletons(inst.graph), f"singletons (build failed at condition {built.condition})"
            else:
                part, kind = built, "built"
            run.params = {"d": d, **params.as_dict()}
        res = dynamics.contraction_experiment(inst, part, args.trials, args.seed, partition_kind=kind)
        out = _resolve_output(args.output, Path(args.instance).stem + ".contraction.csv")
        _write_csv(out, ("trial", "delta"), enumerate(res.deltas.tolist()), _manifest_path(out).name)
        run.report = {"partition": kind, "mean": res.mean, "stderr": res.stderr, "z_score": res.z_score,
                      "negative_3sigma": res.mean + 3 * res.stderr < 0}
        ok = True
    else:
        max_steps = args.max_steps or int(20 * inst.n * math.log(max(inst.n, 2)))
        res = dynamics.coalescence_experiment(inst, args.runs, max_steps, args.seed,
                                              partition=part if args.dynamics == "block" else None)
        out = _resolve_output(args.output, Path(args.instance).stem + ".coalescence.csv")
        _write_csv(out, ("run", "coalescence_step"), ((r, "" if t is None else t) for r, t in enumerate(res.times)),
                   _manifest_path(out).name)
        run.params = {"max_steps": max_steps, "runs": args.runs}
        run.report = {"fraction": res.fraction}
        ok = True
    run.outputs.append(str(out))
    run.finish(out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_spectral(args) -> int:
    run = Run(args)
    inst = _load(run, args.instance)
    if inst.n > 14:
        raise Refusal(f"spectral diagnostics need n <= 14 (state space 2^14); instance has n={inst.n}")
    part = _maybe_partition(run, inst, args.partition)
    rows = []
    glauber = spectral.spectral_report(inst, "glauber")
    rows.append(("glauber", glauber))
    if part is not None:
        rows.append(("block", spectral.spectral_report(inst, "block", part)))
    out = _resolve_output(args.output, Path(args.instance).stem + ".spectral.csv")
    _write_csv(out, ("chain", "lambda_star", "tau_rel", "t_mix", "stationarity_residual", "detailed_balance_residual"),
               ((k, r.lambda_star, r.tau_rel, "" if r.t_mix is None else r.t_mix, r.stationarity_residual,
                 r.detailed_balance_residual) for k, r in rows),
               _manifest_path(out).name)
    run.outputs.append(str(out))
    run.report = {k: r.as_dict() for k, r in rows}
    ok = all(r.detailed_balance_residual <= 1e-12 for _, r in rows)
    if part is not None and args.comparison:
        if inst.n > 12:
            raise Refusal("the comparison check needs n <= 12")
        cmp_ = spectral.verify_comparison_bound(inst, part)
        run.report["comparison"] = cmp_.as_dict()
        ok &= cmp_.holds
    run.finish(out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_bounds(args) -> int:
    run = Run(args)
    which = set(args.which)
    if "all" in which:
        which = {"half-normal", "phi", "aggregate"}
    reports = []
    if "half-normal" in which:
        for N in args.N:
            for delta in args.delta:
                reports.append(bounds.half_normal_tail_check(N, args.sigma, delta, args.trials, args.seed))
    if "aggregate" in which:
        for d, eps in zip(args.agg_d, args.agg_epsilon):
            reports.append(bounds.aggregate_tail_check(d, eps, args.trials, args.seed))
    phi = None
    if "phi" in which:
        phi = bounds.phi_bound_check(np.linspace(0.0, args.phi_max, args.phi_points))
    out = _resolve_output(args.output, "bounds.csv")
    _write_csv(out, ("check", "parameters", "empirical", "bound", "stderr", "trials", "passed"),
               ((r.name, json.dumps(r.parameters), r.empirical, r.bound, r.stderr, r.trials, r.passed) for r in reports),
               _manifest_path(out).name)
    run.outputs.append(str(out))
    run.seeds = {"bounds": args.seed}
    run.report = {"tail_checks": [r.as_dict() for r in reports], "phi": phi.as_dict() if phi else None}
    run.finish(out)
    ok = all(r.passed for r in reports) and (phi is None or phi.passed)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify(args) -> int:
    from .acceptance import run_acceptance

    run = Run(args)
    only = [int(x) for x in args.only.split(",")] if args.only else None
    results = run_acceptance(quick=args.quick, only=only, jobs=args.jobs, echo=lambda s: print(s, flush=True))
    out = _resolve_output(args.output, "acceptance.csv")
    _write_csv(out, ("criterion", "title", "passed", "seconds", "summary"),
               ((r.number, r.title, r.passed, r.seconds, r.summary) for r in results), _manifest_path(out).name)
    run.outputs.append(str(out))
    run.report = {"results": [r.as_dict() for r in results]}
    path = _manifest_path(out)
    path.write_text(json.dumps(run.manifest(), indent=1) + "\n", encoding="utf-8")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


# --- parser ----------------------------------------------------------------


def _add_radii(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=0.4)
    p.add_argument("--d", type=float, default=None, help="average degree (default: from the manifest, else 2m/n)")
    p.add_argument("--cap-diameter", action="store_true", help="cap the distance radii at the graph diameter")
    for name in RADIUS_FLAGS:
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eablock", description="Edwards-Anderson block dynamics toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for experiments that fan out")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random instance")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=float, required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--beta", type=float)
    g.add_argument("--beta-frac", type=float, help="beta as a multiple of sqrt(2 pi)/d")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--coupling-seed", type=int, default=None)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("analyze", help="influences, vertex weights, block vertices, property checks")
    p.add_argument("instance")
    _add_radii(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("partition", help="build and validate a block partition")
    p.add_argument("instance")
    _add_radii(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("run", help="run Glauber or block dynamics and write a trace")
    p.add_argument("instance")
    p.add_argument("--dynamics", choices=("glauber", "block"), default="glauber")
    p.add_argument("--partition")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--init", choices=("plus", "minus", "random"), default="plus")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("couple", help="path-coupling contraction or coalescence experiments")
    p.add_argument("instance")
    p.add_argument("--experiment", choices=("contraction", "coalescence"), required=True)
    p.add_argument("--partition")
    p.add_argument("--dynamics", choices=("glauber", "block"), default="glauber")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--seed", type=int, required=True)
    _add_radii(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_couple)

    p = sub.add_parser("spectral", help="exact relaxation and mixing times on tiny instances")
    p.add_argument("instance")
    p.add_argument("--partition")
    p.add_argument("--comparison", action="store_true", help="also check tau_glauber <= tau_block * max_B tau_B")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_spectral)

    p = sub.add_parser("bounds", help="half-normal, Gaussian CDF and aggregate-influence tail checks")
    p.add_argument("--which", nargs="+", choices=("half-normal", "phi", "aggregate", "all"), default=["all"])
    p.add_argument("--N", type=int, nargs="+", default=[10, 100])
    p.add_argument("--delta", type=float, nargs="+", default=[0.1, 0.3, 0.5])
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--agg-d", type=float, nargs="+", default=[50.0, 100.0])
    p.add_argument("--agg-epsilon", type=float, nargs="+", default=[0.5, 0.3])
    p.add_argument("--phi-max", type=float, default=10.0)
    p.add_argument("--phi-points", type=int, default=100_001)
    p.add_argument("--trials", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if args.command == "bounds" and len(args.agg_d) != len(args.agg_epsilon):
            raise Refusal("--agg-d and --agg-epsilon need the same number of values")
        return args.func(args)
    except Refusal as exc:
        print(f"eablock {args.command}: refused: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"eablock {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
