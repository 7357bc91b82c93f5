"""Command-line entry point.

Every command writes its artifacts under ``--out`` together with
``manifest.json``, which lists each artifact's SHA-256 and a hash of the
configuration (options plus input file contents, not their paths).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from . import experiments
from .metrics import ComparisonReport, compute_mape
from .model.edge import (
    PlacementDecision,
    catalog_from_dict,
    catalog_to_dict,
    decision_from_dict,
    decision_to_dict,
    feasible_nodes,
)
from .model.io import ModelError, load_model, read_model
from .model.validate import validate_model
from .optimize.baselines import baseline_no_cache, baseline_prefetch_all
from .optimize.ga import GaParams, ga_optimize_jcsp, ga_optimize_placement
from .report import dumps, emit_report
from .sim.compare import compare_residence
from .sim.simulate import SimOptions, simulate
from .solver.caching import SolverOptions
from .solver.lqn import solve_lqn
from .workload.report import cdf_report
from .workload.spec import WorkloadSpec, load_workload
from .workload.synth import synth_catalog, synth_workload
from .workload.trace import DEFAULT_HORIZON_DAYS, ingest_trace

COMMANDS = ("validate", "solve", "simulate", "compare", "optimize", "baseline", "gen-workload",
            "ingest-trace", "gain", "mape")
AMVA_FLAGS = {"linearizer": "linearizer", "bard-schweitzer": "bard-schweitzer", "exact": "exact-mva"}
GRID_KEYS = {"M": int, "N": int, "C": int, "K": int, "q": float, "p": float, "eta": float}
# the standard evaluation grid point
DEFAULT_GRID = {"M": 4, "N": 25, "C": 20, "q": 750.0, "p": 1.0, "eta": 1.0}
MANIFEST = "manifest.json"


class CliError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    inputs: dict
    solver: SolverOptions
    sim: SimOptions
    ga: GaParams
    out: Path
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def fingerprint(self) -> str:
        """SHA-256 over everything that determines the artifacts."""
        doc = {"command": self.command, "seed": self.seed, "solver": asdict(self.solver),
               "sim": asdict(self.sim), "ga": asdict(self.ga), "extra": self.extra,
               "inputs": {k: (_sha256(Path(v).read_bytes()) if v is not None else None)
                          for k, v in sorted(self.inputs.items())}}
        doc["sim"].pop("workers")
        return _sha256(json.dumps(doc, sort_keys=True, default=str).encode())


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def parse_grid(text: Optional[str]) -> dict:
    """``"M=4,N=25,C=20,q=750,p=1,eta=1"`` to a dict; missing keys take the
    default grid point."""
    grid = dict(DEFAULT_GRID)
    if not text:
        return grid
    for part in text.split(","):
        key, sep, val = part.partition("=")
        key = key.strip()
        if not sep or key not in GRID_KEYS:
            raise CliError(f"bad grid entry {part!r}; expected key=value with key in {sorted(GRID_KEYS)}")
        try:
            grid[key] = GRID_KEYS[key](val)
        except ValueError:
            raise CliError(f"bad value in grid entry {part!r}") from None
    return grid


# -- inputs ------------------------------------------------------------------
def _need(cfg: RunConfig, key: str) -> Path:
    path = cfg.inputs.get(key)
    if path is None:
        raise CliError(f"{cfg.command} needs --{key}")
    return Path(path)


def _instance(cfg: RunConfig):
    """Workload and catalog from files, or synthesized from ``--grid``."""
    wpath, cpath = cfg.inputs.get("workload"), cfg.inputs.get("catalog")
    if wpath is not None:
        workload = load_workload(Path(wpath).read_text())
    else:
        g = cfg.extra["grid"]
        workload = synth_workload(g["M"], g["N"], g["C"], g["q"], g["p"], g["eta"], seed=cfg.seed)
    if cpath is not None:
        catalog = catalog_from_dict(json.loads(Path(cpath).read_text()))
    else:
        catalog = synth_catalog(workload, seed=cfg.seed)
    if catalog.M != len(workload.node_capacities_mb):
        raise CliError(f"catalog has {catalog.M} nodes, workload declares {len(workload.node_capacities_mb)}")
    return catalog, workload


def _read_pairs(path: Path, cols: tuple[str, ...]) -> dict:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in cols if c not in (reader.fieldnames or ())]
        if missing:
            raise CliError(f"{path}: missing columns {missing}")
        rows = list(reader)
    try:
        return {c: [float(r[c]) for r in rows] for c in cols}
    except ValueError as exc:
        raise CliError(f"{path}: {exc}") from None


# -- commands ----------------------------------------------------------------
def cmd_validate(cfg: RunConfig) -> tuple[dict, int]:
    try:
        lines = [str(d) for d in validate_model(load_model(_need(cfg, "model").read_text(), validate=False))]
    except ModelError as exc:
        lines = [str(d) for d in getattr(exc, "diagnostics", None) or [exc]]
    for line in lines:
        print(f"error: {line}", file=sys.stderr)
    return {"diagnostics": "".join(f"{line}\n" for line in lines)}, 1 if lines else 0


def cmd_solve(cfg: RunConfig):
    return {"solution": solve_lqn(read_model(_need(cfg, "model")), cfg.solver)}, 0


def cmd_simulate(cfg: RunConfig):
    return {"simulation": simulate(read_model(_need(cfg, "model")), cfg.sim)}, 0


def cmd_compare(cfg: RunConfig):
    if cfg.inputs.get("model") is None:
        pts = experiments.validation_grid(solver=cfg.solver, sim=cfg.sim)
        table = "users,tokens,analytical,simulated,ci-half-width,rel-diff\n" + "".join(
            f"{p.users},{p.tokens},{p.analytical!r},{p.simulated!r},{p.half_width!r},{p.rel_diff!r}\n" for p in pts)
        summary = {"points": len(pts), "max-rel-diff": max(p.rel_diff for p in pts)}
        return {"validation-grid": table, "validation-summary": summary}, 0
    model = read_model(_need(cfg, "model"))
    other = cfg.inputs.get("sim_model")
    sim = simulate(read_model(Path(other)) if other else model, cfg.sim)
    solution = solve_lqn(model, cfg.solver)
    return {"solution": solution, "simulation": sim, "comparison": compare_residence(solution, sim)}, 0


def cmd_optimize(cfg: RunConfig):
    catalog, workload = _instance(cfg)
    mode = cfg.extra["mode"]
    best = None
    for i, s in enumerate(experiments.sub_seeds(cfg.seed, cfg.extra["replications"])):
        params = GaParams(**{**asdict(cfg.ga), "seed": s})
        if mode == "jcsp":
            res = ga_optimize_jcsp(catalog, workload, params=params, options=cfg.solver)
        else:
            res = ga_optimize_placement(catalog, workload, params, options=cfg.solver)
        if best is None or res.R < best[1].R:
            best = (i, res)
    i, res = best
    out = {"fitness": res.run, "catalog": catalog_to_dict(catalog), "workload": workload.to_dict()}
    summary = {"mode": mode, "response-time": res.R, "evaluations": res.evaluations,
               "failed-evaluations": res.failures, "best-replication": i}
    if mode == "jcsp":
        out["decision"] = decision_to_dict(res.x, res.alloc)
        cmp = experiments.compare_baselines(catalog, workload, res, cfg.solver)
        summary["memory-mb"] = res.memory_mb
        summary["baselines"] = cmp.to_dict()
        summary["comparison"] = ComparisonReport("no-cache", "jcsp", [cmp.no_cache], [cmp.jcsp]).to_dict()
    else:
        out["decision"] = decision_to_dict(res.x)
    out["summary"] = summary
    return out, 0


def cmd_baseline(cfg: RunConfig):
    catalog, workload = _instance(cfg)
    dpath = cfg.inputs.get("decision")
    if dpath is not None:
        x, _ = decision_from_dict(json.loads(Path(dpath).read_text()))
        x.check(catalog)
    else:
        # lexicographically smallest feasible assignment
        x = PlacementDecision(tuple(min(feasible_nodes(catalog, k)) for k in range(catalog.K)), catalog.M)
    kind = cfg.extra["kind"]
    if kind == "no-cache":
        doc = {"baseline": kind, "response-time": baseline_no_cache(catalog, workload, x, cfg.solver),
               "memory-mb": 0.0}
    else:
        r, mem = baseline_prefetch_all(catalog, workload, x, cfg.solver)
        doc = {"baseline": kind, "response-time": r, "memory-mb": mem}
    doc["decision"] = decision_to_dict(x)
    return {"baseline": doc}, 0


def _workload_artifacts(workload: WorkloadSpec) -> dict:
    out = {f"cdf-{k}": v for k, v in cdf_report(workload).items()}
    out["workload"] = workload.to_dict()
    return out


def cmd_gen_workload(cfg: RunConfig):
    catalog, workload = _instance(cfg)
    out = _workload_artifacts(workload)
    out["catalog"] = catalog_to_dict(catalog)
    return out, 0


def cmd_ingest_trace(cfg: RunConfig):
    e = cfg.extra
    workload = ingest_trace(_need(cfg, "invocations"), _need(cfg, "durations"), _need(cfg, "memory"),
                            cfg.inputs.get("mapping"), users=e["users"], horizon_days=e["horizon_days"],
                            sample=e["sample"], seed=cfg.seed, nodes=e["nodes"])
    return _workload_artifacts(workload), 0


def cmd_gain(cfg: RunConfig):
    pairs = cfg.inputs.get("pairs")
    if pairs is not None:
        cols = _read_pairs(Path(pairs), ("baseline", "proposed"))
        report = ComparisonReport("baseline", "proposed", cols["baseline"], cols["proposed"])
    else:
        g = cfg.extra["grid"]
        shape = {k: g[k] for k in ("M", "N", "C") if k in g}
        shape["K"] = g.get("K", shape["C"])
        report = experiments.gain_study(cfg.seed, cfg.extra["replications"], shape, cfg.ga, cfg.solver)
    return {"comparison": report}, 0


def cmd_mape(cfg: RunConfig):
    pairs = cfg.inputs.get("pairs")
    if pairs is not None:
        cols = _read_pairs(Path(pairs), ("estimated", "reference"))
        doc = {"pairs": len(cols["estimated"]), "mape": compute_mape(cols["estimated"], cols["reference"])}
        return {"mape": doc}, 0
    n = cfg.extra["replications"]
    grid = tuple(experiments.DESK_GRID[i % len(experiments.DESK_GRID)] for i in range(n))
    return {"miss-ratios": experiments.miss_ratio_study(cfg.seed, grid, cfg.solver, cfg.sim)}, 0


HANDLERS = {
    "validate": cmd_validate, "solve": cmd_solve, "simulate": cmd_simulate, "compare": cmd_compare,
    "optimize": cmd_optimize, "baseline": cmd_baseline, "gen-workload": cmd_gen_workload,
    "ingest-trace": cmd_ingest_trace, "gain": cmd_gain, "mape": cmd_mape,
}


def write_manifest(cfg: RunConfig, files: list[Path]) -> Path:
    doc = {"command": cfg.command, "config-hash": cfg.fingerprint(),
           "artifacts": [{"file": f.name, "sha256": _sha256(f.read_bytes())} for f in sorted(files)]}
    path = cfg.out / MANIFEST
    path.write_text(dumps(doc))
    return path


def run_command(cfg: RunConfig) -> int:
    """Run one command and write its artifacts; returns the exit status."""
    if cfg.command not in HANDLERS:
        raise CliError(f"unknown command {cfg.command!r}")
    for key, path in cfg.inputs.items():
        if path is not None and not Path(path).is_file():
            raise CliError(f"--{key.replace('_', '-')}: no such file {path}")
    results, status = HANDLERS[cfg.command](cfg)
    files = emit_report(results, cfg.out, cfg.extra.get("format", "text"), cfg.extra.get("plots", False))
    write_manifest(cfg, files)
    return status


# -- argument parsing ----------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jcsp", description="Layered queueing models of edge caching and placement.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("kind", nargs="?", choices=("no-cache", "prefetch-all"), help="baseline kind")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model", help="LQN model document")
    p.add_argument("--sim-model", help="model to simulate in compare (default: --model)")
    p.add_argument("--workload", help="workload document")
    p.add_argument("--catalog", help="service catalog document (default: synthesized from --seed)")
    p.add_argument("--decision", help="decision document for baseline")
    p.add_argument("--pairs", help="CSV for gain (baseline,proposed) or mape (estimated,reference)")
    p.add_argument("--invocations", help="trace invocations CSV")
    p.add_argument("--durations", help="trace durations CSV")
    p.add_argument("--memory", help="trace memory CSV")
    p.add_argument("--mapping", help="trace column mapping JSON")
    p.add_argument("--users", type=int, default=25)
    p.add_argument("--nodes", type=int, default=0)
    p.add_argument("--sample", type=int)
    p.add_argument("--horizon-days", type=float, default=DEFAULT_HORIZON_DAYS)
    p.add_argument("--delta", type=float, default=SolverOptions.delta)
    p.add_argument("--max-iters", type=int, default=SolverOptions.max_inner,
                   help="cap on fixed-point iterations per caching sub-model")
    p.add_argument("--fpi-form", choices=("little-law", "literal-eq3"), default=SolverOptions.fpi_form)
    p.add_argument("--amva", choices=tuple(AMVA_FLAGS), default="linearizer")
    p.add_argument("--mode", choices=("placement", "jcsp"), default="placement")
    p.add_argument("--generations", type=int, default=GaParams.generations)
    p.add_argument("--population", type=int, default=GaParams.population)
    p.add_argument("--patience", type=int)
    p.add_argument("--replications", type=int, help="simulation replications, GA restarts or study instances")
    p.add_argument("--events", type=int, default=SimOptions.events, help="simulated events per replication")
    p.add_argument("--grid", help="grid point, e.g. M=4,N=25,C=20,q=750,p=1,eta=1")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--plots", action="store_true", help="also write PNG plots (needs matplotlib)")
    return p


STUDY_REPLICATIONS = {"gain": 30, "mape": 6, "optimize": 1}


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.command == "baseline" and args.kind is None:
        raise CliError("baseline needs a kind: no-cache or prefetch-all")
    if args.command != "baseline" and args.kind is not None:
        raise CliError(f"unexpected argument {args.kind!r}")
    reps = args.replications
    if reps is not None and reps < 1:
        raise CliError("--replications must be >= 1")
    try:
        solver = SolverOptions(delta=args.delta, max_inner=args.max_iters, fpi_form=args.fpi_form,
                               amva=AMVA_FLAGS[args.amva])
        sim = SimOptions(seed=args.seed, events=args.events,
                         replications=reps if reps is not None and args.command in ("simulate", "compare")
                         else SimOptions.replications,
                         workers=experiments.worker_count())
        ga = GaParams(generations=args.generations, population=args.population, seed=args.seed,
                      patience=args.patience)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    inputs = {k: getattr(args, k) for k in ("model", "sim_model", "workload", "catalog", "decision", "pairs",
                                             "invocations", "durations", "memory", "mapping")}
    extra = {"mode": args.mode, "kind": args.kind, "format": args.format, "plots": args.plots,
             "grid": parse_grid(args.grid), "replications": reps or STUDY_REPLICATIONS.get(args.command, 1),
             "users": args.users, "nodes": args.nodes, "sample": args.sample, "horizon_days": args.horizon_days}
    return RunConfig(args.command, {k: v for k, v in inputs.items() if v is not None}, solver, sim, ga,
                     Path(args.out), args.seed, extra)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run_command(config_from_args(args))
    except (CliError, ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"jcsp: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
