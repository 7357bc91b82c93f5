"""Artifact writer: structured-text summary, CSV tables and optional plots.

Files never carry timestamps, so identical results give identical bytes.
"""
from __future__ import annotations

import json
from pathlib import Path

from .metrics import ComparisonReport, ValidationReport
from .model.validate import Diagnostic
from .optimize.ga import GaRun
from .sim.compare import ComparisonTable
from .sim.simulate import SimResult
from .solver.lqn import SolverResult, total_response_time
from .workload.report import CdfTable

REPORT_FORMATS = ("text", "json")


class ReportError(ValueError):
    pass


def dumps(doc) -> str:
    """Canonical JSON used for every document artifact."""
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _files(name: str, obj) -> tuple[dict, dict]:
    """Artifacts ``{filename: text}`` and summary fields of one result."""
    if isinstance(obj, SolverResult):
        return ({f"{name}-entities.csv": obj.entities_csv(), f"{name}-cache.csv": obj.cache_csv(),
                 f"{name}.json": dumps(obj.to_dict())},
                {"total-response-time": total_response_time(obj), "sweeps": obj.convergence.sweeps})
    if isinstance(obj, SimResult):
        return ({f"{name}.csv": obj.to_csv(), f"{name}-cache.csv": obj.cache_csv()},
                {"replications": obj.replications, "seed": obj.seed, "events": obj.events})
    if isinstance(obj, ComparisonTable):
        return {f"{name}.csv": obj.to_csv()}, {"rows": len(obj.rows), "max-rel-diff": obj.max_rel_diff}
    if isinstance(obj, ComparisonReport):
        d = obj.to_dict()
        return ({f"{name}.csv": obj.to_csv(), f"{name}.json": dumps(d)},
                {k: d[k] for k in ("baseline", "proposed", "iterations", "gain")})
    if isinstance(obj, ValidationReport):
        d = obj.to_dict()
        return {f"{name}.csv": obj.to_csv(), f"{name}.json": dumps(d)}, d
    if isinstance(obj, CdfTable):
        return {f"{name}.csv": obj.to_csv()}, {"median": obj.value_at(50.0), "max": obj.values[-1]}
    if isinstance(obj, GaRun):
        return ({f"{name}.csv": obj.history_csv()},
                {"generations": len(obj.history), "best-fitness": obj.fitness})
    if isinstance(obj, dict):
        return {f"{name}.json": dumps(obj)}, {k: v for k, v in obj.items() if isinstance(v, (bool, int, float, str))}
    if isinstance(obj, str):
        return {f"{name}.txt": obj if obj.endswith("\n") or not obj else obj + "\n"}, {}
    if isinstance(obj, list) and all(isinstance(d, Diagnostic) for d in obj):
        return {f"{name}.txt": "".join(f"{d}\n" for d in obj)}, {"errors": len(obj)}
    raise ReportError(f"cannot report {type(obj).__name__} result {name!r}")


def _plot(name: str, obj, out: Path) -> list[Path]:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    if isinstance(obj, CdfTable):
        ax.step(obj.values, obj.cdf, where="post")
        ax.set(xlabel=obj.name, ylabel="CDF")
    elif isinstance(obj, GaRun):
        g = [h[0] for h in obj.history]
        ax.plot(g, [h[1] for h in obj.history], label="best")
        ax.set(xlabel="generation", ylabel="fitness")
    elif isinstance(obj, dict) and "series" in obj:
        # {"x-label": ..., "y-label": ..., "series": {label: [[x, y], ...]}}
        for label, pts in sorted(obj["series"].items()):
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=label)
        ax.set(xlabel=obj.get("x-label", ""), ylabel=obj.get("y-label", ""))
        ax.legend()
    else:
        plt.close(fig)
        return []
    path = out / f"{name}.png"
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return [path]


def _summary_text(sections: dict) -> str:
    lines = []
    for name, fields in sections.items():
        lines.append(f"[{name}]")
        for k, v in sorted(fields.items()):
            lines.append(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}")
        lines.append("")
    return "\n".join(lines)


def emit_report(results: dict, out, format: str = "text", plots: bool = False) -> list[Path]:
    """Write every result in ``results`` under directory ``out``.

    Parameters
    ----------
    results : dict
        Maps an artifact base name to a solver, simulation, comparison,
        validation, CDF or GA result, a JSON-able dict, a string or a list
        of diagnostics.
    format : {"text", "json"}
        Layout of the summary file (``report.txt`` or ``report.json``).
    plots : bool
        Also write PNG plots of CDF tables, GA histories and series dicts.

    Returns
    -------
    list of Path
        Written files, in name order.

    Raises
    ------
    ReportError
        On an empty result set, an unknown result type or an unwritable
        output directory.
    """
    if not results:
        raise ReportError("no results to report")
    if format not in REPORT_FORMATS:
        raise ReportError(f"format must be one of {REPORT_FORMATS}")
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportError(f"cannot create output directory {out}: {exc}") from exc
    files, sections = {}, {}
    for name in sorted(results):
        f, summary = _files(name, results[name])
        files.update(f)
        sections[name] = summary
    if format == "json":
        files["report.json"] = dumps(sections)
    else:
        files["report.txt"] = _summary_text(sections)
    written = []
    try:
        for fname in sorted(files):
            path = out / fname
            path.write_text(files[fname], encoding="utf-8")
            written.append(path)
        if plots:
            for name in sorted(results):
                written += _plot(name, results[name], out)
    except OSError as exc:
        raise ReportError(f"cannot write to {out}: {exc}") from exc
    return sorted(written)
