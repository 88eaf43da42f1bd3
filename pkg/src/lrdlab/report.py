"""Report serialization: JSON summaries, CSV side files and a text rendering."""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .errors import DataError
from .experiments import ExperimentReport

__all__ = ["report_to_json", "load_report", "write_report", "write_columns", "format_report"]


def _plain(obj):
    """Recursively convert numpy scalars and arrays into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def report_to_json(report: ExperimentReport) -> str:
    return json.dumps(_plain(report.to_dict()), sort_keys=True, indent=2) + "\n"


def load_report(path) -> ExperimentReport:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not a JSON report: {exc}") from exc
    try:
        return ExperimentReport.from_dict(data)
    except TypeError as exc:
        raise DataError(f"{path} does not have the report fields: {exc}") from exc


def write_columns(path, columns: dict) -> Path:
    """Write equal-length columns as CSV; floats keep their shortest round-trip form."""
    names = list(columns)
    lengths = {len(v) for v in columns.values()}
    if len(lengths) > 1:
        raise DataError("columns differ in length")
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in zip(*(columns[k] for k in names)):
            writer.writerow(["" if v is None else repr(_plain(v)) if isinstance(v, float)
                             else _plain(v) for v in row])
    return path


def write_report(report: ExperimentReport, outdir, figures: bool = True) -> dict:
    """Write ``<kind>.json``, ``<kind>_replicates.csv`` and, optionally, ``<kind>.png``."""
    outdir = Path(outdir)
    os.makedirs(outdir, exist_ok=True)
    kind = report.kind
    paths = {"report": outdir / f"{kind}.json"}
    paths["report"].write_text(report_to_json(report))
    if report.raw:
        paths["replicates"] = write_columns(outdir / f"{kind}_replicates.csv", report.raw)
    if figures:
        from .plotting import render_report

        fig_path = render_report(report, outdir / f"{kind}.png")
        if fig_path is not None:
            paths["figure"] = fig_path
    return paths


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def format_report(report: ExperimentReport) -> str:
    lines = [f"experiment  {report.kind}",
             f"result      {'PASS' if report.passed else 'FAIL'}",
             f"version     {report.version}  config {report.config_hash}"]
    plan = report.plan
    lines.append("plan        " + ", ".join(f"{k}={_fmt(plan[k])}" for k in sorted(plan)))
    for name in sorted(report.flags):
        lines.append(f"  flag  {name:<32} {report.flags[name]}")
    for name, fit in sorted(report.slopes.items()):
        if fit is None:
            lines.append(f"  slope {name:<32} n/a")
        else:
            lines.append(f"  slope {name:<32} {fit['slope']:.4f} +/- {fit['stderr']:.4f}")
    for name in sorted(report.stats):
        lines.append(f"  stat  {name:<32} {_fmt(report.stats[name])}")
    for name in sorted(report.references):
        lines.append(f"  ref   {name:<32} {_fmt(report.references[name])}")
    for name in sorted(report.tolerances):
        lines.append(f"  tol   {name:<32} {_fmt(report.tolerances[name])}")
    return "\n".join(lines) + "\n"
