"""Write experiment reports as CSV, JSON or SVG line charts.

CSV and JSON output is a pure function of the report rows, so two runs with
the same spec and seed produce byte-identical files. Missing values are
written as empty CSV cells and JSON ``null``.
"""
from __future__ import annotations

import csv
import json
import math
import os
from importlib import resources
from pathlib import Path

from .errors import FormatError, InputDomainError
from .harness import Report, mean_by

__all__ = ["COLUMNS", "emit_report", "read_csv_report", "report_schema"]

COLUMNS = {
    "captime": ["kappa", "epsilon", "seed", "total_time", "feasible", "m", "winner"],
    "epsilon": ["procedure", "kappa", "epsilon", "seed", "total_time", "rounds", "reached"],
    "delta": ["delta", "procedure", "kappa", "epsilon", "seed", "total_time", "rounds", "reached"],
    "montecarlo": ["procedure", "kappa", "epsilon", "trials", "successes", "rate", "wilson_low", "wilson_high"],
    "run": ["algorithm", "name", "winner", "cap", "samples", "time", "eliminated_at"],
    "verify": ["epsilon", "algorithm", "name", "utility", "gap", "kappa", "lb", "ub", "certified", "winner"],
}
_INT = {"seed", "m", "winner", "rounds", "trials", "successes", "algorithm", "samples", "eliminated_at"}
_BOOL = {"feasible", "reached", "certified"}
_TEXT = {"procedure", "name"}
FORMATS = ("csv", "json", "svg")


def report_schema() -> dict:
    text = resources.files("utiliconf").joinpath("data", "report.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ""
    return str(v)


def _parse(name: str, text: str):
    if text == "":
        return None
    if name in _TEXT:
        return text
    if name in _BOOL:
        if text not in ("true", "false"):
            raise FormatError(f"column {name!r}: expected true/false, got {text!r}")
        return text == "true"
    try:
        return int(text) if name in _INT else float(text)
    except ValueError:
        raise FormatError(f"column {name!r}: cannot parse {text!r}") from None


def _target(out, kind: str, fmt: str) -> Path:
    out = Path(out)
    if out.suffix == f".{fmt}":
        out.parent.mkdir(parents=True, exist_ok=True)
        return out
    out.mkdir(parents=True, exist_ok=True)
    return out / f"{kind}.{fmt}"


def emit_report(report: Report, out, fmt: str = "csv") -> Path:
    """Write ``report`` under ``out`` (a directory, or a file with the right suffix)."""
    if fmt not in FORMATS:
        raise InputDomainError(f"unknown format {fmt!r}; choose from {FORMATS}")
    if not report.rows:
        raise InputDomainError("report has no rows")
    if report.kind not in COLUMNS:
        raise InputDomainError(f"unknown report kind {report.kind!r}")
    path = _target(out, report.kind, fmt)
    if not os.access(path.parent, os.W_OK):
        raise PermissionError(f"cannot write to {path.parent}")
    if fmt == "csv":
        cols = COLUMNS[report.kind]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in report.rows:
                w.writerow([_cell(r.get(c)) for c in cols])
    elif fmt == "json":
        doc = {"kind": report.kind, "spec": _clean(report.spec), "rows": _clean(report.rows)}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, indent=1, allow_nan=False)
            fh.write("\n")
    else:
        _plot(report, path)
    return path


def read_csv_report(path) -> tuple[str, list[dict]]:
    """Read a CSV written by :func:`emit_report`; returns (kind, rows)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        kinds = [k for k, cols in COLUMNS.items() if cols == header]
        if not kinds:
            raise FormatError(f"{path}: unrecognised header {header}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                raise FormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            rows.append({c: _parse(c, v) for c, v in zip(header, rec)})
    return kinds[0], rows


def _plot(report: Report, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if report.kind == "captime":
        series = mean_by(report.rows, ("epsilon", "kappa"))
        label, x_label, x_log = "epsilon = {}", "captime (s)", True
    elif report.kind == "epsilon":
        rows = [{**r, "series": r["procedure"] if r["kappa"] is None else f"{r['procedure']} kappa={r['kappa']:g}"}
                for r in report.rows]
        series = mean_by(rows, ("series", "epsilon"))
        label, x_label, x_log = "{}", "epsilon", False
    elif report.kind == "delta":
        rows = [{**r, "series": f"{r['procedure']} delta={r['delta']:g}"} for r in report.rows]
        series = mean_by(rows, ("series", "epsilon"))
        label, x_label, x_log = "{}", "epsilon", False
    else:
        raise InputDomainError(f"no chart for {report.kind!r} reports")
    lines: dict = {}
    for (name, x), y in series.items():
        lines.setdefault(name, []).append((x, y))
    with matplotlib.rc_context({"svg.hashsalt": "utiliconf", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for name in sorted(lines, key=str):
            pts = sorted(lines[name])
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=label.format(name))
        ax.set_yscale("log")
        if x_log:
            ax.set_xscale("log")
        ax.set_xlabel(x_label)
        ax.set_ylabel("total configuration time (s)")
        ax.legend(fontsize="small")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
