"""Serialising run reports (json, csv, text) and plot-ready trace dumps."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .pipeline import Prepared, RunReport

FORMATS = ("json", "csv", "text")
CSV_FIELDS = (
    "method", "s0", "epsilon_real", "tan_delta", "thickness_mm", "reflection_re",
    "reflection_im", "support_size", "residual_energy", "harmonicity", "iterations", "error",
)


def to_json(report: RunReport) -> str:
    # sorted keys and repr floats keep equal reports byte-identical
    return json.dumps(report.to_dict(), indent=2, sort_keys=True, allow_nan=True) + "\n"


def _fmt(x) -> str:
    return "" if x is None else repr(x) if isinstance(x, float) else str(x)


def to_csv(report: RunReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for m in report.methods:
        e = m.estimate or {}
        thick = e.get("thickness_m")
        R = e.get("reflection_coefficient") or {}
        w.writerow([_fmt(v) for v in (
            m.method, m.s0, e.get("epsilon_real"), e.get("tan_delta"),
            None if thick is None else thick * 1e3, R.get("re"), R.get("im"),
            e.get("support_size"), e.get("residual_energy"), e.get("harmonicity"),
            m.iterations, m.error,
        )])
    return buf.getvalue()


def to_text(report: RunReport) -> str:
    cfg = report.config
    lines = [
        f"{report.schema} (sparse_mut {report.version})",
        f"s0 levels {cfg.get('s0_range')}  epsilon {cfg.get('epsilon')}  "
        f"window {cfg.get('window')}  pad {cfg.get('pad')}",
    ]
    for m in report.methods:
        if not m.ok:
            lines.append(f"{m.method:5s} error: {m.error}")
            continue
        e = m.estimate
        thick = "n/a" if e["thickness_m"] is None else f"{e['thickness_m'] * 1e3:.3f} mm"
        lines.append(
            f"{m.method:5s} eps' {e['epsilon_real']:.4f}  tan d {e['tan_delta']:.4f}  "
            f"d {thick}  atoms {e['support_size']}  s0 {m.s0 if m.s0 is not None else '-'}"
        )
    for name, d in (report.deltas or {}).items():
        rel = d["thickness_rel_error"]
        rel_s = "n/a" if rel is None else f"{100 * rel:+.2f}%"
        lines.append(
            f"{name:5s} vs truth: d eps' {d['epsilon_real_error']:+.4f}  "
            f"d tan d {d['tan_delta_error']:+.4f}  d thickness {rel_s}"
        )
    return "\n".join(lines) + "\n"


def render(report: RunReport, fmt: str) -> str:
    if fmt == "json":
        return to_json(report)
    if fmt == "csv":
        return to_csv(report)
    if fmt == "text":
        return to_text(report)
    raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")


def emit_report(report: RunReport, fmt: str = "json", out=None) -> str:
    """Render ``report`` and write it to ``out`` (a path) when given."""
    text = render(report, fmt)
    if out is not None:
        try:
            Path(out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write report to {out}: {exc}") from exc
    return text


def read_json_report(path) -> RunReport:
    return RunReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _write_trace(path: Path, delays, values) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("delay_s", "magnitude", "phase"))
        for t, v in zip(delays, values):
            w.writerow((repr(float(t)), repr(float(abs(v))), repr(float(np.angle(v)))))


def dump_traces(directory, report: RunReport, prep: Prepared) -> list[Path]:
    """Write the normalised CIRs and each method's atoms as ``delay_s,magnitude,phase``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    written = []
    for name, h in (("cir_mut.csv", prep.h), ("cir_reference.csv", prep.h_ref)):
        _write_trace(d / name, h.times, h.values)
        written.append(d / name)
    for m in report.methods:
        path = d / f"atoms_{m.method.lower()}.csv"
        _write_trace(path, [a["delay_s"] for a in m.atoms], [complex(a["re"], a["im"]) for a in m.atoms])
        written.append(path)
    return written
