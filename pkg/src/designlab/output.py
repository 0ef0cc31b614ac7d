"""CSV serialisation and static SVG charts for experiment tables."""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .analysis import IN_SAMPLE, OUT_OF_SAMPLE, SETTINGS
from .experiments import ExperimentTable

__all__ = [
    "CSV_HEADER",
    "ChartSpec",
    "atomic_write",
    "count_nonfinite",
    "read_csv",
    "render_svg",
    "table_to_csv",
    "write_csv",
]

CSV_HEADER = ("sweep_value", "setting", "metric", "value", "replication")

_LABELS = {IN_SAMPLE: "in-sample", OUT_OF_SAMPLE: "out-of-sample"}
_COLORS = {IN_SAMPLE: "#e6862d", OUT_OF_SAMPLE: "#2f9e44"}
_DASHES = ("", "6 3", "2 3", "8 3 2 3", "1 2")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def table_to_csv(table: ExperimentTable) -> str:
    buf = io.StringIO()
    for key, value in table.metadata.items():
        text = str(value).replace("\r", " ").replace("\n", " ")
        buf.write(f"# {key}: {text}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    t = table.sorted()
    for sv, st, mt, val, rep in zip(
        t.sweep_value.tolist(), t.setting.tolist(), t.metric.tolist(), t.value.tolist(), t.replication.tolist()
    ):
        writer.writerow((_fmt(sv), st, mt, _fmt(val), rep))
    return buf.getvalue()


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and rename."""
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_csv(table: ExperimentTable, path) -> None:
    atomic_write(path, table_to_csv(table))


def read_csv(path) -> ExperimentTable:
    path = Path(path)
    metadata: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            lines = fh.read().split("\n")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        key, _, value = lines[i][1:].strip().partition(": ")
        metadata[key] = value
        i += 1
    reader = csv.reader(line for line in lines[i:] if line)
    header = next(reader, None)
    if header is None or tuple(header) != CSV_HEADER:
        raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}, got {header}")
    rows = [(float(sv), st, mt, float(val), int(rep)) for sv, st, mt, val, rep in reader]
    return ExperimentTable.from_rows(rows, metadata)


def count_nonfinite(table: ExperimentTable) -> int:
    return int(np.count_nonzero(~np.isfinite(table.value)))


# -- SVG ---------------------------------------------------------------------


@dataclass(frozen=True)
class ChartSpec:
    metrics: tuple[str, ...] = ("err",)
    title: str = ""
    x_label: str = ""
    y_label: str = ""
    log_x: bool = False
    log_y: bool = False
    width: int = 640
    height: int = 420


def _nice_step(span: float, target: int) -> float:
    raw = span / max(target, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            return mult * mag
    return 10.0 * mag


def _linear_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = _nice_step(hi - lo, target)
    start = math.ceil(lo / step - 1e-9)
    stop = math.floor(hi / step + 1e-9)
    return [k * step for k in range(start, stop + 1)]


def _log_ticks(lo: float, hi: float) -> list[float]:
    a, b = math.floor(math.log10(lo) + 1e-12), math.ceil(math.log10(hi) - 1e-12)
    ticks = [10.0**e for e in range(a, b + 1) if lo * (1 - 1e-9) <= 10.0**e <= hi * (1 + 1e-9)]
    if len(ticks) < 2:
        ticks = [lo, hi]
    return ticks


def _tick_label(v: float) -> str:
    if v != 0 and (abs(v) >= 1e5 or abs(v) < 1e-3):
        return format(v, ".0e")
    return format(v, ".6g")


def _series(table: ExperimentTable, spec: ChartSpec):
    out = []
    for mi, metric in enumerate(spec.metrics):
        if not np.any(table.metric == metric):
            raise ValueError(f"empty series: no rows for metric {metric!r}")
    for setting in SETTINGS:
        for mi, metric in enumerate(spec.metrics):
            x, y = table.curve(setting, metric)
            if x.size == 0:
                continue
            keep = np.isfinite(x) & np.isfinite(y)
            if spec.log_x:
                keep &= x > 0
            if spec.log_y:
                keep &= y > 0
            if not np.any(keep):
                raise ValueError(f"series has no plottable points: setting={setting}, metric={metric}")
            out.append((setting, metric, mi, x[keep], y[keep]))
    return out


def render_svg(table: ExperimentTable, spec: ChartSpec = ChartSpec()) -> str:
    """One polyline per (setting, metric) of an aggregated table.

    Non-finite points (and non-positive ones on a log axis) are left out. The
    output depends only on the inputs.
    """
    if len(table) and np.any(table.replication != -1):
        raise ValueError("render_svg expects an aggregated table (use aggregate first)")
    series = _series(table, spec)
    W, H = spec.width, spec.height
    left, right, top, bottom = 70, 20, 36, 90 + 16 * ((len(series) + 1) // 2)
    pw, ph = W - left - right, H - top - bottom
    if ph < 40:
        H = top + bottom + 200
        ph = 200

    tx = (lambda v: math.log10(v)) if spec.log_x else (lambda v: v)
    ty = (lambda v: math.log10(v)) if spec.log_y else (lambda v: v)
    xs = np.concatenate([s[3] for s in series])
    ys = np.concatenate([s[4] for s in series])
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo, y_hi = float(ys.min()), float(ys.max())
    if not spec.log_y:
        y_lo = min(y_lo, 0.0) if y_lo >= 0 else y_lo
    x_ticks = _log_ticks(x_lo, x_hi) if spec.log_x else _linear_ticks(x_lo, x_hi)
    y_ticks = _log_ticks(y_lo, y_hi) if spec.log_y else _linear_ticks(y_lo, y_hi)
    if not spec.log_y and y_ticks:
        y_hi = max(y_hi, y_ticks[-1])
    X0, X1 = tx(x_lo), tx(x_hi)
    Y0, Y1 = ty(y_lo), ty(y_hi)
    if X1 == X0:
        X0, X1 = X0 - 0.5, X1 + 0.5
    if Y1 == Y0:
        Y0, Y1 = Y0 - 0.5, Y1 + 0.5

    def px(v):
        return left + (tx(v) - X0) / (X1 - X0) * pw

    def py(v):
        return top + ph - (ty(v) - Y0) / (Y1 - Y0) * ph

    parts = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        '<g font-family="sans-serif" font-size="11" fill="#222">',
    ]
    if spec.title:
        parts.append(f'<text x="{W / 2:.2f}" y="20" text-anchor="middle" font-size="14">{escape(spec.title)}</text>')
    parts.append(
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444" stroke-width="1"/>'
    )
    for v in x_ticks:
        x = px(v)
        parts.append(f'<line x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" y2="{top + ph + 5}" stroke="#444"/>')
        parts.append(f'<text x="{x:.2f}" y="{top + ph + 18}" text-anchor="middle">{_tick_label(v)}</text>')
    for v in y_ticks:
        y = py(v)
        parts.append(f'<line x1="{left - 5}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="#444"/>')
        parts.append(f'<line x1="{left}" y1="{y:.2f}" x2="{left + pw}" y2="{y:.2f}" stroke="#ddd"/>')
        parts.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end">{_tick_label(v)}</text>')
    if spec.x_label:
        parts.append(
            f'<text x="{left + pw / 2:.2f}" y="{top + ph + 36}" text-anchor="middle">{escape(spec.x_label)}</text>'
        )
    if spec.y_label:
        cy = top + ph / 2
        parts.append(
            f'<text x="16" y="{cy:.2f}" text-anchor="middle" transform="rotate(-90 16 {cy:.2f})">'
            f"{escape(spec.y_label)}</text>"
        )

    many = len(spec.metrics) > 1
    legend_y = top + ph + 56
    for i, (setting, metric, mi, x, y) in enumerate(series):
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x.tolist(), y.tolist()))
        dash = _DASHES[mi % len(_DASHES)]
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        label = _LABELS[setting] + (f": {metric}" if many else "")
        parts.append(
            f'<polyline fill="none" stroke="{_COLORS[setting]}" stroke-width="1.8"{dash_attr} '
            f'points="{pts}"><title>{escape(label)}</title></polyline>'
        )
        lx = left + (i % 2) * (pw / 2)
        ly = legend_y + (i // 2) * 16
        parts.append(
            f'<line x1="{lx:.2f}" y1="{ly:.2f}" x2="{lx + 24:.2f}" y2="{ly:.2f}" '
            f'stroke="{_COLORS[setting]}" stroke-width="1.8"{dash_attr}/>'
        )
        parts.append(f'<text x="{lx + 30:.2f}" y="{ly + 4:.2f}">{escape(label)}</text>')
    parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
