"""Deterministic SVG line charts from a metrics.csv file.

Output depends only on the CSV contents: no timestamps, fixed number
formatting, so re-plotting the same file gives identical bytes.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path
from xml.sax.saxutils import escape

from .errors import FormatError
from .trainer import METRIC_COLUMNS

WIDTH, HEIGHT = 640, 400
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 40, 50


def read_metrics(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file, expected a header row") from None
        if tuple(header) != METRIC_COLUMNS:
            raise FormatError(f"{path}: header {header} does not match {list(METRIC_COLUMNS)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise FormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            rows.append(dict(zip(header, row)))
    return rows


def _num(text: str) -> float | None:
    if text == "":
        return None
    v = float(text)
    return v if math.isfinite(v) else None


def return_series(rows):
    """One point per update: (global_step, rolling mean return)."""
    seen, pts = set(), []
    for row in rows:
        key = row["update"]
        y = _num(row["mean_return"])
        if key in seen or y is None:
            continue
        seen.add(key)
        pts.append((float(row["global_step"]), y))
    return pts


def variance_series(rows):
    """One point per epoch row, x = update + epoch / epochs_in_update."""
    per_update = {}
    for row in rows:
        per_update[row["update"]] = per_update.get(row["update"], 0) + 1
    pts = []
    for row in rows:
        y = _num(row["surrogate_variance"])
        if y is None:
            continue
        x = int(row["update"]) + int(row["epoch"]) / per_update[row["update"]]
        pts.append((x, y))
    return pts


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick(v: float) -> str:
    return f"{v:.4g}"


def _range(values):
    lo, hi = min(values), max(values)
    if lo == hi:
        pad = abs(lo) * 0.05 or 1.0
        lo, hi = lo - pad, hi + pad
    return lo, hi


def line_chart_svg(points, title: str, xlabel: str, ylabel: str) -> str:
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{escape(title)}</text>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if points:
        x0, x1 = _range([p[0] for p in points])
        y0, y1 = _range([p[1] for p in points])

        def sx(x):
            return MARGIN_L + (x - x0) / (x1 - x0) * pw

        def sy(y):
            return MARGIN_T + ph - (y - y0) / (y1 - y0) * ph

        for k in range(5):
            fx = x0 + (x1 - x0) * k / 4
            fy = y0 + (y1 - y0) * k / 4
            out.append(f'<text x="{_fmt(sx(fx))}" y="{HEIGHT - MARGIN_B + 18}" text-anchor="middle" '
                       f'font-family="sans-serif" font-size="11">{_tick(fx)}</text>')
            out.append(f'<text x="{MARGIN_L - 6}" y="{_fmt(sy(fy) + 4)}" text-anchor="end" '
                       f'font-family="sans-serif" font-size="11">{_tick(fy)}</text>')
        path = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in points)
        out.append(f'<polyline fill="none" stroke="#1f5fa8" stroke-width="1.5" points="{path}"/>')
        if len(points) == 1:
            x, y = points[0]
            out.append(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="3" fill="#1f5fa8"/>')
    else:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT / 2:.1f}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="13">no data</text>')
    out.append(f'<text x="{MARGIN_L + pw / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{MARGIN_T + ph / 2:.1f}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="12" transform="rotate(-90 16 {MARGIN_T + ph / 2:.1f})">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_metrics(metrics_path, out_dir) -> list[Path]:
    """Write ``return_curve.svg`` and ``variance_curve.svg``; returns their paths."""
    rows = read_metrics(metrics_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    charts = [
        ("return_curve.svg", return_series(rows), "Rolling mean return", "environment steps", "return"),
        ("variance_curve.svg", variance_series(rows), "Surrogate objective variance", "update",
         "variance"),
    ]
    paths = []
    for name, pts, title, xl, yl in charts:
        p = out / name
        p.write_text(line_chart_svg(pts, title, xl, yl))
        paths.append(p)
    return paths
