"""Output artifacts: atomic file writes, trace CSVs, metadata JSON and SVG charts.

Charts are drawn by hand (polylines plus axes) so the package needs no
plotting library. All number formatting is fixed, so the same data always
produces the same bytes.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

CSV_HEADER = "slot,mean_total_backlog,stderr"
MAX_CHART_POINTS = 1000
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2")


def atomic_write(path: str | os.PathLike, data: str | bytes) -> Path:
    """Write via a sibling temp file and rename, so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = data.encode() if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
    return path


def _num(x: float) -> str:
    return format(float(x), ".10g")


def trace_csv(mean: Sequence[float], stderr: Sequence[float]) -> str:
    lines = [CSV_HEADER]
    lines += [f"{t},{_num(m)},{_num(s)}" for t, (m, s) in enumerate(zip(mean, stderr), start=1)]
    return "\n".join(lines) + "\n"


def to_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _nice_step(span: float, target: int = 5) -> float:
    if span <= 0:
        return 1.0
    raw = span / target
    mag = 10 ** math.floor(math.log10(raw))
    for f in (1, 2, 2.5, 5, 10):
        if f * mag >= raw:
            return f * mag
    return 10 * mag


def _ticks(hi: float) -> list[float]:
    step = _nice_step(hi)
    n = int(math.floor(hi / step + 1e-9))
    return [i * step for i in range(n + 1)]


def _fmt_tick(v: float) -> str:
    return f"{v:g}" if abs(v) < 1e6 else f"{v:.2e}"


def svg_chart(
    curves: Sequence[tuple[str, Sequence[float]]],
    title: str = "",
    xlabel: str = "slot",
    ylabel: str = "mean total backlog",
    width: int = 720,
    height: int = 420,
) -> str:
    """Self-contained SVG line chart; each curve is (label, y per slot starting at 1)."""
    left, right, top, bottom = 70, 170, 40, 50
    pw, ph = width - left - right, height - top - bottom
    horizon = max((len(y) for _, y in curves), default=1)
    ymax = max((float(np.max(y)) for _, y in curves if len(y)), default=0.0)
    yticks = _ticks(ymax if ymax > 0 else 1.0)
    ytop = max(yticks[-1], ymax) or 1.0
    xticks = _ticks(horizon)
    xtop = max(xticks[-1], horizon) or 1

    def sx(x: float) -> str:
        return f"{left + pw * x / xtop:.2f}"

    def sy(y: float) -> str:
        return f"{top + ph * (1 - y / ytop):.2f}"

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left + pw / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    for v in yticks:
        out.append(f'<line x1="{left}" y1="{sy(v)}" x2="{left + pw}" y2="{sy(v)}" stroke="#e0e0e0"/>')
        out.append(f'<text x="{left - 6}" y="{sy(v)}" text-anchor="end" dominant-baseline="middle">{_fmt_tick(v)}</text>')
    for v in xticks:
        out.append(f'<line x1="{sx(v)}" y1="{top + ph}" x2="{sx(v)}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{sx(v)}" y="{top + ph + 18}" text-anchor="middle">{_fmt_tick(v)}</text>')
    out.append(f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>')
    out.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    for i, (label, y) in enumerate(curves):
        color = PALETTE[i % len(PALETTE)]
        y = np.asarray(y, dtype=float)
        stride = max(1, math.ceil(y.size / MAX_CHART_POINTS))
        idx = list(range(0, y.size, stride))
        if y.size and idx[-1] != y.size - 1:
            idx.append(y.size - 1)
        pts = " ".join(f"{sx(j + 1)},{sy(y[j])}" for j in idx)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = top + 10 + 18 * i
        out.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 32}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 38}" y="{ly}" dominant-baseline="middle">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
