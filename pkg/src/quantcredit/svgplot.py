"""Minimal SVG line plots: axes, polylines, tick labels, legend.

Plots are conveniences next to the CSV artifacts, so this stays tiny and
dependency-free.  Output is deterministic: fixed-precision coordinates,
fixed palette, no timestamps.
"""

from __future__ import annotations

import math

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")

__all__ = ["line_plot", "save_svg"]


def _ticks(lo: float, hi: float, count: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, count)


def _fmt(v: float) -> str:
    return f"{v:g}"


def line_plot(series, *, title="", xlabel="", ylabel="", width=720, height=460, y_clip=None) -> str:
    """Render ``series`` (iterables of ``(x, y, label)``) as an SVG string.

    Non-finite y values are clipped to ``y_clip`` when given, otherwise
    dropped from the range and drawn clipped to the top of the axes.
    """
    ml, mr, mt, mb = 64, 16, 34, 46
    pw, ph = width - ml - mr, height - mt - mb

    xs_all, ys_all = [], []
    cleaned = []
    for x, y, label in series:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if y_clip is not None:
            y = np.clip(y, None, y_clip)
            y = np.where(np.isfinite(y), y, y_clip)
        finite = np.isfinite(y)
        xs_all.append(x)
        ys_all.append(y[finite])
        cleaned.append((x, y, label))
    x_lo = min((float(np.min(x)) for x in xs_all if len(x)), default=0.0)
    x_hi = max((float(np.max(x)) for x in xs_all if len(x)), default=1.0)
    y_lo = min((float(np.min(y)) for y in ys_all if len(y)), default=0.0)
    y_hi = max((float(np.max(y)) for y in ys_all if len(y)), default=1.0)
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    pad = 0.04 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def px(x):
        return ml + (x - x_lo) / (x_hi - x_lo) * pw

    def py(y):
        y = min(max(y, y_lo), y_hi)
        return mt + (y_hi - y) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
    ]
    for tx in _ticks(x_lo, x_hi):
        X = px(tx)
        out.append(f'<line x1="{X:.1f}" y1="{mt + ph}" x2="{X:.1f}" y2="{mt + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{X:.1f}" y="{mt + ph + 18}" text-anchor="middle">{_fmt(tx)}</text>')
    for ty in _ticks(y_lo, y_hi):
        Y = py(ty)
        out.append(f'<line x1="{ml - 4}" y1="{Y:.1f}" x2="{ml}" y2="{Y:.1f}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{Y + 4:.1f}" text-anchor="end">{_fmt(ty)}</text>')
        out.append(f'<line x1="{ml}" y1="{Y:.1f}" x2="{ml + pw}" y2="{Y:.1f}" stroke="#dddddd"/>')
    out.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    out.append(
        f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{xlabel}</text>'
    )
    out.append(
        f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{ylabel}</text>'
    )
    for i, (x, y, label) in enumerate(cleaned):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(
            f"{px(xi):.2f},{py(yi):.2f}"
            for xi, yi in zip(x, y)
            if math.isfinite(xi) and math.isfinite(yi)
        )
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if label:
            ly = mt + 16 + 16 * i
            out.append(f'<line x1="{ml + pw - 110}" y1="{ly - 4}" x2="{ml + pw - 90}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{ml + pw - 84}" y="{ly}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out)


def save_svg(path, svg: str):
    with open(path, "w") as fh:
        fh.write(svg)
