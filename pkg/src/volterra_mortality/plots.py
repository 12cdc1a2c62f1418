"""Minimal SVG line and histogram plots written without plotting libraries."""

from __future__ import annotations

from pathlib import Path

import numpy as np

__all__ = ["line_plot", "histogram_plot"]

_W, _H, _PAD = 640, 400, 50
_COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _scale(values, lo, hi, out_lo, out_hi):
    span = hi - lo if hi > lo else 1.0
    return out_lo + (np.asarray(values, dtype=float) - lo) / span * (out_hi - out_lo)


def _frame(title: str, xlabel: str, ylabel: str, x_range, y_range) -> list:
    x0, x1 = x_range
    y0, y1 = y_range
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<text x="{_W / 2}" y="{_H - 10}" text-anchor="middle">{xlabel}</text>',
        f'<text x="15" y="{_H / 2}" text-anchor="middle" transform="rotate(-90 15 {_H / 2})">{ylabel}</text>',
        f'<text x="{_PAD}" y="{_H - _PAD + 15}" text-anchor="middle">{x0:.4g}</text>',
        f'<text x="{_W - _PAD}" y="{_H - _PAD + 15}" text-anchor="middle">{x1:.4g}</text>',
        f'<text x="{_PAD - 5}" y="{_H - _PAD}" text-anchor="end">{y0:.4g}</text>',
        f'<text x="{_PAD - 5}" y="{_PAD + 4}" text-anchor="end">{y1:.4g}</text>',
    ]
    return parts


def line_plot(filename, x, series: dict, title: str = "", xlabel: str = "", ylabel: str = "") -> None:
    """Write one polyline per entry of ``series`` (label -> y values)."""
    x = np.asarray(x, dtype=float)
    ys = [np.asarray(v, dtype=float) for v in series.values()]
    lo = min(float(np.min(y)) for y in ys)
    hi = max(float(np.max(y)) for y in ys)
    parts = _frame(title, xlabel, ylabel, (x.min(), x.max()), (lo, hi))
    px = _scale(x, x.min(), x.max(), _PAD, _W - _PAD)
    for k, (label, y) in enumerate(zip(series, ys)):
        py = _scale(y, lo, hi, _H - _PAD, _PAD)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        colour = _COLOURS[k % len(_COLOURS)]
        parts.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{pts}"/>')
        parts.append(f'<text x="{_W - _PAD - 5}" y="{_PAD + 15 * (k + 1)}" text-anchor="end" fill="{colour}">{label}</text>')
    parts.append("</svg>")
    Path(filename).write_text("\n".join(parts) + "\n")


def histogram_plot(filename, values, bins: int = 40, title: str = "", xlabel: str = "") -> None:
    """Write a bar histogram of ``values``."""
    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins)
    top = max(int(counts.max()), 1)
    parts = _frame(title, xlabel, "count", (edges[0], edges[-1]), (0, top))
    px = _scale(edges, edges[0], edges[-1], _PAD, _W - _PAD)
    for c, a, b in zip(counts, px[:-1], px[1:]):
        hgt = (_H - 2 * _PAD) * c / top
        parts.append(f'<rect x="{a:.2f}" y="{_H - _PAD - hgt:.2f}" width="{max(b - a - 1, 0.5):.2f}" height="{hgt:.2f}" fill="#1f77b4"/>')
    parts.append("</svg>")
    Path(filename).write_text("\n".join(parts) + "\n")
