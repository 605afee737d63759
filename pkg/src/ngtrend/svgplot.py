"""Minimal SVG line plots.

Output is plain text with fixed number formatting, so identical inputs give
byte-identical files.  Non-finite y values break a curve into separate
polylines (drawn as gaps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    color: str = "#000000"
    width: float = 1.0
    dash: str = ""


@dataclass
class Panel:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    series: list = field(default_factory=list)
    vlines: list = field(default_factory=list)  # (x, color, label)
    ylim: tuple | None = None

    def add(self, x, y, label="", color=None, width=1.0, dash=""):
        color = color or PALETTE[len(self.series) % len(PALETTE)]
        self.series.append(Series(np.asarray(x, dtype=float), np.asarray(y, dtype=float),
                                  label, color, width, dash))
        return self


def nice_ticks(lo, hi, target=6):
    """Round tick positions covering ``[lo, hi]``."""
    if not hi > lo:
        return [lo]
    raw = (hi - lo) / max(target - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _fmt(v):
    return f"{v:.2f}"


def _tick_label(v):
    return f"{v:.6g}"


def _segments(x, y):
    ok = np.isfinite(x) & np.isfinite(y)
    runs, cur = [], []
    for xi, yi, good in zip(x, y, ok):
        if good:
            cur.append((xi, yi))
        elif cur:
            runs.append(cur)
            cur = []
    if cur:
        runs.append(cur)
    return runs


def _limits(panel):
    xs = [s.x[np.isfinite(s.x)] for s in panel.series]
    ys = [s.y[np.isfinite(s.y)] for s in panel.series]
    xs = np.concatenate(xs) if xs else np.array([0.0, 1.0])
    ys = np.concatenate(ys) if ys else np.array([0.0, 1.0])
    x0, x1 = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
    if panel.ylim is not None:
        y0, y1 = panel.ylim
    else:
        y0, y1 = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
        pad = 0.05 * (y1 - y0) if y1 > y0 else 1.0
        y0, y1 = y0 - pad, y1 + pad
    if x1 <= x0:
        x0, x1 = x0 - 1.0, x1 + 1.0
    return x0, x1, y0, y1


def _panel_svg(panel, left, top, width, height):
    out = []
    x0, x1, y0, y1 = _limits(panel)

    def px(v):
        return left + (v - x0) / (x1 - x0) * width

    def py(v):
        return top + height - (v - y0) / (y1 - y0) * height

    out.append(f'<rect x="{_fmt(left)}" y="{_fmt(top)}" width="{_fmt(width)}" '
               f'height="{_fmt(height)}" fill="none" stroke="#444444" stroke-width="1"/>')
    for t in nice_ticks(x0, x1):
        out.append(f'<line x1="{_fmt(px(t))}" y1="{_fmt(top + height)}" x2="{_fmt(px(t))}" '
                   f'y2="{_fmt(top + height + 4)}" stroke="#444444"/>')
        out.append(f'<text x="{_fmt(px(t))}" y="{_fmt(top + height + 16)}" font-size="10" '
                   f'text-anchor="middle">{_tick_label(t)}</text>')
    for t in nice_ticks(y0, y1):
        out.append(f'<line x1="{_fmt(left - 4)}" y1="{_fmt(py(t))}" x2="{_fmt(left)}" '
                   f'y2="{_fmt(py(t))}" stroke="#444444"/>')
        out.append(f'<text x="{_fmt(left - 6)}" y="{_fmt(py(t) + 3)}" font-size="10" '
                   f'text-anchor="end">{_tick_label(t)}</text>')
    if panel.title:
        out.append(f'<text x="{_fmt(left + width / 2)}" y="{_fmt(top - 8)}" font-size="13" '
                   f'text-anchor="middle">{escape(panel.title)}</text>')
    if panel.xlabel:
        out.append(f'<text x="{_fmt(left + width / 2)}" y="{_fmt(top + height + 32)}" '
                   f'font-size="11" text-anchor="middle">{escape(panel.xlabel)}</text>')
    if panel.ylabel:
        cx, cy = left - 46, top + height / 2
        out.append(f'<text x="{_fmt(cx)}" y="{_fmt(cy)}" font-size="11" text-anchor="middle" '
                   f'transform="rotate(-90 {_fmt(cx)} {_fmt(cy)})">{escape(panel.ylabel)}</text>')

    out.append(f'<clipPath id="clip{int(top)}"><rect x="{_fmt(left)}" y="{_fmt(top)}" '
               f'width="{_fmt(width)}" height="{_fmt(height)}"/></clipPath>')
    out.append(f'<g clip-path="url(#clip{int(top)})">')
    for xv, color, _ in panel.vlines:
        out.append(f'<line x1="{_fmt(px(xv))}" y1="{_fmt(top)}" x2="{_fmt(px(xv))}" '
                   f'y2="{_fmt(top + height)}" stroke="{color}" stroke-dasharray="3,3"/>')
    for s in panel.series:
        dash = f' stroke-dasharray="{s.dash}"' if s.dash else ""
        for run in _segments(s.x, s.y):
            pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in run)
            out.append(f'<polyline points="{pts}" fill="none" stroke="{s.color}" '
                       f'stroke-width="{s.width:g}"{dash}/>')
    out.append("</g>")

    labelled = [s for s in panel.series if s.label]
    for i, s in enumerate(labelled):
        ly = top + 14 + 14 * i
        out.append(f'<line x1="{_fmt(left + width - 120)}" y1="{_fmt(ly - 4)}" '
                   f'x2="{_fmt(left + width - 100)}" y2="{_fmt(ly - 4)}" stroke="{s.color}" '
                   f'stroke-width="2"/>')
        out.append(f'<text x="{_fmt(left + width - 96)}" y="{_fmt(ly)}" font-size="10">'
                   f'{escape(s.label)}</text>')
    return out


def render(panels, width=800, panel_height=300):
    """Stack ``panels`` vertically and return the SVG document as a string."""
    margin_l, margin_r, margin_t, margin_b = 70, 20, 30, 45
    inner_w = width - margin_l - margin_r
    total_h = len(panels) * (panel_height + margin_t + margin_b)
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{total_h}" '
        f'viewBox="0 0 {width} {total_h}" font-family="sans-serif">',
        f'<rect width="{width}" height="{total_h}" fill="#ffffff"/>',
    ]
    for i, panel in enumerate(panels):
        top = i * (panel_height + margin_t + margin_b) + margin_t
        parts.extend(_panel_svg(panel, margin_l, top, inner_w, panel_height))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
