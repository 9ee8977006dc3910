"""Minimal static log-log SVG line plots.

Output depends only on the data, so identical inputs give identical bytes.
Points with a nonpositive y value cannot sit on a log axis; they are drawn as
open markers on the bottom edge of the plot.
"""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 170, 30, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _num(x: float) -> str:
    return f"{x:.2f}"


def _decades(lo: float, hi: float):
    a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
    if a == b:
        b += 1
    return a, b


def loglog_svg(series, path, title="", xlabel="", ylabel=""):
    """Write a log-log plot.

    ``series`` is a sequence of ``(name, xs, ys)``; ``ys`` entries that are
    ``None``, NaN or ``<= 0`` are drawn as open floor markers.
    """
    xs_all = [x for _, xs, _ in series for x in xs if x > 0]
    ys_all = [y for _, _, ys in series for y in ys
              if y is not None and not math.isnan(y) and y > 0]
    if not xs_all:
        raise ValueError("nothing to plot")
    xa, xb = _decades(min(xs_all), max(xs_all))
    ya, yb = _decades(min(ys_all), max(ys_all)) if ys_all else (-1, 0)
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(x):
        return LEFT + (math.log10(x) - xa) / (xb - xa) * pw

    def py(y):
        return TOP + ph - (math.log10(y) - ya) / (yb - ya) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for k in range(xa, xb + 1):
        x = _num(px(10.0**k))
        out.append(f'<line x1="{x}" y1="{TOP}" x2="{x}" y2="{TOP + ph}" stroke="#ddd"/>')
        out.append(f'<text x="{x}" y="{TOP + ph + 16}" text-anchor="middle">1e{k}</text>')
    for k in range(ya, yb + 1):
        y = _num(py(10.0**k))
        out.append(f'<line x1="{LEFT}" y1="{y}" x2="{LEFT + pw}" y2="{y}" stroke="#ddd"/>')
        out.append(f'<text x="{LEFT - 6}" y="{y}" text-anchor="end" dominant-baseline="middle">1e{k}</text>')
    if title:
        out.append(f'<text x="{LEFT + pw / 2}" y="{TOP - 10}" text-anchor="middle" '
                   f'font-size="13">{escape(title)}</text>')
    if xlabel:
        out.append(f'<text x="{LEFT + pw / 2}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="16" y="{TOP + ph / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {TOP + ph / 2})">{escape(ylabel)}</text>')

    for i, (name, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts, floor = [], []
        for x, y in zip(xs, ys):
            if y is None or math.isnan(y) or y <= 0:
                floor.append(x)
            else:
                pts.append((px(x), py(y)))
        if len(pts) > 1:
            d = " ".join(f"{_num(a)},{_num(b)}" for a, b in pts)
            out.append(f'<polyline points="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for a, b in pts:
            out.append(f'<circle cx="{_num(a)}" cy="{_num(b)}" r="3" fill="{color}"/>')
        for x in floor:
            out.append(f'<circle cx="{_num(px(x))}" cy="{TOP + ph}" r="4" fill="white" '
                       f'stroke="{color}" stroke-width="1.5"/>')
        ly = TOP + 12 + 16 * i
        out.append(f'<line x1="{LEFT + pw + 10}" y1="{ly}" x2="{LEFT + pw + 28}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{LEFT + pw + 32}" y="{ly}" dominant-baseline="middle">{escape(name)}</text>')
    if any(y is None or (isinstance(y, float) and math.isnan(y)) or y <= 0
           for _, _, ys in series for y in ys):
        out.append(f'<text x="{LEFT + pw + 10}" y="{TOP + ph}" font-size="10">'
                   'open marker: value 0</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
