"""Minimal deterministic SVG scatter/line plots."""

from __future__ import annotations

import math
from html import escape

import numpy as np

W, H = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 55


def _ticks(lo: float, hi: float, n: int = 5) -> list:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def _fmt(v: float) -> str:
    return f"{v:.3g}"


def svg_plot(x, y, *, yerr=None, curve=None, xlabel: str = "", ylabel: str = "", title: str = "") -> str:
    """Points (with optional error bars) and an optional fit curve ``(xc, yc)``."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    xs = [x] + ([np.asarray(curve[0], float)] if curve is not None else [])
    ys = [y] + ([np.asarray(curve[1], float)] if curve is not None else [])
    if yerr is not None:
        yerr = np.asarray(yerr, float)
        ys += [y - yerr, y + yerr]
    xlo, xhi = min(float(a.min()) for a in xs), max(float(a.max()) for a in xs)
    ylo, yhi = min(float(a.min()) for a in ys), max(float(a.max()) for a in ys)
    if xhi == xlo:
        xlo, xhi = xlo - 1, xhi + 1
    if yhi == ylo:
        ylo, yhi = ylo - 1, yhi + 1
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad

    def px(v):
        return LEFT + (v - xlo) / (xhi - xlo) * (W - LEFT - RIGHT)

    def py(v):
        return H - BOTTOM - (v - ylo) / (yhi - ylo) * (H - TOP - BOTTOM)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<line x1="{LEFT}" y1="{H - BOTTOM}" x2="{W - RIGHT}" y2="{H - BOTTOM}" stroke="black"/>',
           f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{H - BOTTOM}" stroke="black"/>']
    for t in _ticks(xlo, xhi):
        out.append(f'<line x1="{px(t):.2f}" y1="{H - BOTTOM}" x2="{px(t):.2f}" y2="{H - BOTTOM + 5}" stroke="black"/>')
        out.append(f'<text x="{px(t):.2f}" y="{H - BOTTOM + 20}" font-size="12" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(ylo, yhi):
        out.append(f'<line x1="{LEFT - 5}" y1="{py(t):.2f}" x2="{LEFT}" y2="{py(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{py(t) + 4:.2f}" font-size="12" text-anchor="end">{_fmt(t)}</text>')
    if curve is not None:
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(*curve))
        out.append(f'<polyline points="{pts}" fill="none" stroke="#c0392b" stroke-width="1.5"/>')
    for i, (a, b) in enumerate(zip(x, y)):
        if yerr is not None and yerr[i] > 0:
            out.append(f'<line x1="{px(a):.2f}" y1="{py(b - yerr[i]):.2f}" x2="{px(a):.2f}" '
                       f'y2="{py(b + yerr[i]):.2f}" stroke="#2c3e50"/>')
        out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3" fill="#2c3e50"/>')
    out.append(f'<text x="{W / 2:.0f}" y="{H - 12}" font-size="13" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{H / 2:.0f}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 16 {H / 2:.0f})">{escape(ylabel)}</text>')
    out.append(f'<text x="{W / 2:.0f}" y="22" font-size="14" text-anchor="middle">{escape(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
