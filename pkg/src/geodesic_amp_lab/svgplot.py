"""Minimal log-log SVG plots with deterministic output."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

W, H, PAD = 640, 420, 60


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def loglog_svg(x, y, title: str, fit: tuple[float, float] | None = None,
               xlabel: str = "s", ylabel: str = "|I|") -> str:
    """Points (x, y) on log axes; fit = (slope, intercept) of log y = slope log x + intercept."""
    lx = [math.log10(v) for v in x]
    ly = [math.log10(v) for v in y]
    x0, x1 = min(lx), max(lx)
    y0, y1 = min(ly), max(ly)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    sx = lambda v: PAD + (v - x0) / (x1 - x0) * (W - 2 * PAD)
    sy = lambda v: H - PAD - (v - y0) / (y1 - y0) * (H - 2 * PAD)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
           f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>',
           f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>',
           f'<text x="{W / 2}" y="{H - 15}" text-anchor="middle" font-size="13">log10 {escape(xlabel)}</text>',
           f'<text x="18" y="{H / 2}" text-anchor="middle" font-size="13" '
           f'transform="rotate(-90 18 {H / 2})">log10 {escape(ylabel)}</text>']
    for v, anchor in ((x0, "start"), (x1, "end")):
        out.append(f'<text x="{_fmt(sx(v))}" y="{H - PAD + 16}" text-anchor="{anchor}" '
                   f'font-size="11">{v:.3g}</text>')
    for v in (y0, y1):
        out.append(f'<text x="{PAD - 6}" y="{_fmt(sy(v) + 4)}" text-anchor="end" font-size="11">{v:.3g}</text>')
    if fit is not None:
        slope, icpt = fit
        c = icpt / math.log(10)
        out.append(f'<line x1="{_fmt(sx(x0))}" y1="{_fmt(sy(slope * x0 + c))}" x2="{_fmt(sx(x1))}" '
                   f'y2="{_fmt(sy(slope * x1 + c))}" stroke="#c33" stroke-dasharray="6 4"/>')
        out.append(f'<text x="{W - PAD}" y="{PAD}" text-anchor="end" font-size="13" fill="#c33">'
                   f'slope {slope:.4f}</text>')
    pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(lx, ly))
    out.append(f'<polyline points="{pts}" fill="none" stroke="#246" stroke-width="1.5"/>')
    for a, b in zip(lx, ly):
        out.append(f'<circle cx="{_fmt(sx(a))}" cy="{_fmt(sy(b))}" r="3.5" fill="#246"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
