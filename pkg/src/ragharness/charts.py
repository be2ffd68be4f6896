"""Minimal self-contained SVG charts. Every plotted number is also a text label."""

from __future__ import annotations

import math
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

PALETTE = ("#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac")


def _f(x: float) -> str:
    return f"{x:.2f}"


def _doc(width: int, height: int, title: str, body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">'
    )
    lines = [head, f'<title>{escape(title)}</title>', f'<text x="10" y="18" font-size="14">{escape(title)}</text>']
    return "\n".join(lines + body + ["</svg>"]) + "\n"


def bar_chart(title: str, rows: Sequence[tuple[str, float]]) -> str:
    """Horizontal bars, values in percent."""
    bar_h, left, width = 16, 190, 560
    top = max((v for _, v in rows), default=0.0) or 1.0
    body = []
    for i, (label, value) in enumerate(rows):
        y = 30 + i * (bar_h + 4)
        w = (width - left - 60) * value / top
        body.append(f'<text x="{left - 6}" y="{y + 12}" text-anchor="end">{escape(label)}</text>')
        body.append(f'<rect x="{left}" y="{y}" width="{_f(w)}" height="{bar_h}" fill="{PALETTE[0]}"/>')
        body.append(f'<text x="{_f(left + w + 4)}" y="{y + 12}">{value:.1f}</text>')
    return _doc(width, 40 + len(rows) * (bar_h + 4), title, body)


def pie_chart(title: str, slices: Sequence[tuple[str, float]]) -> str:
    """Pie over percentages; zero slices are labelled but not drawn."""
    cx, cy, r = 150, 170, 110
    total = sum(v for _, v in slices) or 1.0
    body = []
    angle = -math.pi / 2
    for i, (label, value) in enumerate(slices):
        color = PALETTE[i % len(PALETTE)]
        frac = value / total
        if frac >= 1.0:
            body.append(f'<circle cx="{cx}" cy="{cy}" r="{r}" fill="{color}"/>')
        elif frac > 0:
            end = angle + 2 * math.pi * frac
            x1, y1 = cx + r * math.cos(angle), cy + r * math.sin(angle)
            x2, y2 = cx + r * math.cos(end), cy + r * math.sin(end)
            large = 1 if frac > 0.5 else 0
            body.append(
                f'<path d="M{cx},{cy} L{_f(x1)},{_f(y1)} A{r},{r} 0 {large} 1 {_f(x2)},{_f(y2)} Z" fill="{color}"/>'
            )
            angle = end
        ly = 50 + i * 18
        body.append(f'<rect x="290" y="{ly - 10}" width="12" height="12" fill="{color}"/>')
        body.append(f'<text x="308" y="{ly}">{escape(label)} {value:.1f}%</text>')
    return _doc(420, 300, title, body)


def bubble_chart(title: str, points: Sequence[tuple[str, float, float, int]]) -> str:
    """x = seconds per query, y = F1 percent, radius grows with case count."""
    w, h, pad = 560, 360, 50
    xmax = max((p[1] for p in points), default=0.0) or 1.0
    body = [
        f'<line x1="{pad}" y1="{h - pad}" x2="{w - pad}" y2="{h - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{h - pad}" x2="{pad}" y2="{pad}" stroke="black"/>',
        f'<text x="{w // 2}" y="{h - 12}" text-anchor="middle">seconds per query</text>',
        f'<text x="14" y="{h // 2}" transform="rotate(-90 14 {h // 2})" text-anchor="middle">F1 (%)</text>',
    ]
    for i, (label, x, y, n) in enumerate(points):
        px = pad + (w - 2 * pad) * x / xmax
        py = h - pad - (h - 2 * pad) * y / 100
        rad = 4 + 2 * math.sqrt(max(n, 1))
        body.append(f'<circle cx="{_f(px)}" cy="{_f(py)}" r="{_f(rad)}" fill="{PALETTE[i % len(PALETTE)]}" fill-opacity="0.6"/>')
        body.append(f'<text x="{_f(px + rad + 2)}" y="{_f(py)}">{escape(label)} ({x:.2f}s, {y:.1f})</text>')
    return _doc(w, h, title, body)


def radar_chart(title: str, axes: Sequence[str], series: Mapping[str, Mapping[str, float]]) -> str:
    """One polygon per system over normalized axis values in [0, 1]."""
    cx, cy, r = 200, 210, 150
    n = len(axes)
    body = []

    def point(k: int, v: float) -> tuple[float, float]:
        a = -math.pi / 2 + 2 * math.pi * k / n
        return cx + r * v * math.cos(a), cy + r * v * math.sin(a)

    for k, axis in enumerate(axes):
        x, y = point(k, 1.0)
        body.append(f'<line x1="{cx}" y1="{cy}" x2="{_f(x)}" y2="{_f(y)}" stroke="#999"/>')
        lx, ly = point(k, 1.1)
        body.append(f'<text x="{_f(lx)}" y="{_f(ly)}" text-anchor="middle">{escape(axis)}</text>')
    for i, (system, values) in enumerate(sorted(series.items())):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in (point(k, values.get(a, 0.0)) for k, a in enumerate(axes)))
        body.append(f'<polygon points="{pts}" fill="{color}" fill-opacity="0.15" stroke="{color}"/>')
        label = ", ".join(f"{a}={values.get(a, 0.0):.2f}" for a in axes)
        body.append(f'<text x="410" y="{50 + i * 16}" fill="{color}">{escape(system)}: {escape(label)}</text>')
    return _doc(820, 420, title, body)
