"""Minimal standalone SVG line charts."""

from __future__ import annotations

from typing import Mapping, Sequence
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
WIDTH, HEIGHT = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 64, 24, 40, 52


def _num(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def line_chart(
    series: Mapping[str, Sequence[float]],
    *,
    hline: float | None = None,
    hline_label: str = "",
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    y_range: tuple[float, float] | None = None,
) -> str:
    """Render each series against its index as a polyline with point markers."""
    values = [v for ys in series.values() for v in ys]
    if y_range is None:
        lo, hi = (min(values), max(values)) if values else (0.0, 1.0)
        if hline is not None:
            lo, hi = min(lo, hline), max(hi, hline)
        if hi == lo:
            lo, hi = lo - 0.5, hi + 0.5
    else:
        lo, hi = y_range
    n = max((len(ys) for ys in series.values()), default=1)
    span_x = max(n - 1, 1)
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(i: float) -> float:
        return LEFT + pw * i / span_x

    def py(v: float) -> float:
        return TOP + ph * (1.0 - (v - lo) / (hi - lo))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}" stroke="black"/>',
    ]
    for k in range(5):
        v = lo + (hi - lo) * k / 4
        out.append(f'<text x="{LEFT - 6}" y="{_num(py(v) + 4)}" text-anchor="end">{v:.2f}</text>')
    for i in range(n):
        out.append(f'<text x="{_num(px(i))}" y="{TOP + ph + 16}" text-anchor="middle">{i}</text>')
    out.append(f'<text x="{LEFT + pw / 2}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{TOP + ph / 2}" text-anchor="middle" transform="rotate(-90 16 {TOP + ph / 2})">'
        f"{escape(ylabel)}</text>"
    )
    if hline is not None:
        y = _num(py(hline))
        out.append(f'<line x1="{LEFT}" y1="{y}" x2="{LEFT + pw}" y2="{y}" stroke="gray" stroke-dasharray="6 4"/>')
        if hline_label:
            out.append(f'<text x="{LEFT + pw - 4}" y="{_num(py(hline) - 6)}" text-anchor="end" fill="gray">{escape(hline_label)}</text>')
    for k, (name, ys) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_num(px(i))},{_num(py(v))}" for i, v in enumerate(ys))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>')
        for i, v in enumerate(ys):
            out.append(f'<circle cx="{_num(px(i))}" cy="{_num(py(v))}" r="3" fill="{color}"/>')
        out.append(f'<text x="{LEFT + 8}" y="{TOP + 14 + 16 * k}" fill="{color}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
