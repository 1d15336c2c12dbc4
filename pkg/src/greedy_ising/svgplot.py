"""Minimal deterministic SVG line plot for success-probability curves."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

from .errors import IoFailure

WIDTH, HEIGHT = 520, 380
LEFT, RIGHT, TOP, BOTTOM = 70, 130, 30, 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")
X_LABEL = "β = n/[20 d log p]"
Y_LABEL = "P[Ê = E*]"


def _num(v: float) -> str:
    return f"{v:.2f}"


def render_svg(series: dict, title: str = "") -> str:
    """``series`` maps a label to a list of ``(x, y)`` points with y in [0, 1]."""
    points = [pt for pts in series.values() for pt in pts]
    if not points:
        raise ValueError("nothing to plot")
    xmax = max(x for x, _ in points)
    xmax = xmax * 1.1 if xmax > 0 else 1.0
    plot_w = WIDTH - LEFT - RIGHT
    plot_h = HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + plot_w * x / xmax

    def sy(y):
        return TOP + plot_h * (1.0 - y)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="18" text-anchor="middle">{escape(title)}</text>')
    # axes
    x0, y0, x1, y1 = sx(0), sy(0), sx(xmax), sy(1)
    out.append(f'<line x1="{_num(x0)}" y1="{_num(y0)}" x2="{_num(x1)}" y2="{_num(y0)}" stroke="black"/>')
    out.append(f'<line x1="{_num(x0)}" y1="{_num(y0)}" x2="{_num(x0)}" y2="{_num(y1)}" stroke="black"/>')
    for i in range(5):
        y = i / 4
        out.append(
            f'<line x1="{_num(x0 - 4)}" y1="{_num(sy(y))}" x2="{_num(x0)}" y2="{_num(sy(y))}" stroke="black"/>'
        )
        out.append(
            f'<text x="{_num(x0 - 7)}" y="{_num(sy(y) + 4)}" text-anchor="end">{y:.2f}</text>'
        )
    for i in range(6):
        x = xmax * i / 5
        out.append(
            f'<line x1="{_num(sx(x))}" y1="{_num(y0)}" x2="{_num(sx(x))}" y2="{_num(y0 + 4)}" stroke="black"/>'
        )
        out.append(f'<text x="{_num(sx(x))}" y="{_num(y0 + 18)}" text-anchor="middle">{x:.2f}</text>')
    out.append(
        f'<text x="{_num((x0 + x1) / 2)}" y="{HEIGHT - 15}" text-anchor="middle">{escape(X_LABEL)}</text>'
    )
    out.append(
        f'<text x="18" y="{_num((y0 + y1) / 2)}" text-anchor="middle" '
        f'transform="rotate(-90 18 {_num((y0 + y1) / 2)})">{escape(Y_LABEL)}</text>'
    )
    for i, (label, pts) in enumerate(series.items()):
        color = COLORS[i % len(COLORS)]
        pts = sorted(pts)
        coords = " ".join(f"{_num(sx(x))},{_num(sy(y))}" for x, y in pts)
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y in pts:
            out.append(f'<circle cx="{_num(sx(x))}" cy="{_num(sy(y))}" r="3" fill="{color}"/>')
        ly = TOP + 10 + 18 * i
        lx = WIDTH - RIGHT + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(series: dict, path, title: str = "") -> Path:
    path = Path(path)
    try:
        path.write_text(render_svg(series, title), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return path
