"""Self-contained SVG line plots: log10 y for eigenvalue spectra, linear y for accuracies."""

import math
from html import escape
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

WIDTH = 640
HEIGHT = 420
MARGIN_LEFT = 70
MARGIN_RIGHT = 20
MARGIN_TOP = 40
MARGIN_BOTTOM = 50

# Series colours, cycled
COLORS = ["#1e3a5f", "#c53030", "#059669", "#b7791f", "#6b46c1"]


def _format_series(points, color):
    coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
    return f'  <polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>'


def _format_legend(labels):
    items = []
    for i, label in enumerate(labels):
        y = MARGIN_TOP + 16 * i + 8
        x = WIDTH - MARGIN_RIGHT - 120
        color = COLORS[i % len(COLORS)]
        items.append(
            f'  <line x1="{x}" y1="{y}" x2="{x + 20}" y2="{y}" stroke="{color}" stroke-width="2"/>\n'
            f'  <text x="{x + 26}" y="{y + 4}" font-size="12">{escape(label)}</text>'
        )
    return "\n".join(items)


def _document(lines, ticks, legend, title, x_label, y_label) -> str:
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    series_svg = "\n".join(lines)
    ticks_svg = "\n".join(ticks)
    legend_svg = _format_legend(legend)
    return f"""<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif">
  <rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>
  <text x="{WIDTH / 2}" y="24" font-size="15" text-anchor="middle">{escape(title)}</text>
{ticks_svg}
  <rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#4a5568"/>
{series_svg}
{legend_svg}
  <text x="{WIDTH / 2}" y="{HEIGHT - 12}" font-size="12" text-anchor="middle">{escape(x_label)}</text>
  <text x="16" y="{HEIGHT / 2}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {HEIGHT / 2})">{escape(y_label)}</text>
</svg>
"""


def _x_scale(x_max):
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT

    def sx(i):
        return MARGIN_LEFT + (i - 1) / max(x_max - 1, 1) * plot_w
    return sx


def _x_ticks(sx, x_max):
    ticks = []
    for i in np.unique(np.linspace(1, x_max, num=min(x_max, 6)).round().astype(int)):
        ticks.append(
            f'  <text x="{sx(int(i)):.2f}" y="{HEIGHT - MARGIN_BOTTOM + 16}" font-size="11" '
            f'text-anchor="middle">{int(i)}</text>'
        )
    return ticks


def _y_tick(y, label):
    return (
        f'  <line x1="{MARGIN_LEFT - 4}" y1="{y:.2f}" x2="{WIDTH - MARGIN_RIGHT}" y2="{y:.2f}" '
        f'stroke="#e2e8f0"/>\n'
        f'  <text x="{MARGIN_LEFT - 8}" y="{y + 4:.2f}" font-size="11" text-anchor="end">{label}</text>'
    )


def log_line_plot(series: Dict[str, Sequence[float]], title: str = "", x_label: str = "",
                  y_label: str = "") -> str:
    """Render named y-series against 1..len(series) as an SVG document.

    Non-positive values cannot sit on a log axis and are left out of the line.
    """
    if not series:
        raise ValueError("Nothing to plot")

    positives = [np.asarray(v, dtype=float) for v in series.values()]
    all_positive = np.concatenate([v[v > 0] for v in positives])
    if all_positive.size == 0:
        raise ValueError("No positive values to place on a log axis")

    lo = math.floor(math.log10(all_positive.min()))
    hi = math.ceil(math.log10(all_positive.max()))
    if hi == lo:
        hi = lo + 1
    x_max = max(len(v) for v in positives)
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    sx = _x_scale(x_max)

    def sy(v):
        return MARGIN_TOP + (hi - math.log10(v)) / (hi - lo) * plot_h

    lines = []
    for i, values in enumerate(positives):
        points = [(sx(k + 1), sy(v)) for k, v in enumerate(values) if v > 0]
        lines.append(_format_series(points, COLORS[i % len(COLORS)]))

    ticks = [_y_tick(sy(10.0 ** e), f"1e{e}") for e in range(lo, hi + 1)] + _x_ticks(sx, x_max)
    return _document(lines, ticks, list(series), title, x_label, y_label)


def line_plot(series: Dict[str, Sequence[float]], references: Optional[Dict[str, float]] = None,
              y_range: Tuple[float, float] = (0.0, 100.0), title: str = "", x_label: str = "",
              y_label: str = "") -> str:
    """Linear-axis version of log_line_plot; each reference is a dashed horizontal line."""
    if not series:
        raise ValueError("Nothing to plot")
    lo, hi = y_range
    if not hi > lo:
        raise ValueError(f"Empty y range {y_range}")
    references = references or {}

    x_max = max(len(v) for v in series.values())
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    sx = _x_scale(x_max)

    def sy(v):
        return MARGIN_TOP + (hi - min(max(v, lo), hi)) / (hi - lo) * plot_h

    lines = []
    for i, values in enumerate(series.values()):
        points = [(sx(k + 1), sy(float(v))) for k, v in enumerate(values)]
        lines.append(_format_series(points, COLORS[i % len(COLORS)]))
    for i, value in enumerate(references.values(), start=len(series)):
        y = sy(float(value))
        lines.append(
            f'  <line x1="{sx(1):.2f}" y1="{y:.2f}" x2="{sx(x_max):.2f}" y2="{y:.2f}" '
            f'stroke="{COLORS[i % len(COLORS)]}" stroke-width="1.5" stroke-dasharray="6 4"/>'
        )

    ticks = [_y_tick(sy(v), f"{v:g}") for v in np.linspace(lo, hi, 6)] + _x_ticks(sx, x_max)
    return _document(lines, ticks, list(series) + list(references), title, x_label, y_label)


def _write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write(text)
    return path


def write_log_plot(path, series: Dict[str, Sequence[float]], **labels) -> Path:
    return _write(path, log_line_plot(series, **labels))


def write_line_plot(path, series: Dict[str, Sequence[float]], **options) -> Path:
    return _write(path, line_plot(series, **options))
