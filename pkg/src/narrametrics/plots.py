"""Dependency-free SVG line charts for daily series.

Charts are simple polylines on a date axis with a fixed palette and a text
legend. All coordinates are formatted to two decimals so identical input
always yields identical bytes.
"""

from __future__ import annotations

from datetime import date
from pathlib import Path
from typing import Sequence

from narrametrics.errors import DataError
from narrametrics.series import DailySeries

_PALETTE = ("#1f6fb2", "#d1495b", "#3a923a", "#8a5fbf", "#c98a2b", "#4aa3a2", "#7f7f7f", "#b25fa3")

_WIDTH = 900
_HEIGHT = 300
_MARGIN_LEFT = 60
_MARGIN_RIGHT = 20
_MARGIN_TOP = 30
_MARGIN_BOTTOM = 40


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def line_chart(
    series: Sequence[tuple[str, DailySeries]],
    title: str,
    path: str | Path,
) -> Path:
    """Render labeled daily series as one SVG chart."""
    path = Path(path)
    populated = [(label, s) for label, s in series if len(s) > 0]
    if not populated:
        raise DataError(f"nothing to plot for chart {title!r}")

    all_days: set[date] = set()
    values: list[float] = []
    for _, s in populated:
        all_days.update(s.values)
        values.extend(s.values.values())
    d0, d1 = min(all_days), max(all_days)
    day_span = max((d1 - d0).days, 1)
    v0, v1 = min(values), max(values)
    if v1 == v0:
        v0 -= 0.5
        v1 += 0.5
    pad = 0.05 * (v1 - v0)
    v0 -= pad
    v1 += pad

    plot_w = _WIDTH - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = _HEIGHT - _MARGIN_TOP - _MARGIN_BOTTOM

    def x_of(d: date) -> float:
        return _MARGIN_LEFT + plot_w * (d - d0).days / day_span

    def y_of(v: float) -> float:
        return _MARGIN_TOP + plot_h * (1.0 - (v - v0) / (v1 - v0))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_MARGIN_LEFT}" y="20" font-family="sans-serif" font-size="14">{title}</text>',
        # axes
        f'<line x1="{_MARGIN_LEFT}" y1="{_MARGIN_TOP}" x2="{_MARGIN_LEFT}" '
        f'y2="{_HEIGHT - _MARGIN_BOTTOM}" stroke="#333" stroke-width="1"/>',
        f'<line x1="{_MARGIN_LEFT}" y1="{_HEIGHT - _MARGIN_BOTTOM}" x2="{_WIDTH - _MARGIN_RIGHT}" '
        f'y2="{_HEIGHT - _MARGIN_BOTTOM}" stroke="#333" stroke-width="1"/>',
        # axis labels
        f'<text x="{_MARGIN_LEFT}" y="{_HEIGHT - 10}" font-family="sans-serif" font-size="11">'
        f"{d0.isoformat()}</text>",
        f'<text x="{_WIDTH - _MARGIN_RIGHT}" y="{_HEIGHT - 10}" text-anchor="end" '
        f'font-family="sans-serif" font-size="11">{d1.isoformat()}</text>',
        f'<text x="{_MARGIN_LEFT - 5}" y="{y_of(v1 - pad):.2f}" text-anchor="end" '
        f'font-family="sans-serif" font-size="11">{v1 - pad:.3g}</text>',
        f'<text x="{_MARGIN_LEFT - 5}" y="{y_of(v0 + pad):.2f}" text-anchor="end" '
        f'font-family="sans-serif" font-size="11">{v0 + pad:.3g}</text>',
    ]
    for idx, (label, s) in enumerate(populated):
        color = _PALETTE[idx % len(_PALETTE)]
        points = " ".join(f"{_fmt(x_of(d))},{_fmt(y_of(v))}" for d, v in s.items())
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>'
        )
        legend_y = _MARGIN_TOP + 14 * idx
        parts.append(
            f'<rect x="{_WIDTH - 150}" y="{legend_y - 9}" width="10" height="10" fill="{color}"/>'
        )
        parts.append(
            f'<text x="{_WIDTH - 135}" y="{legend_y}" font-family="sans-serif" '
            f'font-size="11">{label}</text>'
        )
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return path
