"""Tiny self-contained SVG chart writer (no plotting dependency).

Produces the two chart kinds the reports need: mean-trajectory line plots
with an optional shaded initial phase, and stacked-area charts for
activation-count buckets.  Output is plain SVG 1.1.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

__all__ = ["line_plot", "stacked_area"]

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")

_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 64, 16, 34, 46


def _ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


class _Canvas:
    def __init__(self, width: int, height: int, x_range, y_range, title, xlabel, ylabel):
        self.width, self.height = width, height
        self.x_lo, self.x_hi = x_range
        self.y_lo, self.y_hi = y_range
        if self.x_hi <= self.x_lo:
            self.x_hi = self.x_lo + 1.0
        if self.y_hi <= self.y_lo:
            pad = 1.0 if self.y_lo == 0 else abs(self.y_lo) * 0.1
            self.y_lo, self.y_hi = self.y_lo - pad, self.y_hi + pad
        self.parts: list[str] = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
            f'<rect width="{width}" height="{height}" fill="white"/>',
        ]
        if title:
            self.parts.append(
                f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">'
                f"{escape(title)}</text>"
            )
        if xlabel:
            self.parts.append(
                f'<text x="{(_MARGIN_L + width - _MARGIN_R) / 2}" y="{height - 8}" '
                f'text-anchor="middle">{escape(xlabel)}</text>'
            )
        if ylabel:
            cy = (_MARGIN_T + height - _MARGIN_B) / 2
            self.parts.append(
                f'<text x="16" y="{cy}" text-anchor="middle" '
                f'transform="rotate(-90 16 {cy})">{escape(ylabel)}</text>'
            )

    def px(self, x: float) -> float:
        frac = (x - self.x_lo) / (self.x_hi - self.x_lo)
        return _MARGIN_L + frac * (self.width - _MARGIN_L - _MARGIN_R)

    def py(self, y: float) -> float:
        frac = (y - self.y_lo) / (self.y_hi - self.y_lo)
        return self.height - _MARGIN_B - frac * (self.height - _MARGIN_T - _MARGIN_B)

    def axes(self) -> None:
        x0, x1 = _MARGIN_L, self.width - _MARGIN_R
        y0, y1 = self.height - _MARGIN_B, _MARGIN_T
        for t in _ticks(self.x_lo, self.x_hi):
            px = self.px(t)
            self.parts.append(
                f'<line x1="{px:.1f}" y1="{y0}" x2="{px:.1f}" y2="{y1}" '
                'stroke="#dddddd" stroke-width="1"/>'
            )
            self.parts.append(
                f'<text x="{px:.1f}" y="{y0 + 16}" text-anchor="middle">{t:g}</text>'
            )
        for t in _ticks(self.y_lo, self.y_hi):
            py = self.py(t)
            self.parts.append(
                f'<line x1="{x0}" y1="{py:.1f}" x2="{x1}" y2="{py:.1f}" '
                'stroke="#dddddd" stroke-width="1"/>'
            )
            self.parts.append(
                f'<text x="{x0 - 6}" y="{py + 4:.1f}" text-anchor="end">{t:g}</text>'
            )
        self.parts.append(
            f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
            'fill="none" stroke="black" stroke-width="1"/>'
        )

    def legend(self, entries: list[tuple[str, str]]) -> None:
        x = _MARGIN_L + 10
        y = _MARGIN_T + 14
        for label, color in entries:
            self.parts.append(
                f'<rect x="{x}" y="{y - 9}" width="18" height="9" fill="{color}"/>'
            )
            self.parts.append(f'<text x="{x + 24}" y="{y}">{escape(label)}</text>')
            y += 16

    def save(self, path: str) -> None:
        self.parts.append("</svg>")
        with open(path, "w") as fh:
            fh.write("\n".join(self.parts) + "\n")


def line_plot(
    path: str,
    series: list[tuple[str, list[float], list[float]]],
    *,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    shade_to_x: float | None = None,
    width: int = 720,
    height: int = 460,
) -> None:
    """Write a multi-series line chart.

    Args:
        series: (label, xs, ys) triples.
        shade_to_x: if set, gray out the region from the left edge to this x
            (used to mark the initial-design phase); the rect carries a
            ``data-boundary-x`` attribute with the raw value.
    """
    if not series:
        raise ValueError("line_plot needs at least one series")
    all_x = [x for _, xs, _ in series for x in xs]
    all_y = [y for _, _, ys in series for y in ys]
    canvas = _Canvas(
        width, height, (min(all_x), max(all_x)), (min(all_y), max(all_y)),
        title, xlabel, ylabel,
    )
    if shade_to_x is not None:
        x0 = canvas.px(canvas.x_lo)
        x1 = canvas.px(shade_to_x)
        canvas.parts.append(
            f'<rect x="{x0:.1f}" y="{_MARGIN_T}" width="{x1 - x0:.1f}" '
            f'height="{height - _MARGIN_T - _MARGIN_B}" fill="#bbbbbb" '
            f'opacity="0.35" data-boundary-x="{shade_to_x:g}"/>'
        )
    canvas.axes()
    entries = []
    for k, (label, xs, ys) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{canvas.px(x):.1f},{canvas.py(y):.1f}" for x, y in zip(xs, ys))
        canvas.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.6"/>'
        )
        entries.append((label, color))
    canvas.legend(entries)
    canvas.save(path)


def stacked_area(
    path: str,
    xs: list[float],
    layers: list[tuple[str, list[float]]],
    *,
    colors: tuple[str, ...],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    width: int = 720,
    height: int = 460,
) -> None:
    """Write a stacked-area chart; layers stack bottom-up in the given order."""
    if not layers or not xs:
        raise ValueError("stacked_area needs xs and at least one layer")
    if len(colors) < len(layers):
        raise ValueError("need one color per layer")
    totals = [sum(layer[1][i] for layer in layers) for i in range(len(xs))]
    canvas = _Canvas(width, height, (min(xs), max(xs)), (0.0, max(totals)), title, xlabel, ylabel)
    canvas.axes()
    base = [0.0] * len(xs)
    entries = []
    for (label, ys), color in zip(layers, colors):
        top = [b + y for b, y in zip(base, ys)]
        forward = [f"{canvas.px(x):.1f},{canvas.py(t):.1f}" for x, t in zip(xs, top)]
        backward = [
            f"{canvas.px(x):.1f},{canvas.py(b):.1f}"
            for x, b in zip(reversed(xs), reversed(base))
        ]
        canvas.parts.append(
            f'<polygon points="{" ".join(forward + backward)}" fill="{color}" '
            'opacity="0.85" stroke="none"/>'
        )
        entries.append((label, color))
        base = top
    canvas.legend(entries)
    canvas.save(path)
