"""Self-contained SVG chart emission: line charts, heatmaps, and bar charts.

No plotting dependency; output is deterministic text so reruns produce
byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


@dataclass
class SvgCanvas:
    width: int
    height: int
    elements: list[str] = field(default_factory=list)

    def line(self, x1, y1, x2, y2, color="#888", width=1.0, dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.elements.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="{color}" stroke-width="{width}"{d}/>'
        )

    def polyline(self, pts, color="#1f77b4", width=1.5):
        path = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
        self.elements.append(
            f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="{width}"/>'
        )

    def rect(self, x, y, w, h, fill, stroke="none"):
        self.elements.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}" '
            f'fill="{fill}" stroke="{stroke}"/>'
        )

    def circle(self, x, y, r, fill):
        self.elements.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(r)}" fill="{fill}"/>')

    def text(self, x, y, s, size=11, anchor="start", color="#222"):
        self.elements.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{size}" font-family="sans-serif" '
            f'text-anchor="{anchor}" fill="{color}">{_escape(s)}</text>'
        )

    def save(self, path):
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">'
        )
        body = "\n".join(self.elements)
        with open(path, "w") as fh:
            fh.write(head + "\n" + body + "\n</svg>\n")


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks or [lo, hi]


@dataclass
class Frame:
    """Maps data coordinates into a margin-framed canvas region."""

    canvas: SvgCanvas
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float
    left: int = 56
    right: int = 16
    top: int = 28
    bottom: int = 40

    def x(self, v: float) -> float:
        span = self.x_hi - self.x_lo or 1.0
        return self.left + (v - self.x_lo) / span * (self.canvas.width - self.left - self.right)

    def y(self, v: float) -> float:
        span = self.y_hi - self.y_lo or 1.0
        return (
            self.canvas.height
            - self.bottom
            - (v - self.y_lo) / span * (self.canvas.height - self.top - self.bottom)
        )

    def axes(self, title: str = "", x_label: str = "", y_label: str = ""):
        c = self.canvas
        c.line(self.left, self.y(self.y_lo), self.x(self.x_hi), self.y(self.y_lo), "#222")
        c.line(self.left, self.y(self.y_lo), self.left, self.y(self.y_hi), "#222")
        for t in _nice_ticks(self.x_lo, self.x_hi):
            if self.x_lo <= t <= self.x_hi:
                c.line(self.x(t), self.y(self.y_lo), self.x(t), self.y(self.y_lo) + 4, "#222")
                c.text(self.x(t), self.y(self.y_lo) + 16, _fmt(t), size=10, anchor="middle")
        for t in _nice_ticks(self.y_lo, self.y_hi):
            if self.y_lo <= t <= self.y_hi:
                c.line(self.left - 4, self.y(t), self.left, self.y(t), "#222")
                c.text(self.left - 7, self.y(t) + 3, _fmt(t), size=10, anchor="end")
        if title:
            c.text(c.width / 2, 16, title, size=13, anchor="middle")
        if x_label:
            c.text(c.width / 2, c.height - 8, x_label, size=11, anchor="middle")
        if y_label:
            c.text(14, self.top - 8, y_label, size=11)


def line_chart(
    path,
    series: dict[str, tuple[list[float], list[float]]],
    title: str = "",
    x_label: str = "epoch",
    y_label: str = "",
    width: int = 520,
    height: int = 320,
    y_range: tuple[float, float] | None = None,
):
    """One polyline per named series; single-point series render as dots."""
    xs_all = [x for xs, _ in series.values() for x in xs]
    ys_all = [y for _, ys in series.values() for y in ys]
    if not xs_all:
        raise ValueError("line_chart needs at least one point")
    x_lo, x_hi = min(xs_all), max(xs_all)
    if y_range is not None:
        y_lo, y_hi = y_range
    else:
        y_lo, y_hi = min(ys_all), max(ys_all)
        if y_hi <= y_lo:
            y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
        else:
            pad = 0.06 * (y_hi - y_lo)
            y_lo, y_hi = y_lo - pad, y_hi + pad
    if x_hi <= x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    canvas = SvgCanvas(width, height)
    frame = Frame(canvas, x_lo, x_hi, y_lo, y_hi)
    frame.axes(title, x_label, y_label)
    for i, (name, (xs, ys)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = [(frame.x(x), frame.y(y)) for x, y in zip(xs, ys)]
        if len(pts) == 1:
            canvas.circle(pts[0][0], pts[0][1], 3, color)
        else:
            canvas.polyline(pts, color)
        ly = frame.top + 14 * i
        canvas.line(width - 130, ly, width - 112, ly, color, 2)
        canvas.text(width - 108, ly + 4, name, size=10)
    canvas.save(path)


def heatmap(
    path,
    matrix,
    x_range: tuple[float, float],
    y_range: tuple[float, float],
    title: str = "",
    overlay: tuple[list[float], list[float]] | None = None,
    width: int = 460,
    height: int = 420,
):
    """Class matrix rendered cell by cell (row i is y index, ascending).

    ``overlay`` draws a curve (xs, ys) in data coordinates on top.
    """
    rows = len(matrix)
    cols = len(matrix[0])
    canvas = SvgCanvas(width, height)
    frame = Frame(canvas, x_range[0], x_range[1], y_range[0], y_range[1])
    cw = (frame.x(x_range[1]) - frame.x(x_range[0])) / cols
    ch = (frame.y(y_range[0]) - frame.y(y_range[1])) / rows
    for i in range(rows):
        for j in range(cols):
            val = matrix[i][j]
            fill = "#aec7e8" if val > 0 else "#ffbb78"
            x = frame.x(x_range[0]) + j * cw
            y = frame.y(y_range[0]) - (i + 1) * ch
            canvas.rect(x, y, cw + 0.5, ch + 0.5, fill)
    if overlay is not None:
        xs, ys = overlay
        canvas.polyline([(frame.x(x), frame.y(y)) for x, y in zip(xs, ys)], "#111", 2.0)
    frame.axes(title, "x1", "x2")
    canvas.save(path)


def bar_chart(
    path,
    values: list[float],
    labels: list[str] | None = None,
    title: str = "",
    y_label: str = "",
    width: int = 520,
    height: int = 320,
):
    """Vertical bars, positive up and negative down from a zero baseline."""
    if not values:
        raise ValueError("bar_chart needs at least one value")
    lo = min(0.0, min(values))
    hi = max(0.0, max(values))
    if hi <= lo:
        hi = lo + 1.0
    pad = 0.08 * (hi - lo)
    canvas = SvgCanvas(width, height)
    frame = Frame(canvas, -0.5, len(values) - 0.5, lo - pad, hi + pad)
    frame.axes(title, "", y_label)
    zero = frame.y(0.0)
    for i, v in enumerate(values):
        x = frame.x(i - 0.35)
        w = frame.x(i + 0.35) - x
        y = frame.y(max(v, 0.0))
        h = abs(zero - frame.y(v))
        canvas.rect(x, y, w, max(h, 0.5), "#1f77b4" if v >= 0 else "#d62728")
        if labels:
            canvas.text(frame.x(i), canvas.height - frame.bottom + 16, labels[i], size=9, anchor="middle")
    canvas.line(frame.left, zero, frame.x(len(values) - 0.5), zero, "#222")
    canvas.save(path)
