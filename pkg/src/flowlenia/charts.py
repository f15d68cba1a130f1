"""Self-contained SVG charts for run directories.

No plotting dependency: charts are built as strings with fixed float
formatting, so regenerating from the same CSV yields identical bytes.
"""

from __future__ import annotations

import math

_W, _H = 640, 400
_ML, _MR, _MT, _MB = 62, 16, 22, 46

_STYLE = 'font-family="Helvetica,Arial,sans-serif" font-size="11"'


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Frame:
    """Maps data coordinates into the plot rectangle."""

    def __init__(self, x0, x1, y0, y1):
        if x1 == x0:
            x1 = x0 + 1.0
        if y1 == y0:
            y1 = y0 + 1.0
        self.x0, self.x1, self.y0, self.y1 = x0, x1, y0, y1

    def x(self, v: float) -> float:
        return _ML + (v - self.x0) / (self.x1 - self.x0) * (_W - _ML - _MR)

    def y(self, v: float) -> float:
        return _H - _MB - (v - self.y0) / (self.y1 - self.y0) * (_H - _MT - _MB)


def _axes(frame: _Frame, xticks, yticks, xlabel: str, ylabel: str) -> list[str]:
    parts = [
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" height="{_H - _MT - _MB}" '
        'fill="none" stroke="#444444" stroke-width="1"/>',
    ]
    for v in xticks:
        px = _fmt(frame.x(v))
        parts.append(
            f'<line x1="{px}" y1="{_H - _MB}" x2="{px}" y2="{_H - _MB + 4}" stroke="#444444"/>'
        )
        label = f"{v:g}"
        parts.append(
            f'<text x="{px}" y="{_H - _MB + 16}" text-anchor="middle" {_STYLE}>{label}</text>'
        )
    for v in yticks:
        py = _fmt(frame.y(v))
        parts.append(f'<line x1="{_ML - 4}" y1="{py}" x2="{_ML}" y2="{py}" stroke="#444444"/>')
        parts.append(
            f'<text x="{_ML - 7}" y="{py}" text-anchor="end" dominant-baseline="middle" '
            f"{_STYLE}>{v:g}</text>"
        )
    parts.append(
        f'<text x="{_fmt((_ML + _W - _MR) / 2)}" y="{_H - 10}" text-anchor="middle" '
        f"{_STYLE}>{xlabel}</text>"
    )
    parts.append(
        f'<text x="14" y="{_fmt((_MT + _H - _MB) / 2)}" text-anchor="middle" {_STYLE} '
        f'transform="rotate(-90 14 {_fmt((_MT + _H - _MB) / 2)})">{ylabel}</text>'
    )
    return parts


def _tick_range(lo: float, hi: float, n: int = 6) -> list[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9:
        ticks.append(round(v, 10))
        v += step
    return ticks


def _polyline(frame: _Frame, xs, ys, stroke: str, width: float, dash: str | None = None) -> str:
    pts = " ".join(f"{_fmt(frame.x(x))},{_fmt(frame.y(y))}" for x, y in zip(xs, ys))
    dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
    return (
        f'<polyline points="{pts}" fill="none" stroke="{stroke}" '
        f'stroke-width="{width}"{dash_attr}/>'
    )


def render_trend_svg(gens, best, mean, lo, hi) -> str:
    """Best (bold) and mean (dashed) complexity with a min-max band."""
    y_hi = max(max(hi), 0.1) * 1.05
    frame = _Frame(min(gens), max(gens), 0.0, y_hi)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">'
    ]
    parts += _axes(
        frame,
        _tick_range(min(gens), max(max(gens), min(gens) + 1)),
        _tick_range(0.0, y_hi),
        "generation",
        "complexity C(x, 0)",
    )
    band = [(g, v) for g, v in zip(gens, hi)] + [(g, v) for g, v in zip(gens[::-1], lo[::-1])]
    pts = " ".join(f"{_fmt(frame.x(x))},{_fmt(frame.y(y))}" for x, y in band)
    parts.append(f'<polygon points="{pts}" fill="#aec7e8" fill-opacity="0.45" stroke="none"/>')
    parts.append(_polyline(frame, gens, mean, "#1f77b4", 1.3, dash="6,4"))
    parts.append(_polyline(frame, gens, best, "#1f77b4", 2.6))
    if len(gens) == 1:
        for series, r in ((best, 3.5), (mean, 2.5)):
            parts.append(
                f'<circle cx="{_fmt(frame.x(gens[0]))}" cy="{_fmt(frame.y(series[0]))}" '
                f'r="{r}" fill="#1f77b4"/>'
            )
    lx = _W - _MR - 120
    parts.append(f'<line x1="{lx}" y1="{_MT + 12}" x2="{lx + 24}" y2="{_MT + 12}" stroke="#1f77b4" stroke-width="2.6"/>')
    parts.append(f'<text x="{lx + 30}" y="{_MT + 16}" {_STYLE}>best</text>')
    parts.append(f'<line x1="{lx}" y1="{_MT + 28}" x2="{lx + 24}" y2="{_MT + 28}" stroke="#1f77b4" stroke-width="1.3" stroke-dasharray="6,4"/>')
    parts.append(f'<text x="{lx + 30}" y="{_MT + 32}" {_STYLE}>mean</text>')
    parts.append(f'<rect x="{lx}" y="{_MT + 38}" width="24" height="9" fill="#aec7e8" fill-opacity="0.45"/>')
    parts.append(f'<text x="{lx + 30}" y="{_MT + 46}" {_STYLE}>min-max</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_hist_svg(
    initial,
    final,
    best: float,
    bin_width: float = 0.02,
    lo: float = 0.0,
    hi: float = 1.2,
) -> str:
    """Overlaid complexity histograms: initial population gray, final colored,
    best of the final population marked by a bold line."""
    n_bins = int(round((hi - lo) / bin_width))
    edges = [lo + i * bin_width for i in range(n_bins + 1)]

    def counts(values):
        c = [0] * n_bins
        for v in values:
            i = int((v - lo) / bin_width)
            if 0 <= i < n_bins:
                c[i] += 1
            elif v == hi:
                c[-1] += 1
        return c

    c_init = counts(initial)
    c_final = counts(final)
    y_hi = max(max(c_init, default=0), max(c_final, default=0), 1) * 1.1
    frame = _Frame(lo, hi, 0.0, y_hi)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">'
    ]
    parts += _axes(
        frame,
        _tick_range(lo, hi),
        _tick_range(0.0, y_hi),
        "complexity C(x, 0)",
        "individuals",
    )
    for cnts, color, opacity in ((c_init, "#999999", 0.6), (c_final, "#1f77b4", 0.55)):
        for i, c in enumerate(cnts):
            if c == 0:
                continue
            x = frame.x(edges[i])
            w = frame.x(edges[i + 1]) - x
            y = frame.y(c)
            h = frame.y(0) - y
            parts.append(
                f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}" '
                f'fill="{color}" fill-opacity="{opacity}"/>'
            )
    bx = _fmt(frame.x(min(max(best, lo), hi)))
    parts.append(
        f'<line x1="{bx}" y1="{_MT}" x2="{bx}" y2="{_H - _MB}" '
        'stroke="#d62728" stroke-width="2.6"/>'
    )
    lx = _W - _MR - 120
    parts.append(f'<rect x="{lx}" y="{_MT + 6}" width="24" height="9" fill="#999999" fill-opacity="0.6"/>')
    parts.append(f'<text x="{lx + 30}" y="{_MT + 14}" {_STYLE}>initial</text>')
    parts.append(f'<rect x="{lx}" y="{_MT + 22}" width="24" height="9" fill="#1f77b4" fill-opacity="0.55"/>')
    parts.append(f'<text x="{lx + 30}" y="{_MT + 30}" {_STYLE}>final</text>')
    parts.append(f'<line x1="{lx}" y1="{_MT + 42}" x2="{lx + 24}" y2="{_MT + 42}" stroke="#d62728" stroke-width="2.6"/>')
    parts.append(f'<text x="{lx + 30}" y="{_MT + 46}" {_STYLE}>best</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
