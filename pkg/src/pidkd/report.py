"""Static SVG line charts, written directly (no plotting dependency)."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


@dataclass
class Series:
    label: str
    x: list
    y: list
    band: list | None = None  # half-width of a shaded region around y

    def __post_init__(self):
        if len(self.x) != len(self.y):
            raise ValueError(f"series {self.label!r}: x and y differ in length")
        if self.band is not None and len(self.band) != len(self.y):
            raise ValueError(f"series {self.label!r}: band length mismatch")


@dataclass
class Chart:
    title: str
    xlabel: str = ""
    ylabel: str = ""
    series: list = field(default_factory=list)
    width: int = 640
    height: int = 400


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.floor(lo / step) * step
    out, v = [], start
    while v <= hi + 1e-9 * step:
        if v >= lo - 1e-9 * step:
            out.append(round(v, 10))
        v += step
    return out


def render_svg(chart: Chart) -> str:
    pts = [(x, y) for s in chart.series for x, y in zip(s.x, s.y) if _finite(y)]
    for s in chart.series:
        if s.band:
            pts += [(x, y + b) for x, y, b in zip(s.x, s.y, s.band) if _finite(y)]
            pts += [(x, y - b) for x, y, b in zip(s.x, s.y, s.band) if _finite(y)]
    xs = [p[0] for p in pts] or [0, 1]
    ys = [p[1] for p in pts] or [0, 1]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    ml, mr, mt, mb = 64, 150, 36, 48
    w, h = chart.width, chart.height
    pw, ph = w - ml - mr, h - mt - mb

    def sx(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return mt + ph - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
           f'viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">',
           f'<rect width="{w}" height="{h}" fill="white"/>',
           f'<text x="{w / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(chart.title)}</text>']
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{ml}" y1="{sy(t):.1f}" x2="{ml + pw}" y2="{sy(t):.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{ml - 6}" y="{sy(t) + 4:.1f}" text-anchor="end">{t:g}</text>')
    for t in _ticks(x0, x1):
        out.append(f'<text x="{sx(t):.1f}" y="{mt + ph + 16}" text-anchor="middle">{t:g}</text>')
    out.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{h - 10}" text-anchor="middle">{escape(chart.xlabel)}</text>')
    out.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{escape(chart.ylabel)}</text>')
    for i, s in enumerate(chart.series):
        color = PALETTE[i % len(PALETTE)]
        good = [(x, y, (s.band[j] if s.band else 0.0)) for j, (x, y) in enumerate(zip(s.x, s.y)) if _finite(y)]
        if not good:
            continue
        if s.band:
            upper = " ".join(f"{sx(x):.1f},{sy(y + b):.1f}" for x, y, b in good)
            lower = " ".join(f"{sx(x):.1f},{sy(y - b):.1f}" for x, y, b in reversed(good))
            out.append(f'<polygon points="{upper} {lower}" fill="{color}" fill-opacity="0.18" stroke="none"/>')
        line = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y, _ in good)
        out.append(f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="1.8"/>')
        ly = mt + 14 + 16 * i
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly - 4}" x2="{ml + pw + 28}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 32}" y="{ly}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _finite(v) -> bool:
    return isinstance(v, (int, float)) and math.isfinite(v)


def read_csv_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def chart_from_csv(path, x: str, y: str, group: str | None = None, band: str | None = None,
                   title: str | None = None) -> Chart:
    """One series per distinct ``group`` value (or a single series)."""
    rows = read_csv_rows(path)
    if not rows:
        raise ValueError(f"{path}: no rows")
    for col in (x, y, group, band):
        if col and col not in rows[0]:
            raise ValueError(f"{path}: no column {col!r}")
    groups: dict[str, list] = {}
    for r in rows:
        groups.setdefault(r[group] if group else y, []).append(r)
    chart = Chart(title or Path(path).stem, x, y)
    for label, rs in groups.items():
        rs.sort(key=lambda r: float(r[x]))
        chart.series.append(Series(label, [float(r[x]) for r in rs], [_num(r[y]) for r in rs],
                                   [_num(r[band]) for r in rs] if band else None))
    return chart


def _num(v):
    try:
        return float(v)
    except (TypeError, ValueError):
        return float("nan")


def write_svg(chart: Chart, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_svg(chart))
    return path
