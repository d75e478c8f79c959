"""CSV tables and dependency-free SVG line plots.

Both writers are deterministic: the same input gives the same bytes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union
from xml.sax.saxutils import escape

import numpy as np

from .errors import EmptySeries

Cell = Union[float, int, str, bool]


def format_cell(v: Cell) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        s = format(float(v), ".17g")
        # keep floats recognizable as floats when read back
        if math.isfinite(v) and not any(ch in s for ch in ".e"):
            s += ".0"
        return s
    return str(v)


def parse_cell(s: str) -> Cell:
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


@dataclass
class CsvTable:
    header: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    meta: dict = field(default_factory=dict)  # written as one leading "# k=v;k=v" line

    def __post_init__(self):
        self.header = tuple(self.header)
        if len(set(self.header)) != len(self.header):
            raise ValueError(f"duplicate column names in {self.header}")
        self.rows = [tuple(r) for r in self.rows]
        for r in self.rows:
            self._check(r)

    def _check(self, row) -> None:
        if len(row) != len(self.header):
            raise ValueError(f"row of length {len(row)} in a table with {len(self.header)} columns")

    def append(self, row) -> None:
        row = tuple(row)
        self._check(row)
        self.rows.append(row)

    @classmethod
    def from_columns(cls, **columns) -> "CsvTable":
        names = list(columns)
        cols = [list(np.asarray(columns[k]).tolist()) for k in names]
        lengths = {len(c) for c in cols}
        if len(lengths) > 1:
            raise ValueError("columns have different lengths")
        return cls(tuple(names), list(zip(*cols)))

    def column(self, name: str) -> list:
        j = self.header.index(name)
        return [r[j] for r in self.rows]


def write_csv(table: CsvTable, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if table.meta:
            fh.write("# " + ";".join(f"{k}={format_cell(v)}" for k, v in table.meta.items()) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.header)
        for row in table.rows:
            writer.writerow([format_cell(v) for v in row])
    return path


def read_csv(path) -> CsvTable:
    meta = {}
    with open(path, newline="", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[0].startswith("# "):
        for item in lines.pop(0)[2:].split(";"):
            k, _, v = item.partition("=")
            meta[k] = parse_cell(v)
    reader = csv.reader(line for line in lines if line)
    header = next(reader)
    rows = [tuple(parse_cell(s) for s in row) for row in reader]
    return CsvTable(tuple(header), rows, meta)


# SVG -------------------------------------------------------------------------

@dataclass
class Series:
    name: str
    x: Sequence[float]
    y: Sequence[float]
    color: str = "black"
    dashed: bool = False
    width: float = 1.5


# default colors: wild type green, mutant red, KPP reference dashed blue
W_STYLE = {"color": "green"}
M_STYLE = {"color": "red"}
U_STYLE = {"color": "blue", "dashed": True}


def nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    """Ticks at multiples of 1, 2 or 5 times a power of ten, spanning ``[lo, hi]``."""
    if not hi > lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(target - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(k * mag for k in (1, 2, 5, 10) if k * mag >= raw)
    first = math.floor(lo / step + 1e-9)
    last = math.ceil(hi / step - 1e-9)
    return [round(k * step, 12) for k in range(first, last + 1)]


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    return format(v, ".6g")


def render_svg(
    series: Sequence[Series],
    title: str = "",
    xlabel: str = "x",
    ylabel: str = "",
    width: int = 640,
    height: int = 400,
    xlim: Optional[tuple[float, float]] = None,
    ylim: Optional[tuple[float, float]] = None,
) -> str:
    if not series:
        raise EmptySeries("nothing to plot")
    for s in series:
        if len(s.x) != len(s.y):
            raise ValueError(f"series {s.name!r}: x and y lengths differ")
        if len(s.x) == 0:
            raise EmptySeries(f"series {s.name!r} is empty")
    xs = np.concatenate([np.asarray(s.x, dtype=float) for s in series])
    ys = np.concatenate([np.asarray(s.y, dtype=float) for s in series])
    x0, x1 = xlim or (float(np.nanmin(xs)), float(np.nanmax(xs)))
    y0, y1 = ylim or (float(np.nanmin(ys)), float(np.nanmax(ys)))
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y1 = y0 + 1.0
    xt = nice_ticks(x0, x1)
    yt = nice_ticks(y0, y1)
    x0, x1 = min(x0, xt[0]), max(x1, xt[-1])
    y0, y1 = min(y0, yt[0]), max(y1, yt[-1])

    ml, mr, mt, mb = 60, 20, 30 if title else 15, 45
    pw, ph = width - ml - mr, height - mt - mb

    def px(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def py(v):
        return mt + (y1 - v) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{width / 2:.2f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>')
    out.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for v in xt:
        X = _fmt(px(v))
        out.append(f'<line x1="{X}" y1="{mt + ph}" x2="{X}" y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X}" y="{mt + ph + 17}" text-anchor="middle">{_tick_label(v)}</text>')
    for v in yt:
        Y = _fmt(py(v))
        out.append(f'<line x1="{ml - 5}" y1="{Y}" x2="{ml}" y2="{Y}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{Y}" text-anchor="end" dominant-baseline="middle">{_tick_label(v)}</text>')
    if xlabel:
        out.append(f'<text x="{ml + pw / 2:.2f}" y="{height - 8}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(
            f'<text x="14" y="{mt + ph / 2:.2f}" text-anchor="middle" '
            f'transform="rotate(-90 14 {mt + ph / 2:.2f})">{escape(ylabel)}</text>'
        )
    out.append(f'<clipPath id="plot"><rect x="{ml}" y="{mt}" width="{pw}" height="{ph}"/></clipPath>')
    for s in series:
        pts = " ".join(
            f"{_fmt(px(a))},{_fmt(py(b))}"
            for a, b in zip(np.asarray(s.x, dtype=float), np.asarray(s.y, dtype=float))
            if math.isfinite(a) and math.isfinite(b)
        )
        dash = ' stroke-dasharray="6 4"' if s.dashed else ""
        out.append(
            f'<polyline clip-path="url(#plot)" fill="none" stroke="{escape(s.color)}" '
            f'stroke-width="{s.width}"{dash} points="{pts}"/>'
        )
    # legend, top right
    lx = ml + pw - 110
    for k, s in enumerate(series):
        ly = mt + 14 + 16 * k
        dash = ' stroke-dasharray="6 4"' if s.dashed else ""
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="{escape(s.color)}" stroke-width="{s.width}"{dash}/>')
        out.append(f'<text x="{lx + 30}" y="{ly}" dominant-baseline="middle">{escape(s.name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg_plot(series: Sequence[Series], path, **style) -> Path:
    text = render_svg(series, **style)
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path
