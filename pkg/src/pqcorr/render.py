"""Dependency-free SVG output for heatmaps, dendrograms, MDS scatters and
series overlays. Element order is deterministic so documents diff cleanly."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .aggregate import AggregationMatrix
from .campaign import ParameterId, RegularTimeSeries, SiteId
from .matrices import CorrelationMatrix
from .structure import Dendrogram, Embedding

SEQUENTIAL = ("#f7fbff", "#c6dbef", "#6baed6", "#2171b5", "#08306b")
DIVERGING = ("#2166ac", "#67a9cf", "#f7f7f7", "#ef8a62", "#b2182b")
ABSENT_FILL = "url(#absent)"
PALETTE = ("#1f77b4", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


@dataclass
class StyleMap:
    colors: dict = field(default_factory=dict)
    category_of: dict = field(default_factory=dict)
    default_color: str = "#555555"
    font_family: str = "sans-serif"
    font_size: float = 10.0
    canvas: float = 720.0
    colormap: Optional[str] = None

    def color(self, label: str) -> str:
        cat = self.category_of.get(label)
        return self.colors.get(cat, self.default_color)

    @classmethod
    def for_parameters(cls, parameters: Iterable[ParameterId], **kw) -> "StyleMap":
        return cls(
            {"voltage": "#2ca02c", "current": "#d62728"},
            {p.code: p.quantity_kind.value for p in parameters},
            **kw,
        )

    @classmethod
    def for_sites(cls, sites: Iterable[SiteId], **kw) -> "StyleMap":
        return cls(
            {110: "#d62728", 220: "#2ca02c", 380: "#1f77b4"},
            {s.name: s.voltage_level for s in sites},
            **kw,
        )


def _hex(c: str) -> np.ndarray:
    return np.array([int(c[i : i + 2], 16) for i in (1, 3, 5)], dtype=float)


def ramp(stops: Sequence[str], t: float) -> str:
    """Linear interpolation through equally spaced color stops, t in [0, 1]."""
    t = min(1.0, max(0.0, float(t)))
    pos = t * (len(stops) - 1)
    i = min(int(pos), len(stops) - 2)
    frac = pos - i
    rgb = _hex(stops[i]) * (1 - frac) + _hex(stops[i + 1]) * frac
    return "#" + "".join(f"{int(round(v)):02x}" for v in rgb)


def _num(v: float) -> str:
    s = f"{v:.2f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


class _Doc:
    def __init__(self, width: float, height: float, style: StyleMap):
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_num(width)}" '
            f'height="{_num(height)}" viewBox="0 0 {_num(width)} {_num(height)}" '
            f'font-family={quoteattr(style.font_family)} font-size="{_num(style.font_size)}">',
        ]

    def add(self, s: str):
        self.parts.append(s)

    def text(self, x, y, s, cls, anchor="start", fill=None, rotate=None):
        attrs = f'class="{cls}" x="{_num(x)}" y="{_num(y)}" text-anchor="{anchor}"'
        if fill:
            attrs += f' fill="{fill}"'
        if rotate is not None:
            attrs += f' transform="rotate({_num(rotate)} {_num(x)} {_num(y)})"'
        self.add(f"<text {attrs}>{escape(str(s))}</text>")

    def close(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def heatmap_geometry(n: int, style: StyleMap) -> dict:
    cell = min(24.0, max(2.0, style.canvas / max(n, 1)))
    margin = 12 + style.font_size * 6
    return {"cell": cell, "margin": margin, "width": margin + n * cell + 90, "height": margin + n * cell + 20}


def render_heatmap(
    matrix: Union[CorrelationMatrix, AggregationMatrix], style: Optional[StyleMap] = None, title: str = ""
) -> str:
    """One ``rect.cell`` per entry in row-major order; absent entries are hatched."""
    style = style or StyleMap()
    if isinstance(matrix, AggregationMatrix):
        values, labels, lo, hi, stops = matrix.shares, matrix.labels, 0.0, 1.0, SEQUENTIAL
    else:
        values, labels, lo, hi, stops = matrix.entries, matrix.labels, -1.0, 1.0, DIVERGING
    if style.colormap == "sequential":
        stops = SEQUENTIAL
    elif style.colormap == "diverging":
        stops = DIVERGING
    n = len(labels)
    if n == 0:
        raise ValueError("cannot render an empty matrix")
    g = heatmap_geometry(n, style)
    cell, m = g["cell"], g["margin"]
    doc = _Doc(g["width"], g["height"], style)
    doc.add(
        '<defs><pattern id="absent" width="4" height="4" patternUnits="userSpaceOnUse">'
        '<rect width="4" height="4" fill="#ffffff"/><path d="M0,4 L4,0" stroke="#999999" stroke-width="0.8"/>'
        "</pattern>"
        '<linearGradient id="legend-ramp" x1="0" y1="1" x2="0" y2="0">'
        + "".join(f'<stop offset="{_num(i / (len(stops) - 1))}" stop-color="{c}"/>' for i, c in enumerate(stops))
        + "</linearGradient></defs>"
    )
    if title:
        doc.text(m, 14, title, "title")
    show_labels = cell >= 6
    for i, lab in enumerate(labels):
        if show_labels:
            doc.text(m - 4, m + (i + 0.7) * cell, lab, "row-label", "end", style.color(lab))
            doc.text(m + (i + 0.7) * cell, m - 4, lab, "col-label", "start", style.color(lab), rotate=-60)
    for i in range(n):
        for j in range(n):
            v = values[i, j]
            absent = np.isnan(v)
            fill = ABSENT_FILL if absent else ramp(stops, (v - lo) / (hi - lo))
            extra = ' data-absent="1"' if absent else f' data-value="{float(v)!r}"'
            doc.add(
                f'<rect class="cell" x="{_num(m + j * cell)}" y="{_num(m + i * cell)}" '
                f'width="{_num(cell)}" height="{_num(cell)}" fill="{fill}"{extra}/>'
            )
    lx = m + n * cell + 20
    doc.add(f'<rect class="legend" x="{_num(lx)}" y="{_num(m)}" width="14" height="{_num(n * cell)}" fill="url(#legend-ramp)"/>')
    doc.text(lx + 18, m + 8, _num(hi), "legend-label")
    doc.text(lx + 18, m + n * cell, _num(lo), "legend-label")
    return doc.close()


def render_dendrogram(dendrogram: Dendrogram, style: Optional[StyleMap] = None, title: str = "") -> str:
    """Leaves along the bottom; each merge is one ``path.bracket`` at its height."""
    style = style or StyleMap()
    n = dendrogram.n_leaves
    pitch = min(24.0, max(4.0, style.canvas / n))
    left, top, plot_h = 50.0, 24.0, 300.0
    bottom = top + plot_h
    width = left + n * pitch + 20
    height = bottom + style.font_size * 6
    hmax = max(float(dendrogram.heights.max()) if n > 1 else 0.0, 1e-12)
    doc = _Doc(width, height, style)
    if title:
        doc.text(left, 14, title, "title")

    def y_of(h):
        return bottom - h / hmax * plot_h

    doc.add(f'<line class="axis" x1="{_num(left - 6)}" y1="{_num(top)}" x2="{_num(left - 6)}" y2="{_num(bottom)}" stroke="#000000"/>')
    for t in np.linspace(0, hmax, 5):
        doc.text(left - 9, y_of(t) + 3, f"{t:.2f}", "tick", "end")
    doc.text(12, top + plot_h / 2, "linkage distance", "axis-label", "middle", rotate=-90)

    xs = {}
    for pos, leaf in enumerate(dendrogram.leaf_order()):
        xs[leaf] = left + (pos + 0.5) * pitch
        lab = dendrogram.labels[leaf]
        doc.text(xs[leaf], bottom + 10, lab, "leaf-label", "end", style.color(lab), rotate=-60)
    for k, mg in enumerate(dendrogram.merges):
        xl, xr = xs[mg.left], xs[mg.right]
        yl, yr = y_of(dendrogram.node_height(mg.left)), y_of(dendrogram.node_height(mg.right))
        ym = y_of(mg.height)
        xs[n + k] = (xl + xr) / 2
        doc.add(
            f'<path class="bracket" d="M{_num(xl)},{_num(yl)} V{_num(ym)} H{_num(xr)} V{_num(yr)}" '
            f'fill="none" stroke="#333333" data-height="{mg.height!r}"/>'
        )
    return doc.close()


def render_scatter(
    embedding: Embedding, style: Optional[StyleMap] = None, show_labels: bool = True, title: str = ""
) -> str:
    """First two embedding axes; one ``circle.marker`` per label in label order."""
    style = style or StyleMap()
    if embedding.k < 2:
        raise ValueError("scatter needs an embedding with at least two axes")
    xy = embedding.coordinates[:, :2]
    size = style.canvas * 0.75
    pad = 40.0
    span = float(np.abs(xy).max()) or 1.0
    doc = _Doc(size + 2 * pad, size + 2 * pad, style)
    if title:
        doc.text(pad, 14, title, "title")
    c = pad + size / 2

    def px(v):
        return c + v / span * (size / 2)

    def py(v):
        return c - v / span * (size / 2)

    doc.add(f'<line class="axis" x1="{_num(pad)}" y1="{_num(c)}" x2="{_num(pad + size)}" y2="{_num(c)}" stroke="#cccccc"/>')
    doc.add(f'<line class="axis" x1="{_num(c)}" y1="{_num(pad)}" x2="{_num(c)}" y2="{_num(pad + size)}" stroke="#cccccc"/>')
    for lab, (x, y) in zip(embedding.labels, xy):
        doc.add(f'<circle class="marker" cx="{_num(px(x))}" cy="{_num(py(y))}" r="4" fill="{style.color(lab)}"/>')
    if show_labels:
        for lab, (x, y) in zip(embedding.labels, xy):
            doc.text(px(x) + 5, py(y) - 5, lab, "point-label", fill=style.color(lab))
    return doc.close()


def min_max(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """(v - min) / (max - min) over present values; constant series map to 0.5."""
    out = np.full(values.shape, np.nan)
    if not mask.any():
        return out
    lo, hi = values[mask].min(), values[mask].max()
    out[mask] = 0.5 if hi == lo else (values[mask] - lo) / (hi - lo)
    return out


def render_series(
    series: Union[Mapping[str, RegularTimeSeries], Sequence[RegularTimeSeries]],
    normalize: bool = True,
    style: Optional[StyleMap] = None,
    title: str = "",
) -> str:
    """One ``polyline.series`` per input on a shared time axis; gaps are skipped."""
    style = style or StyleMap()
    items = list(series.items()) if isinstance(series, Mapping) else [(str(i), s) for i, s in enumerate(series)]
    if not items:
        raise ValueError("need at least one series")
    t0 = min(s.start for _, s in items)
    t1 = max(s.end for _, s in items)
    width, height, pad = style.canvas, style.canvas * 0.5, 40.0
    if normalize:
        scaled = [min_max(s.values, s.mask) for _, s in items]
        lo, hi = 0.0, 1.0
    else:
        scaled = [np.where(s.mask, s.values, np.nan) for _, s in items]
        present = np.concatenate([v[~np.isnan(v)] for v in scaled])
        lo, hi = (float(present.min()), float(present.max())) if present.size else (0.0, 1.0)
        if hi == lo:
            lo, hi = lo - 0.5, hi + 0.5
    doc = _Doc(width + 2 * pad, height + 2 * pad, style)
    if title:
        doc.text(pad, 14, title, "title")
    doc.add(
        f'<rect class="frame" x="{_num(pad)}" y="{_num(pad)}" width="{_num(width)}" height="{_num(height)}" '
        'fill="none" stroke="#000000"/>'
    )
    doc.text(pad - 4, pad + 4, _num(hi), "tick", "end")
    doc.text(pad - 4, pad + height, _num(lo), "tick", "end")
    span = max(t1 - t0, 1)
    for idx, ((lab, s), v) in enumerate(zip(items, scaled)):
        t = s.start + np.arange(len(s)) * s.cadence
        ok = ~np.isnan(v)
        xs = pad + (t[ok] - t0) / span * width
        ys = pad + height - (v[ok] - lo) / (hi - lo) * height
        pts = " ".join(f"{_num(x)},{_num(y)}" for x, y in zip(xs, ys))
        color = style.colors.get(style.category_of.get(lab), PALETTE[idx % len(PALETTE)])
        doc.add(
            f'<polyline class="series" data-label={quoteattr(lab)} points="{pts}" fill="none" '
            f'stroke="{color}" stroke-width="0.6" stroke-opacity="0.6"/>'
        )
    return doc.close()
