"""Standalone SVG figures: density comparison, MADD zones, ABROCA slices, MI bars.

Output is plain text assembled from fixed-precision coordinates, so equal
inputs always give byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .abroca import RocCurve, abroca
from .density import DensityVector, ProbabilityStep, bin_index
from .report import format2
from .smoothing import KdeCurve, zone_areas


class PlotKind(str, Enum):
    DENSITY_COMPARISON = "DensityComparison"
    MADD_ZONES = "MaddZones"
    ABROCA_SLICE = "AbrocaSlice"
    MI_BARS = "MiBars"


FILE_SUFFIX = {
    PlotKind.DENSITY_COMPARISON: "density",
    PlotKind.MADD_ZONES: "madd_zones",
    PlotKind.ABROCA_SLICE: "abroca",
    PlotKind.MI_BARS: "mi",
}

DEFAULT_COLORS = {
    "group0": "#1f77b4",
    "group1": "#ff7f0e",
    "fair": "#2ca02c",
    "madd": "#d62728",
}
SERIES_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2")


@dataclass
class PlotSpec:
    kind: PlotKind
    title: str = ""
    x_label: str = "predicted probability"
    y_label: str = "density"
    group_names: tuple[str, str] = ("group 0", "group 1")
    display_step: float = 0.1
    colors: dict = field(default_factory=lambda: dict(DEFAULT_COLORS))
    width: int = 640
    height: int = 420

    def __post_init__(self):
        self.kind = PlotKind(self.kind)
        ProbabilityStep(self.display_step)  # validates that the step divides 1


def plot_filename(course: str, model: str, feature: str, kind: PlotKind) -> str:
    return f"{course}_{model}_{feature}_{FILE_SUFFIX[PlotKind(kind)]}.svg"


def fmt(x: float) -> str:
    s = f"{float(x):.3f}"
    return "0.000" if s == "-0.000" else s


class _Canvas:
    def __init__(self, spec: PlotSpec, margin=(50, 20, 60, 65)):
        self.spec = spec
        self.top, self.right, self.bottom, self.left = margin
        self.parts: list[str] = []
        self.x0, self.x1 = 0.0, 1.0
        self.y0, self.y1 = 0.0, 1.0

    @property
    def plot_w(self) -> float:
        return self.spec.width - self.left - self.right

    @property
    def plot_h(self) -> float:
        return self.spec.height - self.top - self.bottom

    def px(self, x):
        return self.left + (np.asarray(x, dtype=float) - self.x0) / (self.x1 - self.x0) * self.plot_w

    def py(self, y):
        return self.top + self.plot_h - (np.asarray(y, dtype=float) - self.y0) / (self.y1 - self.y0) * self.plot_h

    def add(self, s: str) -> None:
        self.parts.append(s)

    def path(self, xs, ys, close=False, **attrs) -> None:
        pts = " L".join(f"{fmt(a)},{fmt(b)}" for a, b in zip(self.px(xs), self.py(ys)))
        self.add(f'<path d="M{pts}{" Z" if close else ""}"{_attrs(attrs)}/>')

    def rect(self, x, y, w, h, **attrs) -> None:
        self.add(f'<rect x="{fmt(x)}" y="{fmt(y)}" width="{fmt(w)}" height="{fmt(h)}"{_attrs(attrs)}/>')

    def line(self, x1, y1, x2, y2, **attrs) -> None:
        self.add(f'<line x1="{fmt(x1)}" y1="{fmt(y1)}" x2="{fmt(x2)}" y2="{fmt(y2)}"{_attrs(attrs)}/>')

    def text(self, x, y, s, **attrs) -> None:
        self.add(f'<text x="{fmt(x)}" y="{fmt(y)}"{_attrs(attrs)}>{escape(s)}</text>')

    def axes(self, x_ticks: Sequence[float], y_ticks: Sequence[float], y_fmt="{:.1f}") -> None:
        left, bottom = self.left, self.top + self.plot_h
        self.line(left, bottom, left + self.plot_w, bottom, stroke="#000")
        self.line(left, self.top, left, bottom, stroke="#000")
        for t in x_ticks:
            x = float(self.px(t))
            self.line(x, bottom, x, bottom + 5, stroke="#000")
            self.text(x, bottom + 18, f"{t:.1f}", **{"text-anchor": "middle", "font-size": "11"})
        for t in y_ticks:
            y = float(self.py(t))
            self.line(left - 5, y, left, y, stroke="#000")
            self.text(left - 8, y + 4, y_fmt.format(t), **{"text-anchor": "end", "font-size": "11"})
        s = self.spec
        self.text(left + self.plot_w / 2, s.height - 15, s.x_label, **{"text-anchor": "middle", "font-size": "12"})
        cx, cy = 16, self.top + self.plot_h / 2
        self.text(cx, cy, s.y_label, **{"text-anchor": "middle", "font-size": "12",
                                        "transform": f"rotate(-90 {fmt(cx)} {fmt(cy)})"})
        if s.title:
            self.text(s.width / 2, 24, s.title, **{"text-anchor": "middle", "font-size": "14"})

    def legend(self, entries: Sequence[tuple[str, str]], x=None, y=None) -> None:
        x = self.left + self.plot_w - 150 if x is None else x
        y = self.top + 8 if y is None else y
        for i, (name, color) in enumerate(entries):
            yy = y + 18 * i
            self.rect(x, yy, 12, 12, fill=color, **{"fill-opacity": "0.6"})
            self.text(x + 18, yy + 10, name, **{"font-size": "11"})

    def render(self) -> str:
        s = self.spec
        head = (
            '<?xml version="1.0" encoding="UTF-8" standalone="no"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{s.width}" '
            f'height="{s.height}" viewBox="0 0 {s.width} {s.height}" font-family="sans-serif">\n'
            f'<rect x="0" y="0" width="{s.width}" height="{s.height}" fill="#fff"/>\n'
        )
        return head + "\n".join(self.parts) + "\n</svg>\n"


def _attrs(attrs: dict) -> str:
    return "".join(f' {k.replace("_", "-")}="{escape(str(v), {chr(34): "&quot;"})}"' for k, v in attrs.items())


def _nice_max(v: float) -> float:
    if v <= 0:
        return 1.0
    mag = 10 ** np.floor(np.log10(v))
    for m in (1, 1.2, 1.5, 2, 2.5, 3, 4, 5, 6, 8, 10):
        if m * mag >= v:
            return float(m * mag)
    return float(10 * mag)


def _ticks(top: float, n: int = 5) -> list[float]:
    return [top * i / n for i in range(n + 1)]


def rebin(dv: DensityVector, display_step: float) -> DensityVector:
    """Re-count a density vector on a coarser display grid (half-up)."""
    step = ProbabilityStep(display_step)
    k = bin_index(dv.step.grid(), step)
    d = np.bincount(k, weights=dv.d, minlength=step.m)
    return DensityVector(step, d, dv.n_samples)


def plot_density_comparison(d0: DensityVector, d1: DensityVector, kde0: KdeCurve, kde1: KdeCurve,
                            means: tuple[float, float], spec: PlotSpec) -> str:
    """Per-group histograms at the display step with KDE overlays and mean lines.

    Bars show density per unit probability (mass / bar width) so they share
    the vertical scale of the KDE curves.
    """
    c = _Canvas(spec)
    col = (spec.colors["group0"], spec.colors["group1"])
    b0, b1 = rebin(d0, spec.display_step), rebin(d1, spec.display_step)
    w = spec.display_step
    h0, h1 = b0.d / w, b1.d / w
    c.x0, c.x1 = -w / 2, 1 + w / 2
    c.y1 = _nice_max(max(h0.max(), h1.max(), kde0.f.max(), kde1.f.max()))
    grid = b0.step.grid()
    for heights, color in ((h0, col[0]), (h1, col[1])):
        for x, h in zip(grid, heights):
            if h <= 0:
                continue
            left, top = float(c.px(x - w / 2)), float(c.py(h))
            c.rect(left, top, float(c.px(x + w / 2)) - left, float(c.py(0)) - top,
                   fill=color, fill_opacity="0.35", stroke=color, stroke_width="0.5")
    for kd, color in ((kde0, col[0]), (kde1, col[1])):
        c.path(kd.grid, kd.f, fill="none", stroke=color, stroke_width="2")
    for m, color in zip(means, col):
        x = float(c.px(m))
        c.line(x, c.top, x, float(c.py(0)), stroke=color, stroke_width="1.5", stroke_dasharray="4,3")
    c.axes([i / 10 for i in range(11)], _ticks(c.y1))
    c.legend([(f"{spec.group_names[0]} (mean {format2(means[0])})", col[0]),
              (f"{spec.group_names[1]} (mean {format2(means[1])})", col[1])], x=c.left + c.plot_w - 190)
    return c.render()


def plot_madd_zones(kde0: KdeCurve, kde1: KdeCurve, spec: PlotSpec) -> str:
    """Red band between the two curves, green area under their minimum."""
    areas = zone_areas(kde0, kde1)
    c = _Canvas(spec)
    g = kde0.grid
    lo, hi = np.minimum(kde0.f, kde1.f), np.maximum(kde0.f, kde1.f)
    c.y1 = _nice_max(float(hi.max()))
    xs = np.r_[g, g[::-1]]
    c.path(xs, np.r_[lo, np.zeros_like(lo)[::-1]], close=True, fill=spec.colors["fair"], fill_opacity="0.5",
           stroke="none")
    c.path(xs, np.r_[hi, lo[::-1]], close=True, fill=spec.colors["madd"], fill_opacity="0.5", stroke="none")
    c.path(g, kde0.f, fill="none", stroke=spec.colors["group0"], stroke_width="1.5")
    c.path(g, kde1.f, fill="none", stroke=spec.colors["group1"], stroke_width="1.5")
    c.axes([i / 10 for i in range(11)], _ticks(c.y1))
    c.legend([(spec.group_names[0], spec.colors["group0"]), (spec.group_names[1], spec.colors["group1"]),
              (f"MADD zone {format2(areas.madd_zone)}", spec.colors["madd"]),
              (f"fair zone {format2(areas.fair_zone)}", spec.colors["fair"])])
    return c.render()


def plot_abroca_slice(c0: RocCurve, c1: RocCurve, spec: PlotSpec) -> str:
    """Both ROC curves with the region between them shaded."""
    res = abroca(c0, c1)
    c = _Canvas(spec)
    # even-odd fill shades every lobe when the curves cross
    c.path(np.r_[c0.fpr, c1.fpr[::-1]], np.r_[c0.tpr, c1.tpr[::-1]], close=True,
           fill="#7f7f7f", fill_opacity="0.4", fill_rule="evenodd", stroke="none")
    c.line(float(c.px(0)), float(c.py(0)), float(c.px(1)), float(c.py(1)), stroke="#999", stroke_dasharray="3,3")
    c.path(c0.fpr, c0.tpr, fill="none", stroke=spec.colors["group0"], stroke_width="2")
    c.path(c1.fpr, c1.tpr, fill="none", stroke=spec.colors["group1"], stroke_width="2")
    c.axes([i / 5 for i in range(6)], [i / 5 for i in range(6)])
    c.legend([(spec.group_names[0], spec.colors["group0"]), (spec.group_names[1], spec.colors["group1"])],
             x=c.left + c.plot_w - 150, y=c.top + c.plot_h - 60)
    c.text(c.left + 10, c.top + 16, f"ABROCA = {format2(res.value)}", **{"font-size": "13"})
    return c.render()


def plot_mi_bars(scores, spec: PlotSpec) -> str:
    """Grouped bars per course; one bar per (sensitive, other feature) pair,
    colored by the sensitive feature."""
    values = scores.values if hasattr(scores, "values") and isinstance(scores.values, dict) else dict(scores)
    if not values:
        raise ValueError("no MI scores to plot")
    courses = sorted({k[0] for k in values})
    sensitive = []
    for _, s, _ in values:
        if s not in sensitive:
            sensitive.append(s)
    colors = {s: SERIES_PALETTE[i % len(SERIES_PALETTE)] for i, s in enumerate(sensitive)}
    groups = []
    for course in courses:
        keys = sorted((k for k in values if k[0] == course), key=lambda k: (sensitive.index(k[1]), k[2]))
        groups.append((course, keys))
    c = _Canvas(spec)
    n_bars = sum(len(k) for _, k in groups)
    gap = 1.0
    c.x0, c.x1 = 0.0, n_bars + gap * (len(groups) + 1)
    top = max(values.values())
    c.y1 = _nice_max(top) if top > 0 else 1.0
    x = gap
    for course, keys in groups:
        start = x
        for k in keys:
            v = values[k]
            left, right = float(c.px(x)), float(c.px(x + 1))
            y = float(c.py(v))
            c.rect(left, y, right - left, float(c.py(0)) - y, fill=colors[k[1]], stroke="none")
            x += 1
        mid = float(c.px((start + x) / 2))
        c.text(mid, c.top + c.plot_h + 18, course, **{"text-anchor": "middle", "font-size": "11"})
        x += gap
    c.axes([], _ticks(c.y1), y_fmt="{:.3f}")
    c.legend([(s, colors[s]) for s in sensitive])
    return c.render()
