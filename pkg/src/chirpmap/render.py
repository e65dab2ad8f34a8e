"""Static SVG figures.

Every figure is assembled as plain SVG 1.1 text with fixed-precision
coordinates, so identical inputs produce byte-identical documents. No
raster formats, no plotting library.

Palette: class 0 / outcome S is teal, class 1 / outcome NR is magenta,
outcome F is cyan; difficulty levels and sensitivity magnitudes go
through the viridis lookup table. Hex values are project constants
(captions name the colors only).
"""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .colormap import viridis_hex
from .errors import DataError

TEAL = "#008080"
MAGENTA = "#ff00ff"
CYAN = "#00ffff"

OUTCOME_COLORS = {"S": TEAL, "NR": MAGENTA, "F": CYAN}
BINARY_CLASS_COLORS = (TEAL, MAGENTA)  # class 0, class 1

_PLOT_KINDS = ("bars", "scatter", "boundary", "confusion", "sensitivity")


@dataclass(frozen=True)
class PlotSpec:
    kind: str
    title: str = ""
    width: int = 640
    height: int = 480
    x_label: str = ""
    y_label: str = ""

    def __post_init__(self):
        if self.kind not in _PLOT_KINDS:
            raise DataError(f"unknown plot kind {self.kind!r}")
        if self.width < 100 or self.height < 100:
            raise DataError("figure must be at least 100 x 100 px")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Svg:
    """Accumulates SVG elements; deterministic text out."""

    def __init__(self, width: int, height: int, provenance: dict | None = None):
        self.width = width
        self.height = height
        self.parts: list[str] = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" version="1.1">'
        ]
        if provenance:
            fields = " ".join(f"{k}={provenance[k]}" for k in sorted(provenance))
            self.parts.append(f"<!-- provenance: {escape(fields)} -->")
        self.parts.append(f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>')

    def rect(self, x, y, w, h, fill, opacity=None, stroke=None):
        attrs = f'x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}" fill="{fill}"'
        if opacity is not None:
            attrs += f' fill-opacity="{opacity}"'
        if stroke is not None:
            attrs += f' stroke="{stroke}"'
        self.parts.append(f"<rect {attrs}/>")

    def circle(self, cx, cy, r, fill, opacity=None):
        attrs = f'cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(r)}" fill="{fill}"'
        if opacity is not None:
            attrs += f' fill-opacity="{opacity}"'
        self.parts.append(f"<circle {attrs}/>")

    def line(self, x1, y1, x2, y2, stroke="#333333", width=1.0):
        self.parts.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="{stroke}" stroke-width="{_fmt(width)}"/>'
        )

    def text(self, x, y, content, size=12, anchor="start", fill="#222222", bold=False):
        weight = ' font-weight="bold"' if bold else ""
        self.parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-family="Helvetica,Arial,sans-serif" '
            f'font-size="{size}" text-anchor="{anchor}" fill="{fill}"{weight}>{escape(str(content))}</text>'
        )

    def to_string(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _categorical_palette(categories) -> dict:
    palette = {}
    for cat in categories:
        key = str(cat)
        if key in OUTCOME_COLORS:
            palette[cat] = OUTCOME_COLORS[key]
        elif key in {"1", "2", "3", "4"}:
            palette[cat] = viridis_hex((int(key) - 1) / 3.0)
        else:
            palette[cat] = "#888888"
    return palette


def render_bars(
    distribution: dict,
    spec: PlotSpec | None = None,
    palette: dict | None = None,
    provenance: dict | None = None,
) -> str:
    """Bar chart of category proportions with the percentage printed on
    every bar. Categories keep their input order; absent categories never
    appear.
    """
    if not distribution:
        raise DataError("empty distribution")
    spec = spec or PlotSpec(kind="bars")
    palette = palette or _categorical_palette(distribution.keys())
    svg = _Svg(spec.width, spec.height, provenance)
    if spec.title:
        svg.text(spec.width / 2, 24, spec.title, size=15, anchor="middle", bold=True)

    left, right, top, bottom = 60, 20, 48, 56
    plot_w = spec.width - left - right
    plot_h = spec.height - top - bottom
    cats = list(distribution.keys())
    vmax = max(distribution.values())
    if vmax <= 0:
        raise DataError("distribution has no positive proportions")
    slot = plot_w / len(cats)
    bar_w = slot * 0.6

    svg.line(left, spec.height - bottom, spec.width - right, spec.height - bottom)
    svg.line(left, top, left, spec.height - bottom)
    for i, cat in enumerate(cats):
        v = distribution[cat]
        h = plot_h * (v / vmax)
        x = left + i * slot + (slot - bar_w) / 2
        y = spec.height - bottom - h
        if cat not in palette:
            raise DataError(f"palette missing category {cat!r}")
        svg.rect(x, y, bar_w, h, palette[cat])
        svg.text(x + bar_w / 2, y - 6, f"{100.0 * v:.1f}%", anchor="middle", size=12)
        svg.text(x + bar_w / 2, spec.height - bottom + 18, str(cat), anchor="middle", size=12)
    if spec.x_label:
        svg.text(spec.width / 2, spec.height - 12, spec.x_label, anchor="middle", size=12)
    if spec.y_label:
        svg.text(16, top - 10, spec.y_label, size=12)
    return svg.to_string()


def _data_window(coords: np.ndarray, pad: float) -> tuple[float, float, float, float]:
    x_min, x_max = float(coords[:, 0].min()), float(coords[:, 0].max())
    y_min, y_max = float(coords[:, 1].min()), float(coords[:, 1].max())
    span_x, span_y = x_max - x_min, y_max - y_min
    if span_x == 0 and span_y == 0:
        raise DataError("degenerate bounding box: all points identical")
    # an axis with zero spread borrows half the other axis's span
    dx = span_x * pad if span_x > 0 else max(span_x, span_y) * 0.5
    dy = span_y * pad if span_y > 0 else max(span_x, span_y) * 0.5
    return x_min - dx, x_max + dx, y_min - dy, y_max + dy


class _Frame:
    """Maps data coordinates into the pixel plot area (y flipped)."""

    def __init__(self, window, left, top, plot_w, plot_h):
        self.x0, self.x1, self.y0, self.y1 = window
        self.left, self.top = left, top
        self.plot_w, self.plot_h = plot_w, plot_h

    def px(self, x: float) -> float:
        return self.left + (x - self.x0) / (self.x1 - self.x0) * self.plot_w

    def py(self, y: float) -> float:
        return self.top + (self.y1 - y) / (self.y1 - self.y0) * self.plot_h


def _draw_frame(svg: _Svg, spec: PlotSpec, frame: _Frame) -> None:
    svg.rect(frame.left, frame.top, frame.plot_w, frame.plot_h, "none", stroke="#333333")
    if spec.title:
        svg.text(spec.width / 2, 24, spec.title, size=15, anchor="middle", bold=True)
    if spec.x_label:
        svg.text(frame.left + frame.plot_w / 2, spec.height - 10, spec.x_label, anchor="middle")
    if spec.y_label:
        svg.text(14, frame.top + frame.plot_h / 2, spec.y_label)


def render_labeled_embedding(
    coords,
    labels,
    spec: PlotSpec | None = None,
    palette: dict | None = None,
    provenance: dict | None = None,
) -> str:
    """Scatter of embedding points colored by category, with a legend
    listing only the categories actually present.
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    labels = list(labels)
    if coords.shape[0] != len(labels):
        raise DataError("labels misaligned with coords")
    if coords.shape[0] == 0:
        raise DataError("no points to draw")
    spec = spec or PlotSpec(kind="scatter")
    present = sorted(set(labels), key=str)
    palette = palette or _categorical_palette(present)
    for cat in present:
        if cat not in palette:
            raise DataError(f"palette missing category {cat!r}")

    svg = _Svg(spec.width, spec.height, provenance)
    left, right, top, bottom = 52, 110, 44, 44
    frame = _Frame(
        _data_window(coords, 0.05), left, top, spec.width - left - right, spec.height - top - bottom
    )
    _draw_frame(svg, spec, frame)
    for (x, y), lab in zip(coords, labels):
        svg.circle(frame.px(x), frame.py(y), 2.5, palette[lab], opacity=0.8)
    lx = spec.width - right + 14
    for i, cat in enumerate(present):
        ly = top + 12 + i * 20
        svg.rect(lx, ly - 9, 12, 12, palette[cat])
        svg.text(lx + 18, ly + 1, str(cat), size=12)
    return svg.to_string()


def boundary_grid(
    model, coords, g: int = 300, pad: float = 0.05
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Class predictions on a uniform g x g grid of cell centers spanning
    the padded bounding box of coords. Returns (x_centers, y_centers,
    predictions[g, g]) with predictions[row, col] at (x_centers[col],
    y_centers[row]).
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    if g < 2:
        raise DataError("grid resolution must be at least 2")
    x0, x1, y0, y1 = _data_window(coords, pad)
    cell_w = (x1 - x0) / g
    cell_h = (y1 - y0) / g
    xc = x0 + (np.arange(g) + 0.5) * cell_w
    yc = y0 + (np.arange(g) + 0.5) * cell_h
    gx, gy = np.meshgrid(xc, yc)
    points = np.column_stack([gx.ravel(), gy.ravel()])
    preds = np.asarray(model.predict(points), dtype=np.int64).reshape(g, g)
    return xc, yc, preds


def render_boundary(
    model,
    points,
    spec: PlotSpec | None = None,
    g: int = 300,
    pad: float = 0.05,
    provenance: dict | None = None,
) -> str:
    """Decision regions under the training scatter.

    The model is evaluated at every cell center of a g x g grid over the
    padded bounding box; runs of equal predictions merge into single
    rects per row. Class 0 fills teal, class 1 magenta; the true points
    draw on top in full color.
    """
    coords = points.coords
    labels = points.labels
    spec = spec or PlotSpec(kind="boundary", width=640, height=640)
    xc, yc, preds = boundary_grid(model, coords, g=g, pad=pad)

    x0, x1, y0, y1 = _data_window(coords, pad)
    svg = _Svg(spec.width, spec.height, provenance)
    left, right, top, bottom = 52, 110, 44, 44
    frame = _Frame((x0, x1, y0, y1), left, top, spec.width - left - right, spec.height - top - bottom)

    cell_w_px = frame.plot_w / g
    cell_h_px = frame.plot_h / g
    for row in range(g):
        # pixel y of the TOP edge of this row's cell (rows follow yc, ascending data y)
        y_px = frame.top + frame.plot_h - (row + 1) * cell_h_px
        col = 0
        while col < g:
            cls = preds[row, col]
            run = col
            while run < g and preds[row, run] == cls:
                run += 1
            svg.rect(
                frame.left + col * cell_w_px,
                y_px,
                (run - col) * cell_w_px,
                cell_h_px,
                BINARY_CLASS_COLORS[int(cls) % 2],
                opacity=0.30,
            )
            col = run
    _draw_frame(svg, spec, frame)
    for (x, y), lab in zip(coords, labels):
        svg.circle(frame.px(x), frame.py(y), 2.5, BINARY_CLASS_COLORS[int(lab) % 2])
    lx = spec.width - right + 14
    for i, name in enumerate(("class 0", "class 1")):
        ly = top + 12 + i * 20
        svg.rect(lx, ly - 9, 12, 12, BINARY_CLASS_COLORS[i])
        svg.text(lx + 18, ly + 1, name, size=12)
    return svg.to_string()


def render_sensitivity(
    coords,
    magnitudes,
    feature_name: str,
    spec: PlotSpec | None = None,
    provenance: dict | None = None,
) -> str:
    """Embedding scatter colored by combined attribution magnitude.

    Magnitudes are min-max normalized (smallest -> 0, largest -> 1) and
    mapped through viridis; a vertical color-scale legend shows the raw
    min and max. A uniform map (zero span) renders at mid-scale.
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    mags = np.asarray(magnitudes, dtype=np.float64)
    if coords.shape[0] != mags.shape[0]:
        raise DataError("magnitudes misaligned with coords")
    if coords.shape[0] == 0:
        raise DataError("no points to draw")
    spec = spec or PlotSpec(kind="sensitivity")
    lo, hi = float(mags.min()), float(mags.max())
    span = hi - lo
    t = np.full(mags.shape, 0.5) if span == 0 else (mags - lo) / span

    svg = _Svg(spec.width, spec.height, provenance)
    left, right, top, bottom = 52, 120, 44, 44
    frame = _Frame(
        _data_window(coords, 0.05), left, top, spec.width - left - right, spec.height - top - bottom
    )
    _draw_frame(svg, spec, frame)
    if not spec.title:
        svg.text(spec.width / 2, 24, feature_name, size=15, anchor="middle", bold=True)
    for (x, y), ti in zip(coords, t):
        svg.circle(frame.px(x), frame.py(y), 2.5, viridis_hex(float(ti)), opacity=0.9)

    # color scale: stacked samples of the colormap, max at the top
    bar_x = spec.width - right + 24
    bar_h = frame.plot_h * 0.7
    bar_y = top + (frame.plot_h - bar_h) / 2
    n_stops = 50
    step = bar_h / n_stops
    for i in range(n_stops):
        ti = 1.0 - (i + 0.5) / n_stops
        svg.rect(bar_x, bar_y + i * step, 16, step + 0.5, viridis_hex(ti))
    svg.text(bar_x + 22, bar_y + 10, f"{hi:.3g}", size=11)
    svg.text(bar_x + 22, bar_y + bar_h, f"{lo:.3g}", size=11)
    return svg.to_string()


def render_confusion(
    confusions: dict,
    spec: PlotSpec | None = None,
    provenance: dict | None = None,
) -> str:
    """2x2 confusion grids, one per classifier, counts printed in every
    cell; shading scales with the count.
    """
    if not confusions:
        raise DataError("no confusion matrices to draw")
    spec = spec or PlotSpec(kind="confusion", width=760, height=260)
    svg = _Svg(spec.width, spec.height, provenance)
    if spec.title:
        svg.text(spec.width / 2, 22, spec.title, size=15, anchor="middle", bold=True)

    names = list(confusions.keys())
    slot_w = spec.width / len(names)
    grid = 64.0
    top = 70.0
    for k, name in enumerate(names):
        cm = confusions[name]
        cells = {
            (0, 0): ("TP", cm["tp"]),
            (0, 1): ("FN", cm["fn"]),
            (1, 0): ("FP", cm["fp"]),
            (1, 1): ("TN", cm["tn"]),
        }
        total = max(1, cm["tp"] + cm["fp"] + cm["tn"] + cm["fn"])
        ox = k * slot_w + (slot_w - 2 * grid) / 2
        svg.text(ox + grid, top - 26, name, anchor="middle", size=12, bold=True)
        svg.text(ox - 6, top + grid, "actual", anchor="end", size=10)
        svg.text(ox + grid, top - 8, "predicted", anchor="middle", size=10)
        for (r, c), (label, count) in sorted(cells.items()):
            shade = count / total
            fill = viridis_hex(shade)
            x = ox + c * grid
            y = top + r * grid
            svg.rect(x, y, grid, grid, fill, stroke="#333333")
            text_color = "#ffffff" if shade < 0.5 else "#111111"
            svg.text(x + grid / 2, y + grid / 2 - 4, label, anchor="middle", size=10, fill=text_color)
            svg.text(x + grid / 2, y + grid / 2 + 12, str(count), anchor="middle", size=12, fill=text_color, bold=True)
    return svg.to_string()


def render_metric_bars(
    metrics_by_classifier: dict,
    spec: PlotSpec | None = None,
    provenance: dict | None = None,
) -> str:
    """Grouped bars: one group per classifier, one bar per metric, with
    the numeric value printed above each bar.
    """
    if not metrics_by_classifier:
        raise DataError("no metrics to draw")
    spec = spec or PlotSpec(kind="bars", width=760, height=360)
    metric_names = ("accuracy", "precision", "recall", "f1")
    metric_colors = {
        "accuracy": "#4c78a8",
        "precision": "#f58518",
        "recall": "#54a24b",
        "f1": "#b279a2",
    }
    svg = _Svg(spec.width, spec.height, provenance)
    if spec.title:
        svg.text(spec.width / 2, 22, spec.title, size=15, anchor="middle", bold=True)

    left, right, top, bottom = 56, 20, 56, 64
    plot_w = spec.width - left - right
    plot_h = spec.height - top - bottom
    names = list(metrics_by_classifier.keys())
    slot = plot_w / len(names)
    bar_w = slot / (len(metric_names) + 1)
    base_y = spec.height - bottom

    svg.line(left, base_y, spec.width - right, base_y)
    svg.line(left, top, left, base_y)
    for frac in (0.25, 0.5, 0.75, 1.0):
        gy = base_y - plot_h * frac
        svg.line(left - 4, gy, left, gy)
        svg.text(left - 8, gy + 4, f"{frac:.2f}", anchor="end", size=10)
    for k, name in enumerate(names):
        vals = metrics_by_classifier[name]
        for m, metric in enumerate(metric_names):
            v = float(vals[metric])
            h = plot_h * min(max(v, 0.0), 1.0)
            x = left + k * slot + (m + 0.5) * bar_w
            svg.rect(x, base_y - h, bar_w * 0.9, h, metric_colors[metric])
            svg.text(x + bar_w * 0.45, base_y - h - 4, f"{v:.3f}", anchor="middle", size=9)
        svg.text(left + k * slot + slot / 2, base_y + 16, name, anchor="middle", size=11)
    for m, metric in enumerate(metric_names):
        lx = left + m * 120
        svg.rect(lx, spec.height - 28, 10, 10, metric_colors[metric])
        svg.text(lx + 14, spec.height - 19, metric, size=11)
    return svg.to_string()
