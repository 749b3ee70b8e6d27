"""Static SVG figures with CSV twins.

Every plot returns a :class:`PlotOutput` whose CSV carries each datum the
SVG draws, so the figure can be regenerated from the table alone. Output
depends only on the inputs and the :class:`PlotSpec` (including its jitter
seed), never on wall clock or global random state.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .attribution import ShapMatrix
from .dataset import Dataset
from .importance import ImportanceReport, variance_importance
from .model import Model, predict_margin
from .svg import Canvas, nice_ticks, tick_label

log = logging.getLogger(__name__)

MISSING_COLOR = "#000000"
MEAN_LINE_MAX_DISTINCT = 50


@dataclass(frozen=True)
class PlotSpec:
    width: int = 720
    height: int = 480
    top_k: int = 20
    low_color: str = "#1e88e5"
    high_color: str = "#ff0d57"
    missing_color: str = MISSING_COLOR
    seed: int = 0
    dot_radius: float = 2.5
    bins: int = 20

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be at least 1")


@dataclass(frozen=True)
class PlotOutput:
    svg: str
    csv: str

    def write(self, out_dir, stem: str) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        svg_path, csv_path = out / f"{stem}.svg", out / f"{stem}.csv"
        svg_path.write_text(self.svg, encoding="utf-8")
        csv_path.write_text(self.csv, encoding="utf-8")
        return svg_path, csv_path


@dataclass(frozen=True)
class PdpCurve:
    feature: str
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.grid) != len(self.values):
            raise ValueError("one curve value per grid point required")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")


def odds_from_logodds(delta: float) -> float:
    """Odds ratio corresponding to a log-odds difference."""
    return math.exp(delta)


# -- helpers ---------------------------------------------------------------

def _hex_to_rgb(color: str) -> tuple[int, int, int]:
    c = color.lstrip("#")
    return int(c[0:2], 16), int(c[2:4], 16), int(c[4:6], 16)


def blend(low: str, high: str, t: float) -> str:
    t = min(max(t, 0.0), 1.0)
    a, b = _hex_to_rgb(low), _hex_to_rgb(high)
    return "#" + "".join(f"{round(x + (y - x) * t):02x}" for x, y in zip(a, b))


def color_fractions(values: np.ndarray) -> np.ndarray:
    """Min-max scale to [0, 1] after clipping at the 1st/99th percentiles.

    Missing entries stay NaN; a constant column maps to 0.5.
    """
    values = np.asarray(values, dtype=float)
    out = np.full(values.shape, np.nan)
    ok = ~np.isnan(values)
    if not ok.any():
        return out
    lo, hi = np.percentile(values[ok], [1, 99])
    if hi > lo:
        out[ok] = np.clip((values[ok] - lo) / (hi - lo), 0.0, 1.0)
    else:
        out[ok] = 0.5
    return out


def point_colors(values: np.ndarray, spec: PlotSpec) -> list[str]:
    frac = color_fractions(values)
    return [spec.missing_color if np.isnan(f) else blend(spec.low_color, spec.high_color, f) for f in frac]


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _span(lo: float, hi: float) -> tuple[float, float]:
    if not hi > lo:
        return lo - 1.0, hi + 1.0
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


class _Axis:
    def __init__(self, lo, hi, px_lo, px_hi):
        self.lo, self.hi, self.px_lo, self.px_hi = lo, hi, px_lo, px_hi

    def __call__(self, v):
        return self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)


def _check_rows(shap: ShapMatrix, dataset: Dataset):
    if shap.n_rows != dataset.n_rows:
        raise ValueError(f"attribution matrix has {shap.n_rows} rows, dataset has {dataset.n_rows}")


def _color_legend(c: Canvas, x, y, h, spec: PlotSpec, label: str):
    steps = 20
    for s in range(steps):
        t = 1 - s / (steps - 1)
        c.rect(x, y + s * h / steps, 8, h / steps + 0.5, fill=blend(spec.low_color, spec.high_color, t))
    c.text(x + 12, y + 8, "high", size=9)
    c.text(x + 12, y + h, "low", size=9)
    c.text(x + 40, y + h / 2, label, size=9, anchor="middle", rotate=90)


# -- summary ---------------------------------------------------------------

def summary_plot(shap: ShapMatrix, dataset: Dataset, spec: PlotSpec = PlotSpec()) -> PlotOutput:
    """Beeswarm-style overview: one row per feature, ordered by variance importance."""
    _check_rows(shap, dataset)
    report = variance_importance(shap)
    top_k = spec.top_k
    if top_k > shap.n_features:
        log.warning("top_k=%d exceeds %d features; clamping", top_k, shap.n_features)
        top_k = shap.n_features
    order = list(report.ranking[:top_k])
    rng = np.random.default_rng(spec.seed)

    row_h = max(18.0, (spec.height - 70) / max(top_k, 1))
    height = int(max(spec.height, 70 + row_h * top_k))
    left, right, top = 170.0, spec.width - 60.0, 20.0
    shown = shap.phi[:, order]
    xlo, xhi = _span(float(shown.min(initial=0.0)), float(shown.max(initial=0.0)))
    xa = _Axis(xlo, xhi, left, right)

    c = Canvas(spec.width, height, title="summary plot")
    bottom = top + row_h * top_k
    c.line(xa(0.0), top, xa(0.0), bottom, stroke="#999999")
    rows = []
    for r, i in enumerate(order):
        name = shap.feature_names[i]
        values = dataset.column(name)
        colors = point_colors(values, spec)
        jitter = rng.uniform(-1.0, 1.0, size=shap.n_rows)
        cy = top + row_h * (r + 0.5)
        c.line(left, cy, right, cy, stroke="#eeeeee", width=0.5)
        c.text(left - 8, cy + 4, name, anchor="end")
        c.open_group(feature=name)
        for j in range(shap.n_rows):
            phi = float(shap.phi[j, i])
            c.circle(xa(phi), cy + jitter[j] * row_h * 0.35, spec.dot_radius, fill=colors[j])
            missing = bool(np.isnan(values[j]))
            rows.append((name, r + 1, shap.row_ids[j], phi, float(values[j]), int(missing), float(jitter[j]), colors[j]))
        c.close_group()
    for t in nice_ticks(xlo, xhi):
        c.line(xa(t), bottom, xa(t), bottom + 4)
        c.text(xa(t), bottom + 16, tick_label(t), size=9, anchor="middle")
    c.line(left, bottom, right, bottom)
    c.text((left + right) / 2, bottom + 34, "SHAP value (log-odds)", anchor="middle")
    _color_legend(c, right + 16, top, min(160.0, bottom - top), spec, "feature value")
    header = ("feature", "rank", "row_id", "phi", "value", "is_missing", "jitter", "color")
    return PlotOutput(c.to_string(), _csv(header, rows))


# -- dependence ------------------------------------------------------------

def dependence_means(shap: ShapMatrix, dataset: Dataset, feature: str) -> tuple[np.ndarray, np.ndarray]:
    """Mean attribution at each distinct observed value of ``feature``."""
    _check_rows(shap, dataset)
    x = dataset.column(feature)
    y = shap.column(feature)
    ok = ~np.isnan(x)
    levels = np.unique(x[ok])
    means = np.array([y[ok][x[ok] == v].mean() for v in levels])
    return levels, means


def dependence_plot(
    shap: ShapMatrix,
    dataset: Dataset,
    feature: str,
    color_by: str | None = None,
    spec: PlotSpec = PlotSpec(),
) -> PlotOutput:
    """Scatter of feature value against attribution with marginal histograms.

    Rows with the feature missing have no x position; they are left out of
    the scatter and x histogram and counted in a ``missing`` row of the CSV.
    """
    _check_rows(shap, dataset)
    x = dataset.column(feature)
    y = shap.column(feature)
    if color_by is not None:
        cvals = dataset.column(color_by)
        colors = point_colors(cvals, spec)
    else:
        cvals = np.full(len(x), np.nan)
        colors = [spec.low_color] * len(x)
    ok = ~np.isnan(x)
    n_missing = int((~ok).sum())

    hist_px = 70.0
    left, right = 70.0 + hist_px, spec.width - (70.0 if color_by else 30.0)
    top, bottom = 20.0 + hist_px, spec.height - 50.0
    xlo, xhi = _span(float(x[ok].min()) if ok.any() else 0.0, float(x[ok].max()) if ok.any() else 0.0)
    ylo, yhi = _span(float(y.min(initial=0.0)), float(y.max(initial=0.0)))
    xa, ya = _Axis(xlo, xhi, left, right), _Axis(ylo, yhi, bottom, top)

    x_counts, x_edges = np.histogram(x[ok], bins=spec.bins, range=(xlo, xhi))
    y_counts, y_edges = np.histogram(y, bins=spec.bins, range=(ylo, yhi))

    c = Canvas(spec.width, spec.height, title=f"dependence plot: {feature}")
    c.line(left, ya(0.0), right, ya(0.0), stroke="#cccccc", dash="3,3")
    rows = []
    c.open_group(series="points")
    for j in np.flatnonzero(ok):
        c.circle(xa(x[j]), ya(y[j]), spec.dot_radius, fill=colors[j], fill_opacity="0.8")
        rows.append(("point", shap.row_ids[j], float(x[j]), float(y[j]), float(cvals[j]), colors[j], None, None, None))
    c.close_group()

    levels, means = dependence_means(shap, dataset, feature)
    if 0 < len(levels) <= MEAN_LINE_MAX_DISTINCT:
        c.polyline([(xa(v), ya(m)) for v, m in zip(levels, means)], stroke="#333333", series="mean")
        rows.extend(("mean", None, float(v), float(m), None, None, None, None, None) for v, m in zip(levels, means))

    xmax = max(int(x_counts.max(initial=0)), 1)
    for k, cnt in enumerate(x_counts):
        x0, x1 = xa(x_edges[k]), xa(x_edges[k + 1])
        h = cnt / xmax * (hist_px - 10)
        c.rect(x0, top - 5 - h, x1 - x0, h, fill="#9e9e9e", stroke="#ffffff")
        rows.append(("xhist", None, None, None, None, None, float(x_edges[k]), float(x_edges[k + 1]), int(cnt)))
    ymax = max(int(y_counts.max(initial=0)), 1)
    for k, cnt in enumerate(y_counts):
        y0, y1 = ya(y_edges[k]), ya(y_edges[k + 1])
        w = cnt / ymax * (hist_px - 10)
        c.rect(left - 5 - w, y1, w, y0 - y1, fill="#9e9e9e", stroke="#ffffff")
        rows.append(("yhist", None, None, None, None, None, float(y_edges[k]), float(y_edges[k + 1]), int(cnt)))
    rows.append(("missing", None, None, None, None, None, None, None, n_missing))

    c.line(left, bottom, right, bottom)
    c.line(left, top, left, bottom)
    for t in nice_ticks(xlo, xhi):
        c.line(xa(t), bottom, xa(t), bottom + 4)
        c.text(xa(t), bottom + 16, tick_label(t), size=9, anchor="middle")
    for t in nice_ticks(ylo, yhi):
        c.line(left, ya(t), left + 4, ya(t))
        c.text(left + 7, ya(t) + 3, tick_label(t), size=9)
    c.text((left + right) / 2, bottom + 34, feature, anchor="middle")
    c.text(14, (top + bottom) / 2, f"SHAP value for {feature} (log-odds)", anchor="middle", rotate=-90)
    if n_missing:
        c.text(right, bottom + 34, f"missing: {n_missing}", size=9, anchor="end")
    if color_by is not None:
        _color_legend(c, right + 20, top, min(160.0, bottom - top), spec, color_by)
    header = ("series", "row_id", "x", "y", "color_value", "color", "bin_lo", "bin_hi", "count")
    return PlotOutput(c.to_string(), _csv(header, rows))


# -- partial dependence ----------------------------------------------------

def pdp_grid(values: np.ndarray, grid_size: int = 20) -> np.ndarray:
    """Quantile-spaced grid drawn from the observed values themselves."""
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    obs = np.asarray(values, dtype=float)
    obs = obs[~np.isnan(obs)]
    if obs.size == 0:
        raise ValueError("feature is entirely missing")
    q = np.quantile(obs, np.linspace(0.0, 1.0, grid_size), method="inverted_cdf")
    return np.unique(q)


def partial_dependence(
    model: Model,
    dataset: Dataset,
    feature: str,
    grid_size: int = 20,
    grid: Sequence[float] | None = None,
) -> PdpCurve:
    """Mean margin over the dataset with ``feature`` forced to each grid value."""
    data = dataset if dataset.feature_names == tuple(model.feature_names) else dataset.reorder(model.feature_names)
    col = data.index(feature)
    if grid is None:
        grid = pdp_grid(data.values[:, col], grid_size)
    else:
        grid = np.unique(np.asarray(grid, dtype=float))
    X = np.array(data.values, dtype=float)
    out = np.empty(len(grid))
    for g, value in enumerate(grid):
        X[:, col] = value
        out[g] = np.mean([predict_margin(model, row) for row in X])
    return PdpCurve(feature, np.asarray(grid, dtype=float), out)


def pdp_plot(curve: PdpCurve, spec: PlotSpec = PlotSpec()) -> PlotOutput:
    left, right, top, bottom = 70.0, spec.width - 30.0, 20.0, spec.height - 50.0
    xlo, xhi = _span(float(curve.grid.min()), float(curve.grid.max()))
    ylo, yhi = _span(float(curve.values.min()), float(curve.values.max()))
    xa, ya = _Axis(xlo, xhi, left, right), _Axis(ylo, yhi, bottom, top)
    c = Canvas(spec.width, spec.height, title=f"partial dependence: {curve.feature}")
    c.polyline([(xa(g), ya(v)) for g, v in zip(curve.grid, curve.values)], stroke=spec.high_color, width=2)
    for g, v in zip(curve.grid, curve.values):
        c.circle(xa(g), ya(v), 2.0, fill=spec.high_color)
    c.line(left, bottom, right, bottom)
    c.line(left, top, left, bottom)
    for t in nice_ticks(xlo, xhi):
        c.line(xa(t), bottom, xa(t), bottom + 4)
        c.text(xa(t), bottom + 16, tick_label(t), size=9, anchor="middle")
    for t in nice_ticks(ylo, yhi):
        c.line(left - 4, ya(t), left, ya(t))
        c.text(left - 7, ya(t) + 3, tick_label(t), size=9, anchor="end")
    c.text((left + right) / 2, bottom + 34, curve.feature, anchor="middle")
    c.text(14, (top + bottom) / 2, "mean margin (log-odds)", anchor="middle", rotate=-90)
    rows = [(curve.feature, float(g), float(v)) for g, v in zip(curve.grid, curve.values)]
    return PlotOutput(c.to_string(), _csv(("feature", "grid", "mean_margin"), rows))


# -- importance bars -------------------------------------------------------

def importance_plot(report: ImportanceReport, top_k: int = 20, spec: PlotSpec = PlotSpec()) -> PlotOutput:
    if top_k < 1:
        raise ValueError("top_k must be at least 1")
    order = list(report.ranking[:top_k])
    bar_h = 18.0
    left, right, top = 170.0, spec.width - 80.0, 20.0
    height = int(top + bar_h * len(order) + 50)
    smax = float(report.scores[order].max(initial=0.0)) or 1.0
    c = Canvas(spec.width, height, title=f"feature importance ({report.method})")
    rows = []
    for r, i in enumerate(order):
        name, score = report.feature_names[i], float(report.scores[i])
        y = top + r * bar_h
        w = score / smax * (right - left)
        c.rect(left, y + 2, w, bar_h - 4, fill=spec.low_color)
        c.text(left - 8, y + bar_h / 2 + 4, name, anchor="end")
        c.text(left + w + 4, y + bar_h / 2 + 4, f"{score:.4g}", size=9)
        rows.append((r + 1, name, score, w))
    bottom = top + bar_h * len(order)
    c.line(left, top, left, bottom)
    c.text((left + right) / 2, bottom + 24, f"importance ({report.method})", anchor="middle")
    return PlotOutput(c.to_string(), _csv(("rank", "feature", "score", "bar_px"), rows))
