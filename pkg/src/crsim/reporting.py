"""Results serialization and figure rendering.

The grid results travel as a fixed-column CSV (one row per cell, floats
at 6 significant digits, deterministic order) and as SVG figures:

* estimate figures: one per dependence level, a panel per competing rate,
  mean Cox and Fine-Gray hazard ratios against the competing-event
  treatment effect, with a dashed horizontal reference at the true HR;
* bias figures: one per model, a panel per dependence level, one line per
  competing rate, a shaded band over the 0.7-0.9 range of the
  competing-event effect and a zero reference line.

Figures are rendered through matplotlib with a pinned hash salt, text
kept as text and path simplification off, so identical inputs produce
byte-identical SVG.  Panel rectangles and axis limits come from the
``*_geometry`` helpers; together with ``data_to_svg`` they define an
invertible mapping from data coordinates to SVG coordinates.
"""

from __future__ import annotations

import csv
import math
from dataclasses import fields

import matplotlib
from matplotlib.figure import Figure

from .engine import ScenarioSummary

__all__ = [
    "RESULT_COLUMNS",
    "bias_plot_geometry",
    "data_to_svg",
    "estimate_plot_geometry",
    "read_results_csv",
    "render_bias_plot",
    "render_estimate_plot",
    "write_results_csv",
]

RESULT_COLUMNS = tuple(f.name for f in fields(ScenarioSummary))
_INT_COLUMNS = {"n_reps_total", "n_converged_cox", "n_converged_fg", "degraded"}

SVG_RC = {
    "svg.hashsalt": "crsim",
    "svg.fonttype": "none",
    "path.simplify": False,
    "font.size": 9.0,
}

TRUE_HR_DEFAULT = 0.80
MINIMAL_BIAS_BAND = (0.7, 0.9)

COX_STYLE = {"color": "#c44e52", "linestyle": "-", "linewidth": 1.4}
FG_STYLE = {"color": "#4c72b0", "linestyle": "--", "linewidth": 1.4}
REFERENCE_STYLE = {"color": "0.35", "linestyle": "--", "linewidth": 1.0}
LAMBDA2_PALETTE = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860")

ESTIMATE_FIGSIZE = (10.8, 6.4)
BIAS_FIGSIZE = (9.6, 7.2)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _format_value(column: str, value) -> str:
    if column in _INT_COLUMNS:
        return str(int(value))
    return format(float(value), ".6g")


def _parse_value(column: str, text: str):
    if column == "degraded":
        return bool(int(text))
    if column in _INT_COLUMNS:
        return int(text)
    return float(text)


def write_results_csv(summaries, path) -> None:
    """Write one row per summary, in the given order, with a fixed header."""
    summaries = list(summaries)
    if not summaries:
        raise ValueError("refusing to write an empty results table")
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(RESULT_COLUMNS)
            for s in summaries:
                writer.writerow([_format_value(c, getattr(s, c)) for c in RESULT_COLUMNS])
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def read_results_csv(path) -> list[ScenarioSummary]:
    """Inverse of write_results_csv; strict about the header and row shape."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise ValueError(f"{path}: empty results file")
            if tuple(header) != RESULT_COLUMNS:
                raise ValueError(
                    f"{path}: unexpected header {header!r}; expected {list(RESULT_COLUMNS)!r}"
                )
            out = []
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(RESULT_COLUMNS):
                    raise ValueError(f"{path}: line {lineno}: expected "
                                     f"{len(RESULT_COLUMNS)} fields, got {len(row)}")
                try:
                    values = {c: _parse_value(c, v) for c, v in zip(RESULT_COLUMNS, row)}
                except ValueError as exc:
                    raise ValueError(f"{path}: line {lineno}: {exc}") from exc
                out.append(ScenarioSummary(**values))
    except OSError as exc:
        raise OSError(f"cannot read results from {path}: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# layout and coordinate mapping
# ---------------------------------------------------------------------------

def _panel_rects(nrows: int, ncols: int, *, left=0.075, right=0.985, bottom=0.09,
                 top=0.92, wspace=0.22, hspace=0.32) -> list[tuple[float, float, float, float]]:
    """Figure-fraction rectangles (x0, y0, w, h), row-major from the top left.

    Gaps are wspace/hspace fractions of one panel's width/height.
    """
    w = (right - left) / (ncols + (ncols - 1) * wspace)
    h = (top - bottom) / (nrows + (nrows - 1) * hspace)
    rects = []
    for r in range(nrows):
        y0 = top - h - r * h * (1 + hspace)
        for c in range(ncols):
            x0 = left + c * w * (1 + wspace)
            rects.append((x0, y0, w, h))
    return rects


def _padded_span(values, anchor=None, pad=0.06) -> tuple[float, float]:
    finite = [v for v in values if math.isfinite(v)]
    if anchor is not None:
        finite.append(anchor)
    if not finite:
        raise ValueError("no finite values to scale an axis around")
    lo, hi = min(finite), max(finite)
    span = max(hi - lo, 1e-6)
    return lo - pad * span, hi + pad * span


def data_to_svg(figsize, rect, xlim, ylim, x, y) -> tuple[float, float]:
    """Map a data point to SVG user units (1/72 inch, origin top-left)."""
    width_pt, height_pt = figsize[0] * 72.0, figsize[1] * 72.0
    fx = (x - xlim[0]) / (xlim[1] - xlim[0])
    fy = (y - ylim[0]) / (ylim[1] - ylim[0])
    sx = (rect[0] + fx * rect[2]) * width_pt
    sy = height_pt - (rect[1] + fy * rect[3]) * height_pt
    return sx, sy


def _cells_by_key(rows, outer_attr: str, inner_attr: str):
    outer = sorted({getattr(s, outer_attr) for s in rows})
    inner = sorted({getattr(s, inner_attr) for s in rows})
    index = {(getattr(s, outer_attr), getattr(s, inner_attr)): s for s in rows}
    missing = [(o, i) for o in outer for i in inner if (o, i) not in index]
    if missing:
        pairs = ", ".join(f"({outer_attr}={o:g}, {inner_attr}={i:g})" for o, i in missing)
        raise ValueError(f"incomplete grid, missing cells: {pairs}")
    return outer, inner, index


def estimate_plot_geometry(summaries, alpha: float, true_hr: float = TRUE_HR_DEFAULT) -> dict:
    """Panel layout and shared axis limits for one estimate figure."""
    rows = [s for s in summaries if s.alpha == alpha]
    if not rows:
        raise ValueError(f"no cells with alpha={alpha:g}")
    lambda2s, theta2s, index = _cells_by_key(rows, "lambda2", "theta2")
    if len(theta2s) < 2:
        raise ValueError("need at least two theta2 points per line")
    ncols = 3
    nrows = max(1, math.ceil(len(lambda2s) / ncols))
    rects = _panel_rects(nrows, ncols)
    hrs = [s.mean_hr_cox for s in rows] + [s.mean_hr_fg for s in rows]
    return {
        "figsize": ESTIMATE_FIGSIZE,
        "panels": list(zip(lambda2s, rects)),
        "theta2s": theta2s,
        "xlim": _padded_span(theta2s, pad=0.05),
        "ylim": _padded_span(hrs, anchor=true_hr),
        "index": index,
    }


def bias_plot_geometry(summaries, model: str) -> dict:
    """Panel layout and shared axis limits for one bias figure."""
    if model not in ("cox", "finegray"):
        raise ValueError(f"model must be 'cox' or 'finegray' (got {model!r})")
    attr = "bias_cox" if model == "cox" else "bias_fg"
    summaries = list(summaries)
    alphas = sorted({s.alpha for s in summaries})
    panels = []
    theta2s_all: set[float] = set()
    index = {}
    for a in alphas:
        rows = [s for s in summaries if s.alpha == a]
        lambda2s, theta2s, cell_index = _cells_by_key(rows, "lambda2", "theta2")
        theta2s_all.update(theta2s)
        panels.append((a, lambda2s, theta2s))
        index[a] = cell_index
    theta2s = sorted(theta2s_all)
    rects = _panel_rects(2, 2)
    biases = [getattr(s, attr) for s in summaries]
    return {
        "figsize": BIAS_FIGSIZE,
        "alphas": alphas,
        "panels": [(a, rect) for (a, _, _), rect in zip(panels, rects)],
        "lambda2s": sorted({s.lambda2 for s in summaries}),
        "theta2s": theta2s,
        "xlim": _padded_span(theta2s, pad=0.05),
        "ylim": _padded_span(biases, anchor=0.0),
        "index": index,
        "attr": attr,
    }


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

def _save_svg(fig: Figure, path) -> None:
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise OSError(f"cannot write figure to {path}: {exc}") from exc


def render_estimate_plot(summaries, alpha: float, path,
                         true_hr: float = TRUE_HR_DEFAULT) -> None:
    """Mean estimated HR against the competing-event effect, one panel per rate.

    Each panel shows a solid Cox line and a dashed Fine-Gray line over the
    theta2 grid, plus a dashed horizontal reference at the true HR.
    Raises ValueError when the alpha slice is absent or has missing cells.
    """
    geom = estimate_plot_geometry(summaries, alpha, true_hr)
    theta2s = geom["theta2s"]
    index = geom["index"]
    with matplotlib.rc_context(SVG_RC):
        fig = Figure(figsize=geom["figsize"])
        for pos, (lambda2, rect) in enumerate(geom["panels"]):
            ax = fig.add_axes(rect)
            ax.plot(theta2s, [index[(lambda2, t2)].mean_hr_cox for t2 in theta2s],
                    label="Cox", **COX_STYLE)
            ax.plot(theta2s, [index[(lambda2, t2)].mean_hr_fg for t2 in theta2s],
                    label="Fine-Gray", **FG_STYLE)
            ax.axhline(true_hr, **REFERENCE_STYLE)
            ax.set_xlim(*geom["xlim"])
            ax.set_ylim(*geom["ylim"])
            ax.set_title(f"competing rate {lambda2:g}/yr", fontsize=9)
            if pos == 0:
                ax.legend(loc="upper right", fontsize=8, framealpha=1.0)
            if pos % 3 == 0:
                ax.set_ylabel("mean estimated HR")
            if pos >= len(geom["panels"]) - 3:
                ax.set_xlabel("treatment HR on competing event")
        fig.suptitle(f"Primary-event HR estimates, dependence alpha = {alpha:g}")
        _save_svg(fig, path)


def render_bias_plot(summaries, model: str, path, *, allow_partial: bool = False) -> None:
    """Bias of the mean HR against the competing-event effect, per dependence.

    Four panels (one per dependence level) with one line per competing
    rate, a shaded band over the directionally-consistent 0.7-0.9 range
    and a zero reference.  Fewer than four dependence levels is an error
    unless allow_partial is set.
    """
    geom = bias_plot_geometry(summaries, model)
    if len(geom["alphas"]) != 4 and not allow_partial:
        raise ValueError(
            f"bias figure expects 4 dependence levels, got {len(geom['alphas'])} "
            f"(pass allow_partial=True to render anyway)"
        )
    theta2s = geom["theta2s"]
    lambda2s = geom["lambda2s"]
    model_label = "Cox" if model == "cox" else "Fine-Gray"
    with matplotlib.rc_context(SVG_RC):
        fig = Figure(figsize=geom["figsize"])
        for pos, (a, rect) in enumerate(geom["panels"]):
            ax = fig.add_axes(rect)
            ax.axvspan(*MINIMAL_BIAS_BAND, color="0.88", zorder=0)
            for k, lambda2 in enumerate(lambda2s):
                cells = geom["index"][a]
                ys = [getattr(cells[(lambda2, t2)], geom["attr"]) if (lambda2, t2) in cells
                      else math.nan for t2 in theta2s]
                ax.plot(theta2s, ys, color=LAMBDA2_PALETTE[k % len(LAMBDA2_PALETTE)],
                        linewidth=1.3, label=f"{lambda2:g}/yr")
            ax.axhline(0.0, color="0.2", linewidth=0.9)
            ax.set_xlim(*geom["xlim"])
            ax.set_ylim(*geom["ylim"])
            ax.set_title(f"dependence alpha = {a:g}", fontsize=9)
            if pos == 0:
                ax.legend(loc="lower left", fontsize=7, framealpha=1.0,
                          title="competing rate", title_fontsize=7)
            if pos % 2 == 0:
                ax.set_ylabel(f"{model_label} mean HR bias")
            if pos >= 2:
                ax.set_xlabel("treatment HR on competing event")
        fig.suptitle(f"{model_label} bias against the true HR")
        _save_svg(fig, path)
