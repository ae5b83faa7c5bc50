"""Figure construction for the five diagnostic plot kinds.

``build_figure`` turns a :class:`FigureSpec` into a matplotlib Figure
without touching pyplot or global state; ``render`` saves it as PNG.
Both are pure functions of the spec and the input files: a fixed rc
style, the Agg canvas, and pinned output metadata make reruns
byte-identical.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib as mpl
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .schema import (SUMMARY_COLUMNS, epsilon_from_name, read_distance_series,
                     read_run_log, read_snapshot, read_summary, read_sweep)

KINDS = ("distance_envelope", "ladder_trend", "field_energy",
         "penrose_sweep", "phase_space_scatter")

_RC = {
    "font.family": "DejaVu Sans",
    "font.size": 10,
    "axes.titlesize": 11,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "legend.framealpha": 0.9,
    "legend.fontsize": 9,
}

_PASS_COLOR = "#d8efd8"
_FAIL_COLOR = "#f3d1d1"


class FigureError(Exception):
    """Unusable figure request: unknown kind, no inputs, missing file,
    or inputs that cannot feed the requested kind."""


@dataclass(frozen=True)
class Style:
    dpi: int = 120
    figsize: tuple = (6.4, 4.2)
    cmap: str = "viridis"
    point_size: float = 2.0


@dataclass(frozen=True)
class FigureSpec:
    """What to draw, from which files, to which path."""

    kind: str
    inputs: tuple
    out: str
    style: Style = field(default_factory=Style)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FigureError(
                f"unknown figure kind {self.kind!r}; expected one of "
                f"{', '.join(KINDS)}")
        object.__setattr__(self, "inputs", tuple(str(p) for p in self.inputs))
        if not self.inputs:
            raise FigureError("figure spec has no input files")


# ---------------------------------------------------------------------------
# drawers: one per kind, return True iff any data was plotted
# ---------------------------------------------------------------------------


def _draw_distance_envelope(fig: Figure, spec: FigureSpec) -> bool:
    series_paths = [p for p in spec.inputs if not p.endswith(".csv")]
    summary_paths = [p for p in spec.inputs if p.endswith(".csv")]
    if not series_paths:
        raise FigureError(
            "distance_envelope needs at least one distance-series file")
    summary = read_summary(summary_paths[0]) if summary_paths else []

    ax = fig.add_subplot(111)
    ax.set_xlabel("time")
    ax.set_ylabel("W1 distance")
    ax.set_title("perturbation distance vs stability envelope")
    has_data = False
    for path in series_paths:
        series = read_distance_series(path)
        if series.times.size == 0:
            continue
        has_data = True
        eps = epsilon_from_name(Path(path).stem)
        label = f"eps {eps:g}" if eps is not None else Path(path).stem
        fitted_c = _fitted_constant(summary, eps)
        env_label = f"{label} envelope"
        if fitted_c is not None:
            env_label += f" (fitted C = {fitted_c:g})"
        ax.plot(series.times, series.measured, marker="o", markersize=3,
                label=f"{label} measured")
        ax.plot(series.times, series.envelope, linestyle="--",
                label=env_label)
    if has_data:
        ax.legend(loc="best")
    return has_data


def _fitted_constant(summary, eps):
    if eps is None:
        return None
    for row in summary:
        if math.isclose(row["epsilon"], eps, rel_tol=1e-9, abs_tol=1e-12):
            return row["fitted_C"]
    return None


def _draw_ladder_trend(fig: Figure, spec: FigureSpec) -> bool:
    rows = read_summary(spec.inputs[0])
    ax = fig.add_subplot(111)
    ax.set_title("epsilon-ladder summary")
    if not rows:
        return False
    ax.set_axis_off()
    cell_text = [[f"{r['epsilon']:g}", f"{r['eta']:.3g}",
                  f"{r['sup_W1']:.4g}", "pass" if r["verdict"] else "fail",
                  f"{r['fitted_C']:g}"] for r in rows]
    table = ax.table(cellText=cell_text, colLabels=list(SUMMARY_COLUMNS),
                     loc="center", cellLoc="center")
    table.auto_set_font_size(False)
    table.set_fontsize(9)
    table.scale(1.0, 1.4)
    for i, r in enumerate(rows):
        verdict_cell = table[i + 1, SUMMARY_COLUMNS.index("verdict")]
        verdict_cell.set_facecolor(_PASS_COLOR if r["verdict"]
                                   else _FAIL_COLOR)
    return True


def _draw_field_energy(fig: Figure, spec: FigureSpec) -> bool:
    ax = fig.add_subplot(111)
    ax.set_xlabel("time")
    ax.set_ylabel("field energy")
    ax.set_title("field energy growth")
    has_data = False
    log_safe = True
    for path in spec.inputs:
        log = read_run_log(path)
        times = log.column("time")
        energy = log.column("field")
        if times.size == 0:
            continue
        has_data = True
        log_safe = log_safe and bool((energy > 0).all())
        ax.plot(times, energy, marker=".", label=f"eps {log.epsilon:g}")
    if has_data:
        # exponential growth is the interesting regime; keep linear only
        # when a zero-energy sample would break the log axis
        if log_safe:
            ax.set_yscale("log")
        ax.legend(loc="best")
    return has_data


def _draw_penrose_sweep(fig: Figure, spec: FigureSpec) -> bool:
    table = read_sweep(spec.inputs[0])
    if table.values.size == 0:
        fig.add_subplot(111)
        return False
    n_panels = table.xis.size
    ncols = 2 if n_panels > 1 else 1
    nrows = math.ceil(n_panels / ncols)
    axes = fig.subplots(nrows, ncols, squeeze=False)
    vmin = float(table.values.min())
    vmax = float(table.values.max())
    mesh = None
    for i in range(nrows * ncols):
        ax = axes.flat[i]
        if i >= n_panels:
            ax.set_axis_off()
            continue
        mesh = ax.pcolormesh(table.taus, table.gammas, table.values[i],
                             cmap=spec.style.cmap, vmin=vmin, vmax=vmax,
                             shading="auto")
        ax.set_title(f"xi = {table.xis[i]:g}")
        if i // ncols == nrows - 1:
            ax.set_xlabel("tau")
        if i % ncols == 0:
            ax.set_ylabel("gamma")
    fig.colorbar(mesh, ax=list(axes.flat[:n_panels]), shrink=0.92)
    fig.suptitle(f"stability functional, infimum = {table.infimum:.4g}")
    return True


def _draw_phase_space_scatter(fig: Figure, spec: FigureSpec) -> bool:
    snap = read_snapshot(spec.inputs[0])
    ax = fig.add_subplot(111)
    ax.set_title(f"t = {snap.time:g}, eps = {snap.epsilon:g}, N = {snap.n}")
    if snap.n == 0:
        return False
    if snap.d == 1:
        ax.scatter(snap.positions[:, 0], snap.velocities[:, 0],
                   s=spec.style.point_size, c="#1f5fa8", alpha=0.6,
                   linewidths=0)
        ax.set_xlabel("x")
        ax.set_ylabel("v")
        ax.set_xlim(-0.5, 0.5)
    else:
        speed = np.hypot(snap.velocities[:, 0], snap.velocities[:, 1])
        points = ax.scatter(snap.positions[:, 0], snap.positions[:, 1],
                            s=spec.style.point_size, c=speed,
                            cmap=spec.style.cmap, alpha=0.8, linewidths=0)
        fig.colorbar(points, ax=ax, label="speed")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.set_xlim(-0.5, 0.5)
        ax.set_ylim(-0.5, 0.5)
    return True


_DRAWERS = {
    "distance_envelope": _draw_distance_envelope,
    "ladder_trend": _draw_ladder_trend,
    "field_energy": _draw_field_energy,
    "penrose_sweep": _draw_penrose_sweep,
    "phase_space_scatter": _draw_phase_space_scatter,
}


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------


def build_figure(spec: FigureSpec) -> Figure:
    """Parse the inputs and draw the figure in memory."""
    for path in spec.inputs:
        if not os.path.exists(path):
            raise FigureError(f"input file not found: {path}")
    with mpl.rc_context(_RC):
        fig = Figure(figsize=spec.style.figsize, dpi=spec.style.dpi,
                     layout="constrained")
        FigureCanvasAgg(fig)
        has_data = _DRAWERS[spec.kind](fig, spec)
        if not has_data:
            ax = fig.axes[0] if fig.axes else fig.add_subplot(111)
            ax.text(0.5, 0.5, "no data", transform=ax.transAxes,
                    ha="center", va="center", fontsize=14, color="0.45")
    return fig


def render(spec: FigureSpec) -> str:
    """Write the figure as PNG; returns the output path."""
    fig = build_figure(spec)
    out = Path(spec.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True)
    fig.savefig(out, format="png", dpi=spec.style.dpi,
                metadata={"Software": "vpme-plot"})
    return str(out)


__all__ = ["KINDS", "FigureError", "Style", "FigureSpec", "build_figure",
           "render"]
