"""Figure rendering from exported CSV/JSON artifacts.

Inputs are the documented export formats:

* region CSV: ``vertex_id,r_m,vy_m_s,value`` (value empty where undefined);
* trajectory CSV: ``t_s,chart,x_m,y_m,vx_m_s,vy_m_s,front_foot_x_m,
  back_foot_x_m,event``;
* plan JSON: step list with realized gait labels and transition indices.

Nothing is simulated here; the figures are a pure view of the data.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import matplotlib.tri as mtri  # noqa: E402
import numpy as np  # noqa: E402

KINDS = (
    "stability",
    "viability",
    "one-step",
    "transition-overlay",
    "trajectory",
)

STEP_CAP = 25
WINDOW_CAP_DEG = 10.0


class FigureError(RuntimeError):
    """Unusable input: missing file, missing columns, or no data rows."""


@dataclass
class FigureSpec:
    kind: str
    inputs: list
    out: Path
    title: Optional[str] = None
    cap: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise FigureError(f"unknown figure kind {self.kind!r}; "
                              f"expected one of {', '.join(KINDS)}")
        if not self.inputs:
            raise FigureError("at least one --input file is required")


def _read_region_csv(path) -> tuple:
    """Load a region CSV into (r, vy, value) arrays; empty values become nan."""
    path = Path(path)
    if not path.exists():
        raise FigureError(f"input file not found: {path}")
    rs, vys, vals = [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"vertex_id", "r_m", "vy_m_s", "value"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise FigureError(
                f"{path}: expected columns {sorted(required)}, "
                f"got {reader.fieldnames}")
        for row in reader:
            rs.append(float(row["r_m"]))
            vys.append(float(row["vy_m_s"]))
            vals.append(float(row["value"]) if row["value"] else math.nan)
    if not rs:
        raise FigureError(f"{path}: no data rows")
    return np.array(rs), np.array(vys), np.array(vals)


def _read_trajectory_csv(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FigureError(f"input file not found: {path}")
    cols = {"t_s": [], "chart": [], "y_m": [], "vy_m_s": [], "event": []}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(cols) <= set(reader.fieldnames):
            raise FigureError(
                f"{path}: expected columns {sorted(cols)}, got {reader.fieldnames}")
        for row in reader:
            cols["t_s"].append(float(row["t_s"]))
            cols["chart"].append(row["chart"])
            cols["y_m"].append(float(row["y_m"]))
            cols["vy_m_s"].append(float(row["vy_m_s"]))
            cols["event"].append(row["event"])
    if not cols["t_s"]:
        raise FigureError(f"{path}: no data rows")
    return {k: (np.array(v) if k in ("t_s", "y_m", "vy_m_s") else v)
            for k, v in cols.items()}


def _region_axes(ax):
    ax.set_xlabel("leg length r (m)")
    ax.set_ylabel("vertical speed $v_y$ (m/s)")


def _disc_outline(ax, r, vy):
    """Draw the convex boundary of the sampled section disc."""
    r0 = (r.min() + r.max()) / 2.0
    vy0 = (vy.min() + vy.max()) / 2.0
    a = (r.max() - r.min()) / 2.0
    b = (vy.max() - vy.min()) / 2.0
    t = np.linspace(0.0, 2.0 * np.pi, 256)
    ax.plot(r0 + a * np.cos(t), vy0 + b * np.sin(t), color="0.3", lw=0.8)


def _heatmap(ax, r, vy, values, cap, cbar_label, zero_white=False):
    tri = mtri.Triangulation(r, vy)
    vals = np.where(np.isfinite(values), values, np.nan)
    shown = np.minimum(np.nan_to_num(vals, nan=0.0), cap)
    # Triangles whose vertices are all undefined (or zero, when zeros mean
    # "outside the region") stay white.
    dead = ~np.isfinite(vals) if not zero_white else (~np.isfinite(vals) | (vals <= 0.0))
    tri.set_mask(np.all(dead[tri.triangles], axis=1))
    im = ax.tripcolor(tri, shown, shading="gouraud", vmin=0.0, vmax=cap,
                      cmap="viridis")
    _disc_outline(ax, r, vy)
    cb = plt.colorbar(im, ax=ax)
    cb.set_label(cbar_label)
    return im


def _render_region_heatmap(spec: FigureSpec, cap, label, zero_white):
    r, vy, vals = _read_region_csv(spec.inputs[0])
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    _heatmap(ax, r, vy, vals, cap, label, zero_white=zero_white)
    _region_axes(ax)
    ax.set_title(spec.title or spec.kind)
    return fig


def _render_transition_overlay(spec: FigureSpec):
    if len(spec.inputs) < 2:
        raise FigureError(
            "transition-overlay needs two inputs: a window region CSV and "
            "a transition-angle region CSV")
    r, vy, window = _read_region_csv(spec.inputs[0])
    r2, vy2, alpha = _read_region_csv(spec.inputs[1])
    if r.size != r2.size:
        raise FigureError("overlay inputs sample different meshes")
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    cap = spec.cap if spec.cap is not None else WINDOW_CAP_DEG
    _heatmap(ax, r, vy, window, cap, "landing window (deg)", zero_white=True)
    has_angle = np.isfinite(alpha)
    ax.plot(r2[has_angle], vy2[has_angle], ".", ms=2.5, color="crimson",
            label="transition available")
    if has_angle.any():
        ax.legend(loc="upper right", fontsize=8)
    _region_axes(ax)
    ax.set_title(spec.title or "transition overlay")
    return fig


def _render_trajectory(spec: FigureSpec):
    data = _read_trajectory_csv(spec.inputs[0])
    t, y = data["t_s"], data["y_m"]
    fig, ax = plt.subplots(figsize=(8.0, 3.5))
    ax.plot(t, y, lw=1.0, color="tab:blue")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("mass height y (m)")
    section_times = [t[i] for i, ev in enumerate(data["event"]) if ev == "section"]
    for ts in section_times:
        ax.axvline(ts, color="0.8", lw=0.6, zorder=0)
    # A plan JSON marks which section crossings begin a new gait.
    plan_path = spec.extra.get("plan")
    if plan_path:
        plan_path = Path(plan_path)
        if not plan_path.exists():
            raise FigureError(f"plan file not found: {plan_path}")
        plan = json.loads(plan_path.read_text())
        for idx in plan.get("transition_indices", []):
            if 0 < idx <= len(section_times):
                ax.axvline(section_times[idx - 1], color="crimson", lw=1.2,
                           ls="--")
    ax.set_title(spec.title or "trajectory")
    return fig


def render(spec: FigureSpec) -> Path:
    """Render one figure and write it to ``spec.out``."""
    if spec.kind == "stability":
        fig = _render_region_heatmap(
            spec, spec.cap if spec.cap is not None else STEP_CAP,
            "steps to failure", zero_white=True)
    elif spec.kind == "viability":
        fig = _render_region_heatmap(
            spec, spec.cap if spec.cap is not None else WINDOW_CAP_DEG,
            "viability window (deg)", zero_white=True)
    elif spec.kind == "one-step":
        fig = _render_region_heatmap(
            spec, spec.cap if spec.cap is not None else 90.0,
            "attack angle to land near $v_y = 0$ (deg)", zero_white=False)
    elif spec.kind == "transition-overlay":
        fig = _render_transition_overlay(spec)
    else:
        fig = _render_trajectory(spec)
    out = Path(spec.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return out
