"""Region sweeps over the energy-disc mesh and the angle-of-attack grid.

Computes, per mesh vertex and per gait: finite-stability step counts
(most consecutive failure-free constant-angle steps over the grid,
capped), viability windows (longest contiguous run of one-step-successful
grid angles, in degrees), one-step-to-stable angles, and transition maps
between gait pairs.

Sweeps are embarrassingly parallel over vertices; output slots are
per-vertex, so results are identical for any worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import __version__
from . import _kernel
from .hybrid import GaitLabel
from .integrator import IntegratorConfig
from .model import ModelParams
from .section import (
    EnergyShell,
    FieldMap,
    Mesh,
    OutsideHullError,
    SectionState,
    interpolate_field,
    mesh_checksum,
)

__all__ = [
    "AngleGrid",
    "StabilityMap",
    "ViabilityMap",
    "TransitionMap",
    "OneStepSweep",
    "sweep_once",
    "steps_to_failure",
    "finite_stability",
    "viability",
    "one_step_to_stable",
    "transitions",
    "write_region_csv",
    "write_manifest",
]


@dataclass(frozen=True)
class AngleGrid:
    """Uniform angle-of-attack grid in degrees, endpoints included."""

    alpha_min_deg: float = 55.0
    alpha_max_deg: float = 90.0
    count: int = 100

    def __post_init__(self) -> None:
        if self.count < 2 or self.alpha_max_deg <= self.alpha_min_deg:
            raise ValueError("angle grid needs count >= 2 and max > min")

    @property
    def values_deg(self) -> np.ndarray:
        return np.linspace(self.alpha_min_deg, self.alpha_max_deg, self.count)

    @property
    def values_rad(self) -> np.ndarray:
        return np.radians(self.values_deg)

    @property
    def spacing_deg(self) -> float:
        return (self.alpha_max_deg - self.alpha_min_deg) / (self.count - 1)

    def to_dict(self) -> dict:
        return {
            "alpha_min_deg": self.alpha_min_deg,
            "alpha_max_deg": self.alpha_max_deg,
            "count": self.count,
        }


@dataclass
class StabilityMap:
    """Per-vertex max CAAP steps-to-failure over the angle grid, capped."""

    gait: GaitLabel
    n_cap: int
    grid: AngleGrid
    steps: np.ndarray                      # (N,) int16, max over angles
    per_alpha: Optional[np.ndarray] = None  # (N, A) int16 when requested


@dataclass
class ViabilityMap:
    """Per-vertex longest contiguous run of one-step-viable angles (deg)."""

    gait: GaitLabel
    grid: AngleGrid
    window_deg: np.ndarray  # (N,) float

    def field(self) -> FieldMap:
        return FieldMap(values=self.window_deg, valid=np.ones(self.window_deg.size, dtype=bool))


@dataclass
class TransitionMap:
    """Per-vertex transition angle from one gait into the viable set of another."""

    from_gait: GaitLabel
    to_gait: GaitLabel
    grid: AngleGrid
    delta_alpha_deg: float
    alpha_deg: np.ndarray        # (N,) float, nan where no transition exists
    land_r_hat: np.ndarray       # (N,) float, best landing per vertex
    land_vy_hat: np.ndarray      # (N,) float
    land_window_deg: np.ndarray  # (N,) float, nan where no from-gait step succeeds

    def potential_field(self) -> FieldMap:
        """Best achievable to-gait landing window per vertex (0 where none)."""
        vals = np.where(np.isfinite(self.land_window_deg), self.land_window_deg, 0.0)
        return FieldMap(values=vals, valid=np.ones(vals.size, dtype=bool))

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.alpha_deg)


def _mesh_section_coords(mesh: Mesh, shell: EnergyShell):
    rs = np.ascontiguousarray(mesh.vertices[:, 0] + shell.r_center)
    vys = np.ascontiguousarray(mesh.vertices[:, 1] * shell.omega)
    return rs, vys


def _kernel_args(p: ModelParams, shell: EnergyShell, cfg: IntegratorConfig):
    return (p.m, p.k, p.r0, p.g, shell.energy,
            cfg.rel_tol, cfg.abs_tol, cfg.event_value_tol, cfg.max_phase_time)


def steps_to_failure(
    x: SectionState,
    gait: GaitLabel,
    alpha: float,
    n_cap: int,
    p: ModelParams,
    shell: EnergyShell,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> int:
    """Consecutive successful steps of ``gait`` at constant ``alpha`` (rad), capped."""
    return int(
        _kernel.caap_steps_kernel(x.r, x.vy, alpha, gait.code, n_cap, *_kernel_args(p, shell, cfg))
    )


# Worker entry points must be module level for process pools.

def _caap_chunk(args):
    rs, vys, alphas, gait_code, n_cap, kargs = args
    out = np.zeros((rs.size, alphas.size), dtype=np.int16)
    _kernel.sweep_caap_kernel(rs, vys, alphas, gait_code, n_cap, *kargs, out)
    return out


def _once_chunk(args):
    rs, vys, alphas, kargs = args
    status = np.zeros((rs.size, alphas.size), dtype=np.int8)
    gait = np.zeros((rs.size, alphas.size), dtype=np.int8)
    r2 = np.zeros((rs.size, alphas.size))
    vy2 = np.zeros((rs.size, alphas.size))
    _kernel.sweep_once_kernel(rs, vys, alphas, *kargs, status, gait, r2, vy2)
    return status, gait, r2, vy2


def _map_chunks(worker, rs, vys, extra_args, workers: int):
    """Run a chunk worker over vertex slices; assembly order is fixed."""
    n = rs.size
    if workers <= 1 or n < 64:
        return [worker((rs, vys, *extra_args))]
    n_chunks = min(4 * workers, max(1, n // 16))
    bounds = np.linspace(0, n, n_chunks + 1).astype(int)
    jobs = [
        (rs[a:b].copy(), vys[a:b].copy(), *extra_args)
        for a, b in zip(bounds[:-1], bounds[1:])
        if b > a
    ]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, jobs))


def _sweep_caap(mesh, gait, grid, n_cap, p, shell, cfg, workers) -> np.ndarray:
    rs, vys = _mesh_section_coords(mesh, shell)
    parts = _map_chunks(
        _caap_chunk, rs, vys,
        (np.ascontiguousarray(grid.values_rad), gait.code, n_cap, _kernel_args(p, shell, cfg)),
        workers,
    )
    return np.vstack(parts)


@dataclass
class OneStepSweep:
    """Single-step outcomes for every (vertex, grid angle) pair."""

    grid: AngleGrid
    status: np.ndarray    # (N, A) int8 kernel status codes
    realized: np.ndarray  # (N, A) int8 gait codes, -1 where failed early
    r_next: np.ndarray    # (N, A) landing leg length (m)
    vy_next: np.ndarray   # (N, A) landing vertical speed (m/s)

    def successes(self, gait: GaitLabel) -> np.ndarray:
        return (self.status == _kernel.STATUS_OK) & (self.realized == gait.code)


def sweep_once(
    mesh: Mesh,
    grid: AngleGrid,
    p: ModelParams,
    shell: EnergyShell,
    cfg: IntegratorConfig = IntegratorConfig(),
    workers: int = 1,
) -> OneStepSweep:
    """One gait step from every vertex at every grid angle.

    The result is gait-agnostic and can be shared by ``viability``,
    ``one_step_to_stable`` and ``transitions`` to avoid re-simulating.
    """
    rs, vys = _mesh_section_coords(mesh, shell)
    parts = _map_chunks(
        _once_chunk, rs, vys,
        (np.ascontiguousarray(grid.values_rad), _kernel_args(p, shell, cfg)),
        workers,
    )
    return OneStepSweep(
        grid=grid,
        status=np.vstack([pt[0] for pt in parts]),
        realized=np.vstack([pt[1] for pt in parts]),
        r_next=np.vstack([pt[2] for pt in parts]),
        vy_next=np.vstack([pt[3] for pt in parts]),
    )


def finite_stability(
    mesh: Mesh,
    gait: GaitLabel,
    grid: AngleGrid,
    n_cap: int,
    p: ModelParams,
    shell: EnergyShell,
    cfg: IntegratorConfig = IntegratorConfig(),
    workers: int = 1,
    keep_per_alpha: bool = False,
) -> StabilityMap:
    per_alpha = _sweep_caap(mesh, gait, grid, n_cap, p, shell, cfg, workers)
    return StabilityMap(
        gait=gait,
        n_cap=n_cap,
        grid=grid,
        steps=per_alpha.max(axis=1),
        per_alpha=per_alpha if keep_per_alpha else None,
    )


def _longest_run(success_row: np.ndarray) -> int:
    best = cur = 0
    for s in success_row:
        cur = cur + 1 if s else 0
        best = max(best, cur)
    return best


def viability(
    mesh: Mesh,
    gait: GaitLabel,
    grid: AngleGrid,
    p: ModelParams,
    shell: EnergyShell,
    cfg: IntegratorConfig = IntegratorConfig(),
    workers: int = 1,
    sweep: Optional[OneStepSweep] = None,
) -> ViabilityMap:
    if sweep is None:
        sweep = sweep_once(mesh, grid, p, shell, cfg, workers)
    ok = sweep.successes(gait)
    runs = np.array([_longest_run(row) for row in ok])
    window = np.maximum(runs - 1, 0) * grid.spacing_deg
    return ViabilityMap(gait=gait, grid=grid, window_deg=window)


def one_step_to_stable(
    mesh: Mesh,
    gait: GaitLabel,
    grid: AngleGrid,
    p: ModelParams,
    shell: EnergyShell,
    cfg: IntegratorConfig = IntegratorConfig(),
    vy_tol: float = 1e-3,
    workers: int = 1,
    sweep: Optional[OneStepSweep] = None,
) -> FieldMap:
    """Per vertex: grid angle landing nearest vy = 0 within ``vy_tol``, if any."""
    if sweep is None:
        sweep = sweep_once(mesh, grid, p, shell, cfg, workers)
    vy2 = sweep.vy_next
    ok = sweep.successes(gait) & (np.abs(vy2) < vy_tol)
    penalty = np.where(ok, np.abs(vy2), np.inf)
    best = penalty.argmin(axis=1)
    valid = np.isfinite(penalty.min(axis=1))
    alphas = grid.values_deg[best]
    alphas = np.where(valid, alphas, np.nan)
    return FieldMap(values=alphas, valid=valid)


def window_at(mesh: Mesh, window_field: FieldMap, r_hat: float, vy_hat: float) -> float:
    """Interpolated viability window at a normalized section point (0 outside hull)."""
    try:
        return float(interpolate_field(mesh, window_field, (r_hat, vy_hat)))
    except OutsideHullError:
        return 0.0


def transitions(
    mesh: Mesh,
    from_gait: GaitLabel,
    to_gait: GaitLabel,
    grid: AngleGrid,
    p: ModelParams,
    shell: EnergyShell,
    cfg: IntegratorConfig = IntegratorConfig(),
    delta_alpha_deg: float = 2.0,
    viab_to: Optional[ViabilityMap] = None,
    workers: int = 1,
    sweep: Optional[OneStepSweep] = None,
) -> TransitionMap:
    """Angles taking one ``from_gait`` step into the ``to_gait`` viable set.

    A vertex gets a transition angle when some grid angle realizes a
    successful ``from_gait`` step whose landing point has interpolated
    ``to_gait`` viability window >= ``delta_alpha_deg``.  Among such
    angles the one with the largest landing window is recorded.  Landing
    fields are filled for every vertex with at least one successful
    ``from_gait`` step (best achievable window, even below the threshold)
    so callers can use them as a transition-potential field.
    """
    if sweep is None:
        sweep = sweep_once(mesh, grid, p, shell, cfg, workers)
    if viab_to is None:
        viab_to = viability(mesh, to_gait, grid, p, shell, cfg, sweep=sweep)
    wfield = viab_to.field()
    r2, vy2 = sweep.r_next, sweep.vy_next
    ok = sweep.successes(from_gait)

    n = mesh.n_vertices
    alpha_out = np.full(n, np.nan)
    land_r = np.full(n, np.nan)
    land_vy = np.full(n, np.nan)
    land_w = np.full(n, np.nan)
    alphas_deg = grid.values_deg
    for v in range(n):
        best_w = -1.0
        best_a = -1
        for a in np.flatnonzero(ok[v]):
            r_hat = r2[v, a] - shell.r_center
            vy_hat = vy2[v, a] / shell.omega
            w = window_at(mesh, wfield, r_hat, vy_hat)
            if w > best_w:
                best_w = w
                best_a = a
        if best_a >= 0:
            land_r[v] = r2[v, best_a] - shell.r_center
            land_vy[v] = vy2[v, best_a] / shell.omega
            land_w[v] = best_w
            if best_w >= delta_alpha_deg:
                alpha_out[v] = alphas_deg[best_a]
    return TransitionMap(
        from_gait=from_gait,
        to_gait=to_gait,
        grid=grid,
        delta_alpha_deg=delta_alpha_deg,
        alpha_deg=alpha_out,
        land_r_hat=land_r,
        land_vy_hat=land_vy,
        land_window_deg=land_w,
    )


# --- File formats -----------------------------------------------------------

def write_region_csv(path, mesh: Mesh, shell: EnergyShell, values: np.ndarray) -> None:
    """Region CSV: vertex_id, r_m, vy_m_s, value (value empty where nan)."""
    import csv

    rs, vys = _mesh_section_coords(mesh, shell)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex_id", "r_m", "vy_m_s", "value"])
        for i in range(mesh.n_vertices):
            v = float(values[i])
            sval = "" if math.isnan(v) else repr(v)
            w.writerow([i, repr(float(rs[i])), repr(float(vys[i])), sval])


def write_manifest(
    path,
    kind: str,
    p: ModelParams,
    shell: EnergyShell,
    mesh: Optional[Mesh] = None,
    grid: Optional[AngleGrid] = None,
    **extra,
) -> dict:
    """Reproducibility manifest for a run; deterministic serialization."""
    manifest = {
        "kind": kind,
        "tool": "slipgait",
        "version": __version__,
        "params": {
            "mass_kg": p.m,
            "stiffness_N_per_m": p.k,
            "rest_length_m": p.r0,
            "gravity_m_per_s2": p.g,
        },
        "shell": shell.to_dict(),
    }
    if grid is not None:
        manifest["grid"] = grid.to_dict()
    if mesh is not None:
        manifest["mesh"] = {
            "n_vertices": mesh.n_vertices,
            "n_triangles": mesh.n_triangles,
            "checksum_sha256": mesh_checksum(mesh),
        }
    manifest.update(extra)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
