"""Constant-energy shell geometry on the leg-vertical section.

Section states are observed at theta = pi/2 in single stance and
visualized by (r, v_y); the forward speed v_x follows from the energy.
After shifting r by the static equilibrium length and dividing the
velocities by the spring frequency omega = sqrt(k/m), the constant-energy
surface becomes a sphere of radius L, so the admissible (r_hat, vy_hat)
initial conditions fill a disc of radius L.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import Delaunay

from .model import ModelParams

__all__ = [
    "EnergyTooLowError",
    "OutsideShellError",
    "OutsideHullError",
    "InvalidTriangleError",
    "EnergyShell",
    "SectionState",
    "NormalizedState",
    "shell_constants",
    "to_normalized",
    "from_normalized",
    "vx_from_energy",
    "Mesh",
    "FieldMap",
    "build_mesh",
    "interpolate_field",
    "mesh_checksum",
]


class EnergyTooLowError(ValueError):
    """Requested energy is below the shell minimum m*g*(r0 - m*g/(2k))."""


class OutsideShellError(ValueError):
    """Section point lies outside the constant-energy disc."""


class OutsideHullError(ValueError):
    """Query point lies outside the mesh convex hull."""


class InvalidTriangleError(ValueError):
    """Containing triangle has a vertex masked invalid in the field."""


@dataclass(frozen=True)
class SectionState:
    """Point on the section: leg length and vertical speed (v_x implied)."""

    r: float
    vy: float


@dataclass(frozen=True)
class NormalizedState:
    """Section coordinates in which the energy surface is a sphere."""

    r_hat: float
    vx_hat: float
    vy_hat: float


@dataclass(frozen=True)
class EnergyShell:
    """Constant-energy shell constants for a given total energy."""

    energy: float     # J
    L: float          # m, shell radius in normalized coordinates
    omega: float      # 1/s, sqrt(k/m)
    r_center: float   # m, static equilibrium leg length r0 - m*g/k

    def to_dict(self) -> dict:
        return {
            "energy_J": self.energy,
            "L_m": self.L,
            "omega_per_s": self.omega,
            "r_center_m": self.r_center,
        }


def shell_constants(p: ModelParams, energy: float) -> EnergyShell:
    """Shell radius, spring frequency and equilibrium length for ``energy``."""
    e_min = p.m * p.g * (p.r0 - p.m * p.g / (2.0 * p.k))
    if energy < e_min:
        raise EnergyTooLowError(
            f"EnergyTooLow: E={energy} J is below the shell minimum {e_min} J"
        )
    L = math.sqrt(2.0 / p.k * (energy - e_min))
    omega = math.sqrt(p.k / p.m)
    return EnergyShell(energy=energy, L=L, omega=omega, r_center=p.r0 - p.m * p.g / p.k)


def to_normalized(x: SectionState, shell: EnergyShell) -> NormalizedState:
    """Normalize a section state; vx_hat is the nonnegative sphere root."""
    r_hat = x.r - shell.r_center
    vy_hat = x.vy / shell.omega
    rad2 = shell.L * shell.L - r_hat * r_hat - vy_hat * vy_hat
    if rad2 < -1e-12 * max(shell.L * shell.L, 1.0):
        raise OutsideShellError(f"section state {x} lies outside the energy disc")
    return NormalizedState(r_hat=r_hat, vx_hat=math.sqrt(max(rad2, 0.0)), vy_hat=vy_hat)


def from_normalized(n: NormalizedState, shell: EnergyShell) -> SectionState:
    return SectionState(r=n.r_hat + shell.r_center, vy=n.vy_hat * shell.omega)


def vx_from_energy(r: float, vy: float, shell: EnergyShell) -> float:
    """Forward speed making (r, vy, vx) lie on the energy shell (vx >= 0)."""
    n = to_normalized(SectionState(r, vy), shell)
    return n.vx_hat * shell.omega


@dataclass
class Mesh:
    """Delaunay triangulation of the (r_hat, vy_hat) energy disc."""

    vertices: np.ndarray   # (N, 2) float64
    triangles: np.ndarray  # (M, 3) int32, counter-clockwise
    _finder: Optional[Delaunay] = field(default=None, repr=False, compare=False)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def _delaunay(self) -> Delaunay:
        if self._finder is None:
            self._finder = Delaunay(self.vertices)
        return self._finder

    def locate(self, point) -> int:
        """Index of the triangle containing ``point``, or -1 outside the hull."""
        d = self._delaunay()
        simplex = int(d.find_simplex(np.asarray(point, dtype=float)))
        return simplex

    def barycentric(self, point) -> tuple[int, np.ndarray]:
        """Containing triangle index and barycentric weights of ``point``."""
        d = self._delaunay()
        pt = np.asarray(point, dtype=float)
        simplex = int(d.find_simplex(pt))
        if simplex < 0:
            raise OutsideHullError(f"point {pt.tolist()} lies outside the mesh hull")
        trans = d.transform[simplex]
        b = trans[:2] @ (pt - trans[2])
        bary = np.append(b, 1.0 - b.sum())
        return simplex, bary

    def triangle_vertex_ids(self, tri_index: int) -> np.ndarray:
        return self._delaunay().simplices[tri_index]


@dataclass
class FieldMap:
    """Per-vertex scalar (or vector) values with a validity mask."""

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.values.shape[0] != self.valid.shape[0]:
            raise ValueError("FieldMap values and mask lengths differ")


def _ring_counts(n_vertices: int, n_rings: int) -> list[int]:
    """Distribute n_vertices - 1 ring slots proportionally to ring radius."""
    weights = np.arange(1, n_rings + 1, dtype=float)
    raw = (n_vertices - 1) * weights / weights.sum()
    counts = np.floor(raw).astype(int)
    counts = np.maximum(counts, 3)
    # Largest-remainder top-up on the outer rings to hit the total exactly.
    deficit = (n_vertices - 1) - int(counts.sum())
    order = np.argsort(raw - np.floor(raw))[::-1]
    i = 0
    while deficit != 0 and i < 10 * n_rings:
        j = order[i % n_rings]
        if deficit > 0:
            counts[j] += 1
            deficit -= 1
        elif counts[j] > 3:
            counts[j] -= 1
            deficit += 1
        i += 1
    return counts.tolist()


def build_mesh(shell: EnergyShell, n_vertices: int) -> Mesh:
    """Deterministic quasi-uniform disc mesh: centre point + concentric rings.

    The outermost ring lies exactly on the disc boundary of radius L.
    Vertex count equals ``n_vertices`` whenever the proportional ring
    allocation can absorb it (always for n_vertices >= 4).
    """
    if n_vertices < 4:
        raise ValueError("need at least 4 vertices (centre + 3 boundary)")
    n_rings = max(1, int(round(math.sqrt((n_vertices - 1) / math.pi))))
    counts = _ring_counts(n_vertices, n_rings)
    pts = [(0.0, 0.0)]
    for i, m_i in enumerate(counts, start=1):
        rho = shell.L * i / n_rings
        for j in range(m_i):
            phi = 2.0 * math.pi * j / m_i
            pts.append((rho * math.cos(phi), rho * math.sin(phi)))
    vertices = np.array(pts, dtype=float)
    tri = Delaunay(vertices)
    simplices = tri.simplices.astype(np.int32).copy()
    # Enforce counter-clockwise orientation.
    a = vertices[simplices[:, 0]]
    b = vertices[simplices[:, 1]]
    c = vertices[simplices[:, 2]]
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    flip = cross < 0
    simplices[flip] = simplices[flip][:, [0, 2, 1]]
    return Mesh(vertices=vertices, triangles=simplices, _finder=tri)


def interpolate_field(mesh: Mesh, fieldmap: FieldMap, point):
    """Barycentric-linear interpolation of per-vertex values at ``point``.

    Exact at vertices and on affine fields.  Raises
    :class:`OutsideHullError` outside the hull and
    :class:`InvalidTriangleError` when any vertex of the containing
    triangle is masked invalid.
    """
    simplex, bary = mesh.barycentric(point)
    ids = mesh.triangle_vertex_ids(simplex)
    if not np.all(fieldmap.valid[ids]):
        raise InvalidTriangleError(
            f"triangle {simplex} has invalid vertices for this field"
        )
    vals = fieldmap.values[ids]
    return bary @ vals


def mesh_checksum(mesh: Mesh) -> str:
    """SHA-256 over the full-precision vertex and triangle data."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(mesh.vertices, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(mesh.triangles, dtype="<i4").tobytes())
    return h.hexdigest()


def _fmt(x: float) -> str:
    return repr(float(x))


def save_mesh_csv(mesh: Mesh, vertices_path, triangles_path) -> None:
    with open(vertices_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", "r_hat_m", "vy_hat_m"])
        for i, (x, y) in enumerate(mesh.vertices):
            w.writerow([i, _fmt(x), _fmt(y)])
    with open(triangles_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["v0", "v1", "v2"])
        for t in mesh.triangles:
            w.writerow([int(t[0]), int(t[1]), int(t[2])])


def load_mesh_csv(vertices_path, triangles_path) -> Mesh:
    verts = []
    with open(vertices_path, newline="") as f:
        for row in csv.DictReader(f):
            verts.append((float(row["r_hat_m"]), float(row["vy_hat_m"])))
    tris = []
    with open(triangles_path, newline="") as f:
        for row in csv.DictReader(f):
            tris.append((int(row["v0"]), int(row["v1"]), int(row["v2"])))
    return Mesh(vertices=np.array(verts), triangles=np.array(tris, dtype=np.int32))


def save_field_csv(fieldmap: FieldMap, path, value_names=("value",)) -> None:
    values = np.atleast_2d(fieldmap.values.T).T
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["vertex_id", *value_names])
        for i in range(values.shape[0]):
            if fieldmap.valid[i]:
                w.writerow([i, *(_fmt(v) for v in values[i])])
            else:
                w.writerow([i, *([""] * values.shape[1])])


def load_field_csv(path) -> FieldMap:
    rows = []
    with open(path, newline="") as f:
        r = csv.reader(f)
        next(r)
        for row in r:
            rows.append(row)
    n = len(rows)
    width = max(len(row) - 1 for row in rows)
    values = np.full((n, width), np.nan)
    valid = np.zeros(n, dtype=bool)
    for row in rows:
        i = int(row[0])
        if row[1] != "":
            values[i] = [float(v) for v in row[1:]]
            valid[i] = True
    if width == 1:
        values = values[:, 0]
    return FieldMap(values=values, valid=valid)
