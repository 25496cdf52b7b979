"""Command-line interface: simulation, region sweeps, planning, export.

Angles are given in degrees on the command line and converted to radians
internally; exported files record both.  Exit codes: 0 success, 2
configuration error, 3 planning failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .hybrid import GaitLabel, apply_step, write_trajectory_csv
from .integrator import IntegratorConfig
from .model import ModelParams
from .planner import (
    AngleSequence,
    NoPlanFoundError,
    RegionBundle,
    plan_transitions,
    replay,
    search_replay_start,
)
from .regions import (
    AngleGrid,
    finite_stability,
    one_step_to_stable,
    sweep_once,
    transitions,
    viability,
    write_manifest,
    write_region_csv,
)
from .section import (
    EnergyTooLowError,
    SectionState,
    build_mesh,
    load_mesh_csv,
    save_mesh_csv,
    shell_constants,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_PLAN = 3


class ConfigError(Exception):
    pass


def _load_params(path) -> ModelParams:
    if path is None:
        return ModelParams()
    try:
        with open(path) as fh:
            return ModelParams.from_json(fh.read())
    except FileNotFoundError as exc:
        raise ConfigError(f"params file not found: {path}") from exc
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed params JSON ({path}): {exc}") from exc


def _resolve(args):
    """Common config resolution: params, shell, grid, output directory."""
    p = _load_params(getattr(args, "params", None))
    try:
        shell = shell_constants(p, args.energy)
    except EnergyTooLowError as exc:
        raise ConfigError(f"EnergyTooLow: {exc}") from exc
    grid = None
    if hasattr(args, "alpha_min"):
        if not args.alpha_min < args.alpha_max:
            raise ConfigError("--alpha-min must be below --alpha-max")
        grid = AngleGrid(args.alpha_min, args.alpha_max, args.angles)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return p, shell, grid, out


def _mesh_for(args, shell, out):
    if getattr(args, "mesh", None):
        return load_mesh_csv(args.mesh)
    mesh = build_mesh(shell, args.vertices)
    save_mesh_csv(mesh, out / "mesh_vertices.csv", out / "mesh_triangles.csv")
    return mesh


def _gait(name: str) -> GaitLabel:
    try:
        return GaitLabel(name.upper())
    except ValueError as exc:
        raise ConfigError(f"unknown gait {name!r}; expected R, GR or W") from exc


def cmd_simulate(args) -> int:
    p, shell, _grid, out = _resolve(args)
    cfg = IntegratorConfig()
    seq = AngleSequence.parse(args.angle_seq)
    x = SectionState(args.r, args.vy)
    want = None if args.gait == "auto" else _gait(args.gait)

    rows = []
    steps = []
    t0 = 0.0
    foot_x = 0.0
    failure = None
    for i, a_deg in enumerate(seq.expand_deg()):
        try:
            res = apply_step(x, math.radians(a_deg), p, shell, cfg,
                             record=True, t0=t0, foot_x0=foot_x)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if res.trajectory is not None and res.trajectory.shape[0]:
            rows.append(res.trajectory if not rows else res.trajectory[1:])
            t0 = float(res.trajectory[-1, 0])
            foot_x = float(res.trajectory[-1, 6])
        if not res.ok:
            failure = {"step_index": i, "reason": res.reason.value,
                       "chart": res.chart_at_failure}
            break
        if want is not None and res.realized is not want:
            failure = {"step_index": i, "reason": "wrong_gait",
                       "realized": res.realized.value}
            break
        steps.append({
            "alpha_deg": float(a_deg),
            "alpha_rad": math.radians(float(a_deg)),
            "realized": res.realized.value,
            "after": {"r_m": res.next.r, "vy_m_s": res.next.vy},
            "energy_J": res.energy,
        })
        x = res.next

    traj = np.vstack(rows) if rows else np.empty((0, 9))
    write_trajectory_csv(out / "trajectory.csv", traj)
    labels = [s["realized"] for s in steps]
    n_trans = sum(1 for a, b in zip(labels, labels[1:]) if a != b)
    drift = max(
        (abs(s["energy_J"] - shell.energy) / shell.energy for s in steps),
        default=0.0,
    )
    summary = {
        "start": {"r_m": args.r, "vy_m_s": args.vy},
        "requested_gait": args.gait,
        "steps_completed": len(steps),
        "steps_requested": int(seq.expand_deg().size),
        "transitions": n_trans,
        "max_relative_energy_drift": drift,
        "steps": steps,
        "failure": failure,
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest(out / "manifest.json", "simulate", p, shell,
                   start={"r_m": args.r, "vy_m_s": args.vy},
                   angle_sequence=args.angle_seq, requested_gait=args.gait)
    return EXIT_OK


def cmd_sweep(args) -> int:
    p, shell, grid, out = _resolve(args)
    cfg = IntegratorConfig()
    mesh = _mesh_for(args, shell, out)
    gaits = list(GaitLabel) if args.gait == "all" else [_gait(args.gait)]
    stats = {}
    for g in gaits:
        smap = finite_stability(mesh, g, grid, args.n_cap, p, shell, cfg,
                                workers=args.workers)
        write_region_csv(out / f"stability_{g.value}.csv", mesh, shell,
                         smap.steps.astype(float))
        stats[g.value] = {
            "max_steps": int(smap.steps.max()),
            "vertices_at_cap": int((smap.steps >= args.n_cap).sum()),
        }
    write_manifest(out / "manifest.json", "sweep", p, shell, mesh=mesh, grid=grid,
                   n_cap=args.n_cap, workers=args.workers, stats=stats)
    return EXIT_OK


def cmd_viability(args) -> int:
    p, shell, grid, out = _resolve(args)
    cfg = IntegratorConfig()
    mesh = _mesh_for(args, shell, out)
    gaits = list(GaitLabel) if args.gait == "all" else [_gait(args.gait)]
    sweep = sweep_once(mesh, grid, p, shell, cfg, workers=args.workers)
    stats = {}
    for g in gaits:
        vmap = viability(mesh, g, grid, p, shell, cfg, sweep=sweep)
        write_region_csv(out / f"viability_{g.value}.csv", mesh, shell,
                         vmap.window_deg)
        onestep = one_step_to_stable(mesh, g, grid, p, shell, cfg, sweep=sweep)
        write_region_csv(out / f"one_step_{g.value}.csv", mesh, shell,
                         onestep.values)
        stats[g.value] = {"max_window_deg": float(vmap.window_deg.max())}
    write_manifest(out / "manifest.json", "viability", p, shell, mesh=mesh,
                   grid=grid, workers=args.workers, stats=stats)
    return EXIT_OK


def cmd_transitions(args) -> int:
    p, shell, grid, out = _resolve(args)
    cfg = IntegratorConfig()
    mesh = _mesh_for(args, shell, out)
    g_from = _gait(getattr(args, "from"))
    g_to = _gait(args.to)
    tmap = transitions(mesh, g_from, g_to, grid, p, shell, cfg,
                       delta_alpha_deg=args.delta_alpha, workers=args.workers)
    stem = f"transition_{g_from.value}_to_{g_to.value}"
    write_region_csv(out / f"{stem}.csv", mesh, shell, tmap.alpha_deg)
    write_region_csv(out / f"{stem}_window.csv", mesh, shell,
                     tmap.land_window_deg)
    write_manifest(out / "manifest.json", "transitions", p, shell, mesh=mesh,
                   grid=grid, delta_alpha_deg=args.delta_alpha,
                   from_gait=g_from.value, to_gait=g_to.value,
                   workers=args.workers,
                   n_transition_vertices=int(tmap.valid.sum()))
    return EXIT_OK


def cmd_plan(args) -> int:
    p, shell, grid, out = _resolve(args)
    cfg = IntegratorConfig()
    mesh = _mesh_for(args, shell, out)
    itinerary = [_gait(t) for t in args.itinerary.split(",") if t.strip()]
    if not itinerary:
        raise ConfigError("--itinerary must list at least one gait")
    regions = RegionBundle.compute(mesh, grid, p, shell, cfg,
                                   workers=args.workers)
    plan = plan_transitions(SectionState(args.r, args.vy), itinerary, regions,
                            p, shell, cfg, delta_alpha_deg=args.delta_alpha,
                            min_steps=args.min_steps)
    with open(out / "plan.json", "w") as fh:
        fh.write(plan.to_json())
        fh.write("\n")
    # Replay the planned angles with trajectory recording for the CSV.
    seq = AngleSequence.from_pairs([(a, 1) for a in plan.angles_deg()])
    sim = _record_sequence(plan.start, seq, p, shell, cfg)
    write_trajectory_csv(out / "trajectory.csv", sim)
    write_manifest(out / "manifest.json", "plan", p, shell, mesh=mesh, grid=grid,
                   delta_alpha_deg=args.delta_alpha, workers=args.workers,
                   itinerary=[g.value for g in itinerary],
                   n_steps=plan.n_steps,
                   transition_indices=plan.transition_indices)
    return EXIT_OK


def cmd_replay(args) -> int:
    p, shell, grid, out = _resolve(args)
    cfg = IntegratorConfig()
    seq = AngleSequence.parse(args.angle_seq)
    if args.r is None or args.vy is None:
        mesh = _mesh_for(args, shell, out)
        report = search_replay_start(seq, mesh, p, shell, cfg,
                                     min_steps=args.min_steps)
        start = SectionState(report["start"]["r_m"], report["start"]["vy_m_s"])
    else:
        report = None
        start = SectionState(args.r, args.vy)
    plan = replay(start, seq, p, shell, cfg)
    with open(out / "plan.json", "w") as fh:
        fh.write(plan.to_json())
        fh.write("\n")
    sim = _record_sequence(start, AngleSequence.from_pairs(
        [(a, 1) for a in plan.angles_deg()]), p, shell, cfg)
    write_trajectory_csv(out / "trajectory.csv", sim)
    write_manifest(out / "manifest.json", "replay", p, shell,
                   angle_sequence=args.angle_seq,
                   start={"r_m": start.r, "vy_m_s": start.vy},
                   steps_completed=plan.n_steps,
                   transitions=len(plan.transition_indices),
                   start_search=report)
    return EXIT_OK


def _record_sequence(start, seq, p, shell, cfg) -> np.ndarray:
    rows = []
    x = start
    t0 = 0.0
    foot_x = 0.0
    for a_deg in seq.expand_deg():
        res = apply_step(x, math.radians(a_deg), p, shell, cfg,
                         record=True, t0=t0, foot_x0=foot_x)
        if res.trajectory is not None and res.trajectory.shape[0]:
            rows.append(res.trajectory if not rows else res.trajectory[1:])
            t0 = float(res.trajectory[-1, 0])
            foot_x = float(res.trajectory[-1, 6])
        if not res.ok:
            break
        x = res.next
    return np.vstack(rows) if rows else np.empty((0, 9))


def cmd_mesh(args) -> int:
    p, shell, _grid, out = _resolve(args)
    mesh = build_mesh(shell, args.vertices)
    save_mesh_csv(mesh, out / "mesh_vertices.csv", out / "mesh_triangles.csv")
    write_manifest(out / "manifest.json", "mesh", p, shell, mesh=mesh)
    return EXIT_OK


def cmd_export(args) -> int:
    """Write the resolved configuration bundle (params, shell, grid, mesh)."""
    p, shell, grid, out = _resolve(args)
    with open(out / "params.json", "w") as fh:
        fh.write(p.to_json())
        fh.write("\n")
    mesh = build_mesh(shell, args.vertices)
    save_mesh_csv(mesh, out / "mesh_vertices.csv", out / "mesh_triangles.csv")
    write_manifest(out / "manifest.json", "export", p, shell, mesh=mesh,
                   grid=grid)
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="slipgait",
        description="Constant-energy gait analysis for a compliant-legged biped.",
    )
    top.add_argument("--version", action="version", version=f"slipgait {__version__}")
    sub = top.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", help="model parameters JSON file")
    common.add_argument("--energy", type=float, default=820.0,
                        help="total mechanical energy (J)")
    common.add_argument("--out", default=".", help="output directory")

    grid_f = argparse.ArgumentParser(add_help=False)
    grid_f.add_argument("--alpha-min", type=float, default=55.0,
                        help="smallest angle of attack (deg)")
    grid_f.add_argument("--alpha-max", type=float, default=90.0,
                        help="largest angle of attack (deg)")
    grid_f.add_argument("--angles", type=int, default=100,
                        help="angle grid size")

    mesh_f = argparse.ArgumentParser(add_help=False)
    mesh_f.add_argument("--vertices", type=int, default=2000,
                        help="section mesh vertex count")
    mesh_f.add_argument("--mesh", help="load mesh from CSV instead of building")

    work_f = argparse.ArgumentParser(add_help=False)
    work_f.add_argument("--workers", type=int, default=1,
                        help="parallel worker processes")

    s = sub.add_parser("simulate", parents=[common, grid_f],
                       help="run an angle sequence from a section state")
    s.add_argument("--r", type=float, required=True, help="start leg length (m)")
    s.add_argument("--vy", type=float, required=True,
                   help="start vertical speed (m/s)")
    s.add_argument("--angle-seq", required=True,
                   help='angles in deg, e.g. "76.5x5,81.886"')
    s.add_argument("--gait", default="auto",
                   help="required gait (R, GR, W) or auto")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", parents=[common, grid_f, mesh_f, work_f],
                       help="finite-stability step counts over the section")
    s.add_argument("--gait", default="all", help="R, GR, W or all")
    s.add_argument("--n-cap", type=int, default=25,
                   help="step-count cap per chain")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("viability", parents=[common, grid_f, mesh_f, work_f],
                       help="viability windows and one-step-to-stable angles")
    s.add_argument("--gait", default="all", help="R, GR, W or all")
    s.set_defaults(func=cmd_viability)

    s = sub.add_parser("transitions", parents=[common, grid_f, mesh_f, work_f],
                       help="transition sets between two gaits")
    s.add_argument("--from", required=True, help="source gait (R, GR, W)")
    s.add_argument("--to", required=True, help="target gait (R, GR, W)")
    s.add_argument("--delta-alpha", type=float, default=2.0,
                   help="required landing window (deg)")
    s.set_defaults(func=cmd_transitions)

    s = sub.add_parser("plan", parents=[common, grid_f, mesh_f, work_f],
                       help="synthesize a transition plan through an itinerary")
    s.add_argument("--r", type=float, required=True)
    s.add_argument("--vy", type=float, required=True)
    s.add_argument("--itinerary", required=True,
                   help='comma-separated gaits, e.g. "R,GR,W,R"')
    s.add_argument("--delta-alpha", type=float, default=2.0)
    s.add_argument("--min-steps", type=int, default=24)
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("replay", parents=[common, mesh_f],
                       help="replay a fixed angle sequence")
    s.add_argument("--r", type=float, help="start leg length (m)")
    s.add_argument("--vy", type=float, help="start vertical speed (m/s)")
    s.add_argument("--angle-seq", required=True)
    s.add_argument("--min-steps", type=int, default=20,
                   help="target steps for the start-state search")
    s.set_defaults(func=cmd_replay)

    s = sub.add_parser("mesh", parents=[common, mesh_f],
                       help="build and export a section mesh")
    s.set_defaults(func=cmd_mesh)

    s = sub.add_parser("export", parents=[common, grid_f, mesh_f],
                       help="export the resolved configuration bundle")
    s.set_defaults(func=cmd_export)
    return top


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoPlanFoundError as exc:
        print(f"no plan found: {exc}", file=sys.stderr)
        return EXIT_NO_PLAN


if __name__ == "__main__":
    sys.exit(main())
