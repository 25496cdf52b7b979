"""Constant-energy gait analysis for a compliant-legged biped.

Hybrid spring-mass running/walking simulation with event detection,
Poincare-section return maps, mesh-based region sweeps (finite stability,
viability, transitions) and transition-sequence planning.
"""

__version__ = "0.1.0"

from .hybrid import (
    FailureReason,
    GaitLabel,
    StepResult,
    StepStatus,
    apply_step,
    gait_map,
)
from .integrator import IntegratorConfig
from .model import ModelParams
from .planner import (
    AngleSequence,
    FixedPoint,
    NoPlanFoundError,
    PlanResult,
    find_fixed_point,
    plan_transitions,
    replay,
    verify_plan,
)
from .regions import AngleGrid, finite_stability, one_step_to_stable, transitions, viability
from .section import EnergyShell, Mesh, SectionState, build_mesh, shell_constants

__all__ = [
    "__version__",
    "ModelParams",
    "IntegratorConfig",
    "GaitLabel",
    "FailureReason",
    "StepStatus",
    "StepResult",
    "apply_step",
    "gait_map",
    "SectionState",
    "EnergyShell",
    "Mesh",
    "shell_constants",
    "build_mesh",
    "AngleGrid",
    "finite_stability",
    "viability",
    "one_step_to_stable",
    "transitions",
    "AngleSequence",
    "FixedPoint",
    "PlanResult",
    "NoPlanFoundError",
    "find_fixed_point",
    "plan_transitions",
    "replay",
    "verify_plan",
]
