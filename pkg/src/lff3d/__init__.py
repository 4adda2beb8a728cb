"""Perception-aware 3D leader-follower formation control.

Spherical relative kinematics, a feedback-linearizing formation tracker and a
camera-frustum CBF-QP safety filter, plus a deterministic fixed-step
simulator and a small CLI around it.
"""

from lff3d.geometry import (
    CartesianRelative,
    FrustumParams,
    Pose,
    RelativeState,
    SingularityError,
    cartesian_from_spherical,
    relative_cartesian,
    spherical_from_cartesian,
    wrap_angle,
)
from lff3d.kinematics import VelocityCommand, eval_F, eval_G, qdot_direct, solve_G, xdot
from lff3d.controller import FormationReference, Gains, nominal_command, tracking_error
from lff3d.barriers import barrier_gradients, barrier_values, constraint_rows
from lff3d.safety_filter import CbfParams, SafetyFilterResult, filter_command

__version__ = "0.1.0"

__all__ = [
    "CartesianRelative",
    "CbfParams",
    "FormationReference",
    "FrustumParams",
    "Gains",
    "Pose",
    "RelativeState",
    "SafetyFilterResult",
    "SingularityError",
    "VelocityCommand",
    "barrier_gradients",
    "barrier_values",
    "cartesian_from_spherical",
    "constraint_rows",
    "eval_F",
    "eval_G",
    "filter_command",
    "nominal_command",
    "qdot_direct",
    "relative_cartesian",
    "solve_G",
    "spherical_from_cartesian",
    "tracking_error",
    "wrap_angle",
    "xdot",
]
