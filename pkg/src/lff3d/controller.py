"""Nominal formation tracking law and the staged formation reference."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from lff3d.geometry import RelativeState, wrap_angle
from lff3d.kinematics import CommandLike, VelocityCommand, as_vec4, eval_F, solve_G

ANGLE_INDICES = (1, 2, 3)


@dataclass(frozen=True)
class Gains:
    """Diagonal of the tracking gain matrix K (1/s)."""

    k_L: float = 2.0
    k_phi: float = 2.0
    k_xi: float = 2.0
    k_alpha: float = 2.0

    def __post_init__(self):
        for name, v in zip(("k_L", "k_phi", "k_xi", "k_alpha"), self.diagonal()):
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"gain {name} must be positive, got {v}")

    def diagonal(self) -> np.ndarray:
        return np.array([self.k_L, self.k_phi, self.k_xi, self.k_alpha], dtype=float)

    @property
    def lambda_min(self) -> float:
        return float(self.diagonal().min())


def tracking_error(x: RelativeState, x_d: RelativeState) -> np.ndarray:
    """``x - x_d`` with the three angular entries taken along the shortest arc."""
    e = x.as_array() - x_d.as_array()
    for k in ANGLE_INDICES:
        e[k] = wrap_angle(e[k])
    return e


def nominal_command(
    x: RelativeState,
    d_cam: float,
    x_d: RelativeState,
    xdot_d,
    gains: Gains,
    u_j: CommandLike,
) -> VelocityCommand:
    """Feedback-linearizing law ``u = G^-1 (xdot_d - K e - F u_j)``.

    Under ideal velocity tracking this imposes ``edot = -K e`` exactly.
    """
    e = tracking_error(x, x_d)
    r = np.asarray(xdot_d, dtype=float) - gains.diagonal() * e - eval_F(x) @ as_vec4(u_j)
    return VelocityCommand.from_array(solve_G(x, d_cam, r))


def smoothstep(s: float) -> float:
    return s * s * (3.0 - 2.0 * s)


def smoothstep_rate(s: float) -> float:
    return 6.0 * s * (1.0 - s)


@dataclass(frozen=True)
class FormationReference:
    """Piecewise-constant formation targets joined by smoothstep ramps.

    Stage ``k`` starts at ``start_times[k]``; from there the reference moves
    from the previous target to ``targets[k]`` over ``ramp`` seconds. The
    first stage has no ramp. Angles are interpolated along the shortest arc.
    """

    start_times: tuple
    targets: tuple
    ramp: float = 2.0

    def __post_init__(self):
        times = tuple(float(t) for t in self.start_times)
        targets = tuple(self.targets)
        if not times or len(times) != len(targets):
            raise ValueError("need one start time per target and at least one stage")
        if self.ramp <= 0.0:
            raise ValueError(f"ramp duration must be positive, got {self.ramp}")
        for a, b in zip(times, times[1:]):
            if b - a < self.ramp:
                raise ValueError(
                    f"stage starting at {b} s begins before the ramp from {a} s completes"
                )
        object.__setattr__(self, "start_times", times)
        object.__setattr__(self, "targets", targets)

    @classmethod
    def constant(cls, target: RelativeState) -> "FormationReference":
        return cls((0.0,), (target,))

    @classmethod
    def from_stages(cls, stages: Sequence, ramp: float = 2.0) -> "FormationReference":
        """Build from ``[(t_start, [L, phi, xi, alpha]), ...]``."""
        times = [float(t) for t, _ in stages]
        targets = [
            x if isinstance(x, RelativeState) else RelativeState.from_array(x) for _, x in stages
        ]
        return cls(tuple(times), tuple(targets), ramp)

    def stage_index(self, t: float) -> int:
        return max(bisect.bisect_right(self.start_times, t) - 1, 0)

    def at(self, t: float):
        """Return ``(x_d, xdot_d)`` at time ``t``."""
        k = self.stage_index(t)
        target = self.targets[k]
        tau = t - self.start_times[k]
        if k == 0 or tau >= self.ramp or tau < 0.0:
            return target, np.zeros(4)
        prev = self.targets[k - 1].as_array()
        delta = target.as_array() - prev
        for i in ANGLE_INDICES:
            delta[i] = wrap_angle(delta[i])
        s = tau / self.ramp
        value = prev + smoothstep(s) * delta
        rate = smoothstep_rate(s) / self.ramp * delta
        return RelativeState.from_array(value), rate


def reference_at(ref: FormationReference, t: float):
    return ref.at(t)
