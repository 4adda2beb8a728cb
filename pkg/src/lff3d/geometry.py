"""Frames, angle arithmetic and relative-state conversions.

Everything here lives in the yaw-aligned frame of the near-hover model: a
vehicle's attitude is reduced to its yaw ``psi`` and the body frame of the
follower is ``R_z(psi_i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Range / horizontal-radius threshold below which spherical angles are undefined.
EPS_L = 1e-9


class SingularityError(ArithmeticError):
    """Raised when a relative state sits on a coordinate singularity."""


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"non-finite value: {v!r}")


def wrap_angle(theta: float) -> float:
    """Wrap ``theta`` into (-pi, pi]."""
    theta = float(theta)
    if not math.isfinite(theta):
        raise ValueError(f"cannot wrap non-finite angle {theta!r}")
    r = math.remainder(theta, 2.0 * math.pi)
    if r <= -math.pi:
        r += 2.0 * math.pi
    return r


def rot_z(psi: float) -> np.ndarray:
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class Pose:
    """Inertial position ``p`` (m) and yaw ``psi`` (rad)."""

    p: np.ndarray
    psi: float

    def __post_init__(self):
        p = np.array(self.p, dtype=float).reshape(3)
        if not np.all(np.isfinite(p)):
            raise ValueError(f"non-finite position {p}")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "psi", wrap_angle(self.psi))

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return bool(np.array_equal(self.p, other.p)) and self.psi == other.psi

    def __repr__(self):
        return f"Pose(p={self.p.tolist()}, psi={self.psi!r})"


@dataclass(frozen=True)
class CartesianRelative:
    """Leader position in the follower camera frame (components of q_ij, m)."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        _check_finite(self.x, self.y, self.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @classmethod
    def from_array(cls, q) -> "CartesianRelative":
        return cls(float(q[0]), float(q[1]), float(q[2]))


@dataclass(frozen=True)
class RelativeState:
    """Spherical leader-relative state ``[L, phi, xi, alpha]``.

    ``phi`` and ``alpha`` are wrapped at construction. ``xi`` must lie in
    (-pi/2, pi/2); inside any camera frustum with vertical FOV below pi it
    always does.
    """

    L: float
    phi: float
    xi: float
    alpha: float

    def __post_init__(self):
        _check_finite(self.L, self.phi, self.xi, self.alpha)
        if self.L <= 0.0:
            raise ValueError(f"range must be positive, got L={self.L}")
        if not abs(self.xi) < 0.5 * math.pi:
            raise ValueError(f"elevation must lie in (-pi/2, pi/2), got xi={self.xi}")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "xi", float(self.xi))
        object.__setattr__(self, "phi", wrap_angle(self.phi))
        object.__setattr__(self, "alpha", wrap_angle(self.alpha))

    def as_array(self) -> np.ndarray:
        return np.array([self.L, self.phi, self.xi, self.alpha])

    @classmethod
    def from_array(cls, x) -> "RelativeState":
        return cls(float(x[0]), float(x[1]), float(x[2]), float(x[3]))


@dataclass(frozen=True)
class FrustumParams:
    """Camera frustum: full FOV angles, depth limits along the optical axis
    and the optical-centre offset ``d_cam`` along the body x axis."""

    phi_fov: float
    theta_fov: float
    x_near: float
    x_far: float
    d_cam: float = 0.0

    def __post_init__(self):
        _check_finite(self.phi_fov, self.theta_fov, self.x_near, self.x_far, self.d_cam)
        for name in ("phi_fov", "theta_fov"):
            v = getattr(self, name)
            if not 0.0 < v < math.pi:
                raise ValueError(f"{name} must lie in (0, pi), got {v}")
        if not 0.0 < self.x_near < self.x_far:
            raise ValueError(
                f"need 0 < x_near < x_far, got x_near={self.x_near}, x_far={self.x_far}"
            )
        if self.d_cam < 0.0:
            raise ValueError(f"d_cam must be non-negative, got {self.d_cam}")

    @property
    def tan_half_phi(self) -> float:
        return math.tan(0.5 * self.phi_fov)

    @property
    def tan_half_theta(self) -> float:
        return math.tan(0.5 * self.theta_fov)


def relative_cartesian_array(
    p_i: np.ndarray, psi_i: float, p_j: np.ndarray, d_cam: float
) -> np.ndarray:
    """Array form of :func:`relative_cartesian`."""
    d = np.asarray(p_j, dtype=float) - np.asarray(p_i, dtype=float)
    c, s = math.cos(psi_i), math.sin(psi_i)
    return np.array([c * d[0] + s * d[1] - d_cam, -s * d[0] + c * d[1], d[2]])


def relative_cartesian(follower: Pose, leader: Pose, frustum: FrustumParams) -> CartesianRelative:
    """Leader position seen from the follower camera, ``R_z(psi_i)^T (p_j - p_i) - d_cam b1``."""
    q = relative_cartesian_array(follower.p, follower.psi, leader.p, frustum.d_cam)
    return CartesianRelative.from_array(q)


def spherical_from_cartesian(
    q: CartesianRelative, psi_i: float, psi_j: float, eps: float = EPS_L
) -> RelativeState:
    """Convert ``q`` and both yaws into ``[L, phi, xi, alpha]``.

    Raises :class:`SingularityError` when the range or the horizontal radius
    falls below ``eps``; the angles are undefined there and any later
    ``G^-1`` would blow up.
    """
    x, y, z = q.x, q.y, q.z
    rho = math.hypot(x, y)
    L = math.hypot(rho, z)
    if L <= eps:
        raise SingularityError(f"relative range {L:.3e} m below threshold {eps:.1e}")
    if rho <= eps:
        raise SingularityError(
            f"line of sight is vertical (horizontal radius {rho:.3e} m); elevation undefined"
        )
    phi = math.atan2(y, x)
    xi = math.atan2(z, rho)
    return RelativeState(L, phi, xi, wrap_angle(psi_j - psi_i - phi))


def cartesian_from_spherical(x: RelativeState) -> CartesianRelative:
    cxi = math.cos(x.xi)
    return CartesianRelative(
        x.L * cxi * math.cos(x.phi),
        x.L * cxi * math.sin(x.phi),
        x.L * math.sin(x.xi),
    )


def follower_pose_from_relative(
    leader: Pose, x: RelativeState, d_cam: float
) -> Pose:
    """Place a follower so that it sees ``leader`` at relative state ``x``.

    Inverse of ``spherical_from_cartesian(relative_cartesian(...))``; used to
    seed scenarios from a desired formation.
    """
    psi_i = wrap_angle(leader.psi - x.alpha - x.phi)
    q = cartesian_from_spherical(x).as_array()
    q[0] += d_cam
    p_i = leader.p - rot_z(psi_i) @ q
    return Pose(p_i, psi_i)

