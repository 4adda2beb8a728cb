"""Control-affine relative kinematics ``xdot = F(x) u_j + G(x) u_i``.

Two independent routes to the same rates are kept on purpose: the matrix
form (:func:`eval_F`, :func:`eval_G`) and the scalar range/azimuth/elevation/
heading rates (:func:`xdot_components`). Tests and ``lff3d verify`` compare
them against each other and against finite differences of simulated poses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from lff3d.geometry import EPS_L, RelativeState, SingularityError

# cos(xi) guard; never approached inside a frustum with vertical FOV < pi.
EPS_XI = 1e-6


@dataclass(frozen=True)
class VelocityCommand:
    """Yaw-frame velocity ``[vx, vy, vz]`` (m/s) and yaw rate ``wz`` (rad/s)."""

    vx: float = 0.0
    vy: float = 0.0
    vz: float = 0.0
    wz: float = 0.0

    def __post_init__(self):
        for name in ("vx", "vy", "vz", "wz"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"non-finite velocity component {name}={v!r}")
            object.__setattr__(self, name, v)

    def as_array(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.vz, self.wz])

    @classmethod
    def from_array(cls, u) -> "VelocityCommand":
        return cls(float(u[0]), float(u[1]), float(u[2]), float(u[3]))

    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))


CommandLike = Union[VelocityCommand, np.ndarray, tuple, list]


def as_vec4(u: CommandLike) -> np.ndarray:
    if isinstance(u, VelocityCommand):
        return u.as_array()
    return np.asarray(u, dtype=float).reshape(4)


def _trig(x: RelativeState):
    if x.L <= EPS_L:
        raise SingularityError(f"range L={x.L:.3e} below {EPS_L:.1e}")
    cxi = math.cos(x.xi)
    if cxi <= EPS_XI:
        raise SingularityError(f"cos(xi)={cxi:.3e} below {EPS_XI:.1e}")
    return (
        x.L,
        math.cos(x.phi),
        math.sin(x.phi),
        cxi,
        math.sin(x.xi),
        math.cos(x.alpha),
        math.sin(x.alpha),
    )


def eval_F(x: RelativeState) -> np.ndarray:
    """Leader input matrix F(x)."""
    L, _, _, cxi, sxi, ca, sa = _trig(x)
    Lc = L * cxi
    return np.array(
        [
            [cxi * ca, -cxi * sa, sxi, 0.0],
            [sa / Lc, ca / Lc, 0.0, 0.0],
            [-sxi * ca / L, sxi * sa / L, cxi / L, 0.0],
            [-sa / Lc, -ca / Lc, 0.0, 1.0],
        ]
    )


def eval_G(x: RelativeState, d_cam: float) -> np.ndarray:
    """Follower input matrix G(x); ``det G = 1 / (L^2 cos xi)``."""
    L, cphi, sphi, cxi, sxi, _, _ = _trig(x)
    Lc = L * cxi
    d = d_cam
    return np.array(
        [
            [-cxi * cphi, -cxi * sphi, -sxi, -d * cxi * sphi],
            [sphi / Lc, -cphi / Lc, 0.0, -d * cphi / Lc - 1.0],
            [sxi * cphi / L, sxi * sphi / L, -cxi / L, d * sxi * sphi / L],
            [-sphi / Lc, cphi / Lc, 0.0, d * cphi / Lc],
        ]
    )


def det_G_closed_form(x: RelativeState) -> float:
    L, _, _, cxi, _, _, _ = _trig(x)
    return 1.0 / (L * L * cxi)


def solve_G(x: RelativeState, d_cam: float, r) -> np.ndarray:
    """Solve ``G(x) u = r`` by LU with partial pivoting."""
    G = eval_G(x, d_cam)
    return np.linalg.solve(G, np.asarray(r, dtype=float).reshape(4))


def xdot(x: RelativeState, d_cam: float, u_i: CommandLike, u_j: CommandLike) -> np.ndarray:
    return eval_F(x) @ as_vec4(u_j) + eval_G(x, d_cam) @ as_vec4(u_i)


def xdot_components(
    x: RelativeState, d_cam: float, u_i: CommandLike, u_j: CommandLike
) -> np.ndarray:
    """Range, azimuth, elevation and heading rates written out term by term.

    Independent of :func:`eval_F`/:func:`eval_G`; exists as a cross-check.
    """
    L, cphi, sphi, cxi, sxi, ca, sa = _trig(x)
    vxi, vyi, vzi, wi = as_vec4(u_i)
    vxj, vyj, vzj, wj = as_vec4(u_j)
    d = d_cam
    Lc = L * cxi

    L_dot = (
        -cxi * (cphi * vxi + sphi * vyi)
        - sxi * vzi
        - d * wi * cxi * sphi
        + cxi * (ca * vxj - sa * vyj)
        + sxi * vzj
    )
    follower_lateral = (sphi * vxi - cphi * vyi) / Lc
    leader_lateral = (sa * vxj + ca * vyj) / Lc
    offset_turn = d * cphi / Lc * wi
    phi_dot = follower_lateral - offset_turn + leader_lateral - wi
    xi_dot = (
        (sxi * (cphi * vxi + sphi * vyi) - cxi * vzi) / L
        + d * sxi * sphi / L * wi
        - sxi * ca / L * vxj
        + sxi * sa / L * vyj
        + cxi / L * vzj
    )
    alpha_dot = wj - follower_lateral + offset_turn - leader_lateral
    return np.array([L_dot, phi_dot, xi_dot, alpha_dot])


def qdot_affine(x: RelativeState, q, d_cam: float, u_j: CommandLike):
    """Split ``qdot = M u_i + c`` into the follower map ``M`` (3x4) and the
    leader-driven drift ``c``.

    ``q`` is the Cartesian relative position matching ``x``; only its x and
    y components enter (through the follower yaw-rate column).
    """
    qx, qy = float(q[0]), float(q[1])
    M = np.array(
        [
            [-1.0, 0.0, 0.0, qy],
            [0.0, -1.0, 0.0, -(qx + d_cam)],
            [0.0, 0.0, -1.0, 0.0],
        ]
    )
    vj = as_vec4(u_j)
    beta = x.alpha + x.phi
    cb, sb = math.cos(beta), math.sin(beta)
    c = np.array([cb * vj[0] - sb * vj[1], sb * vj[0] + cb * vj[1], vj[2]])
    return M, c


def qdot_direct(
    x: RelativeState, d_cam: float, u_i: CommandLike, u_j: CommandLike
) -> np.ndarray:
    """Cartesian relative velocity in the follower yaw frame:
    ``-v_i + R_z(alpha + phi) v_j + w_i [y, -(x + d), 0]``."""
    _trig(x)
    cxi = math.cos(x.xi)
    q = (x.L * cxi * math.cos(x.phi), x.L * cxi * math.sin(x.phi))
    M, c = qdot_affine(x, q, d_cam, u_j)
    return M @ as_vec4(u_i) + c


def dq_dx(x: RelativeState) -> np.ndarray:
    """Jacobian of ``q(x)`` with respect to ``[L, phi, xi, alpha]`` (3x4)."""
    L = x.L
    cphi, sphi = math.cos(x.phi), math.sin(x.phi)
    cxi, sxi = math.cos(x.xi), math.sin(x.xi)
    return np.array(
        [
            [cxi * cphi, -L * cxi * sphi, -L * sxi * cphi, 0.0],
            [cxi * sphi, L * cxi * cphi, -L * sxi * sphi, 0.0],
            [sxi, 0.0, L * cxi, 0.0],
        ]
    )
