"""Camera-frustum barrier functions and their CBF constraint rows.

The six barriers are affine in the Cartesian relative position ``q``, so
their gradients are constant and ``hdot`` is just ``grad_h . qdot``. The
production path uses the Cartesian rate directly; the spherical chain rule
through ``dq/dx`` is kept only as a test oracle (:func:`hdot_spherical`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lff3d.geometry import CartesianRelative, FrustumParams, RelativeState, cartesian_from_spherical
from lff3d.kinematics import CommandLike, as_vec4, dq_dx, qdot_affine, xdot

LABELS = ("near", "far", "left", "right", "bottom", "top")


@dataclass(frozen=True, eq=False)
class BarrierValues:
    h: np.ndarray

    @property
    def min_h(self) -> float:
        return float(self.h.min())

    def inside(self) -> bool:
        return bool(np.all(self.h >= 0.0))


@dataclass(frozen=True, eq=False)
class ConstraintRow:
    """Linear CBF constraint ``a . u_i >= b`` for barrier ``index`` (0-based)."""

    a: np.ndarray
    b: float
    index: int

    @property
    def label(self) -> str:
        return f"h{self.index + 1}:{LABELS[self.index]}"


def barrier_array(q, frustum: FrustumParams) -> np.ndarray:
    x, y, z = float(q[0]), float(q[1]), float(q[2])
    tp, tt = frustum.tan_half_phi, frustum.tan_half_theta
    return np.array(
        [
            x - frustum.x_near,
            frustum.x_far - x,
            x * tp + y,
            x * tp - y,
            x * tt + z,
            x * tt - z,
        ]
    )


def barrier_values(q: CartesianRelative, frustum: FrustumParams) -> BarrierValues:
    return BarrierValues(barrier_array(q.as_array(), frustum))


def barrier_gradients(frustum: FrustumParams) -> np.ndarray:
    """Constant gradients of ``h_1..h_6`` with respect to ``q``, one per row."""
    tp, tt = frustum.tan_half_phi, frustum.tan_half_theta
    return np.array(
        [
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [tp, 1.0, 0.0],
            [tp, -1.0, 0.0],
            [tt, 0.0, 1.0],
            [tt, 0.0, -1.0],
        ]
    )


def in_frustum(q, frustum: FrustumParams) -> bool:
    """Direct set-membership test, written from the set definition rather
    than from the barrier values."""
    x, y, z = float(q[0]), float(q[1]), float(q[2])
    return (
        frustum.x_near <= x <= frustum.x_far
        and abs(y) <= x * frustum.tan_half_phi
        and abs(z) <= x * frustum.tan_half_theta
    )


def constraint_matrices(
    x: RelativeState,
    d_cam: float,
    frustum: FrustumParams,
    u_j: CommandLike,
    kappa: float,
    delta=None,
):
    """Stacked rows ``A u_i >= b`` (6x4, 6) plus the barrier values."""
    q = cartesian_from_spherical(x).as_array()
    h = barrier_array(q, frustum)
    grads = barrier_gradients(frustum)
    M, c = qdot_affine(x, q, d_cam, u_j)
    delta = np.zeros(6) if delta is None else np.asarray(delta, dtype=float).reshape(6)
    A = grads @ M
    b = delta - kappa * h - grads @ c
    return A, b, h


def constraint_rows(
    x: RelativeState,
    d_cam: float,
    frustum: FrustumParams,
    u_j: CommandLike,
    kappa: float,
    delta=None,
) -> list:
    A, b, _ = constraint_matrices(x, d_cam, frustum, u_j, kappa, delta)
    return [ConstraintRow(A[k].copy(), float(b[k]), k) for k in range(6)]


def hdot_direct(
    x: RelativeState, d_cam: float, frustum: FrustumParams, u_i: CommandLike, u_j: CommandLike
) -> np.ndarray:
    q = cartesian_from_spherical(x).as_array()
    M, c = qdot_affine(x, q, d_cam, u_j)
    return barrier_gradients(frustum) @ (M @ as_vec4(u_i) + c)


def hdot_spherical(
    x: RelativeState, d_cam: float, frustum: FrustumParams, u_i: CommandLike, u_j: CommandLike
) -> np.ndarray:
    """``grad_h^T (dq/dx) (F u_j + G u_i)``; oracle for :func:`hdot_direct`."""
    return barrier_gradients(frustum) @ (dq_dx(x) @ xdot(x, d_cam, u_i, u_j))


def gamma(
    x: RelativeState,
    d_cam: float,
    frustum: FrustumParams,
    u_i: CommandLike,
    u_j: CommandLike,
    kappa: float,
) -> np.ndarray:
    """``hdot_l + kappa h_l`` for all six barriers."""
    h = barrier_array(cartesian_from_spherical(x).as_array(), frustum)
    return hdot_direct(x, d_cam, frustum, u_i, u_j) + kappa * h
