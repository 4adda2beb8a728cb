"""Independent reference computations used by the test-suite and ``verify``.

None of these share code paths with the routines they check beyond the
basic data types: kinematics are checked against finite differences of
integrated poses, the QP against exhaustive active-set enumeration.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from lff3d.geometry import (
    FrustumParams,
    Pose,
    RelativeState,
    follower_pose_from_relative,
    relative_cartesian,
    spherical_from_cartesian,
    wrap_angle,
)
from lff3d.kinematics import as_vec4, qdot_direct
from lff3d.sim import rk4_pose


def fd_xdot(
    x: RelativeState, d_cam: float, u_i, u_j, h: float = 1e-6, leader: Pose = None
) -> np.ndarray:
    """Central difference of the relative state along two integrated poses.

    Both agents start from poses realizing ``x`` and are propagated by the
    pose integrator for ``+h`` and ``-h`` with their commands held.
    """
    if leader is None:
        leader = Pose((0.3, -0.2, 1.0), 0.4)
    follower = follower_pose_from_relative(leader, x, d_cam)
    frustum = FrustumParams(1.0, 1.0, 0.1, 1.0, d_cam)
    ui, uj = as_vec4(u_i), as_vec4(u_j)

    def state(dt):
        fp, fpsi = rk4_pose(follower.p, follower.psi, ui, dt)
        lp, lpsi = rk4_pose(leader.p, leader.psi, uj, dt)
        f, l = Pose(fp, fpsi), Pose(lp, lpsi)
        return spherical_from_cartesian(relative_cartesian(f, l, frustum), f.psi, l.psi).as_array()

    plus, minus = state(h), state(-h)
    diff = plus - minus
    for k in (1, 2, 3):
        diff[k] = wrap_angle(diff[k])
    return diff / (2.0 * h)


def _pose_pair(x: RelativeState, d_cam: float, leader: Pose = None):
    if leader is None:
        leader = Pose((0.3, -0.2, 1.0), 0.4)
    return follower_pose_from_relative(leader, x, d_cam), leader


def fd_hdot(x: RelativeState, d_cam: float, frustum: FrustumParams, u_i, u_j, h: float = 1e-6) -> np.ndarray:
    """Central difference of the six barrier values along integrated poses."""
    from lff3d.barriers import barrier_array

    follower, leader = _pose_pair(x, d_cam)
    ui, uj = as_vec4(u_i), as_vec4(u_j)

    def values(dt):
        fp, fpsi = rk4_pose(follower.p, follower.psi, ui, dt)
        lp, lpsi = rk4_pose(leader.p, leader.psi, uj, dt)
        return barrier_array(relative_cartesian(Pose(fp, fpsi), Pose(lp, lpsi), frustum).as_array(), frustum)

    return (values(h) - values(-h)) / (2.0 * h)


def xdot_from_rates(x: RelativeState, d_cam: float, u_i, u_j) -> np.ndarray:
    """Relative-state rate rebuilt from the Cartesian rate and the yaw rates.

    Differentiates ``L = |q|``, ``phi = atan2(y, x)``, ``xi = atan2(z, rho)``
    and ``alpha = psi_j - psi_i - phi`` directly, without ``F`` or ``G``.
    """
    ui, uj = as_vec4(u_i), as_vec4(u_j)
    cxi = math.cos(x.xi)
    qx, qy, qz = x.L * cxi * math.cos(x.phi), x.L * cxi * math.sin(x.phi), x.L * math.sin(x.xi)
    dx, dy, dz = qdot_direct(x, d_cam, ui, uj)
    rho2 = qx * qx + qy * qy
    rho = math.sqrt(rho2)
    L_dot = (qx * dx + qy * dy + qz * dz) / x.L
    phi_dot = (qx * dy - qy * dx) / rho2
    xi_dot = (dz * rho2 - qz * (qx * dx + qy * dy)) / (x.L * x.L * rho)
    alpha_dot = uj[3] - ui[3] - phi_dot
    return np.array([L_dot, phi_dot, xi_dot, alpha_dot])


def fd_barrier_gradients(frustum: FrustumParams, q, barrier_fn, h: float = 1e-6) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    out = np.zeros((6, 3))
    for k in range(3):
        dq = np.zeros(3)
        dq[k] = h
        out[:, k] = (barrier_fn(q + dq, frustum) - barrier_fn(q - dq, frustum)) / (2.0 * h)
    return out


def enumerate_qp(Q, c, A, b, feas_tol: float = 1e-9, exclude_pairs=()):
    """Exhaustive active-set enumeration for ``min 0.5 z'Qz + c'z, A z >= b``.

    Every subset of at most ``n`` rows is made active, the equality
    constrained problem is solved, and the feasible candidate with the lowest
    objective wins. ``exclude_pairs`` lists row pairs that can never be
    simultaneously tight (opposite box bounds) and are skipped.
    Returns ``(z, objective)`` or ``(None, inf)`` when nothing is feasible.
    """
    Q, c, A, b = (np.asarray(a, dtype=float) for a in (Q, c, A, b))
    n, m = Q.shape[0], A.shape[0]
    Qinv = np.linalg.inv(Q)
    z0 = -Qinv @ c
    scale = 1.0 + np.abs(b)
    best_z, best_f = None, math.inf
    excluded = [set(p) for p in exclude_pairs]

    def consider(z):
        nonlocal best_z, best_f
        if np.all((A @ z - b) / scale >= -feas_tol):
            f = 0.5 * z @ Q @ z + c @ z
            if f < best_f:
                best_z, best_f = z, f

    consider(z0)
    for k in range(1, min(n, m) + 1):
        combos = [
            cb for cb in itertools.combinations(range(m), k)
            if not any(p <= set(cb) for p in excluded)
        ]
        if not combos:
            continue
        idx = np.array(combos)
        AW = A[idx]  # (C, k, n)
        S = AW @ Qinv @ AW.transpose(0, 2, 1)
        rhs = b[idx] - AW @ z0
        sv = np.linalg.svd(S, compute_uv=False)
        ok = sv[:, -1] > 1e-10 * np.maximum(sv[:, 0], 1e-300)
        if not ok.any():
            continue
        lam = np.linalg.solve(S[ok], rhs[ok][..., None])[..., 0]
        Z = z0 + np.einsum("ij,cjk,ck->ci", Qinv, AW[ok].transpose(0, 2, 1), lam)
        feas = np.all((Z @ A.T - b) / scale >= -feas_tol, axis=1)
        if not feas.any():
            continue
        Zf = Z[feas]
        f = 0.5 * np.einsum("ci,ij,cj->c", Zf, Q, Zf) + Zf @ c
        i = int(np.argmin(f))
        if f[i] < best_f:
            best_z, best_f = Zf[i], float(f[i])
    return best_z, best_f


def _filter_patterns():
    """All (row status, box face) combinations with at most 4 equality
    conditions on ``u``, ordered by the number of penalised rows. Row
    status: 0 inactive, 1 tight with zero slack, 2 penalised; box: 0 free,
    1 at lower, 2 at upper."""
    rows = np.array(list(itertools.product((0, 1, 2), repeat=6)))
    box = np.array(list(itertools.product((0, 1, 2), repeat=4)))
    n_tight = (rows == 1).sum(axis=1)
    n_fixed = (box > 0).sum(axis=1)
    ri, bi = np.nonzero(n_tight[:, None] + n_fixed[None, :] <= 4)
    n_pen = (rows[ri] == 2).sum(axis=1)
    order = np.argsort(n_pen, kind="stable")
    return rows[ri][order], box[bi][order], n_pen[order]


_ROW_PATTERNS, _BOX_PATTERNS, _N_PEN = _filter_patterns()


def _filter_candidates(rows, box, A, b, u0, rho, lo, hi, tol):
    """Solve the stationarity system of every pattern and keep candidates
    that satisfy their own optimality conditions."""
    C = len(rows)
    pen = (rows == 2).astype(float)
    tight = rows == 1
    fixed = box > 0
    bound = np.where(box == 1, np.where(np.isfinite(lo), lo, 0.0), np.where(np.isfinite(hi), hi, 0.0))

    H = np.eye(4) + rho * np.einsum("cl,li,lj->cij", pen, A, A)
    r = u0 + rho * np.einsum("cl,li,l->ci", pen, A, 1.0 + b)

    # unknowns [u (4), mu (6)]
    K = np.zeros((C, 10, 10))
    rhs = np.zeros((C, 10))
    K[:, :4, :4] = H
    K[:, :4, 4:] = -A.T
    rhs[:, :4] = r
    fix_rows = np.zeros((C, 4, 10))
    fix_rows[:, np.arange(4), np.arange(4)] = 1.0
    K[:, :4] = np.where(fixed[..., None], fix_rows, K[:, :4])
    rhs[:, :4] = np.where(fixed, bound, rhs[:, :4])
    mu_rows = np.zeros((C, 6, 10))
    mu_rows[:, np.arange(6), 4 + np.arange(6)] = 1.0
    tight_rows = np.zeros((C, 6, 10))
    tight_rows[:, :, :4] = A
    K[:, 4:] = np.where(tight[..., None], tight_rows, mu_rows)
    rhs[:, 4:] = np.where(tight, b, 0.0)

    try:
        Z = np.linalg.solve(K, rhs[..., None])[..., 0]
        ok = np.ones(C, dtype=bool)
    except np.linalg.LinAlgError:
        ok = np.linalg.det(K) != 0.0
        Z = np.full((C, 10), np.nan)
        Z[ok] = np.linalg.solve(K[ok], rhs[ok][..., None])[..., 0]
    # near-singular patterns give garbage; keep only solutions that satisfy their system
    with np.errstate(invalid="ignore", over="ignore"):
        resid = np.abs(np.einsum("cij,cj->ci", K, Z) - rhs).max(axis=1)
        ok &= resid <= 1e-9 * (1.0 + np.abs(rhs).max(axis=1))
    U, mu = Z[:, :4], Z[:, 4:]

    s = b[None] - U @ A.T
    stol = tol * (1.0 + np.abs(b))
    mtol = 1e-9 * (1.0 + np.abs(r).max(axis=1, keepdims=True))
    grad = np.einsum("cij,cj->ci", H, U) - r - mu @ A
    with np.errstate(invalid="ignore"):
        valid = ok.copy()
        valid &= np.all(np.where(rows == 0, s <= stol, True), axis=1)
        valid &= np.all(np.where(rows == 2, s >= -stol, True), axis=1)
        valid &= np.all(np.where(tight, (mu >= -mtol) & (mu <= rho + mtol), True), axis=1)
        valid &= np.all((U >= lo - tol) & (U <= hi + tol), axis=1)
        valid &= np.all(np.where(box == 1, grad >= -mtol, np.where(box == 2, grad <= mtol, True)), axis=1)
    return U[valid]


def enumerate_filter_qp(A_cbf, b_cbf, u_nom, rho, u_min, u_max, tol: float = 1e-9):
    """Exhaustive oracle specialised to the safety-filter QP.

    At the optimum each slack equals ``max(0, b - a.u)``, so the problem
    reduces to ``0.5|u - u_nom|^2 + rho * sum(g(max(0, b - A u)))`` with
    ``g(s) = s + s^2/2`` under box bounds. Each CBF row is inactive, tight
    (multiplier in ``[0, rho]``) or penalised, each command component free or
    on a box face; every combination is solved in closed form and the
    candidate meeting its own optimality conditions with the lowest true
    objective is returned as ``z = [u, slack]``.

    Patterns are visited in groups of increasing penalised-row count. A
    candidate meeting the optimality conditions is the unique minimizer of
    the strictly convex problem, so later groups are skipped once a group
    yields one.
    """
    A = np.asarray(A_cbf, dtype=float)
    b = np.asarray(b_cbf, dtype=float)
    u0 = np.asarray(u_nom, dtype=float)
    lo = np.asarray(u_min, dtype=float)
    hi = np.asarray(u_max, dtype=float)

    usable = np.all((_BOX_PATTERNS != 1) | np.isfinite(lo), axis=1)
    usable &= np.all((_BOX_PATTERNS != 2) | np.isfinite(hi), axis=1)
    # exact pruning from the box: a row no box point satisfies must be
    # penalised, a row every box point satisfies strictly must be inactive
    with np.errstate(invalid="ignore"):
        reach_hi = np.where(A > 0, A * hi, np.where(A < 0, A * lo, 0.0)).sum(axis=1)
        reach_lo = np.where(A > 0, A * lo, np.where(A < 0, A * hi, 0.0)).sum(axis=1)
    margin = 1e-9 * (1.0 + np.abs(b))
    forced_pen = reach_hi < b - margin
    forced_off = reach_lo > b + margin
    usable &= np.all(~forced_pen | (_ROW_PATTERNS == 2), axis=1)
    usable &= np.all(~forced_off | (_ROW_PATTERNS == 0), axis=1)
    for k in range(7):
        sel = usable & (_N_PEN == k)
        Uc = _filter_candidates(_ROW_PATTERNS[sel], _BOX_PATTERNS[sel], A, b, u0, rho, lo, hi, tol)
        if len(Uc):
            break
    else:
        return None, math.inf
    slack = np.maximum(0.0, b[None] - Uc @ A.T)
    f = 0.5 * np.sum((Uc - u0) ** 2, axis=1) + rho * np.sum(slack + 0.5 * slack**2, axis=1)
    i = int(np.argmin(f))
    return np.r_[Uc[i], slack[i]], float(f[i])
