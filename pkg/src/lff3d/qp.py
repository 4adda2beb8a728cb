"""Dense strictly convex QP solver for the safety filter.

Solves ``min 0.5 z'Qz + c'z  s.t.  A z >= b`` with the Goldfarb-Idnani dual
active-set method. Starting from the unconstrained minimizer it adds the
most violated row (lowest index on ties) and drops rows whose multipliers
would turn negative, so it needs no feasible starting point and terminates
finitely with an exact active set. The final iterate is polished by one
equality-constrained KKT solve and certified by its KKT residuals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

OPTIMAL = "optimal"
MAX_ITERATIONS = "max_iterations"
INFEASIBLE = "infeasible"

STATUS_CODES = {OPTIMAL: 0, MAX_ITERATIONS: 1, INFEASIBLE: 2}


class QpError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class QpProblem:
    Q: np.ndarray
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        n = Q.shape[0]
        if Q.shape != (n, n):
            raise QpError(f"Q must be square, got shape {Q.shape}")
        c = np.array(self.c, dtype=float).reshape(n)
        A = np.array(self.A, dtype=float).reshape(-1, n)
        b = np.array(self.b, dtype=float).reshape(A.shape[0])
        for name, arr in (("Q", Q), ("c", c), ("A", A), ("b", b)):
            if not np.all(np.isfinite(arr)):
                raise QpError(f"{name} has non-finite entries")
        if not np.allclose(Q, Q.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(Q).max())):
            raise QpError("Q must be symmetric")
        for name, arr in (("Q", Q), ("c", c), ("A", A), ("b", b)):
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def objective(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(0.5 * z @ self.Q @ z + self.c @ z)


@dataclass(frozen=True, eq=False)
class QpSolution:
    z: np.ndarray
    status: str
    active_set: tuple
    duals: np.ndarray
    iterations: int
    primal_infeasibility: float
    stationarity: float
    dual_infeasibility: float
    complementarity: float
    objective: float

    @property
    def kkt_residual(self) -> float:
        return max(
            self.primal_infeasibility,
            self.stationarity,
            self.dual_infeasibility,
            self.complementarity,
        )

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class _Factor:
    """Cholesky factor of Q, cached per problem."""

    Q: np.ndarray
    cho: tuple = field(init=False)

    def __post_init__(self):
        try:
            self.cho = cho_factor(self.Q, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise QpError("Q is not positive definite") from exc

    def solve(self, rhs):
        return cho_solve(self.cho, rhs, check_finite=False)


def kkt_residuals(p: QpProblem, z: np.ndarray, duals: np.ndarray):
    slack = p.A @ z - p.b
    primal = float(max(0.0, -slack.min())) if p.m else 0.0
    grad = p.Q @ z + p.c - p.A.T @ duals
    stationarity = float(np.abs(grad).max()) if p.n else 0.0
    dual = float(max(0.0, -duals.min())) if p.m else 0.0
    comp = float(np.abs(duals * slack).max()) if p.m else 0.0
    return primal, stationarity, dual, comp


def _equality_solve(p: QpProblem, fac: _Factor, active: Sequence[int]):
    """Minimize the cost on ``A_W z = b_W``; returns ``(z, lam_W)``."""
    z0 = -fac.solve(p.c)
    if not active:
        return z0, np.zeros(0)
    N = p.A[list(active)].T
    QiN = fac.solve(N)
    S = N.T @ QiN
    S_inv = np.linalg.inv(S)
    bW = p.b[list(active)]
    lam = S_inv @ (bW - N.T @ z0)
    z = z0 + QiN @ lam
    # the Schur complement can be ill-conditioned when slack weights are
    # large; a few refinement sweeps on the full KKT residual recover the
    # lost digits
    for _ in range(3):
        r_stat = p.Q @ z + p.c - N @ lam
        r_feas = bW - N.T @ z
        if max(np.abs(r_stat).max(), np.abs(r_feas).max()) == 0.0:
            break
        dz0 = -fac.solve(r_stat)
        dlam = S_inv @ (r_feas - N.T @ dz0)
        z = z + dz0 + QiN @ dlam
        lam = lam + dlam
    return z, lam


def _finish(p, z, status, active, lam_active, iterations):
    duals = np.zeros(p.m)
    for k, j in enumerate(active):
        duals[j] = lam_active[k]
    primal, stat, dual, comp = kkt_residuals(p, z, duals)
    return QpSolution(
        z=z,
        status=status,
        active_set=tuple(sorted(active)),
        duals=duals,
        iterations=iterations,
        primal_infeasibility=primal,
        stationarity=stat,
        dual_infeasibility=dual,
        complementarity=comp,
        objective=p.objective(z),
    )


def _warm_start(p: QpProblem, fac: _Factor, guess: Sequence[int]):
    """Turn a guessed active set into a dual-feasible starting pair."""
    active = []
    for j in sorted(set(int(g) for g in guess)):
        if not 0 <= j < p.m:
            continue
        rows = p.A[active + [j]]
        if np.linalg.matrix_rank(rows) == len(active) + 1:
            active.append(j)
    while True:
        z, lam = _equality_solve(p, fac, active)
        if lam.size == 0 or lam.min() >= 0.0:
            return z, active, list(lam)
        del active[int(np.argmin(lam))]


def solve(
    p: QpProblem,
    max_iter: int = 200,
    feas_tol: float = 1e-12,
    warm_start: Optional[Sequence[int]] = None,
) -> QpSolution:
    """Global minimizer of the strictly convex QP ``p``.

    ``max_iter`` bounds the number of add/drop steps. ``warm_start`` is an
    optional guess of the active set; it only affects the iteration count.
    """
    fac = _Factor(p.Q)
    if warm_start:
        z, active, lam = _warm_start(p, fac, warm_start)
    else:
        z = -fac.solve(p.c)
        active, lam = [], []
    scale = 1.0 + np.abs(p.b)
    iterations = 0

    while True:
        slack = p.A @ z - p.b
        violation = slack / scale
        if p.m == 0 or violation.min() >= -feas_tol:
            break
        cand = int(np.argmin(violation))
        n_p = p.A[cand]
        lam_p = 0.0
        while True:
            iterations += 1
            if iterations > max_iter:
                return _finish(p, z, MAX_ITERATIONS, active, lam, iterations - 1)
            Qi_np = fac.solve(n_p)
            if active:
                N = p.A[active].T
                QiN = fac.solve(N)
                r = np.linalg.solve(N.T @ QiN, N.T @ Qi_np)
                step_dir = Qi_np - QiN @ r
            else:
                r = np.zeros(0)
                step_dir = Qi_np

            t_partial, k_drop = np.inf, -1
            for k in range(len(active)):
                if r[k] > 0.0:
                    ratio = lam[k] / r[k]
                    if ratio < t_partial:
                        t_partial, k_drop = ratio, k

            curvature = float(step_dir @ n_p)
            if curvature > 1e-12 * float(n_p @ Qi_np):
                s_p = float(n_p @ z - p.b[cand])
                t_full = -s_p / curvature
            else:
                t_full = np.inf

            if not np.isfinite(t_partial) and not np.isfinite(t_full):
                return _finish(p, z, INFEASIBLE, active, lam, iterations)

            if not np.isfinite(t_full):
                # n_p is (numerically) in the span of the active rows
                lam = [lam[k] - t_partial * r[k] for k in range(len(active))]
                lam_p += t_partial
                del active[k_drop], lam[k_drop]
                continue

            t = min(t_partial, t_full)
            z = z + t * step_dir
            lam = [lam[k] - t * r[k] for k in range(len(active))]
            lam_p += t
            if t_full <= t_partial:
                active.append(cand)
                lam.append(lam_p)
                break
            del active[k_drop], lam[k_drop]

    # polish on the identified active set
    if active:
        z_pol, lam_pol = _equality_solve(p, fac, active)
        slack = p.A @ z_pol - p.b
        if lam_pol.min() >= -1e-12 and (slack / scale).min() >= -1e-10:
            z, lam = z_pol, list(np.maximum(lam_pol, 0.0))
    return _finish(p, z, OPTIMAL, active, lam, iterations)
