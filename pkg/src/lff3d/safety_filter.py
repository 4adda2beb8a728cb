"""CBF-QP safety filter keeping the leader inside the follower's frustum."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from lff3d import qp
from lff3d.barriers import BarrierValues, constraint_matrices
from lff3d.geometry import FrustumParams, RelativeState
from lff3d.kinematics import CommandLike, VelocityCommand, as_vec4

INTERVENTION_TOL = 1e-6
N_U = 4
N_SLACK = 6


def _vec(values, n, name):
    arr = np.array(values, dtype=float).reshape(n)
    if np.isnan(arr).any():
        raise ValueError(f"{name} contains NaN")
    return arr


@dataclass(frozen=True, eq=False)
class CbfParams:
    """Filter settings.

    ``delta`` is the per-face robustness margin, ``rho`` the slack penalty,
    ``u_min``/``u_max`` hard box bounds on the follower command (use
    ``inf`` to leave a component unbounded). ``enabled=False`` gives the
    NoCBF baseline: the nominal command is only clipped to the box.
    """

    kappa: float = 1.5
    delta: np.ndarray = field(default_factory=lambda: np.zeros(6))
    rho: float = 1e4
    u_min: np.ndarray = field(default_factory=lambda: np.full(4, -2.0))
    u_max: np.ndarray = field(default_factory=lambda: np.full(4, 2.0))
    enabled: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.kappa) and self.kappa > 0.0):
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not (math.isfinite(self.rho) and self.rho > 0.0):
            raise ValueError(f"rho must be positive, got {self.rho}")
        delta = _vec(self.delta, 6, "delta")
        if not (np.all(np.isfinite(delta)) and np.all(delta >= 0.0)):
            raise ValueError(f"delta must be finite and non-negative, got {delta}")
        u_min = _vec(self.u_min, 4, "u_min")
        u_max = _vec(self.u_max, 4, "u_max")
        if np.any(u_min > u_max):
            raise ValueError(f"u_min must not exceed u_max ({u_min} vs {u_max})")
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "u_min", u_min)
        object.__setattr__(self, "u_max", u_max)

    def clip(self, u) -> np.ndarray:
        return np.minimum(np.maximum(as_vec4(u), self.u_min), self.u_max)


@dataclass(frozen=True, eq=False)
class SafetyFilterResult:
    u_safe: VelocityCommand
    u_nom: VelocityCommand
    slacks: np.ndarray
    barriers: BarrierValues
    intervention: bool
    qp: Optional[qp.QpSolution]
    cbf_active: tuple = ()

    @property
    def status(self) -> str:
        return "disabled" if self.qp is None else self.qp.status


def build_problem(
    A_cbf: np.ndarray, b_cbf: np.ndarray, u_nom: np.ndarray, params: CbfParams
) -> qp.QpProblem:
    """QP over ``z = [u (4), slack (6)]``.

    Cost ``0.5|u - u_nom|^2 + rho * sum(slack + 0.5 slack^2)``. The linear
    part makes the penalty exact: a slack stays at exactly zero unless the
    row's multiplier would exceed ``rho``. Rows, in order: six relaxed CBF
    rows, six slack sign rows, then finite lower and upper box bounds.
    """
    n = N_U + N_SLACK
    Q = np.diag(np.r_[np.ones(N_U), np.full(N_SLACK, params.rho)])
    c = np.r_[-u_nom, np.full(N_SLACK, params.rho)]
    rows = [np.hstack([A_cbf, np.eye(N_SLACK)]), np.hstack([np.zeros((N_SLACK, N_U)), np.eye(N_SLACK)])]
    rhs = [b_cbf, np.zeros(N_SLACK)]
    for k in range(N_U):
        if np.isfinite(params.u_min[k]):
            row = np.zeros((1, n))
            row[0, k] = 1.0
            rows.append(row)
            rhs.append([params.u_min[k]])
    for k in range(N_U):
        if np.isfinite(params.u_max[k]):
            row = np.zeros((1, n))
            row[0, k] = -1.0
            rows.append(row)
            rhs.append([-params.u_max[k]])
    return qp.QpProblem(Q, c, np.vstack(rows), np.concatenate([np.ravel(r) for r in rhs]))


def filter_command(
    x: RelativeState,
    d_cam: float,
    frustum: FrustumParams,
    u_nom: CommandLike,
    u_j: CommandLike,
    params: CbfParams,
    warm_start=None,
    max_iter: int = 200,
) -> SafetyFilterResult:
    """Minimally modify ``u_nom`` so every frustum face satisfies
    ``hdot + kappa h >= delta - slack``."""
    u_nom_vec = as_vec4(u_nom)
    A_cbf, b_cbf, h = constraint_matrices(x, d_cam, frustum, u_j, params.kappa, params.delta)
    barriers = BarrierValues(h)

    if not params.enabled:
        u_safe = params.clip(u_nom_vec)
        return SafetyFilterResult(
            u_safe=VelocityCommand.from_array(u_safe),
            u_nom=VelocityCommand.from_array(u_nom_vec),
            slacks=np.zeros(N_SLACK),
            barriers=barriers,
            intervention=bool(np.linalg.norm(u_safe - u_nom_vec) > INTERVENTION_TOL),
            qp=None,
        )

    problem = build_problem(A_cbf, b_cbf, u_nom_vec, params)
    sol = qp.solve(problem, max_iter=max_iter, warm_start=warm_start)
    u_safe = sol.z[:N_U].copy()
    slacks = np.maximum(sol.z[N_U:], 0.0)
    # an active sign row pins its slack at exactly zero; drop refinement noise
    for j in sol.active_set:
        if N_SLACK <= j < 2 * N_SLACK:
            slacks[j - N_SLACK] = 0.0
    return SafetyFilterResult(
        u_safe=VelocityCommand.from_array(u_safe),
        u_nom=VelocityCommand.from_array(u_nom_vec),
        slacks=slacks,
        barriers=barriers,
        intervention=bool(np.linalg.norm(u_safe - u_nom_vec) > INTERVENTION_TOL),
        qp=sol,
        cbf_active=tuple(j for j in sol.active_set if j < N_SLACK),
    )
