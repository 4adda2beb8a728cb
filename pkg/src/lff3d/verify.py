"""Oracle suite behind ``lff3d verify``.

Every check draws its samples from a fixed seed, reports the worst residual
it saw and passes when that residual is at most ``threshold * tol_scale``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from lff3d import kinematics, qp
from lff3d.barriers import constraint_matrices, hdot_direct, hdot_spherical
from lff3d.controller import FormationReference, Gains, nominal_command, tracking_error
from lff3d.geometry import FrustumParams, Pose, RelativeState
from lff3d.oracles import enumerate_filter_qp, fd_hdot, fd_xdot, xdot_from_rates
from lff3d.safety_filter import CbfParams, build_problem
from lff3d.sim import FollowerSpec, Scenario, WaypointPath, Segment, run_scenario

SEED = 20240611


@dataclass(frozen=True)
class CheckResult:
    name: str
    worst: float
    threshold: float
    samples: int
    seconds: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.worst) and self.worst <= self.threshold)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"{tag} {self.name:<18} worst={self.worst:.3e} threshold={self.threshold:.1e} "
                f"n={self.samples} ({self.seconds:.2f} s)")


def random_state(rng, L=(0.2, 5.0), xi_max=1.3) -> RelativeState:
    return RelativeState(
        rng.uniform(*L), rng.uniform(-math.pi, math.pi), rng.uniform(-xi_max, xi_max),
        rng.uniform(-math.pi, math.pi),
    )


def random_frustum(rng) -> FrustumParams:
    near = rng.uniform(0.1, 0.5)
    return FrustumParams(rng.uniform(0.5, 2.5), rng.uniform(0.5, 2.0), near,
                         near + rng.uniform(1.0, 4.0), rng.uniform(0.0, 0.2))


def random_filter_instance(rng):
    """A filter QP ``(A_cbf, b_cbf, u_nom, params)`` from a random state and
    commands; box width, margins, kappa and rho vary between instances."""
    frustum = random_frustum(rng)
    x = random_state(rng, L=(0.05, 6.0), xi_max=1.2)
    u_j = rng.normal(size=4) * rng.uniform(0.0, 2.0)
    u_nom = rng.normal(size=4) * rng.uniform(0.0, 2.0)
    w = rng.uniform(0.1, 2.5)
    params = CbfParams(
        kappa=rng.uniform(0.2, 10.0),
        delta=rng.uniform(0.0, 0.3, 6) * (rng.random(6) < 0.5),
        rho=10.0 ** rng.uniform(0.0, 4.0),
        u_min=-w * np.ones(4),
        u_max=w * np.ones(4),
    )
    A, b, _ = constraint_matrices(x, frustum.d_cam, frustum, u_j, params.kappa, params.delta)
    return A, b, u_nom, params


def _rel(a, b) -> float:
    return float(np.abs(a - b).max() / max(1.0, float(np.abs(b).max())))


# -- checks: each returns (worst residual, samples) ------------------------


def check_kinematics_fd(n=2000, seed=SEED):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        x = random_state(rng)
        d = rng.uniform(0.0, 0.3)
        ui, uj = rng.normal(size=4), rng.normal(size=4)
        worst = max(worst, _rel(fd_xdot(x, d, ui, uj), kinematics.xdot(x, d, ui, uj)))
    return worst, n


def check_kinematics_scalar(n=5000, seed=SEED + 1):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        x = random_state(rng)
        d = rng.uniform(0.0, 0.3)
        ui, uj = rng.normal(size=4), rng.normal(size=4)
        worst = max(worst, _rel(kinematics.xdot_components(x, d, ui, uj), kinematics.xdot(x, d, ui, uj)))
    return worst, n


def check_det_identity(n=5000, seed=SEED + 2):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        x = random_state(rng)
        G = kinematics.eval_G(x, rng.uniform(0.0, 0.3))
        worst = max(worst, abs(np.linalg.det(G) * x.L**2 * math.cos(x.xi) - 1.0))
    return worst, n


def check_dual_path(n=3000, seed=SEED + 3):
    """Barrier rates and relative-state rates, each through two routes:
    the spherical chain ``F u_j + G u_i`` and the Cartesian rate."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        x = random_state(rng)
        fr = random_frustum(rng)
        ui, uj = rng.normal(size=4), rng.normal(size=4)
        worst = max(
            worst,
            _rel(hdot_spherical(x, fr.d_cam, fr, ui, uj), hdot_direct(x, fr.d_cam, fr, ui, uj)),
            _rel(kinematics.xdot(x, fr.d_cam, ui, uj), xdot_from_rates(x, fr.d_cam, ui, uj)),
        )
    return worst, n


def check_cbf_row_fd(n=1000, seed=SEED + 4):
    """``a.u - b`` against finite-differenced ``hdot + kappa h - delta``."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        x = random_state(rng)
        fr = random_frustum(rng)
        ui, uj = rng.normal(size=4), rng.normal(size=4)
        kappa, delta = rng.uniform(0.2, 5.0), rng.uniform(0.0, 0.3, 6)
        A, b, h = constraint_matrices(x, fr.d_cam, fr, uj, kappa, delta)
        worst = max(worst, _rel(A @ ui - b, fd_hdot(x, fr.d_cam, fr, ui, uj) + kappa * h - delta))
    return worst, n


def _qp_runs(n, seed):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        A, b, u_nom, params = random_filter_instance(rng)
        sol = qp.solve(build_problem(A, b, u_nom, params))
        yield A, b, u_nom, params, sol


def check_qp_enumeration(n=400, seed=SEED + 5):
    worst = 0.0
    for A, b, u_nom, params, sol in _qp_runs(n, seed):
        z_ref, _ = enumerate_filter_qp(A, b, u_nom, params.rho, params.u_min, params.u_max)
        worst = max(worst, math.inf if z_ref is None or not sol.optimal else float(np.abs(sol.z - z_ref).max()))
    return worst, n


def check_qp_kkt(n=500, seed=SEED + 6):
    worst = 0.0
    for *_, sol in _qp_runs(n, seed):
        worst = max(worst, sol.kkt_residual if sol.optimal else math.inf)
    return worst, n


def check_closed_loop(seed=SEED + 7):
    """Along a simulated run with the filter off, the nominal command must
    realise ``xdot = xdot_d - K e`` exactly; the rate is evaluated with the
    term-by-term formulas, not the matrices the controller inverts."""
    rng = np.random.default_rng(seed)
    frustum = FrustumParams(math.pi / 2, math.pi / 3, 0.3, 3.0, 0.05)
    gains = Gains(2.0, 2.5, 3.0, 1.5)
    leader = WaypointPath(Pose((0.0, 0.0, 1.0), 0.2), [Segment((4.0, 1.0, 1.5), 0.6)], accel=0.5)
    stages = [(0.0, (1.2, 0.3, 0.2, -0.3)), (3.0, (1.5, -0.2, 0.4, 0.1))]
    ref = FormationReference.from_stages(stages, ramp=2.0)
    start = RelativeState(1.4, 0.1 + 0.1 * rng.random(), 0.3, 0.2)
    from lff3d.geometry import follower_pose_from_relative

    spec = FollowerSpec(
        follower_pose_from_relative(leader.initial_pose(), start, frustum.d_cam), ref, CbfParams(enabled=False)
    )
    sc = Scenario(0.01, 8.0, frustum, gains, leader, (spec,))
    log = run_scenario(sc)
    tr = log.followers[0]
    K = gains.diagonal()
    worst = 0.0
    for k in range(0, len(log.t), 5):
        x = RelativeState.from_array(tr.x[k])
        x_d = RelativeState.from_array(tr.x_d[k])
        u_nom = nominal_command(x, frustum.d_cam, x_d, tr.xdot_d[k], gains, tr.u_j_used[k])
        rate = kinematics.xdot_components(x, frustum.d_cam, u_nom.as_array(), tr.u_j_used[k])
        target = tr.xdot_d[k] - K * tracking_error(x, x_d)
        worst = max(worst, _rel(rate, target))
    return worst, len(range(0, len(log.t), 5))


CHECKS = (
    ("kinematics_fd", check_kinematics_fd, 1e-6),
    ("kinematics_scalar", check_kinematics_scalar, 1e-12),
    ("det_identity", check_det_identity, 1e-10),
    ("dual_path", check_dual_path, 1e-9),
    ("cbf_row_fd", check_cbf_row_fd, 1e-6),
    ("qp_enumeration", check_qp_enumeration, 1e-7),
    ("qp_kkt", check_qp_kkt, 1e-8),
    ("closed_loop", check_closed_loop, 1e-9),
)


def run_checks(tol_scale: float = 1.0, only: Optional[List[str]] = None,
               report: Optional[Callable[[str], None]] = None) -> List[CheckResult]:
    if not (math.isfinite(tol_scale) and tol_scale > 0.0):
        raise ValueError(f"tol_scale must be a positive number, got {tol_scale}")
    results = []
    for name, fn, threshold in CHECKS:
        if only and name not in only:
            continue
        t0 = time.perf_counter()
        try:
            with np.errstate(all="ignore"):
                worst, n = fn()
        except (ArithmeticError, ValueError, np.linalg.LinAlgError):
            worst, n = math.inf, 0
        res = CheckResult(name, float(worst), threshold * tol_scale, n, time.perf_counter() - t0)
        if report:
            report(res.line())
        results.append(res)
    return results
