"""Deterministic fixed-step leader/follower simulation.

Each vehicle follows the near-hover kinematic model: its yaw-frame velocity
command is tracked ideally (``pdot = R_z(psi) v``, ``psidot = w``), or
through an optional first-order lag that stands in for an imperfect
low-level velocity loop. Control and integration share one rate.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from lff3d.controller import FormationReference, Gains, nominal_command, tracking_error
from lff3d.geometry import (
    FrustumParams,
    Pose,
    RelativeState,
    SingularityError,
    relative_cartesian,
    spherical_from_cartesian,
)
from lff3d.kinematics import EPS_XI, VelocityCommand, as_vec4
from lff3d.qp import STATUS_CODES
from lff3d.safety_filter import CbfParams, filter_command

log = logging.getLogger(__name__)

QP_DISABLED = -1


# --------------------------------------------------------------------------
# vehicle integration


def _pose_rate(psi, u):
    c, s = math.cos(psi), math.sin(psi)
    return np.array([c * u[0] - s * u[1], s * u[0] + c * u[1], u[2]]), u[3]


def rk4_pose(p, psi: float, u, dt: float):
    """One RK4 step of ``pdot = R_z(psi) v``, ``psidot = w`` with ``u`` held.

    Accepts negative ``dt`` (used by the finite-difference oracle). Yaw is
    returned unwrapped.
    """
    p = np.asarray(p, dtype=float)
    u = as_vec4(u)
    k1p, k1s = _pose_rate(psi, u)
    k2p, k2s = _pose_rate(psi + 0.5 * dt * k1s, u)
    k3p, k3s = _pose_rate(psi + 0.5 * dt * k2s, u)
    k4p, k4s = _pose_rate(psi + dt * k3s, u)
    p_next = p + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    psi_next = psi + dt / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
    return p_next, psi_next


def _lagged_rate(state, u_cmd, tau):
    psi, ua = state[3], state[4:]
    dp, dpsi = _pose_rate(psi, ua)
    return np.concatenate([dp, [dpsi], (u_cmd - ua) / tau])


@dataclass(frozen=True, eq=False)
class AgentState:
    """Pose plus the velocity actually being flown.

    With ``tau_lag == 0`` the applied velocity equals the last command.
    """

    pose: Pose
    u_applied: np.ndarray = field(default_factory=lambda: np.zeros(4))
    tau_lag: float = 0.0


def step_pose(s: AgentState, u, dt: float) -> AgentState:
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    u = as_vec4(u)
    if s.tau_lag <= 0.0:
        p, psi = rk4_pose(s.pose.p, s.pose.psi, u, dt)
        return AgentState(Pose(p, psi), u.copy(), 0.0)
    y = np.concatenate([s.pose.p, [s.pose.psi], s.u_applied])
    tau = s.tau_lag
    k1 = _lagged_rate(y, u, tau)
    k2 = _lagged_rate(y + 0.5 * dt * k1, u, tau)
    k3 = _lagged_rate(y + 0.5 * dt * k2, u, tau)
    k4 = _lagged_rate(y + dt * k3, u, tau)
    y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return AgentState(Pose(y[:3], y[3]), y[4:].copy(), tau)


# --------------------------------------------------------------------------
# leader trajectories


def _yaw_frame(psi, v_inertial):
    c, s = math.cos(psi), math.sin(psi)
    return np.array([c * v_inertial[0] + s * v_inertial[1], -s * v_inertial[0] + c * v_inertial[1], v_inertial[2]])


@dataclass(frozen=True)
class Segment:
    target: tuple
    speed: float
    dwell: float = 0.0
    stop: str = "smooth"  # or "abrupt"


class WaypointPath:
    """Straight legs between waypoints at a cruise speed.

    Legs accelerate at ``accel``; a ``smooth`` stop decelerates at the same
    rate, an ``abrupt`` stop cuts the speed to zero on arrival. Yaw is held.
    """

    kind = "waypoint_piecewise"

    def __init__(self, start: Pose, segments: Sequence[Segment], accel: float = 1.0):
        if accel <= 0.0:
            raise ValueError("accel must be positive")
        self.start = start
        self.segments = list(segments)
        self.accel = accel
        self._legs = []  # (t0, direction, distance, speed, t_acc, t_cruise, t_dec, abrupt, t_end_motion, t_end)
        t = 0.0
        pos = start.p.copy()
        for seg in self.segments:
            target = np.asarray(seg.target, dtype=float)
            delta = target - pos
            dist = float(np.linalg.norm(delta))
            direction = delta / dist if dist > 0.0 else np.zeros(3)
            abrupt = seg.stop == "abrupt"
            vmax = seg.speed
            n_ramps = 1 if abrupt else 2
            # trapezoid, or triangle when the leg is too short to reach cruise speed
            if n_ramps * vmax * vmax / (2.0 * accel) > dist:
                vmax = math.sqrt(2.0 * accel * dist / n_ramps)
            t_acc = vmax / accel if dist > 0.0 else 0.0
            t_dec = 0.0 if abrupt else t_acc
            ramp_dist = 0.5 * vmax * t_acc * n_ramps
            t_cruise = (dist - ramp_dist) / vmax if vmax > 0.0 else 0.0
            t_motion = t_acc + t_cruise + t_dec
            self._legs.append((t, direction, vmax, t_acc, t_cruise, t_dec, t + t_motion, t + t_motion + seg.dwell))
            t += t_motion + seg.dwell
            pos = target
        self.end_time = t

    def initial_pose(self) -> Pose:
        return self.start

    def speed_along(self, t: float):
        for t0, direction, vmax, t_acc, t_cruise, t_dec, t_stop, t_end in self._legs:
            if t0 <= t < t_end:
                tau = t - t0
                if t >= t_stop:
                    return direction, 0.0
                if tau < t_acc:
                    return direction, self.accel * tau
                if tau < t_acc + t_cruise:
                    return direction, vmax
                return direction, max(vmax - self.accel * (tau - t_acc - t_cruise), 0.0)
        return np.zeros(3), 0.0

    def command(self, t: float, pose: Pose) -> np.ndarray:
        direction, speed = self.speed_along(t)
        return np.r_[_yaw_frame(pose.psi, direction * speed), 0.0]

    def max_speed(self) -> float:
        return max((leg[2] for leg in self._legs), default=0.0)


class Lemniscate:
    """Figure-eight ``c + (a sin th, a/2 sin 2th, 0)`` with yaw
    ``psi0 + A sin th``; phase ``th = 2 pi tau / T``.

    The time warp ``tau(t)`` eases in over ``ramp`` seconds so the leader
    starts from rest.
    """

    kind = "lemniscate"

    def __init__(self, center, scale: float, period: float, yaw_amplitude: float = 0.0,
                 yaw0: float = 0.0, ramp: float = 2.0, start_time: float = 0.0):
        self.center = np.asarray(center, dtype=float).reshape(3)
        self.scale = float(scale)
        self.period = float(period)
        self.yaw_amplitude = float(yaw_amplitude)
        self.yaw0 = float(yaw0)
        self.ramp = float(ramp)
        self.start_time = float(start_time)
        if self.period <= 0.0 or self.scale <= 0.0 or self.ramp < 0.0:
            raise ValueError("lemniscate needs positive period/scale and non-negative ramp")

    def _warp(self, t):
        t = t - self.start_time
        if t <= 0.0:
            return 0.0, 0.0
        if self.ramp == 0.0 or t >= self.ramp:
            return t - 0.5 * self.ramp, 1.0
        s = t / self.ramp
        return self.ramp * (s**3 - 0.5 * s**4), s * s * (3.0 - 2.0 * s)

    def initial_pose(self) -> Pose:
        return Pose(self.center, self.yaw0)

    def reference(self, t: float):
        """Planned position, inertial velocity, yaw and yaw rate."""
        tau, tau_dot = self._warp(t)
        w = 2.0 * math.pi / self.period
        th, th_dot = w * tau, w * tau_dot
        a = self.scale
        p = self.center + np.array([a * math.sin(th), 0.5 * a * math.sin(2.0 * th), 0.0])
        v = np.array([a * math.cos(th), a * math.cos(2.0 * th), 0.0]) * th_dot
        psi = self.yaw0 + self.yaw_amplitude * math.sin(th)
        psi_dot = self.yaw_amplitude * math.cos(th) * th_dot
        return p, v, psi, psi_dot

    def command(self, t: float, pose: Pose) -> np.ndarray:
        _, v, _, psi_dot = self.reference(t)
        return np.r_[_yaw_frame(pose.psi, v), psi_dot]

    def max_speed(self) -> float:
        w = 2.0 * math.pi / self.period
        th = np.linspace(0.0, 2.0 * math.pi, 4001)
        return float(self.scale * w * np.max(np.hypot(np.cos(th), np.cos(2.0 * th))))


class Scripted:
    """Explicit time-stamped leader commands, held until the next stamp."""

    kind = "scripted"

    def __init__(self, start: Pose, times: Sequence[float], commands: Sequence):
        self.start = start
        self.times = np.asarray(times, dtype=float)
        self.commands = np.asarray(commands, dtype=float).reshape(-1, 4)
        if len(self.times) != len(self.commands):
            raise ValueError("need one command per time stamp")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("scripted time stamps must be strictly increasing")

    def initial_pose(self) -> Pose:
        return self.start

    def command(self, t: float, pose: Pose) -> np.ndarray:
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return np.zeros(4) if k < 0 else self.commands[k].copy()

    def max_speed(self) -> float:
        return float(np.max(np.linalg.norm(self.commands[:, :3], axis=1), initial=0.0))


# --------------------------------------------------------------------------
# scenario


@dataclass(frozen=True, eq=False)
class FollowerSpec:
    initial: Pose
    reference: FormationReference
    cbf: CbfParams
    name: str = ""


@dataclass(frozen=True, eq=False)
class Scenario:
    dt: float
    duration: float
    frustum: FrustumParams
    gains: Gains
    leader: object  # WaypointPath | Lemniscate | Scripted
    followers: tuple
    message_delay_ticks: int = 0
    tau_lag: float = 0.0
    name: str = ""

    @property
    def n_ticks(self) -> int:
        return int(round(self.duration / self.dt))


class SimulationError(RuntimeError):
    """A CBF follower hit a kinematic singularity; ``log`` holds the ticks
    completed before ``tick``."""

    def __init__(self, message, tick, follower, log):
        super().__init__(message)
        self.tick = tick
        self.follower = follower
        self.log = log


@dataclass
class FollowerTrace:
    n: int
    cbf_enabled: bool
    pose: np.ndarray = None
    x: np.ndarray = None
    x_d: np.ndarray = None
    xdot_d: np.ndarray = None
    e: np.ndarray = None
    q: np.ndarray = None
    h: np.ndarray = None
    u_nom: np.ndarray = None
    u_safe: np.ndarray = None
    u_applied: np.ndarray = None
    slacks: np.ndarray = None
    interv: np.ndarray = None
    qpstat: np.ndarray = None
    qp_iterations: np.ndarray = None
    kkt: np.ndarray = None
    cbf_active: list = None
    u_j_used: np.ndarray = None
    terminated_tick: Optional[int] = None
    termination_reason: str = ""

    def __post_init__(self):
        n = self.n
        nan = lambda *shape: np.full((n,) + shape, np.nan)
        self.pose, self.x, self.x_d, self.xdot_d, self.e = nan(4), nan(4), nan(4), nan(4), nan(4)
        self.q, self.h = nan(3), nan(6)
        self.u_nom, self.u_safe, self.u_applied, self.u_j_used = nan(4), nan(4), nan(4), nan(4)
        self.slacks = nan(6)
        self.interv = np.zeros(n, dtype=int)
        self.qpstat = np.full(n, QP_DISABLED, dtype=int)
        self.qp_iterations = np.zeros(n, dtype=int)
        self.kkt = np.full(n, np.nan)
        self.cbf_active = [()] * n

    @property
    def min_h(self) -> np.ndarray:
        return self.h.min(axis=1)

    def truncate(self, n):
        out = FollowerTrace(n, self.cbf_enabled)
        for name in ("pose", "x", "x_d", "xdot_d", "e", "q", "h", "u_nom", "u_safe", "u_applied",
                     "slacks", "interv", "qpstat", "qp_iterations", "kkt", "u_j_used"):
            setattr(out, name, getattr(self, name)[:n].copy())
        out.cbf_active = list(self.cbf_active[:n])
        out.terminated_tick = self.terminated_tick
        out.termination_reason = self.termination_reason
        return out


@dataclass
class SimLog:
    t: np.ndarray
    leader_pose: np.ndarray  # (N, 4) px, py, pz, psi
    leader_u: np.ndarray  # (N, 4)
    followers: List[FollowerTrace]
    dt: float

    @property
    def leader_unorm(self) -> np.ndarray:
        return np.linalg.norm(self.leader_u, axis=1)

    def truncate(self, n) -> "SimLog":
        return SimLog(self.t[:n].copy(), self.leader_pose[:n].copy(), self.leader_u[:n].copy(),
                      [f.truncate(n) for f in self.followers], self.dt)


def run_scenario(config) -> SimLog:
    """Simulate ``config`` (a :class:`Scenario` or anything with ``build()``).

    Per tick: the leader publishes its command, each live follower rebuilds
    its relative state from the two poses, runs the nominal law and the
    filter, then every vehicle is integrated over ``dt``.
    """
    sc = config if isinstance(config, Scenario) else config.build()
    n = sc.n_ticks
    dt = sc.dt
    t_grid = np.arange(n) * dt
    leader_traj = sc.leader
    leader = AgentState(leader_traj.initial_pose())
    agents = [AgentState(f.initial, np.zeros(4), sc.tau_lag) for f in sc.followers]
    traces = [FollowerTrace(n, f.cbf.enabled) for f in sc.followers]
    alive = [True] * len(agents)
    leader_pose = np.zeros((n, 4))
    leader_u = np.zeros((n, 4))
    inbox = deque(maxlen=sc.message_delay_ticks + 1)
    warm = [None] * len(agents)

    for k in range(n):
        t = float(t_grid[k])
        u_j_true = leader_traj.command(t, leader.pose)
        leader_pose[k] = np.r_[leader.pose.p, leader.pose.psi]
        leader_u[k] = u_j_true
        inbox.append(u_j_true)
        u_j_msg = inbox[0]

        commands = []
        for i, (spec, agent, tr) in enumerate(zip(sc.followers, agents, traces)):
            if not alive[i]:
                commands.append(None)
                continue
            tr.pose[k] = np.r_[agent.pose.p, agent.pose.psi]
            tr.u_applied[k] = agent.u_applied
            try:
                q = relative_cartesian(agent.pose, leader.pose, sc.frustum)
                x = spherical_from_cartesian(q, agent.pose.psi, leader.pose.psi)
                if math.cos(x.xi) <= EPS_XI:
                    raise SingularityError(f"cos(xi) = {math.cos(x.xi):.3e} at t = {t:.3f} s")
                x_d, xdot_d = spec.reference.at(t)
                u_nom = nominal_command(x, sc.frustum.d_cam, x_d, xdot_d, sc.gains, u_j_msg)
            except SingularityError as exc:
                if spec.cbf.enabled:
                    log.error("follower %d: singular relative state at tick %d: %s", i, k, exc)
                    raise SimulationError(str(exc), k, i, _finish_log(t_grid, leader_pose, leader_u, traces, dt).truncate(k)) from exc
                log.warning("follower %d left the valid domain at tick %d; trace stopped", i, k)
                alive[i] = False
                tr.terminated_tick = k
                tr.termination_reason = str(exc)
                tr.pose[k] = np.nan
                tr.u_applied[k] = np.nan
                commands.append(None)
                continue

            res = filter_command(x, sc.frustum.d_cam, sc.frustum, u_nom, u_j_msg, spec.cbf, warm_start=warm[i])
            if res.qp is not None:
                warm[i] = res.qp.active_set
            tr.x[k] = x.as_array()
            tr.x_d[k] = x_d.as_array()
            tr.xdot_d[k] = xdot_d
            tr.e[k] = tracking_error(x, x_d)
            tr.q[k] = q.as_array()
            tr.h[k] = res.barriers.h
            tr.u_nom[k] = u_nom.as_array()
            tr.u_safe[k] = res.u_safe.as_array()
            tr.slacks[k] = res.slacks
            tr.interv[k] = int(res.intervention)
            tr.u_j_used[k] = u_j_msg
            if res.qp is not None:
                tr.qpstat[k] = STATUS_CODES[res.qp.status]
                tr.qp_iterations[k] = res.qp.iterations
                tr.kkt[k] = res.qp.kkt_residual
                tr.cbf_active[k] = res.cbf_active
            commands.append(res.u_safe.as_array())

        leader = step_pose(leader, u_j_true, dt)
        for i, u in enumerate(commands):
            if u is not None:
                agents[i] = step_pose(agents[i], u, dt)

    return _finish_log(t_grid, leader_pose, leader_u, traces, dt)


def _finish_log(t_grid, leader_pose, leader_u, traces, dt) -> SimLog:
    return SimLog(t_grid, leader_pose, leader_u, traces, dt)
