"""Scenario configuration: YAML documents validated with pydantic.

The grammar is documented in ``docs/config.md``. Unknown keys are rejected
everywhere; errors name the offending field path.
"""

from __future__ import annotations

import math
from importlib import resources
from pathlib import Path
from typing import List, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from typing_extensions import Annotated

from lff3d.controller import FormationReference, Gains
from lff3d.geometry import FrustumParams, Pose, RelativeState, follower_pose_from_relative
from lff3d.safety_filter import CbfParams
from lff3d.sim import FollowerSpec, Lemniscate, Scenario, Scripted, Segment, WaypointPath

PRESET_VERSION = "v1"

Vec3 = Annotated[List[float], Field(min_length=3, max_length=3)]
Vec4 = Annotated[List[float], Field(min_length=4, max_length=4)]
Vec6 = Annotated[List[float], Field(min_length=6, max_length=6)]


class ConfigError(ValueError):
    pass


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PoseConfig(_Model):
    p: Vec3
    psi: float = 0.0


class FrustumConfig(_Model):
    phi_fov: float = Field(gt=0.0, lt=math.pi)
    theta_fov: float = Field(gt=0.0, lt=math.pi)
    x_near: float = Field(gt=0.0)
    x_far: float = Field(gt=0.0, le=1000.0)
    d_cam: float = Field(default=0.0, ge=0.0, le=10.0)

    @model_validator(mode="after")
    def _depth_order(self):
        if not self.x_near < self.x_far:
            raise ValueError("x_near must be smaller than x_far")
        return self


class GainsConfig(_Model):
    k_L: float = Field(default=2.0, gt=0.0, le=100.0)
    k_phi: float = Field(default=2.0, gt=0.0, le=100.0)
    k_xi: float = Field(default=2.0, gt=0.0, le=100.0)
    k_alpha: float = Field(default=2.0, gt=0.0, le=100.0)


class CbfConfig(_Model):
    kappa: float = Field(default=1.5, gt=0.0, le=1000.0)
    delta: Vec6 = [0.0] * 6
    rho: float = Field(default=1e4, gt=0.0)
    u_min: Vec4 = [-2.0, -2.0, -2.0, -2.0]
    u_max: Vec4 = [2.0, 2.0, 2.0, 2.0]

    @field_validator("delta")
    @classmethod
    def _nonneg(cls, v):
        if any(not (math.isfinite(d) and d >= 0.0) for d in v):
            raise ValueError("delta entries must be finite and non-negative")
        return v

    @model_validator(mode="after")
    def _box(self):
        if any(lo > hi for lo, hi in zip(self.u_min, self.u_max)):
            raise ValueError("u_min must not exceed u_max componentwise")
        return self


class SegmentConfig(_Model):
    to: Vec3
    speed: float = Field(gt=0.0)
    dwell: float = Field(default=0.0, ge=0.0)
    stop: Literal["smooth", "abrupt"] = "smooth"


class WaypointConfig(_Model):
    type: Literal["waypoint_piecewise"]
    accel: float = Field(default=1.0, gt=0.0)
    segments: List[SegmentConfig] = []


class LemniscateConfig(_Model):
    type: Literal["lemniscate"]
    scale: float = Field(gt=0.0)
    period: float = Field(gt=0.0)
    yaw_amplitude: float = 0.0
    ramp: float = Field(default=2.0, ge=0.0)
    start_time: float = Field(default=0.0, ge=0.0)


class ScriptedConfig(_Model):
    type: Literal["scripted"]
    commands: List[Annotated[List[float], Field(min_length=5, max_length=5)]]

    @field_validator("commands")
    @classmethod
    def _increasing(cls, v):
        times = [row[0] for row in v]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("command time stamps must be strictly increasing")
        return v


Trajectory = Annotated[
    Union[WaypointConfig, LemniscateConfig, ScriptedConfig], Field(discriminator="type")
]


class LeaderConfig(_Model):
    pose: PoseConfig
    max_speed: float = Field(default=3.0, gt=0.0)
    trajectory: Trajectory


class InitialConfig(_Model):
    """Either an explicit pose or a relative state ``[L, phi, xi, alpha]``
    measured from the leader's initial pose."""

    p: Optional[Vec3] = None
    psi: Optional[float] = None
    relative: Optional[Vec4] = None

    @model_validator(mode="after")
    def _one_of(self):
        if (self.relative is None) == (self.p is None):
            raise ValueError("give exactly one of 'p' (with optional 'psi') or 'relative'")
        if self.relative is not None and self.psi is not None:
            raise ValueError("'psi' is implied by 'relative'")
        return self


class StageConfig(_Model):
    t: float = Field(ge=0.0)
    x: Vec4


class ReferenceConfig(_Model):
    ramp: float = Field(default=2.0, gt=0.0)
    stages: List[StageConfig] = Field(min_length=1)


class FollowerConfig(_Model):
    name: str = ""
    cbf_enabled: bool = True
    initial: InitialConfig
    reference: ReferenceConfig


class ScenarioConfig(_Model):
    name: str = ""
    dt: float = Field(default=0.01, gt=0.0, le=0.1)
    duration: float = Field(gt=0.0, le=3600.0)
    seed: int = 0  # reserved; every model here is deterministic
    message_delay_ticks: int = Field(default=0, ge=0, le=1000)
    tau_lag: float = Field(default=0.0, ge=0.0, le=10.0)
    frustum: FrustumConfig
    gains: GainsConfig = GainsConfig()
    cbf: CbfConfig = CbfConfig()
    leader: LeaderConfig
    followers: List[FollowerConfig] = Field(min_length=1)

    @model_validator(mode="after")
    def _consistent(self):
        ticks = self.duration / self.dt
        if abs(ticks - round(ticks)) > 1e-9 * max(1.0, ticks):
            raise ValueError("duration must be an integer multiple of dt")
        try:
            self.build()
        except (ValueError, ArithmeticError) as exc:
            raise ValueError(str(exc)) from exc
        speed = self._leader_trajectory().max_speed()
        if speed > self.leader.max_speed + 1e-12:
            raise ValueError(
                f"leader trajectory reaches {speed:.3f} m/s, above leader.max_speed={self.leader.max_speed}"
            )
        return self

    # -- runtime objects ---------------------------------------------------

    def frustum_params(self) -> FrustumParams:
        return FrustumParams(**self.frustum.model_dump())

    def _leader_trajectory(self):
        start = Pose(self.leader.pose.p, self.leader.pose.psi)
        tr = self.leader.trajectory
        if isinstance(tr, WaypointConfig):
            segs = [Segment(tuple(s.to), s.speed, s.dwell, s.stop) for s in tr.segments]
            return WaypointPath(start, segs, tr.accel)
        if isinstance(tr, LemniscateConfig):
            return Lemniscate(start.p, tr.scale, tr.period, tr.yaw_amplitude, start.psi, tr.ramp, tr.start_time)
        rows = np.asarray(tr.commands, dtype=float)
        return Scripted(start, rows[:, 0], rows[:, 1:])

    def build(self) -> Scenario:
        frustum = self.frustum_params()
        leader = self._leader_trajectory()
        cbf = self.cbf
        followers = []
        for f in self.followers:
            params = CbfParams(cbf.kappa, np.array(cbf.delta), cbf.rho, np.array(cbf.u_min),
                               np.array(cbf.u_max), f.cbf_enabled)
            ref = FormationReference.from_stages([(s.t, s.x) for s in f.reference.stages], f.reference.ramp)
            if f.initial.relative is not None:
                pose = follower_pose_from_relative(
                    leader.initial_pose(), RelativeState.from_array(f.initial.relative), frustum.d_cam
                )
            else:
                pose = Pose(f.initial.p, f.initial.psi or 0.0)
            followers.append(FollowerSpec(pose, ref, params, f.name))
        return Scenario(
            dt=self.dt,
            duration=self.duration,
            frustum=frustum,
            gains=Gains(**self.gains.model_dump()),
            leader=leader,
            followers=tuple(followers),
            message_delay_ticks=self.message_delay_ticks,
            tau_lag=self.tau_lag,
            name=self.name,
        )

    def stage_times(self, follower: int = 0) -> List[float]:
        return [s.t for s in self.followers[follower].reference.stages]


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "invalid scenario config:\n  " + "\n  ".join(lines)


def parse_config(text: str) -> ScenarioConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level")
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from exc


def load_config(path) -> ScenarioConfig:
    return parse_config(Path(path).read_text())


def dump_config(cfg: ScenarioConfig) -> str:
    """Canonical YAML text; ``parse_config(dump_config(c)) == c``."""
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False, default_flow_style=None)


def preset_names() -> List[str]:
    root = resources.files("lff3d") / "presets" / PRESET_VERSION
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def preset_text(name: str) -> str:
    path = resources.files("lff3d") / "presets" / PRESET_VERSION / f"{name}.yaml"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return path.read_text()


def load_preset(name: str, **overrides) -> ScenarioConfig:
    """Load a shipped preset, optionally replacing top-level fields."""
    cfg = parse_config(preset_text(name))
    if overrides:
        data = cfg.model_dump(mode="json")
        for key, value in overrides.items():
            if isinstance(value, BaseModel):
                value = value.model_dump(mode="json")
            data[key] = value
        try:
            cfg = ScenarioConfig.model_validate(data)
        except ValidationError as exc:
            raise ConfigError(_format_errors(exc)) from exc
    return cfg
