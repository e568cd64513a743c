"""Ground-truth generation for a differential-drive robot and multi-rate sensor sampling.

Every sampler draws from its own random stream derived from the master seed
and a fixed per-sensor label, so outputs do not depend on call order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from fusodom.core import (
    InvalidArgumentError,
    Measurement,
    Pose2D,
    SensorKind,
    Trajectory,
    wrap_angle,
    wrap_angles,
)

# Sensors configured with sigma=0 still need a positive-definite noise matrix.
MIN_VARIANCE = 1e-12

_STREAM_LABELS = {"ips": 1, "encoder": 2, "imu": 3, "vo": 4}


@dataclass(frozen=True)
class Segment:
    duration: float
    v: float
    w: float

    def __post_init__(self):
        if not (self.duration > 0) or not math.isfinite(self.duration):
            raise InvalidArgumentError(f"segment duration must be finite and > 0, got {self.duration}")
        if not (math.isfinite(self.v) and math.isfinite(self.w)):
            raise InvalidArgumentError("segment velocities must be finite")


@dataclass(frozen=True)
class MotionScript:
    segments: tuple[Segment, ...]

    def __post_init__(self):
        segs = tuple(s if isinstance(s, Segment) else Segment(*s) for s in self.segments)
        object.__setattr__(self, "segments", segs)

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.segments)


@dataclass(frozen=True)
class IpsConfig:
    rate: float = 10.0
    sigma_xy: float = 0.02


@dataclass(frozen=True)
class EncoderConfig:
    rate: float = 20.0
    sigma_v: float = 0.01


@dataclass(frozen=True)
class ImuConfig:
    rate: float = 50.0
    sigma_yaw: float = 0.01
    sigma_vyaw: float = 0.02
    sigma_a: float = 0.1
    yaw_drift_rate: float = 0.0


@dataclass(frozen=True)
class VoConfig:
    rate: float = 1.0
    latency: float = 0.1
    walk_sigma: float = 0.015
    jump_prob_per_sample: float = 0.08
    jump_sigma: float = 0.1


@dataclass(frozen=True)
class SensorSuiteConfig:
    ips: IpsConfig = field(default_factory=IpsConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    imu: ImuConfig = field(default_factory=ImuConfig)
    vo: VoConfig = field(default_factory=VoConfig)
    seed: int = 0

    def __post_init__(self):
        for name in ("ips", "encoder", "imu", "vo"):
            sub = getattr(self, name)
            if not (sub.rate > 0) or not math.isfinite(sub.rate):
                raise InvalidArgumentError(f"{name}.rate must be > 0")
            for k, v in vars(sub).items():
                if k.startswith("sigma") or k.endswith("_sigma"):
                    if not (v >= 0):
                        raise InvalidArgumentError(f"{name}.{k} must be >= 0")
        if not (0.0 <= self.vo.jump_prob_per_sample <= 1.0):
            raise InvalidArgumentError("vo.jump_prob_per_sample must lie in [0, 1]")
        if not (self.vo.latency >= 0):
            raise InvalidArgumentError("vo.latency must be >= 0")

    def rng(self, label: str) -> np.random.Generator:
        return np.random.default_rng([int(self.seed) & (2**64 - 1), _STREAM_LABELS[label]])


def diffdrive_step(pose: Pose2D, v: float, w: float, dt: float) -> Pose2D:
    """Exact unicycle integration over ``dt`` at constant ``(v, w)``."""
    if not math.isfinite(dt) or dt < 0:
        raise InvalidArgumentError(f"dt must be finite and >= 0, got {dt}")
    th = pose.yaw
    if abs(w) < 1e-9:
        return Pose2D(pose.x + v * dt * math.cos(th), pose.y + v * dt * math.sin(th), th)
    th1 = th + w * dt
    r = v / w
    return Pose2D(
        pose.x + r * (math.sin(th1) - math.sin(th)),
        pose.y - r * (math.cos(th1) - math.cos(th)),
        wrap_angle(th1),
    )


def _segment_steps(duration: float, dt_sim: float) -> int:
    ratio = duration / dt_sim
    n = round(ratio)
    if abs(ratio - n) <= 1e-9 * max(1.0, ratio):
        return max(n, 1)
    # not divisible: pad with one extra full step
    return math.ceil(ratio)


def generate_ground_truth(script: MotionScript, dt_sim: float = 0.005, start: Pose2D | None = None) -> Trajectory:
    """Sample the scripted motion every ``dt_sim`` seconds.

    The returned trajectory carries the commanded ``(v, w)`` in effect from
    each sample to the next (the last sample repeats the final command).
    """
    if not script.segments:
        raise InvalidArgumentError("motion script is empty")
    if not (dt_sim > 0) or not math.isfinite(dt_sim):
        raise InvalidArgumentError("dt_sim must be > 0")
    pose = start or Pose2D(0.0, 0.0, 0.0)
    poses = [pose]
    v_cmd, w_cmd = [], []
    for seg in script.segments:
        for _ in range(_segment_steps(seg.duration, dt_sim)):
            pose = diffdrive_step(pose, seg.v, seg.w, dt_sim)
            poses.append(pose)
            v_cmd.append(seg.v)
            w_cmd.append(seg.w)
    v_cmd.append(v_cmd[-1])
    w_cmd.append(w_cmd[-1])
    n = len(poses)
    t = np.arange(n) * dt_sim
    arr = np.array([[p.x, p.y, p.yaw] for p in poses])
    return Trajectory(t, arr[:, 0], arr[:, 1], arr[:, 2], v=v_cmd, w=w_cmd)


def sample_times(start: float, end: float, rate: float) -> np.ndarray:
    """``start + k/rate`` for k = 0 .. floor((end - start) * rate)."""
    n = math.floor((end - start) * rate + 1e-9) + 1
    return start + np.arange(n) / rate


def _commands_at(truth: Trajectory, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if truth.v is None or truth.w is None:
        raise InvalidArgumentError("truth trajectory carries no velocity commands")
    # command in effect over [t_k, t_k+1); tolerate stamp round-off
    idx = np.searchsorted(truth.t, t + 1e-9, side="right") - 1
    idx = np.clip(idx, 0, len(truth) - 1)
    return truth.v[idx], truth.w[idx]


def _variances(*sigmas: float) -> np.ndarray:
    return np.maximum(np.square(sigmas), MIN_VARIANCE)


def sample_ips(truth: Trajectory, cfg: SensorSuiteConfig) -> list[Measurement]:
    c = cfg.ips
    t = sample_times(truth.start, truth.end, c.rate)
    pos = truth.interpolate(t)[:, :2]
    pos = pos + cfg.rng("ips").normal(0.0, c.sigma_xy, size=pos.shape) if c.sigma_xy > 0 else pos
    noise = _variances(c.sigma_xy, c.sigma_xy)
    return [Measurement(tk, SensorKind.IPS, pk, noise) for tk, pk in zip(t, pos)]


def sample_encoders(truth: Trajectory, cfg: SensorSuiteConfig) -> list[Measurement]:
    c = cfg.encoder
    t = sample_times(truth.start, truth.end, c.rate)
    v, _ = _commands_at(truth, t)
    vel = np.column_stack((v, np.zeros_like(v)))  # differential drive: no lateral slip
    if c.sigma_v > 0:
        vel = vel + cfg.rng("encoder").normal(0.0, c.sigma_v, size=vel.shape)
    noise = _variances(c.sigma_v, c.sigma_v)
    return [Measurement(tk, SensorKind.ENCODER, vk, noise) for tk, vk in zip(t, vel)]


def sample_imu(truth: Trajectory, cfg: SensorSuiteConfig) -> list[Measurement]:
    """Yaw (with optional linear drift), yaw rate, and body accelerations.

    Longitudinal acceleration is the time derivative of the commanded speed;
    lateral acceleration is the centripetal term ``v * w``.
    """
    c = cfg.imu
    t = sample_times(truth.start, truth.end, c.rate)
    v, w = _commands_at(truth, t)
    if len(truth) > 1:
        dv = np.gradient(truth.v, truth.t)
        ax = np.interp(t, truth.t, dv)
    else:
        ax = np.zeros_like(t)
    ay = v * w
    yaw = truth.interpolate(t)[:, 2] + c.yaw_drift_rate * (t - truth.start)

    rng = cfg.rng("imu")
    n = t.size
    if c.sigma_yaw > 0:
        yaw = yaw + rng.normal(0.0, c.sigma_yaw, n)
    vyaw = w + rng.normal(0.0, c.sigma_vyaw, n) if c.sigma_vyaw > 0 else w.astype(float)
    if c.sigma_a > 0:
        ax = ax + rng.normal(0.0, c.sigma_a, n)
        ay = ay + rng.normal(0.0, c.sigma_a, n)
    yaw = wrap_angles(yaw)
    values = np.column_stack((yaw, vyaw, ax, ay))
    noise = _variances(c.sigma_yaw, c.sigma_vyaw, c.sigma_a, c.sigma_a)
    return [Measurement(tk, SensorKind.IMU, vk, noise) for tk, vk in zip(t, values)]


def vo_error_path(n: int, dt: float, cfg: SensorSuiteConfig) -> np.ndarray:
    """Accumulated 2D drift for ``n`` VO samples spaced ``dt`` apart.

    Random walk with per-sample increment ``N(0, walk_sigma^2 * dt)`` plus
    permanent jump offsets drawn with probability ``jump_prob_per_sample``.
    The first sample is drift-free.
    """
    c = cfg.vo
    rng = cfg.rng("vo")
    steps = rng.normal(0.0, 1.0, size=(n, 2)) * (c.walk_sigma * math.sqrt(dt))
    jumps = rng.random(n) < c.jump_prob_per_sample
    jump_off = rng.normal(0.0, 1.0, size=(n, 2)) * c.jump_sigma
    steps = steps + jump_off * jumps[:, None]
    steps[0] = 0.0
    return np.cumsum(steps, axis=0)


def sample_vo(truth: Trajectory, cfg: SensorSuiteConfig) -> list[Measurement]:
    """Drifting low-rate pose stream; stamps lag the sampled truth by ``latency``."""
    c = cfg.vo
    t = sample_times(truth.start, truth.end, c.rate)
    poses = truth.interpolate(t)
    drift = vo_error_path(t.size, 1.0 / c.rate, cfg)
    poses[:, :2] += drift
    # a drifting VO track has no meaningful self-reported covariance; report the walk scale
    var_xy = max((c.walk_sigma**2) * t[-1] if t.size else 0.0, c.walk_sigma**2, MIN_VARIANCE)
    noise = np.array([var_xy, var_xy, 1e-4])
    stamps = t + c.latency
    return [Measurement(tk, SensorKind.VO, pk, noise) for tk, pk in zip(stamps, poses)]


def vo_trajectory(measurements: list[Measurement]) -> Trajectory:
    """Read a VO measurement stream directly as a trajectory (no filtering)."""
    vo = sorted((m for m in measurements if m.kind is SensorKind.VO), key=lambda m: m.stamp)
    if not vo:
        raise InvalidArgumentError("no VoPose measurements in stream")
    arr = np.array([m.value for m in vo])
    return Trajectory([m.stamp for m in vo], arr[:, 0], arr[:, 1], arr[:, 2])


def simulate_measurements(truth: Trajectory, cfg: SensorSuiteConfig, include_vo: bool = True) -> list[Measurement]:
    """All sensor streams merged in time order (ties broken by sensor kind)."""
    ms = sample_ips(truth, cfg) + sample_encoders(truth, cfg) + sample_imu(truth, cfg)
    if include_vo:
        ms += sample_vo(truth, cfg)
    ms.sort(key=Measurement.sort_key)
    return ms
