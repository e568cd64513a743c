"""Shared domain types and planar geometry helpers.

Conventions: angles in radians, counter-clockwise positive, normalized to
(-pi, pi]. Velocities and accelerations are body frame; positions and poses
are world frame. Stamps are seconds since scenario start.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class FusodomError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(FusodomError, ValueError):
    pass


class OutOfOrderError(FusodomError):
    pass


class ContractViolationError(FusodomError):
    pass


class NumericalFailureError(FusodomError):
    pass


class InitializationError(FusodomError):
    pass


class NoOverlapError(FusodomError):
    pass


# State vector layout.
X, Y, YAW, VX, VY, VYAW, AX, AY = range(8)
STATE_DIM = 8
STATE_FIELDS = ("x", "y", "yaw", "vx", "vy", "vyaw", "ax", "ay")


class SensorKind(str, enum.Enum):
    IPS = "IpsPosition"
    ENCODER = "EncoderVelocity"
    IMU = "ImuAttitude"
    VO = "VoPose"

    @property
    def indices(self) -> tuple[int, ...]:
        """State components observed by this sensor, in measurement order."""
        return _KIND_INDICES[self]

    @property
    def dim(self) -> int:
        return len(_KIND_INDICES[self])

    @property
    def yaw_slots(self) -> tuple[int, ...]:
        """Positions within the measurement vector that hold a yaw angle."""
        return tuple(i for i, s in enumerate(_KIND_INDICES[self]) if s == YAW)


_KIND_INDICES = {
    SensorKind.IPS: (X, Y),
    SensorKind.ENCODER: (VX, VY),
    SensorKind.IMU: (YAW, VYAW, AX, AY),
    SensorKind.VO: (X, Y, YAW),
}

# Tie-break order for measurements sharing a stamp.
KIND_ORDER = {k: i for i, k in enumerate(SensorKind)}


def wrap_angle(theta: float) -> float:
    """Reduce ``theta`` to the half-open interval (-pi, pi]."""
    if not math.isfinite(theta):
        raise InvalidArgumentError(f"angle must be finite, got {theta!r}")
    theta = float(theta)
    r = theta - _TWO_PI * round(theta / _TWO_PI)
    if r <= -math.pi:
        r += _TWO_PI
    elif r > math.pi:
        r -= _TWO_PI
    return r


def wrap_angles(theta: np.ndarray) -> np.ndarray:
    """Vectorized :func:`wrap_angle`."""
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise InvalidArgumentError("angles must be finite")
    return _wrap(theta)


def _wrap(theta):
    # same arithmetic as wrap_angle; values already in (-pi, pi] pass through bit-exact
    r = theta - _TWO_PI * np.round(theta / _TWO_PI)
    r = np.where(r <= -np.pi, r + _TWO_PI, r)
    return np.where(r > np.pi, r - _TWO_PI, r)


_TWO_PI = 2.0 * np.pi


def body_to_world(v_body: Sequence[float], yaw: float) -> np.ndarray:
    """Rotate a body-frame 2-vector into the world frame."""
    vx, vy = (float(v) for v in v_body)
    if not (math.isfinite(vx) and math.isfinite(vy) and math.isfinite(yaw)):
        raise InvalidArgumentError("body_to_world inputs must be finite")
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([vx * c - vy * s, vx * s + vy * c])


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    yaw: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidArgumentError("pose position must be finite")
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.yaw])


def make_state(**components: float) -> np.ndarray:
    """Build an 8-element state vector from named components (others zero).

    >>> make_state(x=1.0, vx=0.5)[:4]
    array([1. , 0. , 0. , 0.5])
    """
    s = np.zeros(STATE_DIM)
    for name, value in components.items():
        try:
            s[STATE_FIELDS.index(name)] = value
        except ValueError:
            raise InvalidArgumentError(f"unknown state component {name!r}") from None
    return check_state(s)


def check_state(state: np.ndarray) -> np.ndarray:
    """Validate a state vector and return a copy with yaw wrapped."""
    s = np.array(state, dtype=float)
    if s.shape != (STATE_DIM,):
        raise InvalidArgumentError(f"state must have shape (8,), got {s.shape}")
    if not np.isfinite(s).all():
        raise InvalidArgumentError("state contains non-finite entries")
    s[YAW] = wrap_angle(s[YAW])
    return s


def symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


@dataclass(frozen=True, eq=False)
class Measurement:
    """A timestamped observation with its noise covariance."""

    stamp: float
    kind: SensorKind
    value: np.ndarray
    noise: np.ndarray = field(repr=False)

    def __post_init__(self):
        kind = SensorKind(self.kind)
        object.__setattr__(self, "kind", kind)
        stamp = float(self.stamp)
        if not math.isfinite(stamp) or stamp < 0:
            raise InvalidArgumentError(f"stamp must be finite and >= 0, got {stamp}")
        object.__setattr__(self, "stamp", stamp)

        value = np.array(self.value, dtype=float).reshape(-1)
        if value.shape != (kind.dim,):
            raise InvalidArgumentError(
                f"{kind.value} expects a value of length {kind.dim}, got {value.size}"
            )
        if not np.all(np.isfinite(value)):
            raise InvalidArgumentError("measurement value must be finite")
        noise = np.array(self.noise, dtype=float)
        if noise.ndim == 1:
            noise = np.diag(noise)
        if noise.shape != (kind.dim, kind.dim):
            raise InvalidArgumentError(
                f"{kind.value} expects a {kind.dim}x{kind.dim} noise matrix, got {noise.shape}"
            )
        if not np.isfinite(noise).all() or np.abs(noise - noise.T).max() > 1e-12:
            raise InvalidArgumentError("measurement noise must be finite and symmetric")
        if np.count_nonzero(noise - np.diag(np.diagonal(noise))):
            try:
                np.linalg.cholesky(noise)
            except np.linalg.LinAlgError:
                raise InvalidArgumentError("measurement noise must be positive definite") from None
        elif not (np.diagonal(noise) > 0).all():
            raise InvalidArgumentError("measurement noise must be positive definite")
        value.flags.writeable = False
        noise.flags.writeable = False
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "noise", noise)

    @property
    def noise_diag(self) -> np.ndarray:
        return np.diag(self.noise).copy()

    def sort_key(self):
        return (self.stamp, KIND_ORDER[self.kind], tuple(self.value))

    def __eq__(self, other):
        if not isinstance(other, Measurement):
            return NotImplemented
        return (
            self.stamp == other.stamp
            and self.kind is other.kind
            and np.array_equal(self.value, other.value)
            and np.array_equal(self.noise, other.noise)
        )

    __hash__ = None


class Trajectory:
    """Time-ordered planar poses, stored column-wise.

    Stamps must be strictly increasing. Ground-truth trajectories may also
    carry the commanded linear/angular velocity in effect at each sample.
    """

    def __init__(self, t, x, y, yaw, v=None, w=None):
        self.t = np.asarray(t, dtype=float).copy()
        self.x = np.asarray(x, dtype=float).copy()
        self.y = np.asarray(y, dtype=float).copy()
        self.yaw = wrap_angles(np.asarray(yaw, dtype=float))
        n = self.t.size
        if n == 0:
            raise InvalidArgumentError("trajectory must contain at least one sample")
        if not (self.x.size == self.y.size == self.yaw.size == n):
            raise InvalidArgumentError("trajectory columns have mismatched lengths")
        if n > 1 and np.any(np.diff(self.t) <= 0):
            raise InvalidArgumentError("trajectory stamps must be strictly increasing")
        for col in (self.t, self.x, self.y):
            if not np.all(np.isfinite(col)):
                raise InvalidArgumentError("trajectory contains non-finite values")
        self.v = None if v is None else np.asarray(v, dtype=float).copy()
        self.w = None if w is None else np.asarray(w, dtype=float).copy()
        for cmd in (self.v, self.w):
            if cmd is not None and cmd.size != n:
                raise InvalidArgumentError("command columns have mismatched lengths")

    def __len__(self):
        return self.t.size

    @property
    def start(self) -> float:
        return float(self.t[0])

    @property
    def end(self) -> float:
        return float(self.t[-1])

    @property
    def duration(self) -> float:
        return self.end - self.start

    def pose(self, i: int) -> Pose2D:
        return Pose2D(self.x[i], self.y[i], self.yaw[i])

    def positions(self) -> np.ndarray:
        return np.column_stack((self.x, self.y))

    def is_uniform(self, tol: float = 1e-9) -> bool:
        if len(self) < 3:
            return True
        d = np.diff(self.t)
        return bool(np.max(np.abs(d - d[0])) <= tol)

    def interpolate(self, t) -> np.ndarray:
        """Linearly interpolate ``(x, y, yaw)`` at stamps ``t``; clamps at the ends.

        Yaw is interpolated along the shorter arc.
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = np.interp(t, self.t, self.x)
        y = np.interp(t, self.t, self.y)
        yaw = wrap_angles(np.interp(t, self.t, np.unwrap(self.yaw)))
        return np.column_stack((x, y, yaw))

    def offset(self, dx: float, dy: float) -> Trajectory:
        return Trajectory(self.t, self.x + dx, self.y + dy, self.yaw)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return all(
            np.array_equal(a, b)
            for a, b in zip(
                (self.t, self.x, self.y, self.yaw), (other.t, other.x, other.y, other.yaw)
            )
        )

    __hash__ = None

    def __repr__(self):
        return f"Trajectory(n={len(self)}, t=[{self.start:g}, {self.end:g}])"

    @classmethod
    def from_poses(cls, stamps, poses) -> Trajectory:
        arr = np.array([[p.x, p.y, p.yaw] for p in poses], dtype=float).reshape(-1, 3)
        return cls(stamps, arr[:, 0], arr[:, 1], arr[:, 2])
