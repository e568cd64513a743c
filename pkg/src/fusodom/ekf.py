"""Extended Kalman filter over the planar 8-state ``[x, y, yaw, vx, vy, vyaw, ax, ay]``.

Motion model: constant acceleration in the body frame. Over an interval
``dt`` the body displacement ``v*dt + a*dt^2/2`` is rotated into the world by
the current yaw, yaw advances by ``vyaw*dt``, body velocities advance by
``a*dt``; yaw rate and accelerations are held. There is no control input;
wheel encoders are fused as measurements.

All sensor models select state components, so measurement Jacobians are
constant 0/1 matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from fusodom.core import (
    AX,
    AY,
    STATE_DIM,
    VX,
    VY,
    VYAW,
    X,
    Y,
    YAW,
    ContractViolationError,
    InitializationError,
    InvalidArgumentError,
    Measurement,
    NumericalFailureError,
    OutOfOrderError,
    SensorKind,
    Trajectory,
    check_state,
    symmetrize,
    wrap_angle,
)

MAX_INIT_GAP = 0.5  # seconds between the IPS fix and IMU attitude used to initialize
MAX_CONDITION = 1e12

DEFAULT_Q_DIAG = (1e-4, 1e-4, 1e-4, 1e-2, 1e-2, 1e-2, 1e-1, 1e-1)
# matches the default sensor noise of the fields that seed each component; velocities start unknown
DEFAULT_P0_DIAG = (4e-4, 4e-4, 1e-4, 1.0, 1.0, 1e-3, 1e-2, 1e-2)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ProcessNoiseModel:
    """Per-state noise spectral densities; ``Q = diag(q_diag) * dt``."""

    q_diag: tuple[float, ...] = DEFAULT_Q_DIAG

    def __post_init__(self):
        q = tuple(float(v) for v in self.q_diag)
        if len(q) != STATE_DIM:
            raise InvalidArgumentError(f"q_diag must have {STATE_DIM} entries, got {len(q)}")
        if any(not math.isfinite(v) or v < 0 for v in q):
            raise InvalidArgumentError("q_diag entries must be finite and >= 0")
        object.__setattr__(self, "q_diag", q)
        density = np.array(q)
        density.flags.writeable = False
        object.__setattr__(self, "density", density)

    def matrix(self, dt: float) -> np.ndarray:
        return np.diag(self.q_diag) * dt


@dataclass(frozen=True)
class FilterConfig:
    process_noise: ProcessNoiseModel = field(default_factory=ProcessNoiseModel)
    gating_threshold: float = 0.0
    initial_covariance_diag: tuple[float, ...] = DEFAULT_P0_DIAG
    min_dt: float = 1e-6

    def __post_init__(self):
        if not (self.gating_threshold >= 0):
            raise InvalidArgumentError("gating_threshold must be >= 0")
        p0 = tuple(float(v) for v in self.initial_covariance_diag)
        if len(p0) != STATE_DIM or any(not (v > 0) or not math.isfinite(v) for v in p0):
            raise InvalidArgumentError("initial_covariance_diag needs 8 finite entries > 0")
        object.__setattr__(self, "initial_covariance_diag", p0)
        if not (self.min_dt >= 0):
            raise InvalidArgumentError("min_dt must be >= 0")


@dataclass(frozen=True, eq=False)
class StateEstimate:
    state: np.ndarray
    covariance: np.ndarray
    stamp: float

    def __post_init__(self):
        object.__setattr__(self, "state", _frozen(check_state(self.state)))
        P = np.asarray(self.covariance, dtype=float)
        if P.shape != (STATE_DIM, STATE_DIM):
            raise InvalidArgumentError(f"covariance must be 8x8, got {P.shape}")
        if not np.all(np.isfinite(P)):
            raise NumericalFailureError("covariance contains non-finite entries")
        object.__setattr__(self, "covariance", _frozen(P))
        object.__setattr__(self, "stamp", float(self.stamp))

    @classmethod
    def _trusted(cls, state: np.ndarray, covariance: np.ndarray, stamp: float) -> StateEstimate:
        # internal fast path for arrays the filter itself produced
        if not (np.isfinite(state).all() and np.isfinite(covariance).all()):
            raise NumericalFailureError("filter produced non-finite values")
        state.flags.writeable = False
        covariance.flags.writeable = False
        obj = object.__new__(cls)
        object.__setattr__(obj, "state", state)
        object.__setattr__(obj, "covariance", covariance)
        object.__setattr__(obj, "stamp", float(stamp))
        return obj

    def __eq__(self, other):
        if not isinstance(other, StateEstimate):
            return NotImplemented
        return (
            self.stamp == other.stamp
            and np.array_equal(self.state, other.state)
            and np.array_equal(self.covariance, other.covariance)
        )

    __hash__ = None


def _check_dt(dt: float) -> float:
    dt = float(dt)
    if not math.isfinite(dt) or dt < 0:
        raise InvalidArgumentError(f"dt must be finite and >= 0, got {dt}")
    return dt


def motion_model(state: np.ndarray, dt: float) -> np.ndarray:
    dt = _check_dt(dt)
    x, y, yaw, vx, vy, vyaw, ax, ay = np.asarray(state, dtype=float).tolist()
    c, sn = math.cos(yaw), math.sin(yaw)
    half_dt2 = 0.5 * dt * dt
    dxb = vx * dt + ax * half_dt2
    dyb = vy * dt + ay * half_dt2
    out = np.array([
        x + c * dxb - sn * dyb,
        y + sn * dxb + c * dyb,
        wrap_angle(yaw + vyaw * dt),
        vx + ax * dt,
        vy + ay * dt,
        vyaw,
        ax,
        ay,
    ])
    if not np.isfinite(out).all():
        raise InvalidArgumentError("state contains non-finite entries")
    return out


def motion_jacobian(state: np.ndarray, dt: float) -> np.ndarray:
    dt = _check_dt(dt)
    _, _, yaw, vx, vy, _, ax, ay = np.asarray(state, dtype=float).tolist()
    c, sn = math.cos(yaw), math.sin(yaw)
    h = 0.5 * dt * dt
    dxb = vx * dt + ax * h
    dyb = vy * dt + ay * h
    # rows/cols: x, y, yaw, vx, vy, vyaw, ax, ay
    return np.array([
        [1.0, 0.0, -sn * dxb - c * dyb, c * dt, -sn * dt, 0.0, c * h, -sn * h],
        [0.0, 1.0, c * dxb - sn * dyb, sn * dt, c * dt, 0.0, sn * h, c * h],
        [0.0, 0.0, 1.0, 0.0, 0.0, dt, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, dt, 0.0],
        [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, dt],
        [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    ])


def predict(est: StateEstimate, to_stamp: float, cfg: FilterConfig) -> StateEstimate:
    """Propagate ``est`` forward to ``to_stamp``.

    Intervals shorter than ``cfg.min_dt`` only move the stamp.
    """
    to_stamp = float(to_stamp)
    dt = to_stamp - est.stamp
    if dt < 0:
        raise OutOfOrderError(f"cannot predict backwards from {est.stamp} to {to_stamp}")
    if dt < cfg.min_dt or dt == 0:
        return StateEstimate._trusted(est.state, est.covariance, to_stamp)
    F = motion_jacobian(est.state, dt)
    x = motion_model(est.state, dt)
    P = F @ est.covariance @ F.T
    P.flat[:: STATE_DIM + 1] += cfg.process_noise.density * dt
    return StateEstimate._trusted(x, symmetrize(P), to_stamp)


_INDEX = {k: np.array(k.indices) for k in SensorKind}


def measurement_model(kind: SensorKind, state: np.ndarray) -> np.ndarray:
    return np.asarray(state, dtype=float)[_INDEX[SensorKind(kind)]]


_H_CACHE: dict[SensorKind, np.ndarray] = {}


def measurement_jacobian(kind: SensorKind) -> np.ndarray:
    kind = SensorKind(kind)
    H = _H_CACHE.get(kind)
    if H is None:
        H = np.zeros((kind.dim, STATE_DIM))
        H[np.arange(kind.dim), list(kind.indices)] = 1.0
        H.flags.writeable = False
        _H_CACHE[kind] = H
    return H


def innovation(est: StateEstimate, m: Measurement) -> np.ndarray:
    nu = m.value - measurement_model(m.kind, est.state)
    for i in m.kind.yaw_slots:
        nu[i] = wrap_angle(nu[i])
    return nu


def update(est: StateEstimate, m: Measurement, cfg: FilterConfig) -> tuple[StateEstimate, bool]:
    """Fuse one measurement taken at the estimate's stamp.

    Returns the posterior and whether the measurement passed the gate. A
    gated-out measurement leaves the estimate untouched.
    """
    if abs(m.stamp - est.stamp) > cfg.min_dt:
        raise ContractViolationError(
            f"measurement stamp {m.stamp} does not match estimate stamp {est.stamp}; predict first"
        )
    H = measurement_jacobian(m.kind)
    P = est.covariance
    nu = innovation(est, m)
    # H is a 0/1 selection, so indexing equals H @ P exactly
    idx = _INDEX[m.kind]
    PHt = P[:, idx]
    S = symmetrize(PHt[idx] + m.noise)

    try:
        S_inv = np.linalg.inv(S)
    except np.linalg.LinAlgError:
        raise NumericalFailureError("innovation covariance is singular") from None
    # 1-norm condition estimate
    cond = np.abs(S).sum(axis=0).max() * np.abs(S_inv).sum(axis=0).max()
    if not cond <= MAX_CONDITION:
        raise NumericalFailureError(f"innovation covariance is ill-conditioned (cond ~ {cond:.3g})")

    if cfg.gating_threshold > 0:
        d2 = float(nu @ S_inv @ nu)
        if d2 > cfg.gating_threshold:
            return est, False

    K = PHt @ S_inv
    x = est.state + K @ nu
    x[YAW] = wrap_angle(x[YAW])
    P_post = (_I8 - K @ H) @ P
    return StateEstimate._trusted(x, symmetrize(P_post), est.stamp), True


_I8 = np.eye(STATE_DIM)
_I8.flags.writeable = False


def initialize(first_fix: Measurement, first_att: Measurement, cfg: FilterConfig) -> StateEstimate:
    """Seed the filter from an IPS fix and an IMU attitude sample."""
    if first_fix.kind is not SensorKind.IPS:
        raise InitializationError(f"initialization needs an IpsPosition fix, got {first_fix.kind.value}")
    if first_att.kind is not SensorKind.IMU:
        raise InitializationError(f"initialization needs an ImuAttitude sample, got {first_att.kind.value}")
    gap = abs(first_fix.stamp - first_att.stamp)
    if gap > MAX_INIT_GAP:
        raise InitializationError(
            f"IPS fix and IMU attitude are {gap:.3f} s apart (limit {MAX_INIT_GAP} s)"
        )
    s = np.zeros(STATE_DIM)
    s[[X, Y]] = first_fix.value
    s[[YAW, VYAW, AX, AY]] = first_att.value
    return StateEstimate(
        s, np.diag(cfg.initial_covariance_diag), max(first_fix.stamp, first_att.stamp)
    )


class FusionFilter:
    """Stateful single-writer wrapper: feed measurements in time order.

    Measurements arriving before initialization are buffered; those older
    than the current estimate once running are dropped and counted.
    """

    def __init__(self, cfg: FilterConfig | None = None):
        self.cfg = cfg or FilterConfig()
        self.estimate: StateEstimate | None = None
        self.log: list[StateEstimate] = []
        self.dropped = 0
        self.rejected = 0
        self.skipped_before_init = 0
        self._pending: list[Measurement] = []
        self._fix: Measurement | None = None
        self._att: Measurement | None = None

    @property
    def initialized(self) -> bool:
        return self.estimate is not None

    def feed(self, m: Measurement) -> None:
        if self.estimate is None:
            self._feed_uninitialized(m)
        else:
            self._step(m)

    def _feed_uninitialized(self, m: Measurement) -> None:
        if m.kind is SensorKind.IPS:
            self._fix = m
        elif m.kind is SensorKind.IMU:
            self._att = m
        else:
            self._pending.append(m)
            return
        if self._fix is None or self._att is None:
            return
        if abs(self._fix.stamp - self._att.stamp) > MAX_INIT_GAP:
            # keep waiting; the newer of the two may pair with a later sample
            return
        self.estimate = initialize(self._fix, self._att, self.cfg)
        self.log.append(self.estimate)
        pending, self._pending = self._pending, []
        for p in pending:
            if p.stamp < self.estimate.stamp:
                self.skipped_before_init += 1
            else:
                self._step(p)

    def _step(self, m: Measurement) -> None:
        if m.stamp < self.estimate.stamp:
            self.dropped += 1
            return
        est = predict(self.estimate, m.stamp, self.cfg)
        est, accepted = update(est, m, self.cfg)
        if not accepted:
            self.rejected += 1
        self.estimate = est
        self.log.append(est)


@dataclass
class FusionResult:
    trajectory: Trajectory
    log: list[StateEstimate]
    dropped: int = 0
    rejected: int = 0
    skipped_before_init: int = 0


def log_to_trajectory(log: Sequence[StateEstimate]) -> Trajectory:
    """Collapse an estimate log to one pose per distinct stamp (the last one)."""
    t, rows = [], []
    for est in log:
        if t and est.stamp == t[-1]:
            rows[-1] = est.state
        else:
            t.append(est.stamp)
            rows.append(est.state)
    arr = np.asarray(rows).reshape(-1, STATE_DIM)
    return Trajectory(t, arr[:, X], arr[:, Y], arr[:, YAW])


def process_stream(measurements: Iterable[Measurement], cfg: FilterConfig | None = None) -> FusionResult:
    """Run the filter over a measurement stream in the order given.

    Raises :class:`InitializationError` if the stream never provides an
    IPS fix and IMU attitude within ``MAX_INIT_GAP`` of each other.
    """
    f = FusionFilter(cfg)
    for m in measurements:
        f.feed(m)
    if not f.initialized:
        raise InitializationError("stream ended before the filter could be initialized")
    return FusionResult(
        trajectory=log_to_trajectory(f.log),
        log=f.log,
        dropped=f.dropped,
        rejected=f.rejected,
        skipped_before_init=f.skipped_before_init,
    )
