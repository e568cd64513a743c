"""Trajectory accuracy metrics: time association, ATE, per-axis error series, comparison reports."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fusodom.core import InvalidArgumentError, NoOverlapError, Trajectory, wrap_angles


@dataclass(frozen=True, eq=False)
class PosePairs:
    """Estimate samples matched to their nearest-in-time truth samples."""

    t_est: np.ndarray
    t_truth: np.ndarray
    est: np.ndarray  # (n, 3) x, y, yaw
    truth: np.ndarray  # (n, 3)

    def __len__(self):
        return self.t_est.size


def default_max_gap(estimate: Trajectory, truth: Trajectory | None = None) -> float:
    """Half the median sample interval of ``estimate`` (falls back to ``truth``)."""
    for traj in (estimate, truth):
        if traj is not None and len(traj) > 1:
            return 0.5 * float(np.median(np.diff(traj.t)))
    return 1e-6


def associate(truth: Trajectory, estimate: Trajectory, max_gap: float | None = None) -> PosePairs:
    if max_gap is None:
        max_gap = default_max_gap(estimate, truth)
    if not (max_gap > 0):
        raise InvalidArgumentError(f"max_gap must be > 0, got {max_gap}")
    te = estimate.t
    hi = np.clip(np.searchsorted(truth.t, te), 0, len(truth) - 1)
    lo = np.clip(hi - 1, 0, len(truth) - 1)
    # nearest neighbour; ties go to the earlier truth sample
    pick_lo = np.abs(te - truth.t[lo]) <= np.abs(truth.t[hi] - te)
    idx = np.where(pick_lo, lo, hi)
    ok = np.abs(truth.t[idx] - te) <= max_gap
    if not np.any(ok):
        raise NoOverlapError(
            f"no estimate sample within {max_gap:g} s of the truth span "
            f"[{truth.start:g}, {truth.end:g}]"
        )
    idx = idx[ok]
    ei = np.flatnonzero(ok)
    return PosePairs(
        t_est=te[ei],
        t_truth=truth.t[idx],
        est=np.column_stack((estimate.x[ei], estimate.y[ei], estimate.yaw[ei])),
        truth=np.column_stack((truth.x[idx], truth.y[idx], truth.yaw[idx])),
    )


@dataclass(frozen=True)
class AteReport:
    ate: float
    n_pairs: int
    max_error: float
    per_pair_errors: list[float] = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "ate": self.ate,
            "n_pairs": self.n_pairs,
            "max_error": self.max_error,
            "per_pair_errors": list(self.per_pair_errors),
        }


def ate(truth: Trajectory, estimate: Trajectory, max_gap: float | None = None) -> AteReport:
    """Mean planar Euclidean distance over associated pairs; no alignment is applied."""
    pairs = associate(truth, estimate, max_gap)
    d = np.hypot(*(pairs.truth[:, :2] - pairs.est[:, :2]).T)
    return AteReport(
        ate=float(np.mean(d)),
        n_pairs=int(d.size),
        max_error=float(np.max(d)),
        per_pair_errors=d.tolist(),
    )


@dataclass(frozen=True, eq=False)
class ErrorSeries:
    t: np.ndarray
    ex: np.ndarray
    ey: np.ndarray
    eyaw: np.ndarray

    def __len__(self):
        return self.t.size

    @property
    def position_error(self) -> np.ndarray:
        return np.hypot(self.ex, self.ey)

    def max_abs_position_error(self) -> float:
        return float(np.max(self.position_error))

    def max_jump(self) -> float:
        """Largest planar change in error between consecutive samples."""
        if len(self) < 2:
            return 0.0
        return float(np.max(np.hypot(np.diff(self.ex), np.diff(self.ey))))

    def summary(self) -> dict:
        pe = self.position_error
        return {
            "n": int(len(self)),
            "max_abs_ex": float(np.max(np.abs(self.ex))),
            "max_abs_ey": float(np.max(np.abs(self.ey))),
            "max_position_error": float(np.max(pe)),
            "rms_position_error": float(np.sqrt(np.mean(pe**2))),
            "max_jump": self.max_jump(),
        }


def pose_error_series(truth: Trajectory, estimate: Trajectory, max_gap: float | None = None) -> ErrorSeries:
    """Signed per-axis error ``estimate - truth`` at each associated estimate stamp."""
    p = associate(truth, estimate, max_gap)
    return ErrorSeries(
        t=p.t_est,
        ex=p.est[:, 0] - p.truth[:, 0],
        ey=p.est[:, 1] - p.truth[:, 1],
        eyaw=wrap_angles(p.est[:, 2] - p.truth[:, 2]),
    )


def compare_report(
    truth: Trajectory,
    fused: Trajectory,
    vo: Trajectory,
    map_stats_pair=None,
    build_times=None,
    *,
    scenario_ids=None,
    max_gap: float | None = None,
) -> dict:
    """Side-by-side accuracy record for the fused and VO pipelines.

    ``map_stats_pair`` is ``(low_rate_stats, high_rate_stats)``;
    ``scenario_ids`` is an optional sequence of identifiers that must all match.
    """
    if scenario_ids is not None and len(set(scenario_ids)) > 1:
        raise InvalidArgumentError(f"inputs come from different scenarios: {sorted(set(scenario_ids))}")
    a_f = ate(truth, fused, max_gap)
    a_v = ate(truth, vo, max_gap)
    rec = {
        "ate_fused": a_f.ate,
        "ate_vo": a_v.ate,
        "ratio": _ratio(a_v.ate, a_f.ate),
        "fused_errors": pose_error_series(truth, fused, max_gap).summary(),
        "vo_errors": pose_error_series(truth, vo, max_gap).summary(),
    }
    if map_stats_pair is not None:
        low, high = map_stats_pair
        rec["point_counts"] = {"low_rate": low.point_count, "high_rate": high.point_count}
        rec["node_counts"] = {"low_rate": low.node_count, "high_rate": high.node_count}
        rec["point_count_ratio"] = _ratio(high.point_count, low.point_count)
    if build_times is not None:
        rec["build_times"] = {"fused": float(build_times[0]), "vo": float(build_times[1])}
    return rec


def _ratio(num: float, den: float) -> float:
    if num == den:
        return 1.0
    if den == 0:
        return float("inf")
    return num / den
