"""Node-scheduling and point-accumulation surrogate for a keyframe mapper.

At each node time a planar range scan is cast from the pose reported by the
odometry source; hit points are voxelized into one global set. The number of
distinct voxels stands in for the map's point-cloud size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from fusodom.core import InvalidArgumentError, Trajectory

_TIME_TOL = 1e-9


@dataclass(frozen=True)
class MapConfig:
    detection_rate: float = 1.0
    # carried for completeness; the surrogate creates nodes at detection_rate only
    map_update_rate: float = 1.0
    sensor_fov: float = 1.5
    sensor_range: float = 5.0
    rays_per_scan: int = 64
    voxel_size: float = 0.02

    def __post_init__(self):
        checks = {
            "detection_rate": self.detection_rate > 0,
            "map_update_rate": self.map_update_rate > 0,
            "sensor_fov": 0 < self.sensor_fov <= 2 * math.pi,
            "sensor_range": self.sensor_range > 0,
            "rays_per_scan": int(self.rays_per_scan) == self.rays_per_scan and self.rays_per_scan >= 1,
            "voxel_size": self.voxel_size > 0,
        }
        bad = [k for k, ok in checks.items() if not ok]
        if bad:
            raise InvalidArgumentError(f"invalid map config field(s): {', '.join(bad)}")

    def with_rate(self, rate: float) -> MapConfig:
        return MapConfig(rate, rate, self.sensor_fov, self.sensor_range, self.rays_per_scan, self.voxel_size)


@dataclass(frozen=True)
class MapStats:
    node_count: int
    point_count: int
    build_time: float

    def to_dict(self) -> dict:
        return {"node_count": self.node_count, "point_count": self.point_count, "build_time": self.build_time}


@dataclass(frozen=True, eq=False)
class WorldModel:
    """Axis-aligned wall segments inside a rectangular boundary.

    ``obstacles`` is an ``(n, 4)`` array of ``x1, y1, x2, y2`` rows;
    ``bounds`` is ``(xmin, ymin, xmax, ymax)``.
    """

    obstacles: np.ndarray
    bounds: tuple[float, float, float, float]

    def __post_init__(self):
        xmin, ymin, xmax, ymax = (float(b) for b in self.bounds)
        if not (xmax > xmin and ymax > ymin):
            raise InvalidArgumentError("world bounds are degenerate")
        obs = np.asarray(self.obstacles, dtype=float).reshape(-1, 4)
        if obs.shape[0] == 0:
            raise InvalidArgumentError("world has no obstacles")
        horiz = obs[:, 1] == obs[:, 3]
        vert = obs[:, 0] == obs[:, 2]
        if not np.all(horiz | vert):
            raise InvalidArgumentError("obstacles must be axis-aligned segments")
        if np.any((obs[:, 0] == obs[:, 2]) & (obs[:, 1] == obs[:, 3])):
            raise InvalidArgumentError("obstacle segments must have non-zero length")
        eps = 1e-9
        inside = (
            (obs[:, [0, 2]] >= xmin - eps).all()
            and (obs[:, [0, 2]] <= xmax + eps).all()
            and (obs[:, [1, 3]] >= ymin - eps).all()
            and (obs[:, [1, 3]] <= ymax + eps).all()
        )
        if not inside:
            raise InvalidArgumentError("obstacles must lie inside the world bounds")
        obs.flags.writeable = False
        object.__setattr__(self, "obstacles", obs)
        object.__setattr__(self, "bounds", (xmin, ymin, xmax, ymax))

    @classmethod
    def room(cls, bounds, interior=()) -> WorldModel:
        """A walled rectangle plus optional interior segments."""
        xmin, ymin, xmax, ymax = bounds
        walls = [
            (xmin, ymin, xmax, ymin),
            (xmax, ymin, xmax, ymax),
            (xmax, ymax, xmin, ymax),
            (xmin, ymax, xmin, ymin),
        ]
        return cls(np.array(walls + [tuple(s) for s in interior], dtype=float), bounds)


def node_creation_times(duration: float, rate: float, start: float = 0.0) -> np.ndarray:
    if not (duration >= 0):
        raise InvalidArgumentError("duration must be >= 0")
    if not (rate > 0):
        raise InvalidArgumentError("rate must be > 0")
    n = math.floor(duration * rate + _TIME_TOL) + 1
    return start + np.arange(n) / rate


def ray_angles(yaw: float, cfg: MapConfig) -> np.ndarray:
    n = int(cfg.rays_per_scan)
    if n == 1:
        return np.array([yaw])
    full = cfg.sensor_fov >= 2 * math.pi - 1e-12
    # a full circle would otherwise cast the first and last ray in the same direction
    return yaw + np.linspace(-cfg.sensor_fov / 2, cfg.sensor_fov / 2, n, endpoint=not full)


def cast_scan(x: float, y: float, yaw: float, world: WorldModel, cfg: MapConfig) -> np.ndarray:
    """World-frame hit points ``(k, 2)`` of one scan; rays with no hit in range are omitted."""
    ang = ray_angles(yaw, cfg)
    d = np.column_stack((np.cos(ang), np.sin(ang)))  # (r, 2)
    a = world.obstacles[:, :2]
    e = world.obstacles[:, 2:] - a  # (s, 2)
    w = a - np.array([x, y])  # (s, 2)

    # o + t d = a + u e  ->  t d - u e = w
    den = d[:, None, 0] * (-e[None, :, 1]) - d[:, None, 1] * (-e[None, :, 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (w[None, :, 0] * (-e[None, :, 1]) - w[None, :, 1] * (-e[None, :, 0])) / den
        u = (d[:, None, 0] * w[None, :, 1] - d[:, None, 1] * w[None, :, 0]) / den
    valid = (den != 0) & (t >= 0) & (u >= 0) & (u <= 1) & (t <= cfg.sensor_range)
    t = np.where(valid, t, np.inf)
    tmin = t.min(axis=1)
    hit = np.isfinite(tmin)
    return np.array([x, y]) + d[hit] * tmin[hit, None]


def voxel_keys(points: np.ndarray, voxel_size: float) -> np.ndarray:
    return np.floor(points / voxel_size).astype(np.int64)


def simulate_scan(truth: Trajectory, pose_source: Trajectory, world: WorldModel, cfg: MapConfig) -> MapStats:
    """Scan at every node time from the ``pose_source`` pose and count distinct voxels.

    ``build_time`` here is the plain trajectory duration; re-scan penalties
    are added by :func:`estimate_build_time`.
    """
    if pose_source.start > truth.start + _TIME_TOL or pose_source.end < truth.end - _TIME_TOL:
        raise InvalidArgumentError(
            f"pose source spans [{pose_source.start:g}, {pose_source.end:g}] "
            f"but truth spans [{truth.start:g}, {truth.end:g}]"
        )
    times = node_creation_times(truth.duration, cfg.detection_rate, truth.start)
    poses = pose_source.interpolate(times)
    keys = [voxel_keys(cast_scan(px, py, pyaw, world, cfg), cfg.voxel_size) for px, py, pyaw in poses]
    allkeys = np.concatenate(keys) if keys else np.empty((0, 2), dtype=np.int64)
    n_points = int(np.unique(allkeys, axis=0).shape[0]) if allkeys.size else 0
    return MapStats(node_count=int(times.size), point_count=n_points, build_time=float(truth.duration))


def count_excursions(errors, threshold: float) -> int:
    """Number of maximal contiguous runs with ``error > threshold``."""
    above = np.asarray(errors, dtype=float) > threshold
    if above.size == 0:
        return 0
    return int(above[0]) + int(np.count_nonzero(above[1:] & ~above[:-1]))


def estimate_build_time(
    base_duration: float,
    odom_error_series,
    rescan_threshold: float = 0.05,
    rescan_penalty: float = 10.0,
) -> float:
    """Base duration plus a fixed penalty per odometry-error excursion above threshold."""
    if rescan_threshold < 0 or rescan_penalty < 0:
        raise InvalidArgumentError("rescan threshold and penalty must be >= 0")
    return float(base_duration) + rescan_penalty * count_excursions(odom_error_series, rescan_threshold)
