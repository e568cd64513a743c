import math

import numpy as np
import pytest

from fusodom.core import InvalidArgumentError, Pose2D, Trajectory
from fusodom.mapmodel import (
    MapConfig,
    WorldModel,
    cast_scan,
    count_excursions,
    estimate_build_time,
    node_creation_times,
    simulate_scan,
    voxel_keys,
)
from fusodom.simsensor import MotionScript, SensorSuiteConfig, generate_ground_truth, sample_vo, vo_trajectory

from oracles import raycast_voxels

# walls kept off voxel boundaries so float round-off cannot flip a key
ROOM = WorldModel.room((0.013, 0.017, 7.991, 5.989), [(2.003, 1.007, 2.003, 2.509), (5.507, 4.001, 6.993, 4.001)])


def stationary(duration, pose=(4.0, 3.0, 0.3)):
    t = np.arange(0, duration + 1e-9, 0.05) if duration > 0 else np.array([0.0])
    n = t.size
    return Trajectory(t, np.full(n, pose[0]), np.full(n, pose[1]), np.full(n, pose[2]))


def sweep(w=0.2, duration=2.0):
    return generate_ground_truth(MotionScript([(duration, 0.0, w)]), 0.005, Pose2D(4.0, 3.0, 0.0))


def test_node_times():
    assert np.allclose(node_creation_times(2.0, 1.0), [0, 1, 2])
    assert node_creation_times(2.0, 10.0).size == 21
    assert np.array_equal(node_creation_times(0.0, 7.0), [0.0])
    with pytest.raises(InvalidArgumentError):
        node_creation_times(1.0, 0.0)


@pytest.mark.parametrize("pose", [(4.0, 3.0, 0.3), (1.1, 0.7, 2.5), (6.6, 5.1, -1.9)])
def test_single_node_matches_enumeration(pose):
    cfg = MapConfig(rays_per_scan=64, sensor_fov=1.5, voxel_size=0.02)
    stats = simulate_scan(stationary(0.0, pose), stationary(0.0, pose), ROOM, cfg)
    expect = raycast_voxels(*pose, ROOM.obstacles.tolist(), cfg.sensor_fov, cfg.rays_per_scan, cfg.sensor_range, cfg.voxel_size)
    assert stats.node_count == 1
    assert stats.point_count == len(expect)


def test_vectorized_hits_match_scalar_keys():
    cfg = MapConfig(rays_per_scan=33, sensor_fov=3.0, sensor_range=2.5, voxel_size=0.05)
    got = {tuple(k) for k in voxel_keys(cast_scan(1.5, 2.0, 0.9, ROOM, cfg), cfg.voxel_size)}
    assert got == raycast_voxels(1.5, 2.0, 0.9, ROOM.obstacles.tolist(), 3.0, 33, 2.5, 0.05)


def test_repeated_pose_is_deduplicated():
    cfg = MapConfig(detection_rate=1.0)
    one = simulate_scan(stationary(0.0), stationary(0.0), ROOM, cfg)
    two = simulate_scan(stationary(1.0), stationary(1.0), ROOM, cfg)
    assert two.node_count == 2 and two.point_count == one.point_count


def test_stationary_count_independent_of_rate():
    tr = stationary(5.0)
    counts = {simulate_scan(tr, tr, ROOM, MapConfig(detection_rate=r)).point_count for r in (1, 2, 10)}
    assert len(counts) == 1


def test_sweep_higher_rate_sees_more():
    tr = sweep()
    low = simulate_scan(tr, tr, ROOM, MapConfig(detection_rate=1.0))
    high = simulate_scan(tr, tr, ROOM, MapConfig(detection_rate=10.0))
    assert (low.node_count, high.node_count) == (3, 21)
    assert high.point_count >= low.point_count


def test_point_count_monotone_over_nested_rates():
    tr = sweep(duration=4.0)
    counts = [simulate_scan(tr, tr, ROOM, MapConfig(detection_rate=r)).point_count for r in (1, 2, 4, 8)]
    assert counts == sorted(counts)


def test_dedup_ceiling():
    tr = sweep()
    for rate in (1.0, 5.0, 10.0):
        cfg = MapConfig(detection_rate=rate, rays_per_scan=16)
        s = simulate_scan(tr, tr, ROOM, cfg)
        assert s.point_count <= cfg.rays_per_scan * s.node_count


def test_noisy_pose_source_changes_the_map():
    tr = generate_ground_truth(MotionScript([(20.0, 0.3, 0.0)]), 0.005, Pose2D(1.0, 3.0, 0.0))
    cfg = MapConfig(detection_rate=1.0)
    checked = 0
    for seed in range(5):
        vo = vo_trajectory(sample_vo(tr, SensorSuiteConfig(seed=seed)))
        vo = Trajectory(vo.t - vo.t[0], vo.x, vo.y, vo.yaw)  # drop the latency so spans match
        times = node_creation_times(tr.duration, 1.0)
        err = np.hypot(*(vo.interpolate(times)[:, :2] - tr.interpolate(times)[:, :2]).T)
        if err.max() <= cfg.voxel_size:
            continue

        def voxel_set(src):
            return {tuple(k) for p in src.interpolate(times) for k in voxel_keys(cast_scan(*p, ROOM, cfg), cfg.voxel_size)}

        assert voxel_set(vo) != voxel_set(tr)
        checked += 1
    assert checked >= 3


def test_short_pose_source_rejected():
    tr = stationary(5.0)
    with pytest.raises(InvalidArgumentError):
        simulate_scan(tr, stationary(3.0), ROOM, MapConfig())


def test_map_stats_are_deterministic():
    tr = sweep()
    a = simulate_scan(tr, tr, ROOM, MapConfig(detection_rate=10))
    assert a == simulate_scan(tr, tr, ROOM, MapConfig(detection_rate=10))
    assert a.build_time == pytest.approx(2.0)


@pytest.mark.parametrize(
    "errors, expected",
    [([], 0), ([0.01, 0.02], 0), ([0.1, 0.1, 0.0], 1), ([0.0, 0.1, 0.0, 0.2, 0.3], 2), ([0.1] * 5, 1)],
)
def test_count_excursions(errors, expected):
    assert count_excursions(errors, 0.05) == expected


def test_build_time_examples():
    assert estimate_build_time(60.0, [0.01] * 10, 0.05, 10.0) == 60.0
    assert estimate_build_time(60.0, [0.0, 0.2, 0.2, 0.0], 0.05, 10.0) == 70.0
    with pytest.raises(InvalidArgumentError):
        estimate_build_time(1.0, [0.0], -1.0, 1.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"detection_rate": 0},
        {"sensor_fov": 0},
        {"sensor_fov": 7.0},
        {"sensor_range": -1},
        {"rays_per_scan": 0},
        {"rays_per_scan": 2.5},
        {"voxel_size": 0},
    ],
)
def test_map_config_validation(kwargs):
    with pytest.raises(InvalidArgumentError):
        MapConfig(**kwargs)


def test_world_validation():
    with pytest.raises(InvalidArgumentError):
        WorldModel(np.array([[0, 0, 1, 1]]), (0, 0, 2, 2))  # diagonal
    with pytest.raises(InvalidArgumentError):
        WorldModel(np.array([[0, 0, 5, 0]]), (0, 0, 2, 2))  # outside
    with pytest.raises(InvalidArgumentError):
        WorldModel(np.array([[0, 0, 1, 0]]), (0, 0, 0, 2))  # degenerate bounds
    with pytest.raises(InvalidArgumentError):
        WorldModel(np.empty((0, 4)), (0, 0, 2, 2))


def test_full_circle_has_no_duplicate_ray():
    cfg = MapConfig(sensor_fov=2 * math.pi, rays_per_scan=4, voxel_size=0.01)
    pts = cast_scan(4.0, 3.0, 0.0, ROOM, cfg)
    assert len(pts) == 4
