"""Scenario orchestration: simulate -> fuse -> map -> evaluate, per seed and aggregated."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from fusodom import ekf, evaluate, mapmodel, simsensor
from fusodom.cli import io
from fusodom.cli.config import ScenarioConfig
from fusodom.core import FusodomError, Measurement, SensorKind, Trajectory

log = logging.getLogger(__name__)

FUSED_KINDS = (SensorKind.IPS, SensorKind.ENCODER, SensorKind.IMU)


class StageError(FusodomError):
    def __init__(self, stage: str, seed, cause: Exception):
        self.stage, self.seed, self.cause = stage, seed, cause
        super().__init__(f"stage '{stage}' failed for seed {seed}: {cause}")


def simulate(cfg: ScenarioConfig, seed: int) -> tuple[Trajectory, list[Measurement]]:
    truth = simsensor.generate_ground_truth(cfg.motion.build(), cfg.dt_sim, cfg.start_pose())
    return truth, simsensor.simulate_measurements(truth, cfg.sensors.build(seed))


def fuse(measurements, filter_cfg: ekf.FilterConfig, include_vo: bool = False) -> ekf.FusionResult:
    """Sort the stream (stamp, then sensor kind) and run the filter over it."""
    kinds = FUSED_KINDS + ((SensorKind.VO,) if include_vo else ())
    stream = sorted((m for m in measurements if m.kind in kinds), key=Measurement.sort_key)
    return ekf.process_stream(stream, filter_cfg)


@dataclass
class SeedRun:
    seed: int
    truth: Trajectory
    measurements: list
    fused: ekf.FusionResult
    vo: Trajectory
    fused_errors: evaluate.ErrorSeries
    vo_errors: evaluate.ErrorSeries
    record: dict


def run_seed(cfg: ScenarioConfig, seed: int) -> SeedRun:
    stage = "simulate"
    try:
        truth, ms = simulate(cfg, seed)
        stage = "fuse"
        fused = fuse(ms, cfg.filter.build())
        stage = "vo-passthrough"
        vo = simsensor.vo_trajectory(ms)
        stage = "mapsim"
        world = cfg.world.build()
        low_rate = cfg.map.detection_rate
        high_rate = cfg.sensors.ips.rate  # node rate synchronized with the fused odometry
        low = mapmodel.simulate_scan(truth, fused.trajectory, world, cfg.map.build(low_rate))
        high = mapmodel.simulate_scan(truth, fused.trajectory, world, cfg.map.build(high_rate))
        stage = "eval"
        fe = evaluate.pose_error_series(truth, fused.trajectory)
        ve = evaluate.pose_error_series(truth, vo)
        build = (
            mapmodel.estimate_build_time(truth.duration, fe.position_error, cfg.map.rescan_threshold, cfg.map.rescan_penalty),
            mapmodel.estimate_build_time(truth.duration, ve.position_error, cfg.map.rescan_threshold, cfg.map.rescan_penalty),
        )
        rec = evaluate.compare_report(truth, fused.trajectory, vo, (low, high), build)
    except FusodomError as exc:
        raise StageError(stage, seed, exc) from exc
    rec = {
        "seed": seed,
        **rec,
        "rates": {"low_rate": low_rate, "high_rate": high_rate},
        "filter": {"dropped": fused.dropped, "rejected": fused.rejected, "estimates": len(fused.log)},
    }
    return SeedRun(seed, truth, ms, fused, vo, fe, ve, rec)


def _stats(values) -> dict:
    a = np.asarray(values, dtype=float)
    return {"mean": float(np.mean(a)), "min": float(np.min(a)), "max": float(np.max(a))}


def aggregate(records: list[dict]) -> dict:
    agg = {
        "n_seeds": len(records),
        "ate_fused": _stats([r["ate_fused"] for r in records]),
        "ate_vo": _stats([r["ate_vo"] for r in records]),
        "ate_ratio": _stats([r["ratio"] for r in records]),
        "point_count_ratio": _stats([r["point_count_ratio"] for r in records]),
        "build_time_fused": _stats([r["build_times"]["fused"] for r in records]),
        "build_time_vo": _stats([r["build_times"]["vo"] for r in records]),
        "fused_max_position_error": _stats([r["fused_errors"]["max_position_error"] for r in records]),
        "vo_max_position_error": _stats([r["vo_errors"]["max_position_error"] for r in records]),
    }
    agg["vo_worse_every_seed"] = all(r["ate_vo"] > r["ate_fused"] for r in records)
    return agg


def write_seed_artifacts(run: SeedRun, seed_dir: Path) -> dict:
    files = {
        "truth_csv": io.write_trajectory_csv(seed_dir / "truth.csv", run.truth),
        "measurements_jsonl": io.write_measurements_jsonl(seed_dir / "measurements.jsonl", run.measurements),
        "fused_csv": io.write_trajectory_csv(seed_dir / "fused.csv", run.fused.trajectory),
        "vo_csv": io.write_trajectory_csv(seed_dir / "vo.csv", run.vo),
        "fused_errors_csv": io.write_error_series_csv(seed_dir / "fused_errors.csv", run.fused_errors),
        "vo_errors_csv": io.write_error_series_csv(seed_dir / "vo_errors.csv", run.vo_errors),
    }
    return {k: p.relative_to(seed_dir.parent).as_posix() for k, p in files.items()}


def _run_and_write(args):
    cfg, seed, out_dir = args
    run = run_seed(cfg, seed)
    files = write_seed_artifacts(run, out_dir / f"seed_{seed}") if out_dir is not None else {}
    return {**run.record, "files": files}


def bench(cfg: ScenarioConfig, out_dir: Path | None = None, jobs: int = 1) -> dict:
    """Run every seed of ``cfg`` and assemble the comparison report.

    With ``out_dir`` set, per-seed artifacts, plot-ready CSVs and
    ``report.json`` are written there.
    """
    tasks = [(cfg, seed, out_dir) for seed in cfg.seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_and_write, tasks))
    else:
        records = [_run_and_write(t) for t in tasks]
    for r in records:
        log.info("seed %s: ate fused %.4f vo %.4f", r["seed"], r["ate_fused"], r["ate_vo"])

    report = {
        "scenario": cfg.name,
        "config_hash": cfg.config_hash(),
        "seeds": records,
        "aggregate": aggregate(records),
    }
    if out_dir is not None:
        out_dir = Path(out_dir)
        io.write_csv(
            out_dir / "ate_bars.csv",
            ("seed", "ate_fused", "ate_vo", "ratio"),
            [(r["seed"], r["ate_fused"], r["ate_vo"], r["ratio"]) for r in records],
        )
        io.write_csv(
            out_dir / "map_stats.csv",
            ("seed", "rate_low", "points_low", "rate_high", "points_high", "build_time_fused", "build_time_vo"),
            [
                (
                    r["seed"],
                    float(r["rates"]["low_rate"]),
                    r["point_counts"]["low_rate"],
                    float(r["rates"]["high_rate"]),
                    r["point_counts"]["high_rate"],
                    r["build_times"]["fused"],
                    r["build_times"]["vo"],
                )
                for r in records
            ],
        )
        io.write_json(out_dir / "report.json", report)
    return report
