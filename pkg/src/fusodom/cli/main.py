"""``fusodom`` command line: simulate, fuse, mapsim, eval, bench."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from fusodom import ekf, evaluate, mapmodel
from fusodom.cli import io
from fusodom.cli.config import ConfigError, ScenarioConfig, load_config, resolve_config_path
from fusodom.cli.pipeline import StageError, bench, fuse, simulate
from fusodom.core import (
    FusodomError,
    InitializationError,
    InvalidArgumentError,
    NoOverlapError,
)

OUT_ENV = "FUSODOM_OUT"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_INIT = 3
EXIT_NO_OVERLAP = 4
EXIT_IO = 5

log = logging.getLogger("fusodom")


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        return exit_code_for(exc.cause)
    if isinstance(exc, InitializationError):
        return EXIT_INIT
    if isinstance(exc, NoOverlapError):
        return EXIT_NO_OVERLAP
    if isinstance(exc, (ConfigError, io.FormatError, InvalidArgumentError)):
        return EXIT_VALIDATION
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_FAILURE


def _out_root(args, cfg: ScenarioConfig | None = None) -> Path:
    if args.out:
        return Path(args.out)
    root = Path(os.environ.get(OUT_ENV, "runs"))
    return root / cfg.name if cfg is not None else root


def _load(args) -> ScenarioConfig:
    cfg = load_config(resolve_config_path(args.config))
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seeds([args.seed])
    return cfg


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out = _out_root(args, cfg)
    for seed in cfg.seeds:
        truth, ms = simulate(cfg, seed)
        d = out / f"seed_{seed}"
        io.write_trajectory_csv(d / "truth.csv", truth)
        io.write_measurements_jsonl(d / "measurements.jsonl", ms)
        io.write_json(
            d / "manifest.json",
            {
                "scenario": cfg.name,
                "config_hash": cfg.config_hash(),
                "seed": seed,
                "files": {"truth_csv": "truth.csv", "measurements_jsonl": "measurements.jsonl"},
                "truth_samples": len(truth),
                "measurements": len(ms),
            },
        )
        print(f"seed {seed}: {len(truth)} truth samples, {len(ms)} measurements -> {d}")
    return EXIT_OK


def cmd_fuse(args) -> int:
    filter_cfg = _load(args).filter.build() if args.config else ekf.FilterConfig()
    ms = io.read_measurements_jsonl(args.measurements)
    result = fuse(ms, filter_cfg, include_vo=args.include_vo)
    out = Path(args.out) if args.out else Path(args.measurements).parent
    io.write_trajectory_csv(out / "fused.csv", result.trajectory)
    io.write_estimate_log_jsonl(out / "filter_log.jsonl", result.log)
    summary = {
        "input": Path(args.measurements).name,
        "estimates": len(result.log),
        "trajectory_samples": len(result.trajectory),
        "dropped": result.dropped,
        "rejected": result.rejected,
        "skipped_before_init": result.skipped_before_init,
    }
    io.write_json(out / "fuse_summary.json", summary)
    print(io.dumps_json(summary), end="")
    return EXIT_OK


def cmd_mapsim(args) -> int:
    if not (args.rate > 0):
        raise InvalidArgumentError(f"--rate must be > 0, got {args.rate}")
    cfg = _load(args)
    truth = io.read_trajectory_csv(args.truth)
    poses = io.read_trajectory_csv(args.poses)
    stats = mapmodel.simulate_scan(truth, poses, cfg.world.build(), cfg.map.build(args.rate))
    rec = {"rate": args.rate, "config_hash": cfg.config_hash(), **stats.to_dict()}
    if args.out:
        io.write_json(Path(args.out) / f"mapstats_{args.rate:g}hz.json", rec)
    print(io.dumps_json(rec), end="")
    return EXIT_OK


def cmd_eval(args) -> int:
    truth = io.read_trajectory_csv(args.truth)
    est = io.read_trajectory_csv(args.estimate)
    report = evaluate.ate(truth, est, args.max_gap)
    series = evaluate.pose_error_series(truth, est, args.max_gap)
    out = Path(args.out) if args.out else Path(args.estimate).parent
    stem = Path(args.estimate).stem
    io.write_json(out / f"{stem}_ate.json", report.to_dict())
    io.write_error_series_csv(out / f"{stem}_errors.csv", series)
    print(f"ate {report.ate:.6f} m over {report.n_pairs} pairs (max {report.max_error:.6f} m)")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _load(args)
    out = _out_root(args, cfg)
    report = bench(cfg, out, jobs=args.jobs)
    agg = report["aggregate"]
    print(
        f"{cfg.name}: {agg['n_seeds']} seeds, ATE fused {agg['ate_fused']['mean']:.4f} m, "
        f"VO {agg['ate_vo']['mean']:.4f} m, ratio mean {agg['ate_ratio']['mean']:.2f} "
        f"(min {agg['ate_ratio']['min']:.2f}); point-count ratio {agg['point_count_ratio']['mean']:.2f}; "
        f"build time fused {agg['build_time_fused']['mean']:.1f} s vs VO {agg['build_time_vo']['mean']:.1f} s"
    )
    print(f"report: {out / 'report.json'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fusodom", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate ground truth and a sensor measurement stream")
    s.add_argument("--config", required=True, help="scenario JSON (or shipped scenario name)")
    s.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<name> or runs/<name>)")
    s.add_argument("--seed", type=int, help="override the config's seed list")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fuse", help="run the EKF over a recorded measurement stream")
    s.add_argument("--measurements", required=True, help="measurements JSONL")
    s.add_argument("--config", help="scenario JSON providing the filter settings")
    s.add_argument("--out", help="output directory (default: next to the input)")
    s.add_argument("--include-vo", action="store_true", help="also fuse VoPose measurements")
    s.set_defaults(func=cmd_fuse)

    s = sub.add_parser("mapsim", help="point-accumulation surrogate for one node rate")
    s.add_argument("--truth", required=True)
    s.add_argument("--poses", required=True, help="pose-source trajectory CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--rate", type=float, required=True, help="node creation rate in Hz")
    s.add_argument("--out")
    s.set_defaults(func=cmd_mapsim)

    s = sub.add_parser("eval", help="ATE and per-axis error series of an estimate")
    s.add_argument("--truth", required=True)
    s.add_argument("--estimate", required=True)
    s.add_argument("--max-gap", type=float, default=None, help="association window in seconds")
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("bench", help="full comparison over every seed of a scenario")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--seed", type=int)
    s.add_argument("--jobs", type=int, default=1, help="parallel seed workers")
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (FusodomError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
