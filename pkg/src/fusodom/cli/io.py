"""Wire formats: trajectory CSV, measurement JSONL, JSON reports.

Floats are written with ``repr`` (shortest round-tripping form), so reading a
file back reproduces every value exactly.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable

import numpy as np

from fusodom.core import FusodomError, Measurement, SensorKind, Trajectory
from fusodom.ekf import StateEstimate
from fusodom.evaluate import ErrorSeries

TRAJECTORY_COLUMNS = ("t", "x", "y", "yaw")
ERROR_SERIES_COLUMNS = ("t", "ex", "ey", "eyaw")


class FormatError(FusodomError):
    """Input file does not match the expected wire format."""


def _fmt(v: float) -> str:
    return repr(float(v))


def _ensure_parent(path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)


def write_trajectory_csv(path, traj: Trajectory) -> Path:
    path = Path(path)
    _ensure_parent(path)
    with path.open("w", newline="") as fh:
        fh.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        for row in zip(traj.t, traj.x, traj.y, traj.yaw):
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def read_trajectory_csv(path) -> Trajectory:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRAJECTORY_COLUMNS:
            raise FormatError(f"{path}: expected header {','.join(TRAJECTORY_COLUMNS)}, got {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise FormatError(f"{path}: trajectory has no samples")
    arr = np.array(rows)
    try:
        return Trajectory(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])
    except FusodomError as exc:
        raise FormatError(f"{path}: {exc}") from None


def measurement_to_dict(m: Measurement) -> dict:
    return {
        "t": m.stamp,
        "kind": m.kind.value,
        "value": m.value.tolist(),
        "noise_diag": m.noise_diag.tolist(),
    }


def measurement_from_dict(d: dict) -> Measurement:
    missing = {"t", "kind", "value", "noise_diag"} - set(d)
    if missing:
        raise FormatError(f"missing field(s) {sorted(missing)}")
    try:
        kind = SensorKind(d["kind"])
    except ValueError:
        raise FormatError(f"unknown measurement kind {d['kind']!r}") from None
    try:
        return Measurement(d["t"], kind, d["value"], d["noise_diag"])
    except (FusodomError, TypeError, ValueError) as exc:
        raise FormatError(str(exc)) from None


def write_measurements_jsonl(path, measurements: Iterable[Measurement]) -> Path:
    path = Path(path)
    _ensure_parent(path)
    with path.open("w") as fh:
        for m in measurements:
            fh.write(json.dumps(measurement_to_dict(m)) + "\n")
    return path


def read_measurements_jsonl(path) -> list[Measurement]:
    path = Path(path)
    out = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(measurement_from_dict(json.loads(line)))
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: malformed JSON: {exc.msg}") from None
            except FormatError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    return out


def write_error_series_csv(path, series: ErrorSeries) -> Path:
    path = Path(path)
    _ensure_parent(path)
    with path.open("w", newline="") as fh:
        fh.write(",".join(ERROR_SERIES_COLUMNS) + "\n")
        for row in zip(series.t, series.ex, series.ey, series.eyaw):
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def write_estimate_log_jsonl(path, log: Iterable[StateEstimate]) -> Path:
    path = Path(path)
    _ensure_parent(path)
    with path.open("w") as fh:
        for est in log:
            rec = {
                "t": est.stamp,
                "state": est.state.tolist(),
                "cov_diag": np.diagonal(est.covariance).tolist(),
            }
            fh.write(json.dumps(rec) + "\n")
    return path


def _clean(obj):
    # JSON has no inf/nan; emit them as strings so the file stays standard
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    _ensure_parent(path)
    path.write_text(dumps_json(obj))
    return path


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    _ensure_parent(path)
    with path.open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else _fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")
    return path
