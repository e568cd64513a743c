"""Scenario configuration schema and loading.

A scenario is one JSON document; its canonical serialization is hashed so
every report can name the exact configuration that produced it.
"""

from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path
from typing import Annotated, List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from fusodom import ekf, mapmodel, simsensor
from fusodom.core import FusodomError, Pose2D

PositiveFloat = Annotated[float, Field(gt=0, allow_inf_nan=False)]
NonNegFloat = Annotated[float, Field(ge=0, allow_inf_nan=False)]
FiniteFloat = Annotated[float, Field(allow_inf_nan=False)]


class ConfigError(FusodomError):
    """Malformed or invalid scenario configuration."""


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SegmentModel(_Model):
    duration: PositiveFloat
    v: FiniteFloat = 0.0
    w: FiniteFloat = 0.0


class MotionModel(_Model):
    segments: List[SegmentModel] = Field(min_length=1)

    def build(self) -> simsensor.MotionScript:
        return simsensor.MotionScript(tuple(simsensor.Segment(s.duration, s.v, s.w) for s in self.segments))


class PoseModel(_Model):
    x: FiniteFloat = 0.0
    y: FiniteFloat = 0.0
    yaw: FiniteFloat = 0.0


class IpsModel(_Model):
    rate: PositiveFloat = 10.0
    sigma_xy: NonNegFloat = 0.02


class EncoderModel(_Model):
    rate: PositiveFloat = 20.0
    sigma_v: NonNegFloat = 0.01


class ImuModel(_Model):
    rate: PositiveFloat = 50.0
    sigma_yaw: NonNegFloat = 0.01
    sigma_vyaw: NonNegFloat = 0.02
    sigma_a: NonNegFloat = 0.1
    yaw_drift_rate: FiniteFloat = 0.0


class VoModel(_Model):
    rate: PositiveFloat = 1.0
    latency: NonNegFloat = 0.1
    walk_sigma: NonNegFloat = 0.015
    jump_prob_per_sample: Annotated[float, Field(ge=0, le=1)] = 0.08
    jump_sigma: NonNegFloat = 0.1


class SensorsModel(_Model):
    ips: IpsModel = IpsModel()
    encoder: EncoderModel = EncoderModel()
    imu: ImuModel = ImuModel()
    vo: VoModel = VoModel()

    def build(self, seed: int) -> simsensor.SensorSuiteConfig:
        return simsensor.SensorSuiteConfig(
            ips=simsensor.IpsConfig(**self.ips.model_dump()),
            encoder=simsensor.EncoderConfig(**self.encoder.model_dump()),
            imu=simsensor.ImuConfig(**self.imu.model_dump()),
            vo=simsensor.VoConfig(**self.vo.model_dump()),
            seed=seed,
        )


class FilterModel(_Model):
    q_diag: List[NonNegFloat] = Field(default=list(ekf.DEFAULT_Q_DIAG), min_length=8, max_length=8)
    gating_threshold: NonNegFloat = 0.0
    initial_covariance_diag: List[PositiveFloat] = Field(
        default=list(ekf.DEFAULT_P0_DIAG), min_length=8, max_length=8
    )
    min_dt: NonNegFloat = 1e-6

    def build(self) -> ekf.FilterConfig:
        return ekf.FilterConfig(
            process_noise=ekf.ProcessNoiseModel(tuple(self.q_diag)),
            gating_threshold=self.gating_threshold,
            initial_covariance_diag=tuple(self.initial_covariance_diag),
            min_dt=self.min_dt,
        )


class MapModel(_Model):
    detection_rate: PositiveFloat = 1.0
    map_update_rate: PositiveFloat = 1.0
    sensor_fov: Annotated[float, Field(gt=0, le=6.283185307179586)] = 1.5
    sensor_range: PositiveFloat = 5.0
    rays_per_scan: Annotated[int, Field(ge=1)] = 64
    voxel_size: PositiveFloat = 0.02
    rescan_threshold: NonNegFloat = 0.05
    rescan_penalty: NonNegFloat = 10.0

    def build(self, rate: float | None = None) -> mapmodel.MapConfig:
        cfg = mapmodel.MapConfig(
            detection_rate=self.detection_rate,
            map_update_rate=self.map_update_rate,
            sensor_fov=self.sensor_fov,
            sensor_range=self.sensor_range,
            rays_per_scan=self.rays_per_scan,
            voxel_size=self.voxel_size,
        )
        return cfg if rate is None else cfg.with_rate(rate)


class WorldModelSchema(_Model):
    bounds: Annotated[List[FiniteFloat], Field(min_length=4, max_length=4)] = [0.0, 0.0, 8.0, 6.0]
    walls: bool = True  # add the four boundary walls
    obstacles: List[Annotated[List[FiniteFloat], Field(min_length=4, max_length=4)]] = []

    def build(self) -> mapmodel.WorldModel:
        if self.walls:
            return mapmodel.WorldModel.room(tuple(self.bounds), self.obstacles)
        return mapmodel.WorldModel(self.obstacles, tuple(self.bounds))

    @model_validator(mode="after")
    def _check(self):
        try:
            self.build()
        except FusodomError as exc:
            raise ValueError(str(exc)) from None
        return self


_SAFE_NAME = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


class ScenarioConfig(_Model):
    name: str
    motion: MotionModel
    sensors: SensorsModel = SensorsModel()
    filter: FilterModel = FilterModel()
    map: MapModel = MapModel()
    world: WorldModelSchema = WorldModelSchema()
    seeds: List[Annotated[int, Field(ge=0, lt=2**64)]] = Field(min_length=1)
    dt_sim: PositiveFloat = 0.005
    start: PoseModel = PoseModel()

    @field_validator("name")
    @classmethod
    def _name_is_safe(cls, v: str) -> str:
        if not _SAFE_NAME.match(v):
            raise ValueError("name must be non-empty and use only letters, digits, '.', '_' or '-'")
        return v

    def with_seeds(self, seeds) -> ScenarioConfig:
        return self.model_copy(update={"seeds": list(seeds)})

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def start_pose(self) -> Pose2D:
        return Pose2D(self.start.x, self.start.y, self.start.yaw)


def _format_validation_error(source: str, err: ValidationError) -> str:
    lines = [f"{source}: invalid scenario config"]
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"  field {loc}: {e['msg']}")
    return "\n".join(lines)


def parse_config(text: str, source: str = "<config>") -> ScenarioConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from None
    try:
        return ScenarioConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_validation_error(source, exc)) from None


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    return parse_config(text, str(path))


SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def shipped_scenarios() -> dict[str, Path]:
    return {p.stem: p for p in sorted(SCENARIO_DIR.glob("*.json"))}


def resolve_config_path(ref: str) -> Path:
    """Accept a file path or the name of a shipped scenario."""
    p = Path(ref)
    if p.exists() or p.suffix:
        return p
    shipped = shipped_scenarios()
    if ref in shipped:
        return shipped[ref]
    return p
