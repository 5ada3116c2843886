"""Scenario configuration: schema, file loading, and overrides.

A scenario file is YAML (JSON is valid YAML) matching
:class:`ScenarioConfig`.  Command-line overrides are dotted-path
``key=value`` pairs applied after file parsing, last one wins.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .adversary import ATTACKER_KINDS, AttackerProfile
from .channel import TRAJECTORY_KINDS, Trajectory
from .detect import MIN_EXTENT_SAMPLES, GeometryGates, ValleyDetectionParams
from .errors import ConfigError
from .presets import environment_preset, trajectory_preset


class TrajectoryModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal[TRAJECTORY_KINDS] = "symmetric-swipe"  # type: ignore[valid-type]
    perp_offset_m: Optional[float] = None
    half_span_m: Optional[float] = None
    speed_mps: Optional[float] = None
    start_offset_m: Optional[float] = None
    lead_in_s: Optional[float] = None
    lead_out_s: Optional[float] = None

    def build(self) -> Trajectory:
        base = trajectory_preset(self.kind)
        overrides = {k: v for k, v in self.model_dump().items()
                     if k != "kind" and v is not None}
        if not overrides:
            return base
        fields = {f: getattr(base, f) for f in (
            "kind", "perp_offset_m", "half_span_m", "speed_mps",
            "start_offset_m", "lead_in_s", "lead_out_s")}
        fields.update(overrides)
        return Trajectory(**fields)


class AttackerModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal[ATTACKER_KINDS] = "supreme"  # type: ignore[valid-type]
    distance_m: float = 2.0
    position_m: Optional[tuple[float, float]] = None
    sigma_d: float = 0.0
    measurement_noise_db: Optional[float] = None
    dither_db: float = 0.0
    violate_interlock: bool = False

    def build(self) -> AttackerProfile:
        return AttackerProfile(kind=self.kind, distance_m=self.distance_m,
                               position_m=self.position_m, sigma_d=self.sigma_d,
                               measurement_noise_db=self.measurement_noise_db,
                               dither_db=self.dither_db,
                               violate_interlock=self.violate_interlock)


class DetectorModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    lag: int = 100
    threshold: float = 4.0
    influence: float = 0.5
    smooth_window: int = 21  # detection-input prefilter; 1 disables

    def build(self) -> ValleyDetectionParams:
        return ValleyDetectionParams(lag=self.lag, threshold=self.threshold,
                                     influence=self.influence)


class GatesModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    min_depth_db: float = 10.0
    max_valley_level_db: float = 45.0
    min_peak_level_db: float = 50.0
    max_peak_level_db: float = 60.0
    min_width_s: float = 0.1
    max_width_s: float = 0.6

    def build(self) -> GeometryGates:
        return GeometryGates(**self.model_dump())


class ScenarioConfig(BaseModel):
    """One pairing scenario; Monte-Carlo runs derive per-run seeds from ``seed``."""

    model_config = ConfigDict(extra="forbid")

    environment: str = "office"
    trajectory: TrajectoryModel = Field(default_factory=TrajectoryModel)
    attacker: Optional[AttackerModel] = None
    n_probes: int = 500
    rate_hz: float = 500.0
    tx_range_dbm: tuple[float, float] = (0.0, 30.0)
    tx_fixed_dbm: Optional[float] = None
    require_tx_randomization: bool = True
    detector: DetectorModel = Field(default_factory=DetectorModel)
    gates: GatesModel = Field(default_factory=GatesModel)
    variation_threshold_db: float = 1.27
    extent_cutoff: float = 0.01
    quantize_rssi_db: Optional[float] = None
    min_attacker_distance_m: float = 2.0
    seed: int = 0

    @property
    def tx_sigma_db(self) -> float:
        """Standard deviation of the randomized Tx power."""
        if self.tx_fixed_dbm is not None:
            return 0.0
        lo, hi = self.tx_range_dbm
        return (hi - lo) / math.sqrt(12.0)

    @model_validator(mode="after")
    def _check(self) -> "ScenarioConfig":
        # domain errors become ValueError so pydantic reports them as
        # ordinary validation failures (and HTTP layers as 422)
        try:
            preset = environment_preset(self.environment)
            self.detector.build()
            traj = self.trajectory.build()
            profile = self.attacker.build() if self.attacker is not None else None
        except ConfigError as exc:
            raise ValueError(str(exc)) from exc
        if self.detector.smooth_window < 1:
            raise ValueError("detector: smooth_window must be >= 1")
        lo, hi = self.tx_range_dbm
        if hi < lo:
            raise ValueError("tx_range_dbm must be (low, high) with low <= high")
        if self.rate_hz <= 0:
            raise ValueError("rate_hz must be positive")
        if self.n_probes < 2 * self.detector.lag + MIN_EXTENT_SAMPLES:
            raise ValueError(
                f"n_probes must be at least 2*lag + {MIN_EXTENT_SAMPLES} "
                f"= {2 * self.detector.lag + MIN_EXTENT_SAMPLES}")
        if not 0 < self.extent_cutoff < 1:
            raise ValueError("extent_cutoff must be in (0, 1)")
        window = (self.n_probes - 1) / self.rate_hz
        if window > traj.duration_s:
            raise ValueError(
                f"probe window {window:.3f}s exceeds trajectory duration "
                f"{traj.duration_s:.3f}s")
        if profile is not None:
            if profile.distance_m < self.min_attacker_distance_m:
                raise ValueError(
                    f"attacker distance {profile.distance_m} m below the "
                    f"{self.min_attacker_distance_m} m floor")
            if self.require_tx_randomization:
                sigma_am = float(preset.fading_sigma(profile.distance_m))
                if self.tx_sigma_db <= sigma_am:
                    raise ValueError(
                        "tx_range_dbm gives Tx std "
                        f"{self.tx_sigma_db:.2f} dB, which must exceed the "
                        f"attacker-link fading std {sigma_am:.2f} dB; widen the "
                        "range or set require_tx_randomization: false")
        if self.tx_fixed_dbm is not None and self.require_tx_randomization:
            raise ValueError("tx_fixed_dbm requires require_tx_randomization: false")
        return self


def _set_dotted(data: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = data
    for part in parts[:-1]:
        nxt = node.get(part)
        if not isinstance(nxt, dict):
            nxt = {}
            node[part] = nxt
        node = nxt
    node[parts[-1]] = value


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``key.path=value`` overrides; values parse as YAML scalars."""
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        _set_dotted(data, key.strip(), yaml.safe_load(raw))
    return data


def load_config(path: str | Path | None, overrides: list[str] | None = None,
                **direct) -> ScenarioConfig:
    """Load a scenario from a YAML/JSON file plus overrides.

    ``direct`` keyword values (e.g. seed) apply after file parsing but
    before dotted overrides.
    """
    data: dict = {}
    if path is not None:
        text = Path(path).read_text()
        loaded = yaml.safe_load(text)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config root must be a mapping, got {type(loaded).__name__}")
        data = loaded
    for key, value in direct.items():
        if value is not None:
            data[key] = value
    if overrides:
        apply_overrides(data, overrides)
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        locs = ", ".join(".".join(str(p) for p in e["loc"]) or "<root>"
                         for e in exc.errors())
        raise ConfigError(f"invalid configuration ({locs}): {exc}") from exc
