"""Run configuration: every tunable in one serializable record, a flat
TOML-style config file loader, and builders for module parameter objects."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from . import motion
from .game import UtilityParams
from .generator import InjectionConfig, SpeedSampler
from .occlusion import RayBudget
from .scene_model import VehicleFootprint


@dataclass
class RunConfig:
    seed: int = 0
    # occupancy grid and ray budget
    cell_size: float = 0.1
    epsilon: int = 3
    n_min: int = 5
    n_max: int = 64
    k_att: float = 400.0
    # injection
    spacing: float = 2.0
    min_gap: float = 1.0
    region_pad: float = 50.0
    # utilities
    gamma: float = 0.5
    sigmoid_midpoint: float = 1.0
    sigmoid_slope: float = 1.5
    progress_norm: float = 132.0
    # classification and intervention
    theta: float = 2.0
    a_brake: float = 6.0
    # kinematics
    dt: float = 0.1
    horizon: float = 6.0
    footprint_length: float = 4.1
    footprint_width: float = 1.8
    v_max: float = 22.0
    # orchestration
    jobs: int = 1
    limit_scenes: int | None = None

    def __post_init__(self):
        if abs(self.dt - motion.DT) > 1e-12 or abs(self.horizon - motion.HORIZON) > 1e-12:
            raise ValueError(
                f"dt/horizon are fixed at {motion.DT}/{motion.HORIZON} by design"
            )
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    def ray_budget(self) -> RayBudget:
        return RayBudget(
            n_min=self.n_min, n_max=self.n_max, k_att=self.k_att, epsilon=self.epsilon
        )

    def utility_params(self) -> UtilityParams:
        return UtilityParams(
            gamma=self.gamma,
            sigmoid_midpoint=self.sigmoid_midpoint,
            sigmoid_slope=self.sigmoid_slope,
            progress_norm=self.progress_norm,
        )

    def footprint(self) -> VehicleFootprint:
        return VehicleFootprint(length=self.footprint_length, width=self.footprint_width)

    def injection_config(self, sampler: SpeedSampler | None = None) -> InjectionConfig:
        return InjectionConfig(
            spacing=self.spacing,
            min_gap=self.min_gap,
            speed_sampler=sampler,
            rng_seed=self.seed,
            region_pad=self.region_pad,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _parse_value(name: str, raw: str):
    raw = raw.strip()
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return raw[1:-1]
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    if raw.lower() in ("none", "null"):
        return None
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        raise ValueError(f"config key {name!r}: cannot parse value {raw!r}")


def load_config_file(path) -> dict:
    """Flat `key = value` file (TOML-style scalars, # comments)."""
    out = {}
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"config line {line_no}: expected key = value")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _FIELD_TYPES:
                raise ValueError(f"config line {line_no}: unknown key {key!r}")
            if "#" in value and not value.strip().startswith('"'):
                value = value.split("#", 1)[0]
            out[key] = _parse_value(key, value)
    return out


def make_config(file_path=None, overrides: dict | None = None) -> RunConfig:
    """File values first, then CLI overrides on top of the defaults."""
    values: dict = {}
    if file_path is not None:
        values.update(load_config_file(file_path))
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    return RunConfig(**values)
