"""Run configuration: one JSON document, unknown keys rejected."""
from __future__ import annotations

import json
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .domain import DomainSpec, LayerSpec, read_voxel_mask
from .errors import ConfigError, InvalidSpec

MODES = ("spectrum", "resonance", "asym", "sweep", "invert", "oracle")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LayerConfig(_Strict):
    outer_scale: float
    eta0: float


class DomainConfig(_Strict):
    shape_kind: Literal["ball", "ellipsoid", "box", "voxel_mask"] = "ball"
    shape_params: List[float] = Field(default_factory=lambda: [1.0])
    layers: List[LayerConfig] = Field(default_factory=lambda: [LayerConfig(outer_scale=1.0, eta0=1.0)])
    resolution: int = 20
    mask_file: Optional[str] = None


class Tolerances(_Strict):
    eigen_residual: float = 1e-8
    nonlinear_step: float = 1e-10
    norm_estimate: float = 1e-8

    @field_validator("eigen_residual", "nonlinear_step", "norm_estimate")
    @classmethod
    def _in_range(cls, v):
        if not 0 < v < 1e-2:
            raise ValueError(f"tolerance must lie in (0, 1e-2), got {v}")
        return v


class Outputs(_Strict):
    csv_path: Optional[str] = None
    json_path: Optional[str] = None


class InversionConfig(_Strict):
    measurements_csv: str
    unknowns: List[Literal["eta0", "scale"]] = Field(default_factory=lambda: ["eta0"])
    initial_eta0: Optional[List[float]] = None
    initial_scale: float = 1.0
    use_solver: bool = False
    max_iterations: int = 200


class OracleConfig(_Strict):
    eta0: float = 1.0
    l_max: int = 3
    n_max: int = 1


class RunConfig(_Strict):
    mode: Literal["spectrum", "resonance", "asym", "sweep", "invert", "oracle"] = "sweep"
    domain: DomainConfig = Field(default_factory=DomainConfig)
    h_values: List[float] = Field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    eigen_index: int = Field(0, ge=0)
    resolution: Optional[int] = None
    count: int = Field(3, ge=1)
    max_iterations: int = Field(100, ge=1)
    workers: int = Field(1, ge=1)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    outputs: Outputs = Field(default_factory=Outputs)
    inversion: Optional[InversionConfig] = None
    oracle: OracleConfig = Field(default_factory=OracleConfig)

    @field_validator("h_values")
    @classmethod
    def _decreasing(cls, v):
        if any(not h > 0 for h in v):
            raise ValueError("h_values must be positive")
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("h_values must be strictly decreasing")
        return v

    @model_validator(mode="after")
    def _mode_requirements(self):
        if self.mode == "invert" and self.inversion is None:
            raise ValueError("invert mode needs an 'inversion' section")
        return self

    @property
    def effective_resolution(self) -> int:
        return self.resolution if self.resolution is not None else self.domain.resolution

    def domain_spec(self, base_dir: Path | None = None) -> DomainSpec:
        d = self.domain
        mask = None
        if d.mask_file is not None:
            path = Path(d.mask_file)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            try:
                mask = read_voxel_mask(path)
            except OSError as exc:
                raise ConfigError(f"cannot read mask file {path}: {exc}") from exc
        spec = DomainSpec(d.shape_kind, tuple(d.shape_params),
                          tuple(LayerSpec(l.outer_scale, l.eta0) for l in d.layers),
                          self.effective_resolution, mask)
        try:
            spec.validate()
        except InvalidSpec as exc:
            raise ConfigError(f"domain.{exc}") from exc
        return spec


def parse_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return parse_config(data)
