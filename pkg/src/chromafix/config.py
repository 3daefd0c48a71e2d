"""Pipeline tunables: defaults, validation, strict JSON loading."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from .errors import ConfigError
from .image import ChannelId


@dataclass(frozen=True)
class PipelineConfig:
    reference: ChannelId = ChannelId.GREEN
    window_radius: int = 7
    search_radius: int = 8
    joint_search: bool = True
    keypoint_count: int = 24
    cell_grid: int = 4
    grad_percentile: float = 60.0
    sat_threshold: float = 0.99
    sat_dilation: int | None = None  # None means "same as window_radius"
    l_max: float = 0.01
    use_l_weighting: bool = False
    seed: int = 0
    border_crop: int = 16

    def resolved_sat_dilation(self) -> int:
        return self.window_radius if self.sat_dilation is None else self.sat_dilation

    def margin(self) -> int:
        return self.window_radius + self.search_radius

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["reference"] = self.reference.label
        return out


_FIELDS = {f.name for f in dataclasses.fields(PipelineConfig)}


def validate(cfg: PipelineConfig) -> None:
    """Raise ConfigError naming every violated field."""
    problems = []
    if cfg.window_radius < 1:
        problems.append("window_radius must be >= 1")
    if cfg.search_radius < 1:
        problems.append("search_radius must be >= 1")
    if cfg.sat_dilation is not None and cfg.sat_dilation < 0:
        problems.append("sat_dilation must be >= 0")
    if cfg.border_crop < 0:
        problems.append("border_crop must be >= 0")
    if cfg.keypoint_count < 2:
        problems.append("keypoint_count must be >= 2 (two keypoints pin the 3 DoF)")
    if cfg.cell_grid < 1:
        problems.append("cell_grid must be >= 1")
    if not 0.0 <= cfg.grad_percentile <= 100.0:
        problems.append("grad_percentile must be in [0, 100]")
    if not 0.0 < cfg.sat_threshold <= 1.0:
        problems.append("sat_threshold must be in (0, 1]")
    if not 0.0 < cfg.l_max <= 1.0:
        problems.append("l_max must be in (0, 1]")
    if not isinstance(cfg.reference, ChannelId):
        problems.append("reference must be red, green, or blue")
    if problems:
        raise ConfigError("; ".join(problems))


def _coerce(values: dict) -> dict:
    values = dict(values)
    if "reference" in values and isinstance(values["reference"], str):
        try:
            values["reference"] = ChannelId.parse(values["reference"])
        except ValueError as exc:
            raise ConfigError(str(exc))
    return values


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Defaults, overridden by a JSON file, overridden by explicit values.

    Unknown fields are rejected so typos in tuning files fail loudly.
    """
    values: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                file_values = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}")
        if not isinstance(file_values, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        values.update(file_values)
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    unknown = sorted(set(values) - _FIELDS)
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
    cfg = PipelineConfig(**_coerce(values))
    validate(cfg)
    return cfg


def save_config(cfg: PipelineConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
