"""Audit configuration: defaults, TOML loading and validation."""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .density import ProbabilityStep, StepError
from .madd import DEFAULT_GAP_THRESHOLD, DEFAULT_PEAK_THRESHOLD
from .models import ModelKind

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


@dataclass
class AuditConfig:
    data_dir: str | None = None
    csv: str | None = None
    target_col: str | None = None
    sensitive: list[str] = field(default_factory=lambda: ["gender", "poverty", "disability"])
    courses: list[str] = field(default_factory=list)
    e: float = 0.01
    threshold: float = 0.5
    split: float = 0.7
    seed: int = 42
    models: list[str] = field(default_factory=lambda: ["LR", "KN", "DT", "NB"])
    hyperparams: dict[str, dict] = field(default_factory=dict)
    display_step: float = 0.1
    out: str = "out"
    gap_threshold: float = DEFAULT_GAP_THRESHOLD
    peak_threshold: float = DEFAULT_PEAK_THRESHOLD
    e_sensitivity: float = 0.1
    kde_grid: int = 512
    mi_bins: int = 10
    normalization: str = "course"
    poverty_boundary_group: int = 0
    require_vle: bool = True

    def validate(self) -> "AuditConfig":
        for name in ("e", "display_step", "e_sensitivity"):
            try:
                ProbabilityStep(getattr(self, name))
            except StepError as exc:
                raise ConfigError(f"{name}: {exc}") from None
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError(f"threshold t must lie in (0, 1), got {self.threshold}")
        if not 0.0 < self.split < 1.0:
            raise ConfigError(f"split ratio must lie in (0, 1), got {self.split}")
        if bool(self.data_dir) == bool(self.csv):
            raise ConfigError("give exactly one data source: data_dir or csv")
        if self.csv and not self.target_col:
            raise ConfigError("a generic CSV needs target_col")
        if not self.sensitive:
            raise ConfigError("at least one sensitive feature is required")
        try:
            self.models = [ModelKind(m.strip().upper()).value for m in self.models]
        except ValueError as exc:
            raise ConfigError(f"unknown model: {exc}") from None
        if not self.models:
            raise ConfigError("at least one model is required")
        if self.normalization not in ("course", "train"):
            raise ConfigError("normalization must be 'course' or 'train'")
        if self.poverty_boundary_group not in (0, 1):
            raise ConfigError("poverty_boundary_group must be 0 or 1")
        if self.kde_grid < 2:
            raise ConfigError("kde_grid must be at least 2")
        return self

    @property
    def m(self) -> int:
        return ProbabilityStep(self.e).m

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path: str | Path | None = None, **overrides) -> AuditConfig:
    """Defaults, then the TOML file (if any), then non-None ``overrides``."""
    values: dict = {}
    if path is not None:
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                values = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    known = {f.name for f in fields(AuditConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    values.update({k: v for k, v in overrides.items() if v is not None})
    return AuditConfig(**values).validate()
