"""Experiment configuration: a single YAML document, validated by pydantic models.

Every experiment is described by one :class:`ExperimentConfig`.  Command-line
flags override individual top-level keys; the round trip
``load_config(dumps_config(cfg)) == cfg`` holds, so sweep inputs stay diffable.
"""

from __future__ import annotations

from pathlib import Path
from typing import Annotated, Literal, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import medium as med
from .basis import DEFAULT_LAYER_OFFSET
from .errors import ConfigError, InvalidArgumentError, MediumFormatError
from .fem import Indicator, SourceTerm

__all__ = [
    "RectShape", "PolylineShape", "LeveledShape", "ChannelMedium",
    "ThreeContinuumMedium", "FileMedium", "ConstantSource", "IndicatorSource",
    "ExperimentConfig", "PRESETS", "load_config", "loads_config", "save_config",
    "dumps_config", "apply_overrides", "realize_medium", "resolve_bins",
    "realize_source",
]


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# Frozen geometry of the built-in high-contrast channel network: horizontal and
# vertical strips plus one bent tube, all kept off the domain boundary.
PRESETS: dict[str, tuple[med.Shape, ...]] = {
    "crossing-channels": (
        med.Rect(0.05, 0.20, 0.95, 0.23),
        med.Rect(0.08, 0.62, 0.93, 0.65),
        med.Rect(0.30, 0.08, 0.33, 0.92),
        med.Rect(0.72, 0.06, 0.75, 0.88),
        med.Rect(0.45, 0.40, 0.55, 0.43),
        med.Rect(0.06, 0.85, 0.40, 0.88),
        med.Rect(0.60, 0.30, 0.63, 0.60),
        med.Polyline(((0.08, 0.78), (0.55, 0.35), (0.92, 0.50)), 0.03),
    ),
}


class RectShape(_Model):
    kind: Literal["rect"] = "rect"
    x0: float
    y0: float
    x1: float
    y1: float


class PolylineShape(_Model):
    kind: Literal["polyline"] = "polyline"
    points: tuple[tuple[float, float], ...] = Field(min_length=2)
    width: float = Field(gt=0.0)


ShapeSpec = Annotated[Union[RectShape, PolylineShape], Field(discriminator="kind")]


class LeveledShape(_Model):
    """A shape tagged with the conductivity level it carves out."""

    shape: ShapeSpec
    level: Literal["mid", "high"]


class ChannelMedium(_Model):
    """Binary medium: ``channel`` inside the shapes, ``background`` elsewhere."""

    kind: Literal["channels"] = "channels"
    background: float = Field(default=1.0, gt=0.0)
    channel: float = Field(default=1e4, gt=0.0)
    shapes: tuple[ShapeSpec, ...] = ()
    preset: str | None = None

    @model_validator(mode="after")
    def _pick_geometry(self) -> "ChannelMedium":
        if self.shapes and self.preset:
            raise ValueError("give either explicit shapes or a preset, not both")
        if not self.shapes and self.preset is None:
            object.__setattr__(self, "preset", "crossing-channels")
        if self.preset is not None and self.preset not in PRESETS:
            raise ValueError(
                f"unknown preset {self.preset!r}; available: {sorted(PRESETS)}")
        return self


class ThreeContinuumMedium(_Model):
    """Random background plus shapes at two higher conductivity levels.

    With a preset, its shapes alternate high, mid, high, ... in listed order.
    """

    kind: Literal["three-continuum"] = "three-continuum"
    background_range: tuple[float, float] = (1.0, 10.0)
    mid: float = Field(default=1e3, gt=0.0)
    high: float = Field(default=1e4, gt=0.0)
    shapes: tuple[LeveledShape, ...] = ()
    preset: str | None = None

    @model_validator(mode="after")
    def _pick_geometry(self) -> "ThreeContinuumMedium":
        lo, hi = self.background_range
        if not 0 < lo < hi:
            raise ValueError(f"background_range must satisfy 0 < lo < hi, got {lo}, {hi}")
        if hi >= min(self.mid, self.high):
            raise ValueError("background_range must stay below the mid/high levels")
        if self.mid >= self.high:
            raise ValueError(f"mid level must be below high, got {self.mid} >= {self.high}")
        if self.shapes and self.preset:
            raise ValueError("give either explicit shapes or a preset, not both")
        if not self.shapes and self.preset is None:
            object.__setattr__(self, "preset", "crossing-channels")
        if self.preset is not None and self.preset not in PRESETS:
            raise ValueError(
                f"unknown preset {self.preset!r}; available: {sorted(PRESETS)}")
        return self


class FileMedium(_Model):
    kind: Literal["file"] = "file"
    path: str


MediumSpec = Annotated[
    Union[ChannelMedium, ThreeContinuumMedium, FileMedium], Field(discriminator="kind")]


class ConstantSource(_Model):
    kind: Literal["constant"] = "constant"
    value: float = 1.0


class IndicatorSource(_Model):
    """f = value on [x0,x1]×[y0,y1], zero elsewhere."""

    kind: Literal["indicator"] = "indicator"
    x0: float = 0.0
    y0: float = 0.0
    x1: float = 0.1
    y1: float = 0.1
    value: float = 1.0

    @model_validator(mode="after")
    def _check_box(self) -> "IndicatorSource":
        if not (0.0 <= self.x0 <= self.x1 <= 1.0 and 0.0 <= self.y0 <= self.y1 <= 1.0):
            raise ValueError("indicator box must be ordered and inside the unit square")
        return self


SourceSpec = Annotated[Union[ConstantSource, IndicatorSource], Field(discriminator="kind")]


class ExperimentConfig(_Model):
    """Everything one solve needs: grids, medium, continua bins, source, solver knobs."""

    n_side: int = Field(gt=0, description="fine cells per side")
    N_side: int = Field(gt=0, description="coarse blocks per side")
    layers: int | Literal["auto"] = "auto"
    layer_offset: int = DEFAULT_LAYER_OFFSET
    medium: MediumSpec = ChannelMedium()
    bins: tuple[tuple[float, float], ...] | None = None
    split_components: bool = False
    source: SourceSpec = ConstantSource()
    seed: int = 0
    tol: float = Field(default=1e-10, gt=0.0)
    threads: int = Field(default=1, ge=1)
    out_dir: str = "nlmc-out"

    @model_validator(mode="after")
    def _check_grids(self) -> "ExperimentConfig":
        if self.n_side % self.N_side != 0:
            raise ValueError(
                f"n_side must be divisible by N_side, got {self.n_side} / {self.N_side}")
        if isinstance(self.layers, int) and self.layers < 0:
            raise ValueError(f"layers must be non-negative or 'auto', got {self.layers}")
        return self


def _to_shape(desc: RectShape | PolylineShape) -> med.Shape:
    if isinstance(desc, RectShape):
        return med.Rect(desc.x0, desc.y0, desc.x1, desc.y1)
    return med.Polyline(tuple(tuple(p) for p in desc.points), desc.width)


def _geometry(desc: ChannelMedium | ThreeContinuumMedium) -> tuple[med.Shape, ...]:
    if desc.preset is not None:
        return PRESETS[desc.preset]
    if isinstance(desc, ChannelMedium):
        return tuple(_to_shape(s) for s in desc.shapes)
    return tuple(_to_shape(s.shape) for s in desc.shapes)


def _levels(desc: ThreeContinuumMedium, count: int) -> tuple[str, ...]:
    if desc.preset is not None:
        return tuple("high" if k % 2 == 0 else "mid" for k in range(count))
    return tuple(s.level for s in desc.shapes)


def realize_medium(config: ExperimentConfig) -> med.CoefficientField:
    """Build the coefficient field the config describes."""
    desc = config.medium
    if isinstance(desc, FileMedium):
        try:
            return med.load_medium(desc.path, config.n_side)
        except FileNotFoundError as exc:
            raise MediumFormatError(f"medium file not found: {desc.path}") from exc
    if isinstance(desc, ChannelMedium):
        return med.generate_channel_medium(
            config.n_side, desc.background, desc.channel, _geometry(desc),
            seed=config.seed)
    shapes = _geometry(desc)
    return med.generate_three_continuum_medium(
        config.n_side,
        tuple(zip(shapes, _levels(desc, len(shapes)))),
        background_range=desc.background_range,
        mid=desc.mid,
        high=desc.high,
        seed=config.seed)


def resolve_bins(config: ExperimentConfig, field: med.CoefficientField) -> med.ContrastBins:
    """The continuum bins: explicit when configured, else derived from the generator."""
    if config.bins is not None:
        bins = med.contrast_bins(config.bins)
    else:
        desc = config.medium
        if isinstance(desc, ChannelMedium):
            bins = med.exact_bins(desc.background, desc.channel)
        elif isinstance(desc, ThreeContinuumMedium):
            bins = med.contrast_bins([
                desc.background_range, (desc.mid, desc.mid), (desc.high, desc.high)])
        else:
            raise ConfigError(
                "bins must be given explicitly when the medium comes from a file")
    bins.classify(field.cell_values().ravel())  # fail early on coverage gaps
    return bins


def realize_source(config: ExperimentConfig) -> SourceTerm:
    """Convert the source desc into the form the assembler accepts."""
    desc = config.source
    if isinstance(desc, ConstantSource):
        return desc.value
    return Indicator(desc.x0, desc.y0, desc.x1, desc.y1, desc.value)


def loads_config(text: str) -> ExperimentConfig:
    """Parse a YAML config document."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config must be a mapping of keys, got {type(raw).__name__}")
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a YAML config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return loads_config(text)


def dumps_config(config: ExperimentConfig) -> str:
    """Serialize a config to YAML; ``loads_config`` inverts this exactly."""
    return yaml.safe_dump(
        config.model_dump(mode="json"), sort_keys=False, default_flow_style=False)


def save_config(path: str | Path, config: ExperimentConfig) -> None:
    Path(path).write_text(dumps_config(config))


def apply_overrides(config: ExperimentConfig, **overrides: object) -> ExperimentConfig:
    """Rebuild the config with the given top-level keys replaced (re-validated)."""
    overrides = {k: v for k, v in overrides.items() if v is not None}
    unknown = set(overrides) - set(ExperimentConfig.model_fields)
    if unknown:
        raise InvalidArgumentError(f"unknown config keys: {sorted(unknown)}")
    try:
        return ExperimentConfig.model_validate(
            {**config.model_dump(), **overrides})
    except ValidationError as exc:
        raise ConfigError(f"invalid config override: {exc}") from exc
