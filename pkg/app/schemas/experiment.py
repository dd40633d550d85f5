"""
Experiment Schema
The single TOML file that drives prepare -> train -> attack -> report
"""
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.core.errors import ConfigError, DataError
from app.schemas.attacks import AttackName, AttackSuiteConfig
from app.schemas.audio import AugmentationConfig, ManifestSource, SynthRecipe
from app.schemas.spectra import RenderConfig, Representation
from app.schemas.training import ArchConfig, TrainConfig

CONFIG_SCHEMA_VERSION = 1


class DatasetSource(BaseModel):
    """Exactly one of a synthetic recipe or a CSV manifest"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    synthetic: Optional[SynthRecipe] = None
    manifest: Optional[ManifestSource] = None

    @model_validator(mode="after")
    def check_exactly_one(self):
        if (self.synthetic is None) == (self.manifest is None):
            raise ValueError("dataset needs exactly one of [dataset.synthetic] or [dataset.manifest]")
        return self


class TransferConfig(BaseModel):
    """Cross-model transferability run"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    attack: AttackName = "fgsm"
    budget_index: int = Field(-1, description="Budget grid point used for crafting; -1 is the largest")


class SweepConfig(BaseModel):
    """One-axis grid over a representation parameter"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    parameter: str
    values: List[Union[int, float, str, bool]] = Field(..., min_length=1)


class ExperimentConfig(BaseModel):
    """Everything one experiment needs; unknown keys are errors"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    schema_version: Literal[1] = CONFIG_SCHEMA_VERSION
    seed: int = 0
    output_dir: str = "runs/default"
    dataset: DatasetSource
    augmentation: AugmentationConfig = Field(default_factory=AugmentationConfig)
    representation: Representation
    render: RenderConfig = Field(default_factory=RenderConfig)
    model: ArchConfig = Field(default_factory=ArchConfig)
    training: TrainConfig = Field(default_factory=TrainConfig)
    attacks: AttackSuiteConfig = Field(default_factory=AttackSuiteConfig)
    transfer: TransferConfig = Field(default_factory=TransferConfig)
    sweep: Optional[SweepConfig] = None

    def with_overrides(self, **changes) -> "ExperimentConfig":
        """Copy with top-level fields replaced (CLI flags), re-validated"""
        data = self.model_dump()
        data.update({key: value for key, value in changes.items() if value is not None})
        return ExperimentConfig.model_validate(data)


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a TOML experiment file"""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")

    try:
        with path.open("rb") as handle:
            raw = tomllib.load(handle)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e

    version = raw.get("schema_version", CONFIG_SCHEMA_VERSION)
    if version != CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported schema_version {version} (expected {CONFIG_SCHEMA_VERSION})")

    try:
        config = ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"{path}: invalid configuration\n{e}") from e

    manifest = config.dataset.manifest
    if manifest is not None:
        manifest_path = _resolve(path.parent, manifest.path)
        if not manifest_path.is_file():
            raise DataError(f"manifest not found: {manifest_path}")
        audio_root = _resolve(path.parent, manifest.audio_root) if manifest.audio_root else manifest_path.parent
        if not audio_root.is_dir():
            raise DataError(f"audio root not found: {audio_root}")
        resolved = ManifestSource(path=str(manifest_path), audio_root=str(audio_root))
        config = config.model_copy(update={"dataset": config.dataset.model_copy(update={"manifest": resolved})})

    return config


def _resolve(base: Path, value: str) -> Path:
    candidate = Path(value)
    return candidate if candidate.is_absolute() else base / candidate
