"""
Audio Schemas
Dataset manifests, synthetic corpus recipes and augmentation settings
"""
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ManifestEntry(BaseModel):
    """One clip of a dataset: a WAV path or a synthetic recipe string"""

    model_config = ConfigDict(frozen=True)

    source: str = Field(..., min_length=1)
    label: int = Field(..., ge=0)
    fold: int = Field(..., ge=1)


class DatasetManifest(BaseModel):
    """Ordered clips with labels and fold ids"""

    entries: List[ManifestEntry]
    class_names: List[str] = Field(..., min_length=1)

    @model_validator(mode="after")
    def check_labels_and_folds(self):
        n_classes = len(self.class_names)
        for entry in self.entries:
            if entry.label >= n_classes:
                raise ValueError(f"label {entry.label} out of range for {n_classes} classes")
        folds = sorted({entry.fold for entry in self.entries})
        if folds and folds != list(range(1, len(folds) + 1)):
            raise ValueError(f"fold ids must form a contiguous 1..k range, got {folds}")
        return self

    @property
    def n_folds(self) -> int:
        return max((entry.fold for entry in self.entries), default=0)


class SynthRecipe(BaseModel):
    """Desk-scale synthetic corpus"""

    model_config = ConfigDict(
        extra="forbid",
        frozen=True,
        json_schema_extra={
            "example": {"n_classes": 4, "clips_per_class": 50, "duration_s": 1.0, "sample_rate": 8000, "seed": 7}
        },
    )

    n_classes: int = Field(4, ge=2)
    clips_per_class: int = Field(50, ge=1)
    duration_s: float = Field(1.0, gt=0)
    sample_rate: int = Field(8000, gt=0)
    folds: int = Field(5, ge=1)
    seed: Optional[int] = Field(None, description="Defaults to the experiment's data sub-seed")


class ManifestSource(BaseModel):
    """CSV manifest (file,label,fold) plus the folder the paths are relative to"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    path: str
    audio_root: Optional[str] = None


PITCH_FACTORS = (0.75, 0.9, 1.15, 1.5)
STRETCH_RATES = (0.81, 0.93, 1.07, 1.23)


class AugmentationConfig(BaseModel):
    """Waveform level augmentation applied to training clips"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    enabled: bool = False
    policy: Literal["pitch", "time_stretch"] = "pitch"
    pitch_factors: List[float] = Field(default_factory=lambda: list(PITCH_FACTORS))
    stretch_rates: List[float] = Field(default_factory=lambda: list(STRETCH_RATES))

    @model_validator(mode="after")
    def check_ranges(self):
        for value in [*self.pitch_factors, *self.stretch_rates]:
            if not 0.25 <= value <= 4.0:
                raise ValueError(f"augmentation factor {value} outside [0.25, 4]")
        return self
