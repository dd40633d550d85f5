"""
Spectrogram and model-input records
"""
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

# Power representations are non-negative; MFCCs are cepstral and may be negative
POWER_KINDS = ("stft", "mel", "dwt")

LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class Spectrogram:
    """2D array (frequency or scale x time) with axis metadata"""

    values: np.ndarray
    kind: str
    bins: np.ndarray = field(default_factory=lambda: np.zeros(0))
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    scale: Literal["linear", "log"] = "linear"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("Spectrogram values must be 2D")
        if not np.all(np.isfinite(values)):
            raise ValueError("Spectrogram values must be finite")
        if self.kind in POWER_KINDS and values.size and values.min() < 0:
            raise ValueError(f"{self.kind} spectrogram values must be non-negative")
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple:
        return self.values.shape


@dataclass(frozen=True)
class ModelInput:
    """Rendered H x W single-channel array within [0, M]"""

    pixels: np.ndarray
    intensity_max: float = 255.0

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float64)
        if pixels.ndim != 2:
            raise ValueError("ModelInput pixels must be 2D")
        if pixels.size and (pixels.min() < 0 or pixels.max() > self.intensity_max):
            raise ValueError("ModelInput pixels must lie within [0, M]")
        object.__setattr__(self, "pixels", pixels)

    @property
    def shape(self) -> tuple:
        return self.pixels.shape
