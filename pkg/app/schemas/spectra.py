"""
Representation Schemas
Settings for the STFT, Mel, MFCC and wavelet-scalogram front ends
"""
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator


class _FrameConfig(BaseModel):
    """Shared framing settings of the Fourier based representations"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    n_fft: int = Field(2048, gt=0, description="Samples per FFT")
    window_length: Optional[int] = Field(None, gt=0, description="Samples; defaults to n_fft")
    window_scale: Optional[float] = Field(
        None, gt=0, le=1, description="window_length = window_scale * n_fft when set"
    )
    hop: int = Field(512, gt=0, description="Samples between frames")
    window: Literal["hann", "rect"] = "hann"
    sample_rate: Optional[int] = Field(None, gt=0, description="Resample clips to this rate first")

    @property
    def win_length(self) -> int:
        if self.window_scale is not None:
            return max(1, int(round(self.window_scale * self.n_fft)))
        return self.window_length or self.n_fft

    @model_validator(mode="after")
    def check_frame_layout(self):
        if self.window_length is not None and self.window_scale is not None:
            raise ValueError("set window_length or window_scale, not both")
        if not 0 < self.win_length <= self.n_fft:
            raise ValueError("window_length must be in (0, n_fft]")
        if not 0 < self.hop <= self.win_length:
            raise ValueError("hop must be in (0, window_length]")
        return self


class StftConfig(_FrameConfig):
    """Power STFT spectrogram"""

    kind: Literal["stft"] = "stft"


class MelConfig(_FrameConfig):
    """Mel spectrogram: triangular Mel filterbank over the power STFT"""

    kind: Literal["mel"] = "mel"
    n_mels: int = Field(64, ge=1)
    fmin: float = Field(0.0, ge=0)
    fmax: Optional[float] = Field(None, gt=0)

    def stft(self) -> StftConfig:
        return StftConfig(**self.model_dump(include=set(_FrameConfig.model_fields)))


class MfccConfig(_FrameConfig):
    """MFCC: log Mel energies, DCT-II along frequency, optional liftering"""

    kind: Literal["mfcc"] = "mfcc"
    sample_rate: int = Field(22050, gt=0)
    n_mfcc: int = Field(20, ge=1)
    n_mels: int = Field(64, ge=1)
    hop: int = Field(1024, gt=0)
    dct_orthonormal: bool = True
    cepstral_filter: float = Field(0.0, ge=0, description="CF; 0 disables liftering")

    @model_validator(mode="after")
    def check_coefficients(self):
        if self.n_mfcc > self.n_mels:
            raise ValueError("n_mfcc must not exceed n_mels")
        return self

    def mel(self) -> MelConfig:
        fields = self.model_dump(include=set(_FrameConfig.model_fields))
        return MelConfig(n_mels=self.n_mels, **fields)


class DwtConfig(BaseModel):
    """Framed continuous-wavelet scalogram over logarithmic scales"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["dwt"] = "dwt"
    mother: Literal["haar", "mexican_hat", "complex_morlet"] = "complex_morlet"
    sample_rate: int = Field(8000, gt=0)
    frame_length_ms: float = Field(50.0, gt=0)
    overlap: float = Field(0.5, ge=0, lt=1)
    scales: int = Field(64, ge=2)
    omega0: float = Field(6.0, gt=0, description="Complex Morlet centre frequency")


Representation = Annotated[
    Union[StftConfig, MelConfig, MfccConfig, DwtConfig],
    Field(discriminator="kind"),
]


class RenderConfig(BaseModel):
    """How spectrograms become fixed-size model inputs"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    height: int = Field(128, ge=1)
    width: int = Field(128, ge=1)
    intensity_max: float = Field(255.0, gt=0)
    log_scale: bool = Field(True, description="log(1 + v/eps) before normalization (power kinds)")
