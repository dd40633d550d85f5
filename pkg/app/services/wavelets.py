"""
Wavelet scalogram front end

Each frame of the signal is correlated with the scaled mother function at
logarithmically spaced scales; a cell holds the mean squared coefficient
magnitude of one (scale, frame) pair.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal

from app.core.errors import ConfigError, SignalShapeError
from app.models.audio import AudioClip
from app.models.spectrogram import Spectrogram
from app.schemas.spectra import DwtConfig
from app.services.audio_io import resample

MOTHERS = ("haar", "mexican_hat", "complex_morlet")

# Kernel half-width in units of the scale; beyond it the mother is zero or negligible
_SUPPORT_RADIUS = {"haar": 1.0, "mexican_hat": 5.0, "complex_morlet": 4.0}

_MEXICAN_HAT_NORM = 2.0 / (np.sqrt(3.0) * np.pi**0.25)


def center_frequency(mother: str, omega0: float = 6.0) -> float:
    """Dominant frequency of the unit-scale mother (cycles per unit time)"""
    if mother == "haar":
        return 0.996
    if mother == "mexican_hat":
        return 0.25
    if mother == "complex_morlet":
        return omega0 / (2.0 * np.pi)
    raise ConfigError(f"unknown mother function '{mother}'")


def mother_sample(mother: str, t, scale: float, omega0: float = 6.0):
    """
    Mother function at u = t / scale

    haar:           +1 on [0, 1/2), -1 on [1/2, 1), 0 elsewhere
    mexican_hat:    2 / (sqrt(3) pi^(1/4)) (1 - u^2) exp(-u^2 / 2)
    complex_morlet: exp(i omega0 u) exp(-u^2 / 2) / sqrt(2 pi)

    Scalars in, scalar out; arrays are evaluated elementwise.
    """
    if scale <= 0:
        raise ConfigError(f"scale must be positive, got {scale}")
    u = np.asarray(t, dtype=np.float64) / scale

    if mother == "haar":
        value = np.where((u >= 0) & (u < 0.5), 1.0, np.where((u >= 0.5) & (u < 1.0), -1.0, 0.0))
        value = value.astype(np.complex128)
    elif mother == "mexican_hat":
        value = (_MEXICAN_HAT_NORM * (1.0 - u**2) * np.exp(-(u**2) / 2.0)).astype(np.complex128)
    elif mother == "complex_morlet":
        value = np.exp(1j * omega0 * u) * np.exp(-(u**2) / 2.0) / np.sqrt(2.0 * np.pi)
    else:
        raise ConfigError(f"unknown mother function '{mother}'")

    return complex(value) if value.ndim == 0 else value


def frame_layout(cfg: DwtConfig) -> tuple:
    """(frame length, hop) in samples at the configured rate"""
    frame_len = max(1, int(round(cfg.frame_length_ms * cfg.sample_rate / 1000.0)))
    hop = max(1, int(round(frame_len * (1.0 - cfg.overlap))))
    return frame_len, hop


def scale_grid(cfg: DwtConfig) -> np.ndarray:
    """Log-spaced scales (seconds) from 2 sample periods to half a frame"""
    dt = 1.0 / cfg.sample_rate
    frame_len, _ = frame_layout(cfg)
    upper = max(frame_len * dt / 2.0, 2.0 * dt * 1.0001)
    return np.geomspace(2.0 * dt, upper, cfg.scales)


def _scale_kernel(cfg: DwtConfig, scale: float, frame_len: int) -> np.ndarray:
    dt = 1.0 / cfg.sample_rate
    half_width = min(int(np.ceil(_SUPPORT_RADIUS[cfg.mother] * scale / dt)), frame_len)
    offsets = np.arange(-half_width, half_width + 1) * dt
    wavelet = mother_sample(cfg.mother, offsets, scale, cfg.omega0)
    # correlation as convolution with the reversed conjugate
    return np.conj(wavelet[::-1]) * dt / np.sqrt(scale)


def dwt_scalogram(clip: AudioClip, cfg: DwtConfig) -> Spectrogram:
    """Scalogram of shape scales x frames; frames are not centred"""
    clip = resample(clip, cfg.sample_rate)
    frame_len, hop = frame_layout(cfg)
    if len(clip) < frame_len:
        raise SignalShapeError(
            f"clip of {len(clip)} samples is shorter than one {cfg.frame_length_ms} ms frame ({frame_len} samples)"
        )

    frames = sliding_window_view(clip.samples, frame_len)[::hop]
    scales = scale_grid(cfg)
    rows = []
    for scale in scales:
        kernel = _scale_kernel(cfg, scale, frame_len)
        half_width = (kernel.size - 1) // 2
        padded = np.pad(frames, [(0, 0), (half_width, half_width)], mode="reflect")
        coeffs = signal.fftconvolve(padded, kernel[None, :], mode="valid", axes=1)
        rows.append(np.mean(np.abs(coeffs) ** 2, axis=1))

    values = np.asarray(rows)
    return Spectrogram(
        values=values,
        kind="dwt",
        bins=center_frequency(cfg.mother, cfg.omega0) / scales,
        times=np.arange(frames.shape[0]) * hop / cfg.sample_rate,
    )
