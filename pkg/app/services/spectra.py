"""
Fourier front ends: power STFT, Mel spectrogram, MFCC and cepstral liftering
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft, signal

from app.core.errors import ConfigError, SignalShapeError
from app.models.audio import AudioClip
from app.models.spectrogram import LOG_FLOOR, POWER_KINDS, Spectrogram
from app.schemas.spectra import DwtConfig, MelConfig, MfccConfig, Representation, StftConfig
from app.services.audio_io import resample


def hz_to_mel(freq):
    """HTK Mel scale"""
    return 2595.0 * np.log10(1.0 + np.asarray(freq, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def _analysis_window(cfg: StftConfig) -> np.ndarray:
    """Window of win_length samples centred inside n_fft"""
    length = cfg.win_length
    if cfg.window == "hann":
        window = signal.get_window("hann", length, fftbins=True)
    else:
        window = np.ones(length)
    left = (cfg.n_fft - length) // 2
    return np.pad(window, (left, cfg.n_fft - length - left))


def _at_rate(clip: AudioClip, sample_rate: int | None) -> AudioClip:
    return clip if sample_rate is None else resample(clip, sample_rate)


def stft_spectrogram(clip: AudioClip, cfg: StftConfig) -> Spectrogram:
    """
    Power spectrogram |STFT|^2 with n_fft/2 + 1 rows

    Frames are centred (reflect padding of n_fft/2 on both sides), so the
    frame count is 1 + len(clip) // hop.
    """
    clip = _at_rate(clip, cfg.sample_rate)
    if len(clip) < cfg.win_length:
        raise SignalShapeError(f"clip of {len(clip)} samples is shorter than window_length {cfg.win_length}")

    half = cfg.n_fft // 2
    padded = np.pad(clip.samples, half, mode="reflect")
    frames = sliding_window_view(padded, cfg.n_fft)[:: cfg.hop]
    spectrum = np.fft.rfft(frames * _analysis_window(cfg), n=cfg.n_fft, axis=1)
    power = (spectrum.real**2 + spectrum.imag**2).T

    return Spectrogram(
        values=power,
        kind="stft",
        bins=np.fft.rfftfreq(cfg.n_fft, d=1.0 / clip.sample_rate),
        times=np.arange(power.shape[1]) * cfg.hop / clip.sample_rate,
    )


def mel_centers(n_mels: int, sample_rate: int, fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """Filter centre frequencies (Hz), evenly spaced on the Mel scale"""
    fmax = sample_rate / 2.0 if fmax is None else fmax
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    return edges[1:-1]


def mel_filterbank(
    n_mels: int, n_fft: int, sample_rate: int, fmin: float = 0.0, fmax: float | None = None
) -> np.ndarray:
    """
    Triangular Mel filters, shape n_mels x (n_fft/2 + 1)

    Each row is a triangle between its neighbours' centres, scaled to a
    peak of 1. Filters narrower than one FFT bin stay all-zero.
    """
    if n_mels < 1:
        raise ConfigError("n_mels must be at least 1")
    fmax = sample_rate / 2.0 if fmax is None else fmax
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    freqs = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)

    lower = edges[:-2, None]
    center = edges[1:-1, None]
    upper = edges[2:, None]
    rising = (freqs[None, :] - lower) / (center - lower)
    falling = (upper - freqs[None, :]) / (upper - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))

    peaks = weights.max(axis=1, keepdims=True)
    return np.divide(weights, peaks, out=np.zeros_like(weights), where=peaks > 0)


def mel_spectrogram(clip: AudioClip, cfg: MelConfig) -> Spectrogram:
    """Mel filterbank applied to the power STFT"""
    clip = _at_rate(clip, cfg.sample_rate)
    power = stft_spectrogram(clip, cfg.stft())
    basis = mel_filterbank(cfg.n_mels, cfg.n_fft, clip.sample_rate, cfg.fmin, cfg.fmax)
    return Spectrogram(
        values=basis @ power.values,
        kind="mel",
        bins=mel_centers(cfg.n_mels, clip.sample_rate, cfg.fmin, cfg.fmax),
        times=power.times,
    )


def lifter(coeffs: np.ndarray, cepstral_filter: float) -> np.ndarray:
    """
    Sinusoidal cepstral liftering

    Row n is scaled by (1 + sin(pi * (n + 1) / CF)) * CF / 2; CF = 0 is the identity.
    """
    if cepstral_filter < 0:
        raise ConfigError(f"cepstral filter must be non-negative, got {cepstral_filter}")
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if cepstral_filter == 0:
        return coeffs
    rows = np.arange(coeffs.shape[0])
    factors = (1.0 + np.sin(np.pi * (rows + 1) / cepstral_filter)) * cepstral_filter / 2.0
    return coeffs * factors[:, None]


def mfcc(clip: AudioClip, cfg: MfccConfig) -> Spectrogram:
    """
    Mel spectrogram -> log (floored) -> DCT-II along frequency -> first n_mfcc rows -> lifter

    With dct_orthonormal off the unnormalized DCT-II is used; it exceeds the
    orthonormal one by sqrt(4N) for row 0 and sqrt(2N) for every other row.
    """
    mel = mel_spectrogram(clip, cfg.mel())
    log_mel = np.log(np.maximum(mel.values, LOG_FLOOR))
    coeffs = fft.dct(log_mel, type=2, axis=0, norm="ortho" if cfg.dct_orthonormal else None)
    coeffs = lifter(coeffs[: cfg.n_mfcc], cfg.cepstral_filter)
    return Spectrogram(
        values=coeffs,
        kind="mfcc",
        bins=np.arange(cfg.n_mfcc, dtype=np.float64),
        times=mel.times,
        scale="log",
    )


def log_scale(spec: Spectrogram) -> Spectrogram:
    """log(1 + v / 1e-10) for power spectrograms"""
    if spec.scale == "log" or spec.kind not in POWER_KINDS:
        return spec
    return Spectrogram(
        values=np.log1p(spec.values / LOG_FLOOR),
        kind=spec.kind,
        bins=spec.bins,
        times=spec.times,
        scale="log",
    )


def extract(clip: AudioClip, representation: Representation) -> Spectrogram:
    """Dispatch on the representation kind"""
    if isinstance(representation, StftConfig):
        return stft_spectrogram(clip, representation)
    if isinstance(representation, MelConfig):
        return mel_spectrogram(clip, representation)
    if isinstance(representation, MfccConfig):
        return mfcc(clip, representation)
    if isinstance(representation, DwtConfig):
        from app.services.wavelets import dwt_scalogram

        return dwt_scalogram(clip, representation)
    raise ConfigError(f"unknown representation {representation!r}")
