"""
Audio ingestion, synthetic corpora and waveform augmentation
"""
import logging
import warnings
from fractions import Fraction
from math import gcd
from pathlib import Path
from typing import List, Literal, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError
from scipy import signal
from scipy.io import wavfile

from app.core.errors import (
    ConfigError,
    DataError,
    ManifestError,
    UnsupportedAudioError,
    WavFormatError,
)
from app.models.audio import AudioClip
from app.schemas.audio import AugmentationConfig, DatasetManifest, ManifestEntry, SynthRecipe

logger = logging.getLogger(__name__)

# Integer PCM full-scale divisors; 24-bit data arrives left-justified in int32
_PCM_FULL_SCALE = {
    np.dtype("int16"): 32768.0,
    np.dtype("int32"): 2147483648.0,
}

_UNSUPPORTED_MARKERS = ("Unknown wave file format", "Unsupported", "not supported")

STRETCH_RANGE = (0.25, 4.0)

ARCHETYPES = ("tone", "chirp", "am_noise", "harmonic")


# ============ WAV I/O ============

def load_wav(path: str | Path) -> AudioClip:
    """
    Read a RIFF WAV file into a mono clip

    PCM 8/16/24-bit and 32-bit IEEE float are accepted; stereo is
    downmixed by channel mean and integers are scaled to [-1, 1].
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"WAV file not found: {path}")

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except (ValueError, EOFError) as e:
        message = str(e)
        if any(marker in message for marker in _UNSUPPORTED_MARKERS):
            raise UnsupportedAudioError(f"{path}: {message}") from e
        raise WavFormatError(f"{path}: {message}") from e

    data = np.asarray(data)
    if data.ndim == 2:
        if data.shape[1] > 2:
            raise UnsupportedAudioError(f"{path}: {data.shape[1]} channels, only mono and stereo are read")
    elif data.ndim != 1:
        raise WavFormatError(f"{path}: unexpected sample layout {data.shape}")

    if data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in _PCM_FULL_SCALE:
        samples = data.astype(np.float64) / _PCM_FULL_SCALE[data.dtype]
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise UnsupportedAudioError(f"{path}: unsupported sample encoding {data.dtype}")

    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if samples.size == 0:
        raise WavFormatError(f"{path}: no samples")
    if rate <= 0:
        raise WavFormatError(f"{path}: invalid sample rate {rate}")

    return AudioClip(samples=samples, sample_rate=int(rate))


def write_wav(path: str | Path, clip: AudioClip, encoding: Literal["pcm16", "float32"] = "pcm16") -> Path:
    """Write a clip as 16-bit PCM or 32-bit float WAV"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if encoding == "pcm16":
        data = np.round(clip.samples * 32767.0).astype(np.int16)
    else:
        data = clip.samples.astype(np.float32)
    wavfile.write(path, clip.sample_rate, data)
    return path


def load_manifest(csv_path: str | Path, audio_root: str | Path | None = None) -> DatasetManifest:
    """
    Read a UTF-8 CSV manifest with columns file,label,fold

    Labels may be class names or integer indices; file paths are resolved
    against audio_root (default: the manifest's folder).
    """
    csv_path = Path(csv_path)
    if not csv_path.is_file():
        raise ManifestError(f"manifest not found: {csv_path}")
    root = Path(audio_root) if audio_root else csv_path.parent

    frame = pd.read_csv(csv_path, dtype=str, encoding="utf-8", keep_default_na=False)
    missing = {"file", "label", "fold"} - set(frame.columns)
    if missing:
        raise ManifestError(f"{csv_path}: missing columns {sorted(missing)}")
    if frame.empty:
        raise ManifestError(f"{csv_path}: no entries")

    labels = frame["label"].str.strip()
    if labels.str.fullmatch(r"\d+").all():
        indices = labels.astype(int)
        class_names = [str(i) for i in range(int(indices.max()) + 1)]
    else:
        class_names = sorted(labels.unique())
        lookup = {name: i for i, name in enumerate(class_names)}
        indices = labels.map(lookup)

    try:
        folds = frame["fold"].astype(int)
    except ValueError as e:
        raise ManifestError(f"{csv_path}: fold ids must be integers") from e

    entries = []
    for file_name, label, fold in zip(frame["file"], indices, folds):
        source = root / file_name
        if not source.is_file():
            raise ManifestError(f"{csv_path}: audio file not found: {source}")
        entries.append(ManifestEntry(source=str(source), label=int(label), fold=int(fold)))

    try:
        manifest = DatasetManifest(entries=entries, class_names=class_names)
    except ValidationError as e:
        raise ManifestError(f"{csv_path}: {e}") from e

    logger.info(f"✓ Manifest loaded: {len(entries)} clips, {len(class_names)} classes, {manifest.n_folds} folds")
    return manifest


# ============ Resampling and phase vocoder ============

def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Band-limited (Kaiser windowed-sinc polyphase) resampling"""
    if target_rate <= 0:
        raise ConfigError(f"target_rate must be positive, got {target_rate}")
    if target_rate == clip.sample_rate:
        return clip

    common = gcd(int(target_rate), clip.sample_rate)
    up, down = int(target_rate) // common, clip.sample_rate // common
    samples = signal.resample_poly(clip.samples, up, down)
    return AudioClip(samples=samples, sample_rate=int(target_rate))


def _check_stretch(value: float, name: str) -> None:
    low, high = STRETCH_RANGE
    if not low <= value <= high:
        raise ConfigError(f"{name} must lie in [{low}, {high}], got {value}")


def _fix_length(samples: np.ndarray, length: int) -> np.ndarray:
    if samples.size >= length:
        return samples[:length]
    return np.pad(samples, (0, length - samples.size))


def _vocoder_frame(n_samples: int) -> Tuple[int, int]:
    n_fft = 1024
    while n_fft > 16 and n_fft > n_samples:
        n_fft //= 2
    return n_fft, n_fft // 4


def _phase_vocoder(samples: np.ndarray, rate: float) -> np.ndarray:
    """Stretch duration by 1/rate keeping pitch (magnitude interpolation, phase accumulation)"""
    n_fft, hop = _vocoder_frame(samples.size)
    _, _, spec = signal.stft(samples, window="hann", nperseg=n_fft, noverlap=n_fft - hop)

    n_bins, n_frames = spec.shape
    steps = np.arange(0, n_frames, rate)
    expected_advance = np.linspace(0, np.pi * hop, n_bins)
    phase = np.angle(spec[:, 0])
    padded = np.pad(spec, [(0, 0), (0, 2)])

    stretched = np.zeros((n_bins, steps.size), dtype=complex)
    for t, step in enumerate(steps):
        left = padded[:, int(step)]
        right = padded[:, int(step) + 1]
        alpha = step % 1.0
        magnitude = (1.0 - alpha) * np.abs(left) + alpha * np.abs(right)
        stretched[:, t] = magnitude * np.exp(1j * phase)

        delta = np.angle(right) - np.angle(left) - expected_advance
        delta -= 2.0 * np.pi * np.round(delta / (2.0 * np.pi))
        phase = phase + expected_advance + delta

    _, out = signal.istft(stretched, window="hann", nperseg=n_fft, noverlap=n_fft - hop)
    return out


def time_stretch(clip: AudioClip, rate: float) -> AudioClip:
    """Change duration by 1/rate, preserving pitch"""
    _check_stretch(rate, "rate")
    if rate == 1.0:
        return clip
    target = max(1, int(round(clip.samples.size / rate)))
    stretched = _phase_vocoder(clip.samples, rate)
    return AudioClip(samples=_fix_length(stretched, target), sample_rate=clip.sample_rate)


def pitch_shift(clip: AudioClip, factor: float) -> AudioClip:
    """Scale every frequency by factor, preserving duration (stretch then resample)"""
    _check_stretch(factor, "factor")
    if factor == 1.0:
        return clip
    stretched = _phase_vocoder(clip.samples, 1.0 / factor)
    ratio = Fraction(factor).limit_denominator(100)
    shifted = signal.resample_poly(stretched, ratio.denominator, ratio.numerator)
    return AudioClip(samples=_fix_length(shifted, clip.samples.size), sample_rate=clip.sample_rate)


def augment_clip(clip: AudioClip, config: AugmentationConfig) -> List[Tuple[str, AudioClip]]:
    """Extra clips for one original under the configured policy"""
    if not config.enabled:
        return []
    if config.policy == "pitch":
        return [(f"pitch_{factor:g}", pitch_shift(clip, factor)) for factor in config.pitch_factors]
    return [(f"stretch_{rate:g}", time_stretch(clip, rate)) for rate in config.stretch_rates]


# ============ Synthetic corpus ============

def class_fundamental(label: int, n_classes: int, sample_rate: int) -> float:
    """Geometrically spaced class frequencies between 150 Hz and 0.3 * rate"""
    low, high = 150.0, 0.3 * sample_rate
    if n_classes <= 1:
        return low
    return low * (high / low) ** (label / (n_classes - 1))


def class_archetype(label: int) -> str:
    return ARCHETYPES[label % len(ARCHETYPES)]


def _synth_clip(label: int, recipe: SynthRecipe, rng: np.random.Generator) -> np.ndarray:
    rate = recipe.sample_rate
    n = max(1, int(round(recipe.duration_s * rate)))
    t = np.arange(n) / rate
    nyquist_guard = 0.45 * rate
    f0 = class_fundamental(label, recipe.n_classes, rate)
    archetype = class_archetype(label)

    if archetype == "tone":
        wave = np.sin(2 * np.pi * f0 * t + rng.uniform(0, 2 * np.pi))
    elif archetype == "chirp":
        start = f0 * rng.uniform(0.97, 1.03)
        stop = min(2.0 * start, nyquist_guard)
        wave = signal.chirp(t, f0=start, t1=max(t[-1], 1.0 / rate), f1=stop, phi=rng.uniform(0, 360))
    elif archetype == "am_noise":
        low = max(20.0, 0.7 * f0)
        high = min(1.3 * f0, nyquist_guard)
        sos = signal.butter(4, [low, high], btype="bandpass", fs=rate, output="sos")
        noise = signal.sosfilt(sos, rng.standard_normal(n))
        modulation = 0.5 + 0.5 * np.sin(2 * np.pi * (4.0 + label) * t + rng.uniform(0, 2 * np.pi))
        wave = noise * modulation
    else:
        base = f0 * rng.uniform(0.99, 1.01)
        wave = np.zeros(n)
        for harmonic in range(1, 6):
            if harmonic * base >= nyquist_guard:
                break
            wave += np.sin(2 * np.pi * harmonic * base * t + rng.uniform(0, 2 * np.pi)) / harmonic

    peak = np.max(np.abs(wave))
    if peak > 0:
        wave = wave / peak
    wave = rng.uniform(0.5, 0.9) * wave + 0.005 * rng.standard_normal(n)
    return np.clip(wave, -1.0, 1.0)


def synth_dataset(recipe: SynthRecipe, seed: int | None = None) -> Tuple[DatasetManifest, List[AudioClip]]:
    """
    Deterministic corpus of separable acoustic archetypes

    Classes cycle through pure tones, linear chirps, band-limited amplitude
    modulated noise and harmonic stacks at geometrically spaced fundamentals.
    Folds are assigned round-robin within each class.
    """
    rng = np.random.default_rng(recipe.seed if recipe.seed is not None else seed)
    entries: List[ManifestEntry] = []
    clips: List[AudioClip] = []

    for label in range(recipe.n_classes):
        for index in range(recipe.clips_per_class):
            samples = _synth_clip(label, recipe, rng)
            clips.append(AudioClip(samples=samples, sample_rate=recipe.sample_rate))
            entries.append(
                ManifestEntry(
                    source=f"synthetic:{label}:{index}",
                    label=label,
                    fold=index % recipe.folds + 1,
                )
            )

    class_names = [
        f"{class_archetype(label)}_{class_fundamental(label, recipe.n_classes, recipe.sample_rate):.0f}hz"
        for label in range(recipe.n_classes)
    ]
    manifest = DatasetManifest(entries=entries, class_names=class_names)
    logger.info(f"✓ Synthetic corpus: {len(clips)} clips over {recipe.n_classes} classes")
    return manifest, clips
