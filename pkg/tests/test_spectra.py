import numpy as np
import pytest
from scipy import fft

from app.core.errors import ConfigError, SignalShapeError
from app.models.audio import AudioClip
from app.models.spectrogram import Spectrogram
from app.schemas.spectra import DwtConfig, MelConfig, MfccConfig, RenderConfig, StftConfig
from app.services.rendering import render, render_with
from app.services.spectra import (
    extract,
    lifter,
    log_scale,
    mel_centers,
    mel_filterbank,
    mel_spectrogram,
    mfcc,
    stft_spectrogram,
)
from app.services.wavelets import dwt_scalogram, frame_layout, mother_sample, scale_grid
from tests.conftest import sine


def zeros(n: int, rate: int = 8000) -> AudioClip:
    return AudioClip(samples=np.zeros(n), sample_rate=rate)


# ============ STFT ============

def test_stft_of_silence_is_zero():
    spec = stft_spectrogram(zeros(4000), StftConfig(n_fft=512, hop=128))
    assert spec.shape == (257, 1 + 4000 // 128)
    assert not np.any(spec.values)


@pytest.mark.parametrize("n_fft", [512, 1024, 2048])
def test_stft_tone_lands_on_its_bin(n_fft):
    spec = stft_spectrogram(sine(1000.0, 8000), StftConfig(n_fft=n_fft, hop=n_fft // 4))
    expected = round(1000 * n_fft / 8000)
    peaks = np.argmax(spec.values, axis=0)
    assert np.all(np.abs(peaks - expected) <= 1)
    assert spec.bins[expected] == pytest.approx(1000.0)


def test_stft_parseval_with_rect_window(rng):
    clip = AudioClip(samples=rng.uniform(-0.5, 0.5, 2048), sample_rate=8000)
    cfg = StftConfig(n_fft=256, hop=64, window="rect")
    spec = stft_spectrogram(clip, cfg)

    column = 10
    start = column * cfg.hop - cfg.n_fft // 2
    frame = clip.samples[start : start + cfg.n_fft]
    one_sided = np.full(cfg.n_fft // 2 + 1, 2.0)
    one_sided[[0, -1]] = 1.0
    total = float(np.sum(one_sided * spec.values[:, column]))
    assert total == pytest.approx(cfg.n_fft * float(np.sum(frame**2)), rel=1e-6)


def test_stft_doubled_signal_keeps_prefix_frames(rng):
    samples = rng.uniform(-0.5, 0.5, 1024)
    cfg = StftConfig(n_fft=256, hop=128)
    single = stft_spectrogram(AudioClip(samples=samples, sample_rate=8000), cfg).values
    double = stft_spectrogram(AudioClip(samples=np.tile(samples, 2), sample_rate=8000), cfg).values
    # the last frames of the single clip see reflect padding, the rest must match
    interior = single.shape[1] - 2
    np.testing.assert_allclose(double[:, :interior], single[:, :interior], rtol=1e-10, atol=1e-12)


def test_stft_window_scale_and_short_clip():
    cfg = StftConfig(n_fft=1024, window_scale=0.5, hop=256)
    assert cfg.win_length == 512
    with pytest.raises(SignalShapeError):
        stft_spectrogram(zeros(300), cfg)


def test_stft_config_rejects_bad_layout():
    with pytest.raises(ValueError):
        StftConfig(n_fft=512, window_length=1024)
    with pytest.raises(ValueError):
        StftConfig(n_fft=512, hop=600)


# ============ Mel ============

def _htk_mel(freq):
    return 2595.0 * np.log10(1.0 + np.asarray(freq) / 700.0)


def test_mel_filterbank_shape_and_centres():
    basis = mel_filterbank(40, 1024, 22050)
    assert basis.shape == (40, 513)
    assert basis.min() >= 0.0
    np.testing.assert_allclose(basis.max(axis=1), 1.0)

    mels = np.linspace(0.0, _htk_mel(11025.0), 42)[1:-1]
    centres = 700.0 * (10.0 ** (mels / 2595.0) - 1.0)
    np.testing.assert_allclose(mel_centers(40, 22050), centres)
    assert np.all(np.diff(centres) > 0)

    bin_width = 22050 / 1024
    peak_bins = np.argmax(basis, axis=1)
    assert np.all(np.abs(peak_bins - centres / bin_width) <= 1.0)


def test_mel_rows_are_single_triangles():
    basis = mel_filterbank(16, 512, 8000)
    for row in basis:
        support = np.flatnonzero(row > 0)
        assert np.all(np.diff(support) == 1)
        peak = int(np.argmax(row))
        assert np.all(np.diff(row[support[0] : peak + 1]) >= 0)
        assert np.all(np.diff(row[peak : support[-1] + 1]) <= 0)


def test_mel_rows_cover_the_band_without_gaps():
    basis = mel_filterbank(16, 512, 8000)
    centres = mel_centers(16, 8000)
    freqs = np.fft.rfftfreq(512, 1.0 / 8000)
    inside = (freqs >= centres[0]) & (freqs <= centres[-1])
    assert np.all(basis[:, inside].sum(axis=0) > 0)


def test_mel_filterbank_rejects_zero_filters():
    with pytest.raises(ConfigError):
        mel_filterbank(0, 512, 8000)


def test_mel_spectrogram_tone_and_silence():
    cfg = MelConfig(n_fft=512, hop=128, n_mels=16)
    assert not np.any(mel_spectrogram(zeros(4000), cfg).values)

    centres = mel_centers(16, 8000)
    bin_width = 8000 / 512
    tone = round(centres[8] / bin_width) * bin_width
    spec = mel_spectrogram(sine(tone, 8000), cfg)
    assert spec.kind == "mel"
    assert np.all(np.argmax(spec.values, axis=0) == 8)


# ============ MFCC and liftering ============

def test_lifter_identity_and_closed_form():
    coeffs = np.arange(1.0, 41.0).reshape(20, 2)
    np.testing.assert_array_equal(lifter(coeffs, 0), coeffs)

    np.testing.assert_allclose(lifter(np.ones((1, 3)), 2.0), 2.0)

    n_mfcc = 20
    rows = np.arange(n_mfcc)
    for d in (0.5, 1.0, 1.5, 2.0, 2.5):
        cf = d * n_mfcc
        factors = (1.0 + np.sin(np.pi * (rows + 1) / cf)) * cf / 2.0
        np.testing.assert_allclose(lifter(np.ones((n_mfcc, 4)), cf), np.repeat(factors[:, None], 4, axis=1))

    with pytest.raises(ConfigError):
        lifter(coeffs, -1.0)


def test_mfcc_constant_signal_gives_identical_frames():
    clip = AudioClip(samples=np.full(4000, 0.5), sample_rate=8000)
    spec = mfcc(clip, MfccConfig(sample_rate=8000, n_fft=512, hop=128, n_mels=32, n_mfcc=13))
    assert spec.shape[0] == 13
    np.testing.assert_array_equal(spec.values, np.repeat(spec.values[:, :1], spec.shape[1], axis=1))


def test_mfcc_dct_normalization_scaling():
    clip = sine(700.0, 8000, seconds=0.5)
    common = dict(sample_rate=8000, n_fft=512, hop=128, n_mels=32, n_mfcc=32)
    ortho = mfcc(clip, MfccConfig(dct_orthonormal=True, **common)).values
    raw = mfcc(clip, MfccConfig(dct_orthonormal=False, **common)).values

    n = 32
    factors = np.full(n, np.sqrt(2.0 * n))
    factors[0] = np.sqrt(4.0 * n)
    np.testing.assert_allclose(raw, ortho * factors[:, None], rtol=1e-9, atol=1e-9)


def test_mfcc_matches_direct_dct_of_log_mel():
    clip = sine(500.0, 8000, seconds=0.5)
    cfg = MfccConfig(sample_rate=8000, n_fft=512, hop=128, n_mels=24, n_mfcc=13)
    mel = mel_spectrogram(clip, cfg.mel()).values
    expected = fft.dct(np.log(np.maximum(mel, 1e-10)), type=2, axis=0, norm="ortho")[:13]
    np.testing.assert_allclose(mfcc(clip, cfg).values, expected)


@pytest.mark.parametrize("n_mfcc", [13, 20, 40])
def test_mfcc_coefficient_grid(n_mfcc):
    cfg = MfccConfig(n_mfcc=n_mfcc, n_mels=64)
    assert cfg.sample_rate == 22050 and cfg.hop == 1024
    spec = mfcc(sine(440.0, 22050), cfg)
    assert spec.shape[0] == n_mfcc


def test_mfcc_config_rejects_more_coefficients_than_filters():
    with pytest.raises(ValueError):
        MfccConfig(n_mfcc=40, n_mels=20)


# ============ Wavelets ============

def test_mother_sample_values():
    assert mother_sample("haar", 0.25, 1.0) == 1
    assert mother_sample("haar", 0.75, 1.0) == -1
    assert mother_sample("haar", 1.5, 1.0) == 0

    hat = mother_sample("mexican_hat", np.linspace(-3, 3, 61), 1.0)
    assert np.argmax(hat.real) == 30
    assert abs(mother_sample("mexican_hat", 1.0, 1.0)) < 1e-12
    assert abs(mother_sample("mexican_hat", -2.0, 2.0)) < 1e-12

    assert abs(mother_sample("complex_morlet", 0.0, 1.0)) == pytest.approx(1.0 / np.sqrt(2.0 * np.pi))

    with pytest.raises(ConfigError):
        mother_sample("haar", 0.0, 0.0)


def test_dwt_frame_layout_and_scales():
    cfg = DwtConfig(sample_rate=8000, frame_length_ms=50, overlap=0.5, scales=64)
    assert frame_layout(cfg) == (400, 200)
    scales = scale_grid(cfg)
    assert scales.size == 64
    assert scales[0] == pytest.approx(2.0 / 8000)
    assert scales[-1] == pytest.approx(400 / 8000 / 2)
    assert np.all(np.diff(np.log(scales)) > 0)


def test_dwt_of_silence_is_zero():
    spec = dwt_scalogram(zeros(4000), DwtConfig(sample_rate=8000, scales=8))
    assert spec.shape == (8, 19)
    assert not np.any(spec.values)


def test_haar_scalogram_localizes_a_step():
    samples = np.zeros(4000)
    samples[2000:] = 1.0
    cfg = DwtConfig(mother="haar", sample_rate=8000, frame_length_ms=50, overlap=0.5, scales=16)
    spec = dwt_scalogram(AudioClip(samples=samples, sample_rate=8000), cfg)
    # frame 9 starts at sample 1800 and holds the step in its middle
    assert int(np.argmax(spec.values.sum(axis=0))) == 9


@pytest.mark.parametrize("mother", ["haar", "mexican_hat", "complex_morlet"])
def test_dwt_mothers_are_non_negative(mother, tone_440):
    spec = dwt_scalogram(tone_440, DwtConfig(mother=mother, sample_rate=8000, scales=12))
    assert spec.kind == "dwt"
    assert spec.values.min() >= 0.0
    assert np.all(np.isfinite(spec.values))


def test_dwt_rejects_short_clip():
    with pytest.raises(SignalShapeError):
        dwt_scalogram(zeros(100), DwtConfig(sample_rate=8000))


# ============ Dispatch, log scale and rendering ============

def test_extract_dispatches_on_kind(tone_440):
    assert extract(tone_440, StftConfig(n_fft=512, hop=128)).kind == "stft"
    assert extract(tone_440, MelConfig(n_fft=512, hop=128, n_mels=16)).kind == "mel"
    assert extract(tone_440, MfccConfig(sample_rate=8000, n_fft=512, hop=128, n_mels=16, n_mfcc=8)).kind == "mfcc"
    assert extract(tone_440, DwtConfig(sample_rate=8000, scales=4)).kind == "dwt"


def test_log_scale_uses_floor():
    spec = Spectrogram(values=np.array([[0.0, 1e-10]]), kind="stft")
    scaled = log_scale(spec)
    assert scaled.scale == "log"
    np.testing.assert_allclose(scaled.values, [[0.0, np.log(2.0)]])
    assert log_scale(scaled) is scaled


def test_render_bilinear_midpoint():
    spec = Spectrogram(values=np.array([[0.0, 255.0], [255.0, 0.0]]), kind="stft")
    out = render(spec, 3, 3, 255.0, log_scale=False)
    assert out.shape == (3, 3)
    assert out.pixels[1, 1] == pytest.approx(127.5)


def test_render_full_range_input_is_unchanged(rng):
    values = rng.uniform(0.0, 255.0, (128, 128))
    values[0, 0], values[-1, -1] = 0.0, 255.0
    out = render(Spectrogram(values=values, kind="stft"), log_scale=False)
    np.testing.assert_allclose(out.pixels, values, atol=1e-9)


def test_render_random_spectrogram_stays_in_box(rng):
    spec = Spectrogram(values=rng.exponential(1.0, (64, 200)), kind="stft")
    out = render_with(spec, RenderConfig())
    assert out.shape == (128, 128)
    assert out.pixels.min() >= 0.0
    assert 0.0 < out.pixels.max() <= 255.0


def test_render_downsampling_keeps_normalized_intensities():
    # the 2 x 2 grid samples only the corners and misses the central peak
    values = np.array([[0.0, 0.0, 1.0], [0.0, 100.0, 0.0], [2.0, 0.0, 3.0]])
    out = render(Spectrogram(values=values, kind="stft"), 2, 2, 255.0, log_scale=False)
    np.testing.assert_allclose(out.pixels, [[0.0, 2.55], [5.1, 7.65]], atol=1e-9)


def test_render_constant_is_zero_and_empty_is_error():
    out = render(Spectrogram(values=np.full((4, 5), 3.0), kind="stft"), 8, 8)
    assert not np.any(out.pixels)
    with pytest.raises(ValueError):
        render(Spectrogram(values=np.zeros((0, 3)), kind="stft"))
