"""
Shared fixtures: synthetic clips, small linear victims and tiny MicroResNets
"""
import numpy as np
import pytest

from app.models.audio import AudioClip
from app.schemas.training import ArchConfig
from app.services.classifier import LinearClassifier, init_model
from app.services.oracle import GradientOracle


def sine(freq: float, sample_rate: int, seconds: float = 1.0, amplitude: float = 0.5) -> AudioClip:
    t = np.arange(int(round(seconds * sample_rate))) / sample_rate
    return AudioClip(samples=amplitude * np.sin(2 * np.pi * freq * t), sample_rate=sample_rate)


def peak_frequency(clip: AudioClip) -> float:
    spectrum = np.abs(np.fft.rfft(clip.samples))
    freqs = np.fft.rfftfreq(clip.samples.size, 1.0 / clip.sample_rate)
    return float(freqs[np.argmax(spectrum)])


def linear_victim(weight, bias, shape, intensity_max: float = 255.0) -> LinearClassifier:
    weight = np.asarray(weight, dtype=np.float64)
    return LinearClassifier(
        {"head.weight": weight, "head.bias": np.asarray(bias, dtype=np.float64)},
        n_classes=weight.shape[0],
        input_shape=shape,
        intensity_max=intensity_max,
    )


@pytest.fixture
def tone_440():
    return sine(440.0, 8000, seconds=1.0)


@pytest.fixture
def two_pixel_victim():
    """Binary linear classifier over a 1 x 2 input: class 1 iff x0 - x1 > 0"""
    return linear_victim([[0.0, 0.0], [1.0, -1.0]], [0.0, 0.0], (1, 2), intensity_max=10.0)


@pytest.fixture
def three_class_victim():
    """Linear classifier over a 1 x 2 input with three well-separated classes"""
    return linear_victim([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]], [0.0, 0.0, 0.0], (1, 2), intensity_max=10.0)


@pytest.fixture
def tiny_resnet():
    """Two-stage MicroResNet on 8 x 8 inputs with non-trivial standardization"""
    model = init_model(ArchConfig(stem_width=2, widths=[3, 4]), n_classes=3, input_shape=(8, 8), seed=3)
    model.mu, model.sigma = 127.5, 50.0
    return model


@pytest.fixture
def tiny_oracle(tiny_resnet):
    return GradientOracle(tiny_resnet)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
