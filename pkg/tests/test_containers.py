import numpy as np
import pytest
from PIL import Image

from app.core.errors import CacheError, CheckpointError
from app.models.spectrogram import ModelInput, Spectrogram
from app.utils.containers import (
    CheckpointContainer,
    SpectrogramContainer,
    load_model_input,
    load_spectrogram,
    save_png,
    save_spectrogram,
)


def test_spectrogram_container_keeps_values_and_kind(rng):
    values = rng.uniform(0.0, 10.0, (5, 7)).astype(np.float32)
    kind, decoded = SpectrogramContainer.decode(SpectrogramContainer.encode(values, "mel"))
    assert kind == "mel"
    assert decoded.shape == (5, 7)
    np.testing.assert_array_equal(decoded, values.astype(np.float64))


def test_spectrogram_container_layout():
    blob = SpectrogramContainer.encode(np.zeros((2, 3)), "stft")
    assert blob[:4] == b"ASPG"
    # 9 byte header, two uint32 dims, six float32 cells
    assert len(blob) == 9 + 8 + 24


def test_spectrogram_container_rejects_corruption():
    blob = SpectrogramContainer.encode(np.ones((2, 2)), "stft")
    with pytest.raises(CacheError):
        SpectrogramContainer.decode(b"XXXX" + blob[4:])
    with pytest.raises(CacheError):
        SpectrogramContainer.decode(blob[:-1])
    with pytest.raises(CacheError):
        SpectrogramContainer.decode(blob[:5])
    with pytest.raises(ValueError):
        SpectrogramContainer.encode(np.ones((2, 2)), "cqt")


def test_load_helpers_check_kind(tmp_path):
    spec_path = save_spectrogram(tmp_path / "a.spg", Spectrogram(values=np.ones((3, 4)), kind="dwt"))
    input_path = SpectrogramContainer.save(tmp_path / "b.spg", ModelInput(pixels=np.full((2, 2), 7.0)))

    spec = load_spectrogram(spec_path)
    assert spec.kind == "dwt" and spec.shape == (3, 4)
    assert load_model_input(input_path).pixels[0, 0] == 7.0

    with pytest.raises(CacheError):
        load_model_input(spec_path)
    with pytest.raises(CacheError):
        load_spectrogram(input_path)
    with pytest.raises(CacheError):
        load_spectrogram(tmp_path / "missing.spg")


def test_save_png_is_grayscale(tmp_path):
    pixels = np.array([[0.0, 127.5], [255.0, 64.0]])
    path = save_png(tmp_path / "x.png", ModelInput(pixels=pixels))
    with Image.open(path) as image:
        assert image.mode == "L"
        assert image.size == (2, 2)
        assert np.asarray(image)[1, 0] == 255


def test_checkpoint_container_keeps_metadata_and_tensors(tmp_path):
    tensors = {"stem.weight": np.arange(12.0).reshape(3, 1, 2, 2), "head.bias": np.array([0.5, -0.5])}
    metadata = {"arch": "micro_resnet", "classes": ["a", "b"]}
    meta, loaded = CheckpointContainer.load(CheckpointContainer.save(tmp_path / "m.ckpt", metadata, tensors))

    assert meta == metadata
    assert list(loaded) == ["stem.weight", "head.bias"]
    np.testing.assert_array_equal(loaded["stem.weight"], tensors["stem.weight"])
    np.testing.assert_array_equal(loaded["head.bias"], tensors["head.bias"])


def test_checkpoint_container_rejects_corruption(tmp_path):
    blob = CheckpointContainer.encode({"k": 1}, {"w": np.ones(3)})
    with pytest.raises(CheckpointError):
        CheckpointContainer.decode(blob + b"\x00")
    with pytest.raises(CheckpointError):
        CheckpointContainer.decode(b"NOPE" + blob[4:])
    with pytest.raises(CheckpointError):
        CheckpointContainer.decode(blob[:-2])
    with pytest.raises(CheckpointError):
        CheckpointContainer.load(tmp_path / "absent.ckpt")
