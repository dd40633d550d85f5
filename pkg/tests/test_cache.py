import numpy as np
import pytest

from app.core.errors import CacheError
from app.models.spectrogram import ModelInput
from app.schemas.spectra import MelConfig, RenderConfig, StftConfig
from app.services.cache import CacheEntry, SpectrogramCache, corpus_key, entry_key
from tests.conftest import sine


def test_entry_key_tracks_samples_and_settings():
    clip = sine(440.0, 8000, seconds=0.1)
    stft, render = StftConfig(n_fft=256, hop=64), RenderConfig(height=16, width=16)
    key = entry_key(clip, stft, render)

    assert key == entry_key(sine(440.0, 8000, seconds=0.1), stft, render)
    assert key != entry_key(sine(441.0, 8000, seconds=0.1), stft, render)
    assert key != entry_key(clip, StftConfig(n_fft=256, hop=32), render)
    assert key != entry_key(clip, MelConfig(n_fft=256, hop=64, n_mels=8), render)
    assert key != entry_key(clip, stft, RenderConfig(height=16, width=16, log_scale=False))


def test_store_fetch_and_index(tmp_path):
    cache = SpectrogramCache(tmp_path / "cache")
    with pytest.raises(CacheError):
        cache.read_index()
    with pytest.raises(CacheError):
        cache.fetch("deadbeef")

    pixels = np.arange(16.0).reshape(4, 4)
    cache.store("k1", ModelInput(pixels=pixels))
    assert cache.has("k1")
    np.testing.assert_array_equal(cache.fetch("k1").pixels, pixels)

    entries = [CacheEntry("k1", "a.wav", "original", 0, 1, 0), CacheEntry("k2", "a.wav", "pitch_0.75", 0, 1, 0)]
    cache.write_index(entries, {"settings": "s", "class_names": ["x"]})
    index = cache.read_index()
    assert index["class_names"] == ["x"]
    assert cache.entries(index) == entries
    assert index["corpus_key"] == corpus_key(entries, "s")


def test_corpus_key_changes_with_labels_and_settings():
    entries = [CacheEntry("k1", "a.wav", "original", 0, 1, 0)]
    relabeled = [CacheEntry("k1", "a.wav", "original", 1, 1, 0)]
    assert corpus_key(entries, "s") != corpus_key(relabeled, "s")
    assert corpus_key(entries, "s") != corpus_key(entries, "t")
