"""
Content-addressed cache of rendered model inputs

Entries are keyed by SHA-256 over the clip samples, its sample rate and the
representation + render settings, so re-running prepare only computes
what changed. index.json lists the corpus in a fixed order.
"""
import hashlib
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from app.core.errors import CacheError
from app.models.audio import AudioClip
from app.models.spectrogram import ModelInput
from app.schemas.spectra import RenderConfig
from app.utils.containers import SpectrogramContainer, load_model_input
from app.utils.tables import read_json, write_json

logger = logging.getLogger(__name__)

INDEX_NAME = "index.json"
ENTRY_SUFFIX = ".spg"


def settings_fingerprint(*sections) -> str:
    """Stable JSON of pydantic sections (None entries skipped)"""
    payload = [section.model_dump(mode="json") for section in sections if section is not None]
    return json.dumps(payload, sort_keys=True)


def entry_key(clip: AudioClip, representation, render: RenderConfig) -> str:
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(clip.samples, dtype="<f8").tobytes())
    digest.update(str(clip.sample_rate).encode("utf-8"))
    digest.update(settings_fingerprint(representation, render).encode("utf-8"))
    return digest.hexdigest()


@dataclass
class CacheEntry:
    """One rendered clip (original or augmented copy)"""

    key: str
    source: str
    variant: str
    label: int
    fold: int
    origin: int


class SpectrogramCache:
    """Directory of <key>.spg containers plus index.json"""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def path_for(self, key: str) -> Path:
        return self.root / f"{key}{ENTRY_SUFFIX}"

    def has(self, key: str) -> bool:
        return self.path_for(key).is_file()

    def store(self, key: str, item: ModelInput) -> Path:
        return SpectrogramContainer.save(self.path_for(key), item)

    def fetch(self, key: str, intensity_max: float = 255.0) -> ModelInput:
        path = self.path_for(key)
        if not path.is_file():
            raise CacheError(f"cache entry {key[:12]} missing under {self.root}; re-run `prepare`")
        return load_model_input(path, intensity_max)

    # ============ Index ============

    @property
    def index_path(self) -> Path:
        return self.root / INDEX_NAME

    def write_index(self, entries: List[CacheEntry], meta: Dict) -> Path:
        payload = dict(meta)
        payload["entries"] = [asdict(entry) for entry in entries]
        payload["corpus_key"] = corpus_key(entries, meta.get("settings", ""))
        return write_json(self.index_path, payload)

    def read_index(self) -> Dict:
        if not self.index_path.is_file():
            raise CacheError(f"no spectrogram cache at {self.root}; run `prepare` first")
        return read_json(self.index_path)

    def entries(self, index: Optional[Dict] = None) -> List[CacheEntry]:
        index = index if index is not None else self.read_index()
        return [CacheEntry(**entry) for entry in index["entries"]]


def corpus_key(entries: List[CacheEntry], settings: str) -> str:
    """Hash identifying the prepared corpus as a whole (checked by train and attack)"""
    digest = hashlib.sha256(settings.encode("utf-8"))
    for entry in entries:
        digest.update(f"{entry.key}:{entry.label}:{entry.fold}:{entry.origin}".encode("utf-8"))
    return digest.hexdigest()
