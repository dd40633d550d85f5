"""
Binary containers for spectrograms, model inputs and checkpoints

Byte layouts are documented in docs/formats.md. All integers are
little-endian; payloads are float32 in row-major order.
"""
import json
import struct
from pathlib import Path
from typing import Dict, Tuple

import numpy as np
from PIL import Image

from app.core.errors import CacheError, CheckpointError
from app.models.spectrogram import ModelInput, Spectrogram

SPECTROGRAM_MAGIC = b"ASPG"
SPECTROGRAM_VERSION = 1
CHECKPOINT_MAGIC = b"ASCK"
CHECKPOINT_VERSION = 1

FLOAT32_CODE = 1

# kind byte of the spectrogram container
KIND_CODES = {"raw": 0, "stft": 1, "mel": 2, "mfcc": 3, "dwt": 4, "model_input": 5}
_KIND_NAMES = {code: name for name, code in KIND_CODES.items()}

_ARRAY_HEADER = struct.Struct("<4sHBBB")
_CHECKPOINT_HEADER = struct.Struct("<4sHI")


def _pack_shape(shape: Tuple[int, ...]) -> bytes:
    return struct.pack(f"<{len(shape)}I", *shape)


def _float32_payload(values: np.ndarray) -> bytes:
    return np.ascontiguousarray(values, dtype="<f4").tobytes(order="C")


class SpectrogramContainer:
    """Flat array container: header (magic, version, kind, dtype, ndim, shape) + payload"""

    @staticmethod
    def encode(values: np.ndarray, kind: str = "raw") -> bytes:
        """
        Serialize a 2D array

        Args:
            values: Array to store (converted to float32)
            kind: One of KIND_CODES

        Returns:
            Container bytes
        """
        values = np.asarray(values)
        if kind not in KIND_CODES:
            raise ValueError(f"unknown container kind '{kind}'")
        header = _ARRAY_HEADER.pack(
            SPECTROGRAM_MAGIC, SPECTROGRAM_VERSION, KIND_CODES[kind], FLOAT32_CODE, values.ndim
        )
        return header + _pack_shape(values.shape) + _float32_payload(values)

    @staticmethod
    def decode(blob: bytes) -> Tuple[str, np.ndarray]:
        """
        Parse container bytes

        Returns:
            (kind, float64 array)
        """
        if len(blob) < _ARRAY_HEADER.size:
            raise CacheError("spectrogram container truncated in header")
        magic, version, kind_code, dtype_code, ndim = _ARRAY_HEADER.unpack_from(blob)
        if magic != SPECTROGRAM_MAGIC:
            raise CacheError(f"bad spectrogram magic {magic!r}")
        if version != SPECTROGRAM_VERSION:
            raise CacheError(f"unsupported spectrogram container version {version}")
        if dtype_code != FLOAT32_CODE or kind_code not in _KIND_NAMES:
            raise CacheError(f"unsupported dtype/kind codes {dtype_code}/{kind_code}")

        offset = _ARRAY_HEADER.size
        shape_size = 4 * ndim
        if len(blob) < offset + shape_size:
            raise CacheError("spectrogram container truncated in shape")
        shape = struct.unpack_from(f"<{ndim}I", blob, offset)
        offset += shape_size

        expected = 4 * int(np.prod(shape, dtype=np.int64))
        if len(blob) - offset != expected:
            raise CacheError(f"payload is {len(blob) - offset} bytes, expected {expected}")
        values = np.frombuffer(blob, dtype="<f4", offset=offset).reshape(shape)
        return _KIND_NAMES[kind_code], values.astype(np.float64)

    @staticmethod
    def save(path: str | Path, item: Spectrogram | ModelInput) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(item, ModelInput):
            blob = SpectrogramContainer.encode(item.pixels, "model_input")
        else:
            blob = SpectrogramContainer.encode(item.values, item.kind)
        path.write_bytes(blob)
        return path

    @staticmethod
    def load(path: str | Path) -> Tuple[str, np.ndarray]:
        path = Path(path)
        try:
            blob = path.read_bytes()
        except OSError as e:
            raise CacheError(f"cannot read {path}: {e}") from e
        return SpectrogramContainer.decode(blob)


def save_spectrogram(path: str | Path, spec: Spectrogram) -> Path:
    return SpectrogramContainer.save(path, spec)


def load_spectrogram(path: str | Path) -> Spectrogram:
    """Values and kind only; axis metadata is not stored"""
    kind, values = SpectrogramContainer.load(path)
    if kind == "model_input":
        raise CacheError(f"{path} holds a model input, not a spectrogram")
    return Spectrogram(values=values, kind=kind, scale="log" if kind == "mfcc" else "linear")


def load_model_input(path: str | Path, intensity_max: float = 255.0) -> ModelInput:
    kind, values = SpectrogramContainer.load(path)
    if kind != "model_input":
        raise CacheError(f"{path} holds a {kind} spectrogram, not a model input")
    return ModelInput(pixels=np.clip(values, 0.0, intensity_max), intensity_max=intensity_max)


def save_png(path: str | Path, item: ModelInput) -> Path:
    """Lossless 8-bit grayscale PNG of a model input for inspection"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    gray = np.round(item.pixels / item.intensity_max * 255.0).astype(np.uint8)
    Image.fromarray(gray).save(path, format="PNG")
    return path


# ============ Checkpoints ============

class CheckpointContainer:
    """
    Versioned checkpoint: header (magic, version, metadata length), JSON
    metadata, tensor count, then per tensor name, ndim, dims and payload
    """

    @staticmethod
    def encode(metadata: Dict, tensors: Dict[str, np.ndarray]) -> bytes:
        meta = json.dumps(metadata, sort_keys=True).encode("utf-8")
        parts = [_CHECKPOINT_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(meta)), meta]
        parts.append(struct.pack("<I", len(tensors)))
        for name, tensor in tensors.items():
            encoded_name = name.encode("utf-8")
            tensor = np.asarray(tensor)
            parts.append(struct.pack("<H", len(encoded_name)))
            parts.append(encoded_name)
            parts.append(struct.pack("<B", tensor.ndim))
            parts.append(_pack_shape(tensor.shape))
            parts.append(_float32_payload(tensor))
        return b"".join(parts)

    @staticmethod
    def decode(blob: bytes) -> Tuple[Dict, Dict[str, np.ndarray]]:
        try:
            magic, version, meta_len = _CHECKPOINT_HEADER.unpack_from(blob)
            if magic != CHECKPOINT_MAGIC:
                raise CheckpointError(f"bad checkpoint magic {magic!r}")
            if version != CHECKPOINT_VERSION:
                raise CheckpointError(f"unsupported checkpoint version {version}")

            offset = _CHECKPOINT_HEADER.size
            metadata = json.loads(blob[offset : offset + meta_len].decode("utf-8"))
            offset += meta_len
            (count,) = struct.unpack_from("<I", blob, offset)
            offset += 4

            tensors: Dict[str, np.ndarray] = {}
            for _ in range(count):
                (name_len,) = struct.unpack_from("<H", blob, offset)
                offset += 2
                name = blob[offset : offset + name_len].decode("utf-8")
                offset += name_len
                (ndim,) = struct.unpack_from("<B", blob, offset)
                offset += 1
                shape = struct.unpack_from(f"<{ndim}I", blob, offset)
                offset += 4 * ndim
                size = int(np.prod(shape, dtype=np.int64))
                if offset + 4 * size > len(blob):
                    raise CheckpointError(f"tensor '{name}' truncated")
                tensors[name] = np.frombuffer(blob, dtype="<f4", count=size, offset=offset).reshape(shape)
                tensors[name] = tensors[name].astype(np.float64)
                offset += 4 * size
        except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"corrupt checkpoint: {e}") from e

        if offset != len(blob):
            raise CheckpointError(f"{len(blob) - offset} trailing bytes after last tensor")
        return metadata, tensors

    @staticmethod
    def save(path: str | Path, metadata: Dict, tensors: Dict[str, np.ndarray]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(CheckpointContainer.encode(metadata, tensors))
        return path

    @staticmethod
    def load(path: str | Path) -> Tuple[Dict, Dict[str, np.ndarray]]:
        path = Path(path)
        if not path.is_file():
            raise CheckpointError(f"checkpoint not found: {path}")
        return CheckpointContainer.decode(path.read_bytes())
