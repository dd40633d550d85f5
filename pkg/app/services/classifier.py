"""
Victim classifiers with exact input gradients

MicroResNet: 3x3 stem -> per stage (optional stride-2 transition, one
residual block of two 3x3 convolutions with identity shortcut) -> global
average pooling -> linear head. LinearClassifier is a single affine layer
over the flattened input with the same interface.

Inputs live in the raw [0, M] pixel box; the per-dataset standardization
(x - mu) / sigma is folded into the model so gradients come back in pixel
units.
"""
import logging
import threading
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from app.core.errors import CheckpointError, ConfigError, InputShapeError
from app.models.spectrogram import ModelInput
from app.schemas.training import ArchConfig
from app.utils.containers import CheckpointContainer

logger = logging.getLogger(__name__)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, invariant to additive shifts"""
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


# ============ Convolution kernels ============

def _output_size(size: int, stride: int) -> int:
    return (size - 1) // stride + 1


def _window(xp: np.ndarray, i: int, j: int, out_h: int, out_w: int, stride: int) -> Tuple[slice, ...]:
    return (
        slice(None),
        slice(None),
        slice(i, i + stride * (out_h - 1) + 1, stride),
        slice(j, j + stride * (out_w - 1) + 1, stride),
    )


def conv3x3_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray, stride: int = 1) -> np.ndarray:
    """Zero-padded 3x3 convolution; x is N x C x H x W, weight is O x C x 3 x 3"""
    n, _, h, w = x.shape
    out_h, out_w = _output_size(h, stride), _output_size(w, stride)
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.zeros((n, weight.shape[0], out_h, out_w)) + bias[None, :, None, None]
    for i in range(3):
        for j in range(3):
            patch = xp[_window(xp, i, j, out_h, out_w, stride)]
            out += np.einsum("nchw,oc->nohw", patch, weight[:, :, i, j], optimize=True)
    return out


def conv3x3_backward(
    dout: np.ndarray, x: np.ndarray, weight: np.ndarray, stride: int = 1
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dweight, dbias) of conv3x3_forward"""
    out_h, out_w = dout.shape[2:]
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    dxp = np.zeros_like(xp)
    dweight = np.zeros_like(weight)
    for i in range(3):
        for j in range(3):
            window = _window(xp, i, j, out_h, out_w, stride)
            dweight[:, :, i, j] = np.einsum("nohw,nchw->oc", dout, xp[window], optimize=True)
            dxp[window] += np.einsum("nohw,oc->nchw", dout, weight[:, :, i, j], optimize=True)
    return dxp[:, :, 1:-1, 1:-1], dweight, dout.sum(axis=(0, 2, 3))


# ============ Classifiers ============

class Classifier:
    """
    Shared surface: logits, probabilities, predict, vector-Jacobian products
    and parameter gradients for training
    """

    kind = "base"

    def __init__(
        self,
        params: Dict[str, np.ndarray],
        n_classes: int,
        input_shape: Tuple[int, int],
        mu: float = 0.0,
        sigma: float = 1.0,
        intensity_max: float = 255.0,
    ):
        if n_classes < 2:
            raise ConfigError(f"a classifier needs at least 2 classes, got {n_classes}")
        self.params = {name: np.asarray(value, dtype=np.float64) for name, value in params.items()}
        self.n_classes = int(n_classes)
        self.input_shape = tuple(int(v) for v in input_shape)
        self.mu = float(mu)
        self.sigma = float(sigma) if sigma > 0 else 1.0
        self.intensity_max = float(intensity_max)
        self._backward_passes = 0
        self._lock = threading.Lock()

    # subclasses provide these two
    def _forward(self, z: np.ndarray) -> Tuple[np.ndarray, Dict]:
        raise NotImplementedError

    def _backward(self, cache: Dict, dlogits: np.ndarray) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
        raise NotImplementedError

    @property
    def backward_passes(self) -> int:
        """Items pushed back through the stem since construction"""
        return self._backward_passes

    @property
    def parameter_count(self) -> int:
        return int(sum(value.size for value in self.params.values()))

    def _as_batch(self, x) -> Tuple[np.ndarray, bool]:
        pixels = x.pixels if isinstance(x, ModelInput) else np.asarray(x, dtype=np.float64)
        single = pixels.ndim == 2
        batch = pixels[None] if single else pixels
        if batch.ndim != 3 or batch.shape[1:] != self.input_shape:
            raise InputShapeError(f"expected input of shape {self.input_shape}, got {pixels.shape}")
        return batch.astype(np.float64, copy=False), single

    def _standardize(self, batch: np.ndarray) -> np.ndarray:
        return ((batch - self.mu) / self.sigma)[:, None, :, :]

    def _backprop(self, cache: Dict, dlogits: np.ndarray) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
        grads, dz = self._backward(cache, dlogits)
        with self._lock:
            self._backward_passes += dlogits.shape[0]
        return grads, dz[:, 0] / self.sigma

    def logits(self, x) -> np.ndarray:
        """G(x): K logits per item"""
        batch, single = self._as_batch(x)
        logits, _ = self._forward(self._standardize(batch))
        return logits[0] if single else logits

    def probabilities(self, x) -> np.ndarray:
        return softmax(self.logits(x))

    def predict(self, x) -> Tuple[int | np.ndarray, np.ndarray]:
        """(argmax label, probabilities); ties go to the lowest index"""
        probs = self.probabilities(x)
        return (int(np.argmax(probs)) if probs.ndim == 1 else np.argmax(probs, axis=1)), probs

    def vjp(self, x, weights: np.ndarray) -> np.ndarray:
        """Gradient of sum_k weights[k] * G(x)_k with respect to the pixels"""
        batch, single = self._as_batch(x)
        weights = np.asarray(weights, dtype=np.float64)
        weights = weights[None] if weights.ndim == 1 else weights
        if weights.shape != (batch.shape[0], self.n_classes):
            raise InputShapeError(f"weights of shape {weights.shape} do not match {batch.shape[0]} x {self.n_classes}")
        _, cache = self._forward(self._standardize(batch))
        _, dx = self._backprop(cache, weights)
        return dx[0] if single else dx

    def loss_and_param_grads(self, x: np.ndarray, labels: np.ndarray) -> Tuple[float, Dict[str, np.ndarray]]:
        """Mean cross-entropy over a batch and its parameter gradients"""
        batch, _ = self._as_batch(x)
        labels = np.asarray(labels, dtype=np.int64)
        logits, cache = self._forward(self._standardize(batch))
        probs = softmax(logits)
        n = batch.shape[0]
        loss = float(-np.mean(np.log(np.maximum(probs[np.arange(n), labels], 1e-300))))
        dlogits = probs.copy()
        dlogits[np.arange(n), labels] -= 1.0
        grads, _ = self._backprop(cache, dlogits / n)
        return loss, grads

    def arch_dict(self) -> Dict:
        return {"kind": self.kind}

    def copy(self) -> "Classifier":
        clone = self.__class__.__new__(self.__class__)
        clone.__dict__.update(self.__dict__)
        clone.params = {name: value.copy() for name, value in self.params.items()}
        clone._backward_passes = 0
        clone._lock = threading.Lock()
        return clone


class MicroResNet(Classifier):
    """Small residual CNN; stage i > 0 halves the spatial size"""

    kind = "micro_resnet"

    def __init__(self, params, n_classes, input_shape, stem_width: int, widths, **kwargs):
        super().__init__(params, n_classes, input_shape, **kwargs)
        self.stem_width = int(stem_width)
        self.widths = [int(w) for w in widths]

    def arch_dict(self) -> Dict:
        return {"kind": self.kind, "stem_width": self.stem_width, "widths": list(self.widths)}

    def _in_width(self, stage: int) -> int:
        return self.stem_width if stage == 0 else self.widths[stage - 1]

    def _has_transition(self, stage: int) -> bool:
        return stage > 0 or self.widths[0] != self.stem_width

    @staticmethod
    def _stride(stage: int) -> int:
        return 2 if stage > 0 else 1

    def _forward(self, z):
        p = self.params
        cache: Dict = {"stem_in": z}
        a = conv3x3_forward(z, p["stem.weight"], p["stem.bias"])
        cache["stem_mask"] = a > 0
        a = np.maximum(a, 0.0)

        stages = []
        for i in range(len(self.widths)):
            saved: Dict = {}
            if self._has_transition(i):
                saved["down_in"] = a
                d = conv3x3_forward(a, p[f"stage{i}.down.weight"], p[f"stage{i}.down.bias"], self._stride(i))
                saved["down_mask"] = d > 0
                a = np.maximum(d, 0.0)
            saved["block_in"] = a
            h = conv3x3_forward(a, p[f"stage{i}.conv1.weight"], p[f"stage{i}.conv1.bias"])
            saved["mask1"] = h > 0
            saved["r1"] = np.maximum(h, 0.0)
            s = conv3x3_forward(saved["r1"], p[f"stage{i}.conv2.weight"], p[f"stage{i}.conv2.bias"]) + a
            saved["mask2"] = s > 0
            a = np.maximum(s, 0.0)
            stages.append(saved)

        cache["stages"] = stages
        cache["final_shape"] = a.shape
        cache["pooled"] = a.mean(axis=(2, 3))
        logits = cache["pooled"] @ p["head.weight"].T + p["head.bias"]
        return logits, cache

    def _backward(self, cache, dlogits):
        p = self.params
        grads: Dict[str, np.ndarray] = {
            "head.weight": dlogits.T @ cache["pooled"],
            "head.bias": dlogits.sum(axis=0),
        }
        n, c, h, w = cache["final_shape"]
        dpooled = dlogits @ p["head.weight"]
        da = np.broadcast_to(dpooled[:, :, None, None] / (h * w), (n, c, h, w)).copy()

        for i in reversed(range(len(self.widths))):
            saved = cache["stages"][i]
            ds = da * saved["mask2"]
            dr1, grads[f"stage{i}.conv2.weight"], grads[f"stage{i}.conv2.bias"] = conv3x3_backward(
                ds, saved["r1"], p[f"stage{i}.conv2.weight"]
            )
            dblock, grads[f"stage{i}.conv1.weight"], grads[f"stage{i}.conv1.bias"] = conv3x3_backward(
                dr1 * saved["mask1"], saved["block_in"], p[f"stage{i}.conv1.weight"]
            )
            da = dblock + ds
            if self._has_transition(i):
                da, grads[f"stage{i}.down.weight"], grads[f"stage{i}.down.bias"] = conv3x3_backward(
                    da * saved["down_mask"], saved["down_in"], p[f"stage{i}.down.weight"], self._stride(i)
                )

        dz, grads["stem.weight"], grads["stem.bias"] = conv3x3_backward(
            da * cache["stem_mask"], cache["stem_in"], p["stem.weight"]
        )
        return grads, dz


class LinearClassifier(Classifier):
    """Affine map over the flattened, standardized input"""

    kind = "linear"

    def _forward(self, z):
        flat = z.reshape(z.shape[0], -1)
        return flat @ self.params["head.weight"].T + self.params["head.bias"], {"flat": flat, "shape": z.shape}

    def _backward(self, cache, dlogits):
        grads = {"head.weight": dlogits.T @ cache["flat"], "head.bias": dlogits.sum(axis=0)}
        dz = (dlogits @ self.params["head.weight"]).reshape(cache["shape"])
        return grads, dz


# ============ Construction ============

def micro_resnet_shapes(stem_width: int, widths, n_classes: int) -> Dict[str, Tuple[int, ...]]:
    """Parameter name -> shape; the count is fixed by (stem width, stage widths, K)"""
    shapes: Dict[str, Tuple[int, ...]] = {
        "stem.weight": (stem_width, 1, 3, 3),
        "stem.bias": (stem_width,),
    }
    previous = stem_width
    for i, width in enumerate(widths):
        if i > 0 or width != stem_width:
            shapes[f"stage{i}.down.weight"] = (width, previous, 3, 3)
            shapes[f"stage{i}.down.bias"] = (width,)
        for conv in ("conv1", "conv2"):
            shapes[f"stage{i}.{conv}.weight"] = (width, width, 3, 3)
            shapes[f"stage{i}.{conv}.bias"] = (width,)
        previous = width
    shapes["head.weight"] = (n_classes, previous)
    shapes["head.bias"] = (n_classes,)
    return shapes


def _param_shapes(arch: ArchConfig, n_classes: int, input_shape: Tuple[int, int]) -> Dict[str, Tuple[int, ...]]:
    if arch.kind == "linear":
        return {"head.weight": (n_classes, input_shape[0] * input_shape[1]), "head.bias": (n_classes,)}
    return micro_resnet_shapes(arch.stem_width, arch.widths, n_classes)


def build_model(
    arch: ArchConfig,
    params: Dict[str, np.ndarray],
    n_classes: int,
    input_shape: Tuple[int, int],
    mu: float = 0.0,
    sigma: float = 1.0,
    intensity_max: float = 255.0,
) -> Classifier:
    """Wrap an existing parameter set in the configured architecture"""
    expected = _param_shapes(arch, n_classes, input_shape)
    if set(params) != set(expected):
        raise CheckpointError(f"parameter names do not match the {arch.kind} layout")
    for name, shape in expected.items():
        if tuple(params[name].shape) != shape:
            raise CheckpointError(f"parameter '{name}' has shape {params[name].shape}, expected {shape}")

    common = dict(mu=mu, sigma=sigma, intensity_max=intensity_max)
    if arch.kind == "linear":
        return LinearClassifier(params, n_classes, input_shape, **common)
    return MicroResNet(params, n_classes, input_shape, arch.stem_width, arch.widths, **common)


def init_model(
    arch: ArchConfig,
    n_classes: int,
    input_shape: Tuple[int, int] = (128, 128),
    seed: int = 0,
    intensity_max: float = 255.0,
) -> Classifier:
    """
    He-style fan-in scaled initialization, deterministic for a fixed seed

    Biases start at zero; arch.zero_init zeroes every parameter.
    """
    if n_classes < 2:
        raise ConfigError(f"a classifier needs at least 2 classes, got {n_classes}")
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in _param_shapes(arch, n_classes, input_shape).items():
        if arch.zero_init or name.endswith(".bias"):
            params[name] = np.zeros(shape)
            continue
        fan_in = int(np.prod(shape[1:]))
        gain = 1.0 if name.startswith("head") else 2.0
        params[name] = rng.standard_normal(shape) * np.sqrt(gain / fan_in)

    model = build_model(arch, params, n_classes, input_shape, intensity_max=intensity_max)
    logger.debug(f"Initialized {arch.kind} with {model.parameter_count} parameters (seed {seed})")
    return model


# ============ Checkpoints ============

def save_checkpoint(path: str | Path, model: Classifier, metadata: Optional[Dict] = None) -> Path:
    """Write parameters (float32) plus architecture and provenance metadata"""
    header = dict(metadata or {})
    header.update(
        {
            "arch": model.arch_dict(),
            "n_classes": model.n_classes,
            "input_shape": list(model.input_shape),
            "mu": model.mu,
            "sigma": model.sigma,
            "intensity_max": model.intensity_max,
        }
    )
    return CheckpointContainer.save(path, header, model.params)


def load_checkpoint(path: str | Path) -> Tuple[Classifier, Dict]:
    """Rebuild a classifier and return it with the stored metadata"""
    metadata, tensors = CheckpointContainer.load(path)
    try:
        arch = ArchConfig(**metadata["arch"])
        model = build_model(
            arch,
            tensors,
            int(metadata["n_classes"]),
            tuple(metadata["input_shape"]),
            mu=float(metadata["mu"]),
            sigma=float(metadata["sigma"]),
            intensity_max=float(metadata["intensity_max"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"{path}: incomplete checkpoint metadata ({e})") from e
    return model, metadata
