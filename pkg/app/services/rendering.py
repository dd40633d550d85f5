"""
Spectrogram -> fixed-size model input
"""
import numpy as np
from scipy import ndimage

from app.models.spectrogram import LOG_FLOOR, POWER_KINDS, ModelInput, Spectrogram
from app.schemas.spectra import RenderConfig


def _min_max(values: np.ndarray, intensity_max: float) -> np.ndarray:
    """Stretch to [0, M]; a constant array maps to zeros"""
    low, high = float(values.min()), float(values.max())
    if high <= low:
        return np.zeros_like(values)
    return np.clip((values - low) / (high - low) * intensity_max, 0.0, intensity_max)


def _bilinear(values: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with corner pixels aligned"""
    in_h, in_w = values.shape
    if (in_h, in_w) == (out_h, out_w):
        return values
    rows = np.linspace(0.0, in_h - 1, out_h)
    cols = np.linspace(0.0, in_w - 1, out_w)
    grid = np.meshgrid(rows, cols, indexing="ij")
    return ndimage.map_coordinates(values, grid, order=1, mode="nearest")


def render(
    spec: Spectrogram,
    out_h: int = 128,
    out_w: int = 128,
    intensity_max: float = 255.0,
    log_scale: bool = True,
) -> ModelInput:
    """
    Optional log(1 + v / 1e-10) compression (power kinds), min-max
    normalization to [0, M], then bilinear resize to out_h x out_w.
    """
    if spec.values.size == 0:
        raise ValueError("cannot render an empty spectrogram")

    values = spec.values
    if log_scale and spec.kind in POWER_KINDS and spec.scale == "linear":
        values = np.log1p(values / LOG_FLOOR)

    scaled = _min_max(values, intensity_max)
    # bilinear output stays inside [0, M]; no second stretch
    return ModelInput(pixels=_bilinear(scaled, out_h, out_w), intensity_max=intensity_max)


def render_with(spec: Spectrogram, cfg: RenderConfig) -> ModelInput:
    return render(spec, cfg.height, cfg.width, cfg.intensity_max, cfg.log_scale)
