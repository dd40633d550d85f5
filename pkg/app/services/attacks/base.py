"""
Shared attack plumbing: the result record, the clip box and success rules
"""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from app.models.spectrogram import ModelInput
from app.services.oracle import GradientOracle


@dataclass
class AttackResult:
    """Outcome of one attack on one input; norms are of x_adv - x"""

    x_adv: ModelInput
    success: bool
    true_label: int
    predicted_label: int
    target_label: Optional[int]
    l0: int
    l2: float
    linf: float
    gradient_calls: int
    iterations_used: int
    degenerate: bool = False
    reason: Optional[str] = None
    trace: List[float] = field(default_factory=list)

    @property
    def targeted(self) -> bool:
        return self.target_label is not None


def as_pixels(x) -> np.ndarray:
    pixels = x.pixels if isinstance(x, ModelInput) else x
    return np.array(pixels, dtype=np.float64)


def box_clip(x_cand: np.ndarray, x_orig: np.ndarray, epsilon: Optional[float], intensity_max: float) -> np.ndarray:
    """min{M, x + eps, max{0, x - eps, x_cand}}; epsilon None clips to [0, M] only"""
    if epsilon is None:
        return np.minimum(intensity_max, np.maximum(0.0, x_cand))
    return np.minimum(intensity_max, np.minimum(x_orig + epsilon, np.maximum(0.0, np.maximum(x_orig - epsilon, x_cand))))


def clip_to_box(x_cand, x_orig, epsilon: float, intensity_max: float = 255.0) -> ModelInput:
    """Elementwise projection onto the epsilon ball around x_orig intersected with [0, M]"""
    x_cand, x_orig = as_pixels(x_cand), as_pixels(x_orig)
    if x_cand.shape != x_orig.shape:
        raise ValueError(f"shape mismatch: {x_cand.shape} vs {x_orig.shape}")
    return ModelInput(pixels=box_clip(x_cand, x_orig, epsilon, intensity_max), intensity_max=intensity_max)


def is_success(predicted: int, label: int, target: Optional[int]) -> bool:
    """Targeted: predicted == target; otherwise predicted != label"""
    return predicted == target if target is not None else predicted != label


def finish(
    oracle: GradientOracle,
    x: np.ndarray,
    x_adv: np.ndarray,
    label: int,
    target: Optional[int],
    calls_before: int,
    iterations: int,
    degenerate: bool = False,
    reason: Optional[str] = None,
    trace: Optional[List[float]] = None,
) -> AttackResult:
    """Score x_adv and build the result; gradient calls are the counter delta"""
    intensity_max = oracle.intensity_max
    x_adv = np.clip(x_adv, 0.0, intensity_max)
    delta = x_adv - x
    predicted = oracle.predict(x_adv)
    return AttackResult(
        x_adv=ModelInput(pixels=x_adv, intensity_max=intensity_max),
        success=is_success(predicted, label, target),
        true_label=int(label),
        predicted_label=predicted,
        target_label=None if target is None else int(target),
        l0=int(np.count_nonzero(delta)),
        l2=float(np.linalg.norm(delta)),
        linf=float(np.max(np.abs(delta))) if delta.size else 0.0,
        gradient_calls=oracle.callback_counter - calls_before,
        iterations_used=int(iterations),
        degenerate=degenerate,
        reason=reason,
        trace=list(trace or []),
    )
