"""
Jacobian-based saliency map attack (increase-only, one pixel per iteration)
"""
import math
from typing import Optional

import numpy as np

from app.core.errors import ConfigError
from app.services.attacks.base import AttackResult, as_pixels, finish
from app.services.oracle import GradientOracle


def jsma_iteration_cap(n_pixels: int, gamma: float, intensity_max: float, n: int, theta: float = 1.0) -> int:
    """
    ceil(m * gamma * M / n) iterations; gamma is a fraction of M

    n = 0 leaves only the total-distortion cap, i.e. ceil(gamma * m * M / theta) steps.
    """
    if n < 0:
        raise ConfigError(f"n must be non-negative, got {n}")
    if n == 0:
        return max(1, math.ceil(gamma * n_pixels * intensity_max / theta))
    return max(1, math.ceil(n_pixels * gamma * intensity_max / n))


def saliency_map(jacobian: np.ndarray, target: int) -> np.ndarray:
    """
    Per-pixel score from the K x ... logit Jacobian

    alpha = dG_t/dx, beta = sum_{j != t} dG_j/dx; zero where alpha < 0 or
    beta > 0, else alpha * |beta|.
    """
    alpha = jacobian[target]
    beta = jacobian.sum(axis=0) - alpha
    return np.where((alpha < 0) | (beta > 0), 0.0, alpha * np.abs(beta))


def logit_jacobian(oracle: GradientOracle, x: np.ndarray) -> np.ndarray:
    """K vector-Jacobian products, one per logit"""
    basis = np.eye(oracle.n_classes)
    return np.stack([oracle.vector_jacobian(x, basis[k]) for k in range(oracle.n_classes)])


def jsma(
    oracle: GradientOracle,
    x,
    target: int,
    gamma: float,
    theta: float = 1.0,
    iter_cap: Optional[int] = None,
    label: Optional[int] = None,
) -> AttackResult:
    """
    Push the most salient unsaturated pixel up by theta until the model
    predicts target, every candidate is saturated, the iteration cap is
    hit or the total added intensity reaches gamma * m * M
    """
    if theta <= 0:
        raise ConfigError(f"theta must be positive, got {theta}")
    x = as_pixels(x)
    start = oracle.callback_counter
    intensity_max = oracle.intensity_max
    current = oracle.predict(x)
    label = current if label is None else label
    if target == current:
        raise ConfigError(f"target {target} is already the predicted label")

    max_distortion = gamma * x.size * intensity_max
    cap = iter_cap if iter_cap is not None else jsma_iteration_cap(x.size, gamma, intensity_max, 0, theta)
    x_adv = x.copy()
    flat = x_adv.reshape(-1)
    saturated = flat >= intensity_max
    iterations = 0
    reason = "iteration cap reached"

    while iterations < cap:
        if oracle.predict(x_adv) == target:
            reason = None
            break
        scores = saliency_map(logit_jacobian(oracle, x_adv), target).reshape(-1)
        iterations += 1
        scores[saturated] = 0.0
        if not np.any(scores > 0):
            reason = "saliency map is zero for every unsaturated pixel"
            break

        pixel = int(np.argmax(scores))
        flat[pixel] = min(intensity_max, flat[pixel] + theta)
        saturated[pixel] = flat[pixel] >= intensity_max
        if saturated.all():
            reason = "every pixel saturated"
            break
        if np.sum(x_adv - x) >= max_distortion:
            reason = "distortion cap reached"
            break

    result = finish(oracle, x, x_adv, label, target, start, iterations, reason=reason)
    if result.success:
        result.reason = None
    return result
