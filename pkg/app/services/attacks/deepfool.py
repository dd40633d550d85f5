"""
DeepFool: iterated steps to the nearest linearized class boundary
"""
from typing import List, Literal, Optional, Tuple

import numpy as np

from app.core.errors import ConfigError
from app.services.attacks.base import AttackResult, as_pixels, finish
from app.services.oracle import GradientOracle

Norm = Literal["l2", "l_inf"]


def deepfool_step(
    oracle: GradientOracle,
    x: np.ndarray,
    label: int,
    norm: Norm = "l2",
    candidates: Optional[List[int]] = None,
) -> Tuple[Optional[np.ndarray], Optional[int]]:
    """
    Minimal step onto the nearest linearized boundary between label and a
    candidate class

    For f_k = G_k - G_label with gradient w_k, the l2 step to class k is
    |f_k| w_k / ||w_k||^2 (for a linear binary model exactly -f(x) w / ||w||^2);
    the l_inf step is |f_k| sign(w_k) / ||w_k||_1. One vector-Jacobian
    product per candidate. Returns (None, None) when every w_k is zero.
    """
    logits = oracle.logits(x)
    if candidates is None:
        candidates = [k for k in range(oracle.n_classes) if k != label]

    best_step, best_class, best_distance = None, None, np.inf
    for k in candidates:
        weights = np.zeros(oracle.n_classes)
        weights[k], weights[label] = 1.0, -1.0
        w_k = oracle.vector_jacobian(x, weights)
        f_k = logits[k] - logits[label]
        dual = np.sum(np.abs(w_k)) if norm == "l_inf" else np.linalg.norm(w_k)
        if dual == 0:
            continue
        distance = abs(f_k) / dual
        if distance < best_distance:
            best_distance, best_class = distance, k
            if norm == "l_inf":
                best_step = distance * np.sign(w_k)
            else:
                best_step = abs(f_k) * w_k / dual**2

    return best_step, best_class


def deepfool(
    oracle: GradientOracle,
    x,
    label: int,
    max_iters: int = 100,
    norm: Norm = "l2",
    overshoot: float = 1.02,
    target: Optional[int] = None,
) -> AttackResult:
    """
    Accumulate boundary steps r; each iterate is clip(x + overshoot * r)

    With target set only the boundary to target is linearized and the run
    stops once the model predicts it. An input the model already gets wrong
    returns after zero iterations and zero gradient calls.
    """
    if max_iters < 1:
        raise ConfigError(f"max_iters must be at least 1, got {max_iters}")
    if norm not in ("l2", "l_inf"):
        raise ConfigError(f"unknown norm '{norm}'")
    x = as_pixels(x)
    start = oracle.callback_counter
    intensity_max = oracle.intensity_max

    if oracle.predict(x) != label:
        return finish(oracle, x, x, label, target, start, 0, reason="already misclassified")

    candidates = None if target is None else [target]
    accumulated = np.zeros_like(x)
    x_i = x.copy()
    iterations = 0
    for _ in range(max_iters):
        step, _ = deepfool_step(oracle, x_i, label, norm, candidates)
        iterations += 1
        if step is None:
            return finish(
                oracle, x, x_i, label, target, start, iterations,
                degenerate=iterations == 1, reason="zero boundary gradient",
            )
        accumulated += step
        x_i = np.clip(x + overshoot * accumulated, 0.0, intensity_max)
        predicted = oracle.predict(x_i)
        if (predicted == target) if target is not None else (predicted != label):
            break

    return finish(oracle, x, x_i, label, target, start, iterations)


def deepfool_targeted_averaged(
    oracle: GradientOracle,
    x,
    label: int,
    max_iters: int = 100,
    norm: Norm = "l2",
    overshoot: float = 1.02,
) -> List[AttackResult]:
    """One targeted run per wrong label; downstream rates average over them"""
    return [
        deepfool(oracle, x, label, max_iters, norm, overshoot, target=target)
        for target in range(oracle.n_classes)
        if target != label
    ]
