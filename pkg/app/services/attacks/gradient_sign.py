"""
FGSM and BIM (a: stop at first success, b: full iteration budget)
"""
from typing import Literal, Optional

import numpy as np

from app.core.errors import ConfigError
from app.services.attacks.base import AttackResult, as_pixels, box_clip, finish, is_success
from app.services.oracle import GradientOracle


def _loss_label(label: int, target: Optional[int], mode: str) -> tuple:
    """(label the loss is taken against, +1 ascend / -1 descend)"""
    if mode == "descend_target":
        if target is None:
            raise ConfigError("descend_target mode needs a target label")
        return target, -1.0
    if mode != "ascend_true":
        raise ConfigError(f"unknown gradient-sign mode '{mode}'")
    return label, 1.0


def fgsm(
    oracle: GradientOracle,
    x,
    label: int,
    epsilon: float,
    norm: Literal["l_inf", "l2"] = "l_inf",
    mode: Literal["ascend_true", "descend_target"] = "ascend_true",
    target: Optional[int] = None,
) -> AttackResult:
    """
    One gradient step of size epsilon (intensity units)

    l_inf: x + eps * sign(grad); l2: x + eps * grad / ||grad||; both clipped
    to the epsilon box inside [0, M]. A zero gradient leaves x unchanged
    and flags the result degenerate.
    """
    if epsilon < 0:
        raise ConfigError(f"epsilon must be non-negative, got {epsilon}")
    x = as_pixels(x)
    start = oracle.callback_counter
    loss_label, direction = _loss_label(label, target, mode)
    scored_target = target if mode == "descend_target" else None

    _, grad = oracle.loss_and_input_grad(x, loss_label)
    if not np.any(grad):
        return finish(oracle, x, x, label, scored_target, start, 1, degenerate=True, reason="zero gradient")

    if norm == "l_inf":
        step = epsilon * np.sign(grad)
    elif norm == "l2":
        step = epsilon * grad / np.linalg.norm(grad)
    else:
        raise ConfigError(f"unknown norm '{norm}'")

    x_adv = box_clip(x + direction * step, x, epsilon, oracle.intensity_max)
    return finish(oracle, x, x_adv, label, scored_target, start, 1)


def bim(
    oracle: GradientOracle,
    x,
    label: int,
    epsilon: float,
    alpha: float,
    max_iters: int,
    variant: Literal["a", "b"] = "b",
    mode: Literal["ascend_true", "descend_target"] = "ascend_true",
    target: Optional[int] = None,
) -> AttackResult:
    """
    Iterated l_inf sign steps of size alpha, re-clipped to the epsilon box
    around x after every step
    """
    if alpha <= 0 or max_iters < 1:
        raise ConfigError("BIM needs alpha > 0 and max_iters >= 1")
    if variant not in ("a", "b"):
        raise ConfigError(f"unknown BIM variant '{variant}'")
    x = as_pixels(x)
    start = oracle.callback_counter
    loss_label, direction = _loss_label(label, target, mode)
    scored_target = target if mode == "descend_target" else None

    x_n = x.copy()
    trace = []
    iterations = 0
    for _ in range(max_iters):
        loss, grad = oracle.loss_and_input_grad(x_n, loss_label)
        iterations += 1
        trace.append(loss)
        if not np.any(grad):
            return finish(
                oracle, x, x_n, label, scored_target, start, iterations,
                degenerate=iterations == 1, reason="zero gradient", trace=trace,
            )
        x_n = box_clip(x_n + direction * alpha * np.sign(grad), x, epsilon, oracle.intensity_max)
        if variant == "a" and is_success(oracle.predict(x_n), label, scored_target):
            break

    return finish(oracle, x, x_n, label, scored_target, start, iterations, trace=trace)
