"""
Carlini-Wagner l2 attack with a tanh box reparameterization
"""
import logging
from typing import Optional, Tuple

import numpy as np

from app.core.errors import ConfigError
from app.services.attacks.base import AttackResult, as_pixels, finish
from app.services.oracle import GradientOracle

logger = logging.getLogger(__name__)

# keeps arctanh finite at the box edges
_TANH_SHRINK = 0.999999

C_BOUNDS = (1e-5, 1e3)


class _Adam:
    def __init__(self, shape, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return -self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


def to_tanh_space(x: np.ndarray, intensity_max: float) -> np.ndarray:
    return np.arctanh((2.0 * x / intensity_max - 1.0) * _TANH_SHRINK)


def from_tanh_space(w: np.ndarray, intensity_max: float) -> np.ndarray:
    """x' = (tanh(w) + 1) / 2 * M, inside (0, M)"""
    return (np.tanh(w) + 1.0) / 2.0 * intensity_max


def plateaued(objective: float, previous: float, tolerance: float = 1e-4) -> bool:
    """True when the objective fell by less than a relative tolerance since the last check"""
    if not np.isfinite(previous):
        return False
    return objective > previous - tolerance * abs(previous)


def _optimize_for_constant(
    oracle: GradientOracle,
    x: np.ndarray,
    w0: np.ndarray,
    objective_label: int,
    label: int,
    target: Optional[int],
    const: float,
    kappa: float,
    iterations: int,
    learning_rate: float,
) -> Tuple[Optional[np.ndarray], float, np.ndarray, int, list]:
    """Adam on the offset w; returns (best success, its l2, last x', iterations, objective trace)"""
    intensity_max = oracle.intensity_max
    targeted = target is not None
    offset = np.zeros_like(w0)
    adam = _Adam(w0.shape, learning_rate)
    check_every = max(1, iterations // 10)
    previous = np.inf
    best, best_l2 = None, np.inf
    trace = []
    x_prime = from_tanh_space(w0, intensity_max)
    used = 0

    for step in range(iterations):
        x_prime = from_tanh_space(w0 + offset, intensity_max)
        f_value, f_grad = oracle.loss_and_input_grad(x_prime, objective_label, mode="cw", kappa=kappa, targeted=targeted)
        used += 1
        delta = x_prime - x
        distance = float(np.sum(delta**2))
        objective = distance + const * f_value
        trace.append(objective)

        if f_value <= 0:
            predicted = oracle.predict(x_prime)
            hit = predicted == target if targeted else predicted != label
            if hit and np.sqrt(distance) < best_l2:
                best, best_l2 = x_prime.copy(), float(np.sqrt(distance))

        dx_dw = (1.0 - np.tanh(w0 + offset) ** 2) * intensity_max / 2.0
        offset += adam.step((2.0 * delta + const * f_grad) * dx_dw)

        if (step + 1) % check_every == 0:
            if plateaued(objective, previous):
                break
            previous = objective

    return best, best_l2, x_prime, used, trace


def carlini_wagner(
    oracle: GradientOracle,
    x,
    label: int,
    target: Optional[int] = None,
    kappa: float = 0.0,
    search_steps: int = 9,
    iterations: int = 1000,
    learning_rate: float = 0.01,
    initial_const: float = 1e-2,
) -> AttackResult:
    """
    Minimize ||x' - x||^2 + c * f(x') over the tanh parameterization

    f is the logit-margin objective (targeted when target is given, else
    non-targeted against label). The constant c starts at initial_const and
    is bisected within [1e-5, 1e3] across search_steps rounds; the
    successful x' with the smallest l2 distance is returned, otherwise the
    last attempt marked as failed.
    """
    if kappa < 0:
        raise ConfigError(f"kappa must be non-negative, got {kappa}")
    if search_steps < 1 or iterations < 1:
        raise ConfigError("search_steps and iterations must be positive")
    x = as_pixels(x)
    start = oracle.callback_counter
    objective_label = target if target is not None else label
    w0 = to_tanh_space(x, oracle.intensity_max)

    low, high = C_BOUNDS
    const = min(max(initial_const, low), high)
    best, best_l2 = None, np.inf
    last_attempt = x
    total_iterations = 0
    trace = []

    for _ in range(search_steps):
        found, found_l2, last_attempt, used, step_trace = _optimize_for_constant(
            oracle, x, w0, objective_label, label, target, const, kappa, iterations, learning_rate
        )
        total_iterations += used
        trace.extend(step_trace)

        if found is not None:
            if found_l2 < best_l2:
                best, best_l2 = found, found_l2
            high = min(high, const)
            const = (low + high) / 2.0
        else:
            low = max(low, const)
            const = (low + high) / 2.0 if high < C_BOUNDS[1] else min(const * 10.0, C_BOUNDS[1])

    if best is not None:
        return finish(oracle, x, best, label, target, start, total_iterations, trace=trace)
    return finish(
        oracle, x, last_attempt, label, target, start, total_iterations,
        reason="no constant in range succeeded", trace=trace,
    )
