"""
Box-constrained L-BFGS attack: minimize c * ||delta||_2 + CE(x + delta, target)
over a line-search grid of c
"""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from app.core.errors import ConfigError
from app.services.attacks.base import AttackResult, as_pixels, finish
from app.services.classifier import softmax
from app.services.oracle import GradientOracle

logger = logging.getLogger(__name__)

MEMORY = 10


def _objective_value(oracle: GradientOracle, x: np.ndarray, x_prime: np.ndarray, target: int, const: float) -> float:
    """Objective without a gradient callback, for the iteration trace"""
    probs = softmax(oracle.logits(x_prime))
    return const * float(np.linalg.norm(x_prime - x)) - float(np.log(max(probs[target], 1e-300)))


def _minimize_for_constant(
    oracle: GradientOracle, x: np.ndarray, target: int, const: float, inner_iters: int
) -> Tuple[np.ndarray, List[float]]:
    shape = x.shape
    flat_x = x.reshape(-1)
    intensity_max = oracle.intensity_max

    def fun(flat):
        x_prime = flat.reshape(shape)
        loss, grad = oracle.loss_and_input_grad(x_prime, target)
        delta = flat - flat_x
        norm = float(np.linalg.norm(delta))
        # subgradient 0 at delta = 0
        norm_grad = delta / norm if norm > 0 else np.zeros_like(delta)
        return const * norm + loss, const * norm_grad + grad.reshape(-1)

    trace = [_objective_value(oracle, x, x, target, const)]

    def record(flat):
        trace.append(_objective_value(oracle, x, flat.reshape(shape), target, const))

    result = optimize.minimize(
        fun,
        flat_x.copy(),
        jac=True,
        method="L-BFGS-B",
        bounds=optimize.Bounds(np.zeros(flat_x.size), np.full(flat_x.size, intensity_max)),
        callback=record,
        options={"maxiter": inner_iters, "maxcor": MEMORY},
    )
    return np.clip(result.x.reshape(shape), 0.0, intensity_max), trace


def lbfgs_attack(
    oracle: GradientOracle,
    x,
    target: int,
    c_grid: Sequence[float] = (0.001, 0.01, 0.1, 1.0, 10.0),
    inner_iters: int = 50,
    refine_steps: int = 5,
    label: Optional[int] = None,
) -> AttackResult:
    """
    Run the quasi-Newton minimization for every c of the ascending grid,
    then bisect (geometrically) between the largest successful c and the
    next failing one. The successful x' with the smallest l2 wins; with no
    success the attempt at the smallest c is returned as a failure.
    """
    if not c_grid or min(c_grid) <= 0:
        raise ConfigError("c_grid must hold positive constants")
    x = as_pixels(x)
    start = oracle.callback_counter
    current = oracle.predict(x)
    label = current if label is None else label
    if target == current:
        raise ConfigError(f"target {target} is already the predicted label")

    attempts = []
    iterations = 0

    def run(const: float) -> bool:
        nonlocal iterations
        x_prime, trace = _minimize_for_constant(oracle, x, target, const, inner_iters)
        iterations += len(trace) - 1
        hit = oracle.predict(x_prime) == target
        attempts.append((const, hit, x_prime, float(np.linalg.norm(x_prime - x)), trace))
        return hit

    for const in sorted(c_grid):
        run(const)

    successes = [a for a in attempts if a[1]]
    if successes:
        low = max(a[0] for a in successes)
        failing = [a[0] for a in attempts if not a[1] and a[0] > low]
        if failing:
            high = min(failing)
            for _ in range(refine_steps):
                middle = float(np.sqrt(low * high))
                if run(middle):
                    low = middle
                else:
                    high = middle
        successes = [a for a in attempts if a[1]]

    if successes:
        chosen = min(successes, key=lambda a: a[3])
        return finish(oracle, x, chosen[2], label, target, start, iterations, trace=chosen[4])

    chosen = attempts[0]
    return finish(
        oracle, x, chosen[2], label, target, start, iterations,
        reason="no constant on the grid succeeded", trace=chosen[4],
    )
