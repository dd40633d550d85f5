"""
Gradient oracle: the only door attacks have into the victim

Every input-gradient evaluation (loss gradient or vector-Jacobian product)
counts as one callback per input item.
"""
import threading
from typing import Literal, Optional, Tuple

import numpy as np

from app.core.errors import ConfigError
from app.services.classifier import Classifier, softmax

LossMode = Literal["cross_entropy", "cw"]


class GradientOracle:
    """Frozen classifier plus a thread-safe callback counter"""

    def __init__(self, model: Classifier, parent: Optional["GradientOracle"] = None):
        self.model = model
        self._parent = parent
        self._count = 0
        self._lock = threading.Lock()

    @property
    def callback_counter(self) -> int:
        return self._count

    @property
    def n_classes(self) -> int:
        return self.model.n_classes

    @property
    def intensity_max(self) -> float:
        return self.model.intensity_max

    def _tick(self, items: int) -> None:
        with self._lock:
            self._count += items

    def fork(self) -> "GradientOracle":
        """Private sub-counter over the same model for one worker"""
        return GradientOracle(self.model, parent=self)

    def absorb(self, child: "GradientOracle") -> None:
        """Fold a forked counter back into this one"""
        if child._parent is not self:
            raise ValueError("can only absorb counters forked from this oracle")
        self._tick(child.callback_counter)

    # ============ Queries that do not count ============

    def logits(self, x) -> np.ndarray:
        return self.model.logits(x)

    def probabilities(self, x) -> np.ndarray:
        return self.model.probabilities(x)

    def predict(self, x) -> int:
        """Argmax label (lowest index on ties)"""
        return int(np.argmax(self.model.logits(x)))

    # ============ Gradient callbacks ============

    def _check_label(self, label: int) -> int:
        if not 0 <= int(label) < self.n_classes:
            raise ConfigError(f"label {label} outside [0, {self.n_classes})")
        return int(label)

    def vector_jacobian(self, x, weights: np.ndarray) -> np.ndarray:
        """Gradient of sum_k weights[k] * G(x)_k; one callback per item"""
        grad = self.model.vjp(x, weights)
        self._tick(1 if np.ndim(grad) == 2 else grad.shape[0])
        return grad

    def loss_and_input_grad(
        self,
        x,
        label: int,
        mode: LossMode = "cross_entropy",
        kappa: float = 0.0,
        targeted: bool = False,
    ) -> Tuple[float, np.ndarray]:
        """
        Loss and its gradient with respect to x for one item

        cross_entropy: -log softmax(G(x))[label]
        cw: non-targeted max(G_l - max_{i != l} G_i, -kappa) for true label l,
            targeted max(max_{i != t} G_i - G_t, -kappa) for target t
        """
        label = self._check_label(label)
        logits = self.model.logits(x)
        weights = np.zeros(self.n_classes)

        if mode == "cross_entropy":
            probs = softmax(logits)
            loss = float(-np.log(max(probs[label], 1e-300)))
            weights = probs.copy()
            weights[label] -= 1.0
        elif mode == "cw":
            others = logits.copy()
            others[label] = -np.inf
            runner_up = int(np.argmax(others))
            margin = logits[runner_up] - logits[label] if targeted else logits[label] - logits[runner_up]
            loss = float(max(margin, -kappa))
            if margin > -kappa:
                sign = 1.0 if targeted else -1.0
                weights[runner_up] = sign
                weights[label] = -sign
        else:
            raise ConfigError(f"unknown loss mode '{mode}'")

        return loss, self.vector_jacobian(x, weights)
