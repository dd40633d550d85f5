"""
Training protocol

A stratified, seeded split holds out (1 - train_fraction) of the original
clips for testing; the rest is divided into k folds. Each fold trains on
the other k - 1 folds (plus their augmented copies) with SGD + momentum
and early-stops on validation accuracy. The fold model with the best
validation accuracy is kept and scored on the held-out test share.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from app.core.errors import ConfigError, DataError
from app.schemas.training import TrainConfig
from app.services.classifier import Classifier

logger = logging.getLogger(__name__)


@dataclass
class LabeledSet:
    """
    Rendered inputs with labels and provenance

    origin[i] is i for an original clip and the index of the original for
    an augmented copy; folds are the manifest fold ids (1-based).
    """

    inputs: np.ndarray
    labels: np.ndarray
    folds: np.ndarray
    origin: np.ndarray
    class_names: List[str]
    sources: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.folds = np.asarray(self.folds, dtype=np.int64)
        self.origin = np.asarray(self.origin, dtype=np.int64)
        n = self.inputs.shape[0]
        if self.inputs.ndim != 3 or not (len(self.labels) == len(self.folds) == len(self.origin) == n):
            raise DataError("inputs, labels, folds and origin must describe the same N items")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def augmented(self) -> np.ndarray:
        return self.origin != np.arange(len(self))

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


@dataclass
class DataSplit:
    """fold_of[i] is the 0-based dev fold of item i, or -1 (test or dropped)"""

    test: np.ndarray
    fold_of: np.ndarray
    n_folds: int

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero((self.fold_of >= 0) & (self.fold_of != fold))

    def validation_indices(self, fold: int, augmented: np.ndarray) -> np.ndarray:
        return np.flatnonzero((self.fold_of == fold) & ~augmented)


@dataclass
class TrainResult:
    model: Classifier
    fold_accuracies: List[float]
    best_fold: int
    test_accuracy: float
    split: DataSplit
    log: List[Dict] = field(default_factory=list)


class SGDMomentum:
    """Heavy-ball SGD: v <- momentum * v - lr * g; p <- p + v"""

    def __init__(self, learning_rate: float, momentum: float):
        self.learning_rate = learning_rate
        self.momentum = momentum
        self._velocity: Dict[str, np.ndarray] = {}

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> None:
        for name, grad in grads.items():
            velocity = self._velocity.get(name)
            if velocity is None:
                velocity = np.zeros_like(grad)
            velocity = self.momentum * velocity - self.learning_rate * grad
            self._velocity[name] = velocity
            params[name] += velocity


# ============ Splitting ============

def split_dataset(dataset: LabeledSet, cfg: TrainConfig, seed: int) -> DataSplit:
    """Assign originals to test or a dev fold; augmented copies follow their original"""
    augmented = dataset.augmented
    originals = np.flatnonzero(~augmented)
    fold_of = np.full(len(dataset), -1, dtype=np.int64)

    if cfg.split == "manifest":
        manifest_folds = dataset.folds[originals]
        test_fold = int(manifest_folds.max())
        dev_ids = sorted(set(int(f) for f in manifest_folds) - {test_fold})
        if len(dev_ids) < 2:
            raise ConfigError("manifest split needs at least 3 distinct folds (2 dev + 1 test)")
        remap = {fold_id: i for i, fold_id in enumerate(dev_ids)}
        test = originals[manifest_folds == test_fold]
        for index in originals[manifest_folds != test_fold]:
            fold_of[index] = remap[int(dataset.folds[index])]
        n_folds = len(dev_ids)
    else:
        rng = np.random.default_rng(seed)
        test_parts = []
        for label in range(dataset.n_classes):
            members = rng.permutation(originals[dataset.labels[originals] == label])
            n_dev = int(round(cfg.train_fraction * members.size))
            fold_of[members[:n_dev]] = np.arange(n_dev) % cfg.folds
            test_parts.append(members[n_dev:])
        test = np.sort(np.concatenate(test_parts)) if test_parts else np.zeros(0, dtype=np.int64)
        n_folds = cfg.folds

    copies = np.flatnonzero(augmented)
    fold_of[copies] = fold_of[dataset.origin[copies]]
    return DataSplit(test=test.astype(np.int64), fold_of=fold_of, n_folds=n_folds)


# ============ Training ============

def evaluate_accuracy(model: Classifier, inputs: np.ndarray, labels: np.ndarray, batch_size: int = 64) -> float:
    """Fraction of items whose argmax matches the label"""
    labels = np.asarray(labels)
    if labels.size == 0:
        return 0.0
    correct = 0
    for start in range(0, labels.size, batch_size):
        predicted, _ = model.predict(inputs[start : start + batch_size])
        correct += int(np.sum(np.atleast_1d(predicted) == labels[start : start + batch_size]))
    return correct / labels.size


def _standardization(inputs: np.ndarray) -> tuple:
    mu = float(inputs.mean())
    sigma = float(inputs.std())
    return mu, (sigma if sigma > 1e-8 else 1.0)


def _train_fold(
    model: Classifier,
    dataset: LabeledSet,
    train_idx: np.ndarray,
    val_idx: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator,
    fold: int,
    log: List[Dict],
) -> tuple:
    fold_model = model.copy()
    fold_model.mu, fold_model.sigma = _standardization(dataset.inputs[train_idx])
    optimizer = SGDMomentum(cfg.learning_rate, cfg.momentum)

    best_accuracy = -1.0
    best_params = {name: value.copy() for name, value in fold_model.params.items()}
    epochs_since_best = 0

    for epoch in range(1, cfg.epochs_max + 1):
        order = rng.permutation(train_idx)
        total_loss = 0.0
        for start in range(0, order.size, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            loss, grads = fold_model.loss_and_param_grads(dataset.inputs[batch], dataset.labels[batch])
            optimizer.step(fold_model.params, grads)
            total_loss += loss * batch.size

        val_accuracy = evaluate_accuracy(fold_model, dataset.inputs[val_idx], dataset.labels[val_idx])
        log.append(
            {"epoch": epoch, "fold": fold + 1, "train_loss": total_loss / order.size, "val_acc": val_accuracy}
        )

        if val_accuracy > best_accuracy:
            best_accuracy = val_accuracy
            best_params = {name: value.copy() for name, value in fold_model.params.items()}
            epochs_since_best = 0
        else:
            epochs_since_best += 1
        if epochs_since_best >= cfg.patience:
            break

    fold_model.params = best_params
    return fold_model, best_accuracy, epoch


def train(model: Classifier, dataset: LabeledSet, cfg: TrainConfig, seed: Optional[int] = None) -> TrainResult:
    """
    k-fold training with early stopping

    Args:
        model: Freshly initialized classifier; every fold starts from a copy
        dataset: Rendered inputs with labels, manifest folds and origins
        cfg: Protocol settings
        seed: Split and shuffling seed (cfg.seed wins when set)

    Returns:
        TrainResult with the best fold's model and the per-fold accuracies
    """
    seed = cfg.seed if cfg.seed is not None else (seed or 0)
    if dataset.n_classes != model.n_classes:
        raise ConfigError(f"model has {model.n_classes} outputs but the dataset has {dataset.n_classes} classes")

    split = split_dataset(dataset, cfg, seed)
    rng = np.random.default_rng(seed + 1)
    augmented = dataset.augmented
    all_classes = set(range(dataset.n_classes))

    fold_models: List[Classifier] = []
    fold_accuracies: List[float] = []
    log: List[Dict] = []

    for fold in range(split.n_folds):
        train_idx = split.train_indices(fold)
        val_idx = split.validation_indices(fold, augmented)
        missing = all_classes - set(int(v) for v in dataset.labels[train_idx])
        if missing:
            names = [dataset.class_names[c] for c in sorted(missing)]
            raise ConfigError(f"fold {fold + 1}: no training clips for classes {names}")

        fold_model, accuracy, epochs = _train_fold(model, dataset, train_idx, val_idx, cfg, rng, fold, log)
        fold_models.append(fold_model)
        fold_accuracies.append(accuracy)
        logger.info(f"✓ Fold {fold + 1}/{split.n_folds}: val_acc {accuracy:.3f} after {epochs} epochs")

    best_fold = int(np.argmax(fold_accuracies))
    best = fold_models[best_fold]
    if split.test.size == 0:
        logger.warning("⚠️ Held-out test share is empty; test accuracy reported as 0")
    test_accuracy = evaluate_accuracy(best, dataset.inputs[split.test], dataset.labels[split.test])
    logger.info(f"✓ Best fold {best_fold + 1}; held-out test accuracy {test_accuracy:.3f}")

    return TrainResult(
        model=best,
        fold_accuracies=fold_accuracies,
        best_fold=best_fold,
        test_accuracy=test_accuracy,
        split=split,
        log=log,
    )
