import numpy as np
import pytest

from app.core.errors import ConfigError, DataError
from app.schemas.training import ArchConfig, TrainConfig
from app.services.classifier import init_model
from app.services.trainer import LabeledSet, SGDMomentum, evaluate_accuracy, split_dataset, train


def separable_set(per_class: int = 40, seed: int = 0) -> LabeledSet:
    """Two classes over 4 x 4 inputs: bright left half vs bright right half"""
    rng = np.random.default_rng(seed)
    inputs, labels = [], []
    for label in (0, 1):
        for _ in range(per_class):
            pixels = rng.uniform(30.0, 70.0, (4, 4))
            bright = slice(0, 2) if label == 0 else slice(2, 4)
            pixels[:, bright] += 150.0
            inputs.append(pixels)
            labels.append(label)
    n = len(labels)
    return LabeledSet(
        inputs=np.array(inputs),
        labels=np.array(labels),
        folds=np.ones(n, dtype=int),
        origin=np.arange(n),
        class_names=["left", "right"],
    )


def originals(labels, n_folds=1) -> LabeledSet:
    labels = np.asarray(labels)
    n = labels.size
    return LabeledSet(
        inputs=np.zeros((n, 2, 2)),
        labels=labels,
        folds=(np.arange(n) % n_folds) + 1,
        origin=np.arange(n),
        class_names=[f"c{k}" for k in range(int(labels.max()) + 1)],
    )


# ============ Splitting ============

def test_stratified_split_sizes():
    dataset = originals(np.repeat(np.arange(4), 50))
    split = split_dataset(dataset, TrainConfig(folds=5, train_fraction=0.7), seed=0)

    assert split.test.size == 60
    assert split.n_folds == 5
    for fold in range(5):
        members = np.flatnonzero(split.fold_of == fold)
        assert members.size == 28
        assert np.all(np.bincount(dataset.labels[members], minlength=4) == 7)
    assert set(split.test).isdisjoint(np.flatnonzero(split.fold_of >= 0))


def test_split_is_seeded():
    dataset = originals(np.repeat(np.arange(3), 20))
    cfg = TrainConfig(folds=2)
    a, b = split_dataset(dataset, cfg, 4), split_dataset(dataset, cfg, 4)
    np.testing.assert_array_equal(a.fold_of, b.fold_of)
    assert not np.array_equal(a.fold_of, split_dataset(dataset, cfg, 5).fold_of)


def test_augmented_copies_follow_their_original():
    base = originals(np.repeat(np.arange(2), 10))
    copies_of = np.arange(20)
    dataset = LabeledSet(
        inputs=np.zeros((40, 2, 2)),
        labels=np.concatenate([base.labels, base.labels]),
        folds=np.ones(40, dtype=int),
        origin=np.concatenate([np.arange(20), copies_of]),
        class_names=base.class_names,
    )
    split = split_dataset(dataset, TrainConfig(folds=2), seed=1)

    np.testing.assert_array_equal(split.fold_of[20:], split.fold_of[:20])
    assert np.all(split.fold_of[20 + split.test] == -1)
    assert np.all(split.test < 20)
    for fold in range(2):
        assert np.all(split.validation_indices(fold, dataset.augmented) < 20)


def test_manifest_split_holds_out_highest_fold():
    dataset = originals(np.tile(np.arange(2), 8), n_folds=4)
    split = split_dataset(dataset, TrainConfig(split="manifest"), seed=0)

    np.testing.assert_array_equal(split.test, np.flatnonzero(dataset.folds == 4))
    assert split.n_folds == 3
    np.testing.assert_array_equal(split.fold_of[dataset.folds == 1], 0)
    np.testing.assert_array_equal(split.fold_of[dataset.folds == 3], 2)

    with pytest.raises(ConfigError):
        split_dataset(originals(np.tile(np.arange(2), 4), n_folds=2), TrainConfig(split="manifest"), seed=0)


def test_labeled_set_checks_lengths():
    with pytest.raises(DataError):
        LabeledSet(inputs=np.zeros((3, 2, 2)), labels=[0, 1], folds=[1, 1, 1], origin=[0, 1, 2], class_names=["a", "b"])


# ============ Optimization ============

def test_sgd_momentum_update():
    params = {"w": np.array([1.0])}
    optimizer = SGDMomentum(learning_rate=0.1, momentum=0.5)
    optimizer.step(params, {"w": np.array([2.0])})
    assert params["w"][0] == pytest.approx(0.8)
    optimizer.step(params, {"w": np.array([2.0])})
    assert params["w"][0] == pytest.approx(0.8 - 0.1 - 0.2)


def test_small_steps_lower_the_loss_monotonically():
    dataset = separable_set(per_class=10)
    model = init_model(ArchConfig(kind="linear"), 2, (4, 4), seed=2)
    model.mu, model.sigma = 110.0, 80.0
    optimizer = SGDMomentum(learning_rate=1e-3, momentum=0.0)

    losses = []
    for _ in range(10):
        loss, grads = model.loss_and_param_grads(dataset.inputs, dataset.labels)
        optimizer.step(model.params, grads)
        losses.append(loss)
    assert all(later < earlier for earlier, later in zip(losses, losses[1:]))


# ============ Protocol ============

def test_train_separates_a_linear_problem():
    dataset = separable_set()
    model = init_model(ArchConfig(kind="linear"), 2, (4, 4), seed=0)
    result = train(model, dataset, TrainConfig(folds=2, epochs_max=20, patience=3, learning_rate=0.05), seed=3)

    assert result.test_accuracy >= 0.95
    assert len(result.fold_accuracies) == 2
    assert result.fold_accuracies[result.best_fold] == max(result.fold_accuracies)
    assert model.params["head.weight"] is not result.model.params["head.weight"]
    assert evaluate_accuracy(result.model, dataset.inputs[result.split.test], dataset.labels[result.split.test]) == (
        result.test_accuracy
    )


def test_patience_zero_runs_one_epoch():
    dataset = separable_set(per_class=10)
    model = init_model(ArchConfig(kind="linear"), 2, (4, 4))
    result = train(model, dataset, TrainConfig(folds=2, patience=0, epochs_max=10), seed=0)
    assert [entry["epoch"] for entry in result.log] == [1, 1]
    assert [entry["fold"] for entry in result.log] == [1, 2]


def test_training_is_deterministic():
    dataset = separable_set(per_class=12)
    cfg = TrainConfig(folds=2, epochs_max=4, patience=2)
    first = train(init_model(ArchConfig(kind="linear"), 2, (4, 4), seed=1), dataset, cfg, seed=9)
    second = train(init_model(ArchConfig(kind="linear"), 2, (4, 4), seed=1), dataset, cfg, seed=9)

    assert first.fold_accuracies == second.fold_accuracies
    assert first.log == second.log
    for name, value in first.model.params.items():
        np.testing.assert_array_equal(value, second.model.params[name])


def test_missing_class_in_a_fold_is_an_error():
    labels = np.concatenate([np.repeat([0, 1], 10), [2]])
    dataset = LabeledSet(
        inputs=np.zeros((21, 4, 4)),
        labels=labels,
        folds=np.ones(21, dtype=int),
        origin=np.arange(21),
        class_names=["a", "b", "c"],
    )
    with pytest.raises(ConfigError):
        train(init_model(ArchConfig(kind="linear"), 3, (4, 4)), dataset, TrainConfig(folds=2), seed=0)


def test_class_count_must_match_the_model():
    with pytest.raises(ConfigError):
        train(init_model(ArchConfig(kind="linear"), 3, (4, 4)), separable_set(per_class=4), TrainConfig(folds=2))
