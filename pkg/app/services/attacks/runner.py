"""
Budget grids and batched attack execution
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import ConfigError, ToolkitError
from app.models.spectrogram import ModelInput
from app.schemas.attacks import AttackBudget
from app.services.attacks.base import AttackResult, as_pixels, finish
from app.services.attacks.carlini_wagner import carlini_wagner
from app.services.attacks.deepfool import deepfool, deepfool_targeted_averaged
from app.services.attacks.gradient_sign import bim, fgsm
from app.services.attacks.lbfgs import lbfgs_attack
from app.services.attacks.saliency import jsma, jsma_iteration_cap
from app.services.oracle import GradientOracle

logger = logging.getLogger(__name__)

ATTACKS = ("fgsm", "bim_a", "bim_b", "jsma", "cw", "deepfool", "lbfgs")


@dataclass(frozen=True)
class BudgetSetting:
    """One grid point: raw budget value, its normalized position and the attack parameters"""

    attack: str
    raw: float
    normalized: float
    params: Dict = field(default_factory=dict)


@dataclass
class BatchResult:
    """Per-item results of one batch; deepfool targeted-averaged yields K - 1 results per item"""

    attack: str
    setting: BudgetSetting
    batch: int
    items: List[Tuple[int, AttackResult]]
    targets: List[Optional[int]]

    @property
    def results(self) -> List[AttackResult]:
        return [result for _, result in self.items]

    @property
    def gradient_calls(self) -> int:
        return sum(result.gradient_calls for result in self.results)

    @property
    def mean_gradient_calls(self) -> float:
        return self.gradient_calls / len(self.items) if self.items else 0.0

    @property
    def success_count(self) -> int:
        return sum(result.success for result in self.results)


def _normalize(attack: str, entries: List[Tuple[float, Dict]]) -> List[BudgetSetting]:
    entries = sorted(entries, key=lambda entry: entry[0])
    unique: List[Tuple[float, Dict]] = []
    for raw, params in entries:
        if unique and raw == unique[-1][0]:
            continue
        unique.append((raw, params))
    top = unique[-1][0]
    return [BudgetSetting(attack, raw, raw / top, params) for raw, params in unique]


def budget_points(
    attack: str, budget: AttackBudget, n_pixels: int = 128 * 128, intensity_max: float = 255.0
) -> List[BudgetSetting]:
    """
    Increasing budget grid of an attack; normalized budget = raw / max raw

    fgsm, bim_*: epsilon (fraction of M); deepfool: max iterations;
    jsma: iteration cap per n; cw: search steps x iterations;
    lbfgs: inner quasi-Newton iterations.
    """
    if attack == "fgsm":
        entries = [(eps, {"epsilon": eps * intensity_max}) for eps in budget.fgsm_epsilons]
    elif attack in ("bim_a", "bim_b"):
        entries = [
            (
                eps,
                {
                    "epsilon": eps * intensity_max,
                    "alpha": budget.bim_step_fraction * eps * intensity_max,
                    "max_iters": budget.bim_iterations,
                },
            )
            for eps in budget.bim_epsilons
        ]
    elif attack == "deepfool":
        entries = [(float(iters), {"max_iters": iters}) for iters in budget.deepfool_iterations]
    elif attack == "jsma":
        entries = []
        for n in budget.jsma_n_values:
            cap = jsma_iteration_cap(n_pixels, budget.jsma_gamma, intensity_max, n, budget.jsma_theta)
            entries.append((float(cap), {"iter_cap": cap, "n": n}))
    elif attack == "cw":
        entries = [
            (float(steps * iters), {"search_steps": steps, "iterations": iters})
            for steps in budget.cw_search_steps
            for iters in budget.cw_iterations
        ]
    elif attack == "lbfgs":
        entries = [(float(iters), {"inner_iters": iters}) for iters in budget.lbfgs_inner_iters]
    else:
        raise ConfigError(f"unknown attack '{attack}'")
    return _normalize(attack, entries)


def draw_targets(labels: Sequence[int], predictions: Sequence[int], n_classes: int, seed: int) -> List[Optional[int]]:
    """Seeded wrong-label targets, avoiding both the true label and the current prediction"""
    rng = np.random.default_rng(seed)
    targets: List[Optional[int]] = []
    for label, predicted in zip(labels, predictions):
        choices = [k for k in range(n_classes) if k not in (label, predicted)]
        if not choices:
            choices = [k for k in range(n_classes) if k != label]
        targets.append(int(rng.choice(choices)) if choices else None)
    return targets


def needs_target(attack: str, budget: AttackBudget) -> bool:
    if attack in ("jsma", "lbfgs"):
        return True
    if attack == "cw":
        return budget.cw_targeted
    if attack in ("fgsm", "bim_a", "bim_b"):
        return budget.fgsm_mode == "descend_target"
    return False


def attack_item(
    oracle: GradientOracle,
    x: np.ndarray,
    label: int,
    target: Optional[int],
    attack: str,
    setting: BudgetSetting,
    budget: AttackBudget,
) -> List[AttackResult]:
    """Dispatch one item to its attack at one budget point"""
    params = setting.params
    if needs_target(attack, budget) and target is None:
        raise ConfigError(f"{attack} needs a target label but none is available")

    if attack == "fgsm":
        return [fgsm(oracle, x, label, params["epsilon"], budget.fgsm_norm, budget.fgsm_mode, target)]
    if attack in ("bim_a", "bim_b"):
        variant = attack[-1]
        return [
            bim(oracle, x, label, params["epsilon"], params["alpha"], params["max_iters"], variant,
                budget.fgsm_mode, target)
        ]
    if attack == "deepfool":
        if budget.deepfool_mode == "targeted_averaged":
            return deepfool_targeted_averaged(
                oracle, x, label, params["max_iters"], budget.deepfool_norm, budget.deepfool_overshoot
            )
        return [deepfool(oracle, x, label, params["max_iters"], budget.deepfool_norm, budget.deepfool_overshoot)]
    if attack == "jsma":
        return [jsma(oracle, x, target, budget.jsma_gamma, budget.jsma_theta, params["iter_cap"], label)]
    if attack == "cw":
        return [
            carlini_wagner(
                oracle, x, label,
                target=target if budget.cw_targeted else None,
                kappa=budget.cw_kappa,
                search_steps=params["search_steps"],
                iterations=params["iterations"],
                learning_rate=budget.cw_learning_rate,
                initial_const=budget.cw_initial_const,
            )
        ]
    if attack == "lbfgs":
        return [
            lbfgs_attack(oracle, x, target, budget.lbfgs_c_grid, params["inner_iters"], budget.lbfgs_refine_steps, label)
        ]
    raise ConfigError(f"unknown attack '{attack}'")


def _failed_result(oracle, x, label, start, detail: str) -> AttackResult:
    """Unsuccessful result for an item whose attack raised; x_adv is the clean input"""
    try:
        result = finish(oracle, x, x, label, None, start, 0, reason=f"error: {detail}")
    except Exception:
        result = AttackResult(
            x_adv=ModelInput(pixels=x, intensity_max=oracle.intensity_max),
            success=False,
            true_label=int(label),
            predicted_label=int(label),
            target_label=None,
            l0=0,
            l2=0.0,
            linf=0.0,
            gradient_calls=oracle.callback_counter - start,
            iterations_used=0,
            reason=f"error: {detail}",
        )
    result.success = False
    return result


def _guarded(oracle, x, label, target, attack, setting, budget) -> List[AttackResult]:
    start = oracle.callback_counter
    try:
        return attack_item(oracle, x, label, target, attack, setting, budget)
    except Exception as e:
        logger.warning(f"⚠️ {attack} failed on one item: {type(e).__name__}: {e}")
        detail = f"{type(e).__name__}: {e.detail if isinstance(e, ToolkitError) else e}"
        return [_failed_result(oracle, x, label, start, detail)]


def run_attack_batch(
    oracle: GradientOracle,
    inputs: np.ndarray,
    labels: Sequence[int],
    attack: str,
    setting: BudgetSetting,
    budget: AttackBudget,
    seed: int = 0,
    workers: int = 1,
    batch_index: int = 0,
) -> BatchResult:
    """
    Attack every item of a batch at one budget point

    Items run on up to `workers` threads sharing the frozen model; each
    item gets a forked counter that is folded back into the oracle when the
    batch ends. Results keep input order. A failing item is recorded as an
    unsuccessful result rather than aborting the batch.
    """
    inputs = np.asarray([as_pixels(x) for x in inputs])
    labels = [int(label) for label in labels]
    if len(labels) == 0:
        raise ConfigError("attack batch must not be empty")
    if inputs.shape[0] != len(labels):
        raise ConfigError("inputs and labels differ in length")

    predictions = [oracle.predict(x) for x in inputs]
    targets = draw_targets(labels, predictions, oracle.n_classes, seed)
    used_targets = targets if needs_target(attack, budget) else [None] * len(labels)
    forks = [oracle.fork() for _ in labels]

    def work(index: int) -> List[AttackResult]:
        return _guarded(forks[index], inputs[index], labels[index], used_targets[index], attack, setting, budget)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_item = list(pool.map(work, range(len(labels))))
    else:
        per_item = [work(index) for index in range(len(labels))]

    for child in forks:
        oracle.absorb(child)

    items = [(index, result) for index, results in enumerate(per_item) for result in results]
    batch = BatchResult(attack=attack, setting=setting, batch=batch_index, items=items, targets=used_targets)
    logger.info(
        f"✓ {attack} @ {setting.raw:g}: {batch.success_count}/{len(items)} fooled, "
        f"{batch.mean_gradient_calls:.1f} gradient calls per item"
    )
    return batch
