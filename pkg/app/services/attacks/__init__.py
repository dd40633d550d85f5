"""
Budgeted white-box attacks over the gradient oracle
"""
from app.services.attacks.base import AttackResult, clip_to_box, is_success
from app.services.attacks.carlini_wagner import carlini_wagner
from app.services.attacks.deepfool import deepfool, deepfool_step, deepfool_targeted_averaged
from app.services.attacks.gradient_sign import bim, fgsm
from app.services.attacks.lbfgs import lbfgs_attack
from app.services.attacks.runner import (
    ATTACKS,
    BatchResult,
    BudgetSetting,
    attack_item,
    budget_points,
    draw_targets,
    run_attack_batch,
)
from app.services.attacks.saliency import jsma, jsma_iteration_cap, saliency_map

__all__ = [
    "ATTACKS",
    "AttackResult",
    "BatchResult",
    "BudgetSetting",
    "attack_item",
    "bim",
    "budget_points",
    "carlini_wagner",
    "clip_to_box",
    "deepfool",
    "deepfool_step",
    "deepfool_targeted_averaged",
    "draw_targets",
    "fgsm",
    "is_success",
    "jsma",
    "jsma_iteration_cap",
    "lbfgs_attack",
    "run_attack_batch",
    "saliency_map",
]
