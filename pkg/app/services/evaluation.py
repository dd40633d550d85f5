"""
Robustness metrics, budget curves, attack cost statistics and transferability
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from app.core.errors import DataError
from app.schemas.reports import (
    REPORT_SCHEMA_VERSION,
    AttackSummary,
    BudgetCurve,
    BudgetPoint,
    RobustnessReport,
    TransferMatrix,
)
from app.services.attacks.base import AttackResult, is_success
from app.services.attacks.runner import BatchResult
from app.services.oracle import GradientOracle

logger = logging.getLogger(__name__)

VULNERABILITY_THRESHOLD = 0.9


@dataclass(frozen=True)
class CostStats:
    mean: float
    median: float
    max: int


# ============ Rates ============

def fooling_rate(results: Sequence[AttackResult]) -> float:
    """Share of successful attacks"""
    if len(results) == 0:
        raise ValueError("fooling rate of an empty result list is undefined")
    return sum(1 for result in results if result.success) / len(results)


def robustness(results: Sequence[AttackResult]) -> float:
    """1 - fooling rate"""
    return 1.0 - fooling_rate(results)


def auc_over_budget(curve: BudgetCurve | Sequence[Tuple[float, float]]) -> float:
    """
    Trapezoidal area under fooling rate vs normalized budget

    The curve is extended flat to budget 0 (rate of the smallest budget)
    and budget 1 (rate of the largest).
    """
    points = [(p.budget, p.rate) for p in curve.points] if isinstance(curve, BudgetCurve) else list(curve)
    if len(points) < 2:
        raise ValueError("AUC needs at least 2 budget points")
    budgets = np.array([0.0] + [b for b, _ in points] + [1.0])
    rates = np.array([points[0][1]] + [r for _, r in points] + [points[-1][1]])
    return float(np.clip(trapezoid(rates, budgets), 0.0, 1.0))


def _flatten_calls(items: Iterable) -> List[int]:
    calls: List[int] = []
    for item in items:
        if isinstance(item, AttackResult):
            calls.append(item.gradient_calls)
        elif isinstance(item, BatchResult):
            calls.extend(result.gradient_calls for result in item.results)
        elif isinstance(item, (list, tuple)):
            calls.extend(_flatten_calls(item))
        else:
            calls.append(int(item))
    return calls


def cost_stats(items: Iterable) -> CostStats:
    """Mean, median and max gradient calls per attacked item (results, batches or raw counts)"""
    calls = _flatten_calls(items)
    if not calls:
        raise ValueError("cost statistics of an empty batch are undefined")
    return CostStats(mean=float(np.mean(calls)), median=float(np.median(calls)), max=int(np.max(calls)))


def cost_to_threshold(curve: BudgetCurve, threshold: float = VULNERABILITY_THRESHOLD) -> Optional[float]:
    """Mean gradient calls at the first budget whose fooling rate reaches the threshold"""
    for point in curve.points:
        if point.rate >= threshold:
            return point.mean_gradient_calls
    return None


# ============ Transferability ============

def transferability(
    source_results: Sequence[AttackResult], target: GradientOracle
) -> float:
    """
    Share of successful source adversarials that also fool the target,
    judged by the source attack's own success rule
    """
    successes = [result for result in source_results if result.success]
    if not successes:
        raise ValueError("transferability needs at least one successful source adversarial")
    fooled = sum(
        is_success(target.predict(result.x_adv), result.true_label, result.target_label) for result in successes
    )
    return fooled / len(successes)


def permutation_baseline(
    source_results: Sequence[AttackResult],
    originals: Sequence[np.ndarray],
    target: GradientOracle,
    seed: int = 0,
) -> float:
    """
    Chance level for transfer: successful perturbations are shuffled across
    the attacked inputs before being applied, and the target counts as
    fooled when it misclassifies the receiving input
    """
    pairs = [(np.asarray(x, dtype=np.float64), r) for x, r in zip(originals, source_results) if r.success]
    if not pairs:
        raise ValueError("permutation baseline needs at least one successful source adversarial")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(pairs))
    # rolled order: with two or more pairs no input receives its own perturbation
    donors = np.roll(order, 1) if len(pairs) > 1 else order
    fooled = 0
    for receiver, donor in zip(order, donors):
        x_src, result = pairs[donor]
        x_recv, recv_result = pairs[receiver]
        delta = result.x_adv.pixels - x_src
        shifted = np.clip(x_recv + delta, 0.0, target.intensity_max)
        fooled += target.predict(shifted) != recv_result.true_label
    return fooled / len(pairs)


def transfer_matrix(
    model_ids: List[str],
    results_by_source: Dict[str, Sequence[AttackResult]],
    oracles: Dict[str, GradientOracle],
    attack: str,
    originals_by_source: Optional[Dict[str, Sequence[np.ndarray]]] = None,
    seed: int = 0,
) -> TransferMatrix:
    """Square matrix of transfer ratios; the diagonal is 1 by definition"""
    n = len(model_ids)
    values = [[1.0] * n for _ in range(n)]
    baseline = [[0.0] * n for _ in range(n)] if originals_by_source else None
    for s, source in enumerate(model_ids):
        successes = [r for r in results_by_source[source] if r.success]
        for t, target in enumerate(model_ids):
            if not successes:
                values[s][t] = 0.0 if s != t else 1.0
                continue
            if s != t:
                values[s][t] = transferability(successes, oracles[target])
            if baseline is not None:
                baseline[s][t] = permutation_baseline(
                    results_by_source[source], originals_by_source[source], oracles[target], seed
                )
    return TransferMatrix(model_ids=model_ids, attack=attack, values=values, baseline=baseline)


# ============ Summaries and reports ============

def budget_curve(batches_by_budget: Sequence[Sequence[BatchResult]]) -> BudgetCurve:
    """One point per budget setting, pooling that setting's batches"""
    points = []
    for batches in batches_by_budget:
        results = [result for batch in batches for result in batch.results]
        setting = batches[0].setting
        points.append(
            BudgetPoint(
                budget=setting.normalized,
                rate=fooling_rate(results),
                raw_budget=setting.raw,
                mean_gradient_calls=cost_stats(results).mean,
            )
        )
    return BudgetCurve(points=points)


def summarize_attack(attack: str, batches_by_budget: Sequence[Sequence[BatchResult]]) -> AttackSummary:
    """Fooling rate at the largest budget, AUC over the grid and cost statistics per item"""
    curve = budget_curve(batches_by_budget)
    largest = [result for batch in batches_by_budget[-1] for result in batch.results]
    all_results = [result for batches in batches_by_budget for batch in batches for result in batch.results]
    rate = fooling_rate(largest)
    stats = cost_stats(all_results)
    auc = auc_over_budget(curve) if len(curve.points) >= 2 else rate
    return AttackSummary(
        attack=attack,
        fooling_rate=rate,
        robustness=1.0 - rate,
        auc=auc,
        mean_gradient_calls=stats.mean,
        median_gradient_calls=stats.median,
        max_gradient_calls=stats.max,
        cost_to_threshold=cost_to_threshold(curve),
        curve=curve,
    )


def report_rows(report: RobustnessReport) -> List[Dict]:
    """One flat row per attack"""
    return [
        {
            "representation": report.representation,
            "setting": report.setting,
            "attack": summary.attack,
            "clean_accuracy": report.clean_accuracy,
            "n_items": report.n_items,
            "fooling_rate": summary.fooling_rate,
            "robustness": summary.robustness,
            "auc": summary.auc,
            "mean_gradient_calls": summary.mean_gradient_calls,
            "median_gradient_calls": summary.median_gradient_calls,
            "max_gradient_calls": summary.max_gradient_calls,
            "cost_to_threshold": summary.cost_to_threshold,
        }
        for summary in report.attacks
    ]


def curve_rows(report: RobustnessReport) -> List[Dict]:
    return [
        {
            "attack": summary.attack,
            "budget": point.budget,
            "raw_budget": point.raw_budget,
            "rate": point.rate,
            "mean_gradient_calls": point.mean_gradient_calls,
        }
        for summary in report.attacks
        for point in summary.curve.points
    ]


def emit_report(report: RobustnessReport, out_dir: str | Path) -> Dict[str, Path]:
    """Write report.json, report.csv and curves.csv"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out_dir / "report.json",
        "csv": out_dir / "report.csv",
        "curves": out_dir / "curves.csv",
    }
    paths["json"].write_text(json.dumps(report.model_dump(mode="json"), indent=2, sort_keys=True), encoding="utf-8")
    pd.DataFrame(report_rows(report)).to_csv(paths["csv"], index=False)
    pd.DataFrame(curve_rows(report), columns=["attack", "budget", "raw_budget", "rate", "mean_gradient_calls"]).to_csv(
        paths["curves"], index=False
    )
    return paths


def parse_report(path: str | Path) -> RobustnessReport:
    """Load a report.json written by emit_report"""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"report not found: {path}")
    data = json.loads(path.read_text(encoding="utf-8"))
    version = data.get("schema_version")
    if version != REPORT_SCHEMA_VERSION:
        raise DataError(f"{path}: unsupported report schema_version {version}")
    return RobustnessReport.model_validate(data)
