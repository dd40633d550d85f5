"""
Report Schemas
Budget curves, per-setting robustness reports and transfer matrices
"""
from typing import List, Optional

from pydantic import BaseModel, Field, model_validator

REPORT_SCHEMA_VERSION = 1


class BudgetPoint(BaseModel):
    """Fooling rate at one normalized budget"""

    budget: float = Field(..., ge=0, le=1)
    rate: float = Field(..., ge=0, le=1)
    raw_budget: float
    mean_gradient_calls: float = 0.0


class BudgetCurve(BaseModel):
    """Ordered budget points of one attack"""

    points: List[BudgetPoint]

    @model_validator(mode="after")
    def check_increasing(self):
        budgets = [point.budget for point in self.points]
        if any(b >= a_next for b, a_next in zip(budgets, budgets[1:])):
            raise ValueError("budgets must be strictly increasing")
        return self


class AttackSummary(BaseModel):
    """Per-attack row of a robustness report"""

    attack: str
    fooling_rate: float = Field(..., ge=0, le=1)
    robustness: float = Field(..., ge=0, le=1)
    auc: float = Field(..., ge=0, le=1)
    mean_gradient_calls: float
    median_gradient_calls: float
    max_gradient_calls: int
    cost_to_threshold: Optional[float] = None
    curve: BudgetCurve

    @model_validator(mode="after")
    def check_complement(self):
        if abs(self.fooling_rate + self.robustness - 1.0) > 1e-12:
            raise ValueError("robustness must equal 1 - fooling_rate")
        return self


class RobustnessReport(BaseModel):
    """Clean accuracy plus one summary per attack for a representation setting"""

    schema_version: int = REPORT_SCHEMA_VERSION
    representation: str
    setting: str
    clean_accuracy: float = Field(..., ge=0, le=1)
    n_items: int = Field(..., ge=0)
    attacks: List[AttackSummary]

    class Config:
        json_schema_extra = {
            "example": {
                "representation": "mfcc",
                "setting": "sample_rate=8000",
                "clean_accuracy": 0.95,
                "n_items": 40,
                "attacks": [],
            }
        }


class TransferMatrix(BaseModel):
    """Cell (s, t): share of source-s successes that also fool target t"""

    model_ids: List[str] = Field(..., min_length=1)
    attack: str
    values: List[List[float]]
    baseline: Optional[List[List[float]]] = None

    @model_validator(mode="after")
    def check_square(self):
        n = len(self.model_ids)
        for grid in filter(None, [self.values, self.baseline]):
            if len(grid) != n or any(len(row) != n for row in grid):
                raise ValueError("transfer matrix must be square over model_ids")
            if any(not 0.0 <= v <= 1.0 for row in grid for v in row):
                raise ValueError("transfer ratios must lie in [0, 1]")
        if any(self.values[i][i] != 1.0 for i in range(n)):
            raise ValueError("diagonal must be exactly 1")
        return self
