"""
Attack Schemas
Budgets for the six gradient attacks, suite selection and the per-item record
"""
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

AttackName = Literal["fgsm", "bim_a", "bim_b", "jsma", "cw", "deepfool", "lbfgs"]

DEFAULT_SUITE: List[str] = ["fgsm", "deepfool", "bim_a", "bim_b", "jsma", "cw"]

DEFAULT_EPSILONS = [0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1]


class AttackBudget(BaseModel):
    """Per-attack hyperparameter grids; epsilons are fractions of the intensity ceiling M"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    # FGSM
    fgsm_epsilons: List[float] = Field(default_factory=lambda: list(DEFAULT_EPSILONS))
    fgsm_norm: Literal["l_inf", "l2"] = "l_inf"
    fgsm_mode: Literal["ascend_true", "descend_target"] = "ascend_true"

    # BIM-a / BIM-b
    bim_epsilons: List[float] = Field(default_factory=lambda: list(DEFAULT_EPSILONS))
    bim_iterations: int = Field(10, ge=1)
    bim_step_fraction: float = Field(0.25, gt=0, description="alpha = bim_step_fraction * epsilon")

    # DeepFool
    deepfool_iterations: List[int] = Field(default_factory=lambda: list(range(100, 1001, 100)))
    deepfool_norm: Literal["l2", "l_inf"] = "l2"
    deepfool_mode: Literal["non_targeted", "targeted_averaged"] = "non_targeted"
    deepfool_overshoot: float = Field(1.02, ge=1.0)

    # JSMA
    jsma_gamma: float = Field(1.4 / 255, gt=0, description="Maximum distortion as a fraction of M")
    jsma_theta: float = Field(1.0, gt=0, description="Per-iteration increase, intensity units")
    jsma_n_values: List[int] = Field(default_factory=lambda: [200, 160, 120, 80, 40])

    # Carlini-Wagner
    cw_search_steps: List[int] = Field(default_factory=lambda: [1, 3, 7, 9])
    cw_iterations: List[int] = Field(default_factory=lambda: [25, 100, 1000, 2000, 5000])
    cw_kappa: float = Field(0.0, ge=0)
    cw_learning_rate: float = Field(0.01, gt=0)
    cw_initial_const: float = Field(1e-2, gt=0)
    cw_targeted: bool = True

    # L-BFGS
    lbfgs_c_grid: List[float] = Field(default_factory=lambda: [0.001, 0.01, 0.1, 1.0, 10.0])
    lbfgs_inner_iters: List[int] = Field(default_factory=lambda: [10, 25, 50, 100])
    lbfgs_refine_steps: int = Field(5, ge=0)

    @model_validator(mode="after")
    def check_grids(self):
        grids = {
            "fgsm_epsilons": self.fgsm_epsilons,
            "bim_epsilons": self.bim_epsilons,
            "deepfool_iterations": self.deepfool_iterations,
            "jsma_n_values": self.jsma_n_values,
            "cw_search_steps": self.cw_search_steps,
            "cw_iterations": self.cw_iterations,
            "lbfgs_c_grid": self.lbfgs_c_grid,
            "lbfgs_inner_iters": self.lbfgs_inner_iters,
        }
        for name, grid in grids.items():
            if not grid:
                raise ValueError(f"{name} must not be empty")
        if min(self.fgsm_epsilons + self.bim_epsilons) <= 0:
            raise ValueError("epsilons must be positive")
        if min(self.deepfool_iterations + self.cw_search_steps + self.cw_iterations + self.lbfgs_inner_iters) < 1:
            raise ValueError("iteration and search-step grids must be positive")
        if min(self.jsma_n_values) < 0 or max(self.jsma_n_values) > 200:
            raise ValueError("jsma_n_values must lie in [0, 200]")
        if min(self.lbfgs_c_grid) <= 0:
            raise ValueError("lbfgs_c_grid must be positive")
        return self


class AttackSuiteConfig(BaseModel):
    """Which attacks run and on how many items"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    suite: List[AttackName] = Field(default_factory=lambda: list(DEFAULT_SUITE), min_length=1)
    budget: AttackBudget = Field(default_factory=AttackBudget)
    max_items: Optional[int] = Field(None, ge=1, description="Cap on attacked test items")
    single_batch_limit: int = Field(200, ge=1, description="Up to this many items run as one batch")
    batch_size: int = Field(100, ge=1, description="Batch size for larger corpora")


class AttackRecord(BaseModel):
    """One line of the JSON-lines result stream"""

    model_config = ConfigDict(from_attributes=True)

    attack: str
    budget: float
    batch: int
    item: int
    true_label: int
    target_label: Optional[int] = None
    predicted_label: int
    success: bool
    degenerate: bool = False
    reason: Optional[str] = None
    l0: int
    l2: float
    linf: float
    gradient_calls: int
    iterations_used: int
