"""
Schemas module
Pydantic models for configuration files, result records and reports
"""
from .attacks import AttackBudget, AttackRecord, AttackSuiteConfig
from .audio import AugmentationConfig, DatasetManifest, ManifestEntry, SynthRecipe
from .experiment import ExperimentConfig, load_experiment_config
from .reports import AttackSummary, BudgetCurve, BudgetPoint, RobustnessReport, TransferMatrix
from .spectra import DwtConfig, MelConfig, MfccConfig, RenderConfig, StftConfig
from .training import ArchConfig, TrainConfig
