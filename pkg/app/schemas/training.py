"""
Training Schemas
Victim architecture and training protocol settings
"""
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class ArchConfig(BaseModel):
    """Victim classifier architecture"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["micro_resnet", "linear"] = "micro_resnet"
    stem_width: int = Field(8, ge=1)
    widths: List[int] = Field(default_factory=lambda: [8, 16], min_length=1)
    zero_init: bool = Field(False, description="Test hook: all parameters start at zero")


class TrainConfig(BaseModel):
    """k-fold protocol on the development share, early stopping on validation accuracy"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    folds: int = Field(5, ge=2)
    train_fraction: float = Field(0.7, gt=0, lt=1)
    epochs_max: int = Field(30, ge=1)
    patience: int = Field(5, ge=0)
    learning_rate: float = Field(0.01, gt=0)
    momentum: float = Field(0.9, ge=0, lt=1)
    batch_size: int = Field(16, ge=1)
    split: Literal["stratified", "manifest"] = "stratified"
    seed: Optional[int] = Field(None, description="Defaults to the experiment's train sub-seed")
