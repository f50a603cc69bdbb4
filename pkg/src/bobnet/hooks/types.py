"""Types for the training hook system."""

from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Dict, List, Optional

if TYPE_CHECKING:
    from bobnet.evaluation.metrics import DetectionReport
    from bobnet.model.bobnet import BoBNet


@dataclass
class EpochContext:
    """State of training at the end of an epoch."""
    epoch: int
    epochs: int
    loss: float
    learning_rate: float
    validation: "DetectionReport"
    plane_f1: Dict[str, float]
    seconds: float
    model: "BoBNet"
    structure_names: List[str]

    @property
    def validation_f1(self) -> float:
        return self.validation.f1


@dataclass
class HookResult:
    """Result returned from a hook."""
    success: bool
    message: Optional[str] = None
    data: Optional[Dict[str, Any]] = None
    error: Optional[str] = None
