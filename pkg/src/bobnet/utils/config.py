"""Run configuration for bobnet."""

from dataclasses import dataclass, fields
from fractions import Fraction
from typing import TYPE_CHECKING, Any, Dict

if TYPE_CHECKING:
    from bobnet.localization.fusion import FusionConfig
    from bobnet.nn.optimizer import OptimizerConfig


@dataclass
class RunConfig:
    """Training and inference settings read from a run configuration file."""

    # Slice preparation
    target_spacing_mm: float = 1.5
    min_input: int = 224
    max_rotation_deg: float = 10.0

    # Optimization
    epochs: int = 30
    base_lr: float = 0.01
    decay_every: int = 10
    decay_factor: float = 10.0
    momentum: float = 0.9
    l2: float = 0.0005
    dropout: float = 0.5
    batch_size: int = 64

    # Model and fusion
    channel_scale: str = "1"
    threshold: float = 0.5

    # Reproducibility and bookkeeping
    seed: int = 0
    history_csv: str = ""
    snapshot_every: int = 0

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        """Check value ranges; raises ValueError on the first violation."""
        if self.target_spacing_mm <= 0:
            raise ValueError("target_spacing_mm must be positive")
        if self.min_input < 64:
            raise ValueError("min_input must be at least 64")
        if not 0 <= self.max_rotation_deg <= 180:
            raise ValueError("max_rotation_deg must be in [0, 180]")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.base_lr <= 0:
            raise ValueError("base_lr must be positive")
        if self.decay_every < 1:
            raise ValueError("decay_every must be positive")
        if self.decay_factor <= 0:
            raise ValueError("decay_factor must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.l2 < 0:
            raise ValueError("l2 must be nonnegative")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must be in (0, 1)")
        if self.scale <= 0:
            raise ValueError("channel_scale must be positive")
        if self.snapshot_every < 0:
            raise ValueError("snapshot_every must be nonnegative")

    @property
    def scale(self) -> Fraction:
        """channel_scale as an exact fraction."""
        try:
            return Fraction(str(self.channel_scale))
        except (ValueError, ZeroDivisionError) as e:
            raise ValueError(f"channel_scale is not a rational number: {self.channel_scale!r}") from e

    @classmethod
    def keys(cls) -> Dict[str, Any]:
        """Known keys and their value types."""
        return {f.name: f.type for f in fields(cls)}

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def optimizer_config(self) -> "OptimizerConfig":
        """Optimizer settings for the trainer."""
        from bobnet.nn.optimizer import OptimizerConfig

        return OptimizerConfig(
            base_lr=self.base_lr,
            decay_factor=self.decay_factor,
            decay_every_epochs=self.decay_every,
            momentum=self.momentum,
            l2_weight=self.l2,
            epochs=self.epochs,
            dropout_rate=self.dropout,
            batch_size=self.batch_size,
        )

    def fusion_config(self) -> "FusionConfig":
        """Fusion settings for localization."""
        from bobnet.localization.fusion import FusionConfig

        return FusionConfig(threshold=self.threshold)
