"""Configuration file support for bobnet."""

from pathlib import Path
from typing import Any, Dict, Optional

import toml
import yaml
from rich.console import Console

from bobnet.utils.config import RunConfig
from bobnet.utils.errors import ConfigError

console = Console(stderr=True)


def parse_key_value_text(text: str) -> Dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    data: Dict[str, str] = {}
    for line_number, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_number}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {line_number}: empty key")
        if key in data:
            raise ConfigError(f"line {line_number}: duplicate key {key!r}")
        data[key] = value
    return data


def coerce_value(key: str, value: Any, target: type) -> Any:
    """Convert a raw config value to the declared type of ``key``."""
    if isinstance(value, bool):
        raise ConfigError(f"{key}: boolean values are not accepted")
    try:
        if target is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            if isinstance(value, str) and not value.strip().lstrip("+-").isdigit():
                raise ValueError(value)
            return int(value)
        if target is float:
            return float(value)
        return "" if value is None else str(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{key}: expected {target.__name__}, got {value!r}") from e


def config_from_mapping(data: Dict[str, Any]) -> RunConfig:
    """Build a RunConfig from a flat mapping, rejecting unknown keys."""
    known = RunConfig.keys()
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    values = {key: coerce_value(key, value, known[key]) for key, value in data.items()}
    try:
        return RunConfig(**values)
    except ValueError as e:
        raise ConfigError(str(e)) from e


class ConfigManager:
    """Manages run configuration files for bobnet."""

    DEFAULT_CONFIG_PATHS = [
        Path("bobnet.cfg"),
        Path("bobnet.yaml"),
        Path("bobnet.toml"),
    ]

    def __init__(self) -> None:
        """Initialize configuration manager."""
        self.config = RunConfig()
        self.config_file: Optional[Path] = None

    def find_config_file(self) -> Optional[Path]:
        """Find the first available configuration file in the working directory."""
        for path in self.DEFAULT_CONFIG_PATHS:
            if path.exists():
                return path
        return None

    def load_config(self, config_file: Optional[Path] = None) -> RunConfig:
        """Load configuration from file; defaults when no file is given or found.

        Raises:
            ConfigError: unknown keys or values of the wrong type.
            OSError: the file cannot be read.
        """
        if config_file is None:
            config_file = self.find_config_file()
        elif isinstance(config_file, str):
            config_file = Path(config_file)

        if config_file is None:
            console.print("[dim]No configuration file found, using defaults[/dim]")
            self.config = RunConfig()
            return self.config

        self.config_file = config_file
        text = config_file.read_text(encoding="utf-8")

        if config_file.suffix in ('.yaml', '.yml'):
            data = yaml.safe_load(text) or {}
        elif config_file.suffix == '.toml':
            data = toml.loads(text)
        else:
            data = parse_key_value_text(text)

        if not isinstance(data, dict):
            raise ConfigError(f"{config_file}: expected a flat mapping of keys to values")

        self.config = config_from_mapping(data)
        return self.config

    def save_config(self, config_file: Path) -> None:
        """Save configuration to file in the format implied by its suffix."""
        config_file.parent.mkdir(parents=True, exist_ok=True)
        data = self.config.to_dict()

        with open(config_file, 'w', encoding='utf-8') as f:
            if config_file.suffix in ('.yaml', '.yml'):
                yaml.safe_dump(data, f, default_flow_style=False, sort_keys=False)
            elif config_file.suffix == '.toml':
                toml.dump(data, f)
            else:
                for key, value in data.items():
                    f.write(f"{key}={value}\n")

    def create_default_config(self, config_file: Path) -> None:
        """Create a default configuration file."""
        self.config = RunConfig()
        self.save_config(config_file)

    def get_config_template(self) -> str:
        """Get a configuration template as a string."""
        template = """# bobnet run configuration (key=value, '#' starts a comment)

# Slice preparation
target_spacing_mm=1.5     # isotropic in-plane resolution after resampling (1.0 for cardiac CTA)
min_input=224             # minimum training input size in pixels
max_rotation_deg=10.0     # rotation augmentation range (+/- degrees)

# Optimization
epochs=30
base_lr=0.01
decay_every=10            # epochs between learning-rate reductions
decay_factor=10
momentum=0.9              # Nesterov momentum coefficient
l2=0.0005                 # L2 weight on weights (not biases)
dropout=0.5               # dropout on the fully connected hidden layers
batch_size=64

# Model and fusion
channel_scale=1           # width multiplier, e.g. 1/4 for quick runs
threshold=0.5             # presence threshold for box fusion

# Reproducibility and bookkeeping
seed=0
history_csv=              # per-epoch CSV (empty disables)
snapshot_every=0          # intermediate checkpoint every k epochs (0 disables)
"""
        return template

    def print_config(self) -> None:
        """Print current configuration."""
        from rich.tree import Tree

        source = str(self.config_file) if self.config_file else "defaults"
        tree = Tree(f"Run configuration ({source})")

        groups = {
            "Slices": ["target_spacing_mm", "min_input", "max_rotation_deg"],
            "Optimization": ["epochs", "base_lr", "decay_every", "decay_factor",
                             "momentum", "l2", "dropout", "batch_size"],
            "Model": ["channel_scale", "threshold"],
            "Run": ["seed", "history_csv", "snapshot_every"],
        }
        data = self.config.to_dict()
        for title, keys in groups.items():
            branch = tree.add(title)
            for key in keys:
                branch.add(f"{key}: {data[key]!r}" if data[key] == "" else f"{key}: {data[key]}")

        Console().print(tree)

    def merge_with_cli_args(self, **kwargs: Any) -> RunConfig:
        """Override configuration values with CLI arguments that were given."""
        overrides = {key: value for key, value in kwargs.items() if value is not None}
        if overrides:
            merged = self.config.to_dict()
            merged.update(overrides)
            self.config = config_from_mapping(merged)
        return self.config
