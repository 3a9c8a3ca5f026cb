"""PPO-CLIP with variance-limiting sample dropout, plus an exact variance lab."""
from .config import TrainConfig, parse_config
from .dropout import DropoutConfig, apply_dropout, phi_values
from .errors import (
    ConfigError,
    DPPOError,
    FormatError,
    InputError,
    NumericError,
    UsageError,
    VerificationError,
)
from .trainer import evaluate, train
from .variance import SupportDistribution, verify_identities

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DPPOError",
    "DropoutConfig",
    "FormatError",
    "InputError",
    "NumericError",
    "SupportDistribution",
    "TrainConfig",
    "UsageError",
    "VerificationError",
    "apply_dropout",
    "evaluate",
    "parse_config",
    "phi_values",
    "train",
    "verify_identities",
]
