"""Training configuration and the flat ``key = value`` config format."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

from .dropout import MODES, DropoutConfig
from .errors import ConfigError, InputError


@dataclass(frozen=True)
class TrainConfig:
    env_id: str | None = None
    actors: int = 8
    horizon: int = 256
    lr0: float = 2.5e-4
    lr_decay: str = "linear"
    total_steps: int = 10_000_000
    epochs: int = 4
    minibatch_size: int = 512
    gae_lambda: float = 0.95
    gamma: float = 0.99
    clip_epsilon: float = 0.1
    c1: float = 1.0
    c2: float = 0.01
    dropout: DropoutConfig = field(default_factory=DropoutConfig)
    seed: int = 0
    advantage_normalization: bool = False
    # artifact-level settings
    trunk: tuple[int, ...] = (64, 64)
    activation: str = "tanh"
    checkpoint_every: int = 50
    return_window: int = 100
    skip_final_dropout: bool = False

    def __post_init__(self):
        checks = [
            ("actors", self.actors >= 1, "a positive integer"),
            ("horizon", self.horizon >= 1, "a positive integer"),
            ("lr0", self.lr0 >= 0 and math.isfinite(self.lr0), "a non-negative real"),
            ("lr_decay", self.lr_decay in ("linear", "constant"), "linear or constant"),
            ("total_steps", self.total_steps >= 1, "a positive integer"),
            ("epochs", self.epochs >= 1, "a positive integer"),
            ("minibatch_size", 1 <= self.minibatch_size <= self.batch_size,
             f"an integer in [1, actors*horizon = {self.batch_size}]"),
            ("gae_lambda", 0.0 <= self.gae_lambda <= 1.0, "a real in [0, 1]"),
            ("gamma", 0.0 <= self.gamma <= 1.0, "a real in [0, 1]"),
            ("clip_epsilon", 0.0 < self.clip_epsilon < 1.0, "a real in (0, 1)"),
            ("c1", self.c1 >= 0, "a non-negative real"),
            ("c2", self.c2 >= 0, "a non-negative real"),
            ("seed", 0 <= self.seed < 2**64, "an unsigned 64-bit integer"),
            ("trunk", len(self.trunk) >= 1 and all(w >= 1 for w in self.trunk),
             "comma-separated positive widths"),
            ("activation", self.activation in ("tanh", "relu"), "tanh or relu"),
            ("checkpoint_every", self.checkpoint_every >= 1, "a positive integer"),
            ("return_window", self.return_window >= 1, "a positive integer"),
        ]
        for key, ok, expected in checks:
            if not ok:
                raise ConfigError(f"{key} must be {expected}, got {getattr(self, key)!r}", key=key)

    @property
    def batch_size(self) -> int:
        return self.actors * self.horizon

    def items(self):
        """Flat ``(key, value)`` pairs in declaration order, dropout expanded."""
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name == "dropout":
                for df in dataclasses.fields(DropoutConfig):
                    yield f"dropout.{df.name}", getattr(value, df.name)
            else:
                yield f.name, value

    def resolved_text(self) -> str:
        return "".join(f"{k} = {_format(v)}\n" for k, v in self.items())


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# ---------------------------------------------------------------------------
# value parsers


def _int(text):
    try:
        return int(text)
    except ValueError:
        f = float(text)
        if not f.is_integer():
            raise ValueError(text)
        return int(f)


def _float(text):
    v = float(text)
    if math.isnan(v):
        raise ValueError(text)
    return v


def _bool(text):
    t = text.lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ValueError(text)


def _widths(text):
    return tuple(_int(w) for w in text.replace(" ", "").split(",") if w)


def _str(text):
    return text


def _opt_str(text):
    return text or None


_PARSERS = {
    "env_id": (_opt_str, "an environment id"),
    "actors": (_int, "an integer"),
    "horizon": (_int, "an integer"),
    "lr0": (_float, "a real number"),
    "lr_decay": (_str, "linear or constant"),
    "total_steps": (_int, "an integer"),
    "epochs": (_int, "an integer"),
    "minibatch_size": (_int, "an integer"),
    "gae_lambda": (_float, "a real number"),
    "gamma": (_float, "a real number"),
    "clip_epsilon": (_float, "a real number"),
    "c1": (_float, "a real number"),
    "c2": (_float, "a real number"),
    "dropout.mode": (_str, " | ".join(MODES)),
    "dropout.r": (_float, "a real number in [0,1]"),
    "dropout.delta_plus": (_float, "a real number"),
    "dropout.delta_minus": (_float, "a real number"),
    "seed": (_int, "an unsigned integer"),
    "advantage_normalization": (_bool, "true or false"),
    "trunk": (_widths, "comma-separated integers, e.g. 64,64"),
    "activation": (_str, "tanh or relu"),
    "checkpoint_every": (_int, "an integer"),
    "return_window": (_int, "an integer"),
    "skip_final_dropout": (_bool, "true or false"),
}

KEYS = tuple(_PARSERS)


def _parse_line(text: str, where: str):
    if "=" not in text:
        raise ConfigError(f"{where}: expected 'key = value', got {text!r}", line=where)
    key, value = (part.strip() for part in text.split("=", 1))
    if key not in _PARSERS:
        raise ConfigError(f"{where}: unknown key {key!r}; known keys: {', '.join(KEYS)}",
                          key=key, line=where)
    parser, expected = _PARSERS[key]
    try:
        return key, parser(value)
    except (ValueError, TypeError):
        raise ConfigError(f"{where}: {key} expects {expected}, got {value!r}",
                          key=key, line=where) from None


def build_config(values: dict) -> TrainConfig:
    """Construct a TrainConfig from flat keys; missing keys keep defaults."""
    top = {k: v for k, v in values.items() if not k.startswith("dropout.")}
    drop = {k.split(".", 1)[1]: v for k, v in values.items() if k.startswith("dropout.")}
    try:
        dropout = DropoutConfig(**drop)
    except InputError as exc:
        key = next((f"dropout.{k}" for k in ("mode", "r") if k in drop), "dropout")
        raise ConfigError(str(exc), key=key) from None
    return TrainConfig(dropout=dropout, **top)


def parse_config(path=None, overrides=()) -> TrainConfig:
    """Read a ``key = value`` file (``#`` starts a comment), then apply overrides."""
    values = {}
    if path is not None:
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            key, value = _parse_line(text, f"{path}:{lineno}")
            values[key] = value
    for i, item in enumerate(overrides, start=1):
        key, value = _parse_line(item, f"override {i}")
        values[key] = value
    return build_config(values)
