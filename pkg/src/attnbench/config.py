"""Model architecture configuration, presets and config-file parsing."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace

from .errors import ConfigError

LAYER_KINDS = ("transformer", "conformer", "all_attention")
ACTIVATIONS = ("relu", "swish", "gelu")


@dataclass(frozen=True)
class ModelConfig:
    layer_kind: str
    num_layers: int
    dim: int
    heads: int
    ff_mult: int = 4
    conv_kernel: int = 31
    persistent_slots: int = 0
    activation: str = "relu"
    value_mult: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.layer_kind not in LAYER_KINDS:
            raise ConfigError(
                f"layer_kind must be one of {LAYER_KINDS}, got {self.layer_kind!r}"
            )
        if self.num_layers < 1:
            raise ConfigError(f"num_layers must be >= 1, got {self.num_layers}")
        if self.dim < 1 or self.heads < 1:
            raise ConfigError(f"dim and heads must be >= 1, got d={self.dim} H={self.heads}")
        if self.dim % self.heads != 0:
            raise ConfigError(
                f"dim {self.dim} is not divisible by heads {self.heads}"
            )
        if self.ff_mult < 1:
            raise ConfigError(f"ff_mult must be >= 1, got {self.ff_mult}")
        if self.conv_kernel < 1 or self.conv_kernel % 2 == 0:
            raise ConfigError(
                f"conv_kernel must be a positive odd count, got {self.conv_kernel}"
            )
        if self.persistent_slots < 0:
            raise ConfigError(
                f"persistent_slots must be >= 0, got {self.persistent_slots}"
            )
        if self.persistent_slots and self.layer_kind != "all_attention":
            raise ConfigError("persistent_slots only apply to all_attention models")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(
                f"activation must be one of {ACTIVATIONS}, got {self.activation!r}"
            )
        if self.value_mult not in (1, 2):
            raise ConfigError(f"value_mult must be 1 or 2, got {self.value_mult}")

    @property
    def head_dim(self) -> int:
        return self.dim // self.heads

    @property
    def causal(self) -> bool:
        # all_attention runs as an autoregressive LM; the speech-style
        # kinds attend over the full sequence.
        return self.layer_kind == "all_attention"

    def describe(self) -> str:
        parts = [self.layer_kind, f"L{self.num_layers}", f"d{self.dim}", f"H{self.heads}"]
        if self.layer_kind == "all_attention":
            parts.append(f"N{self.persistent_slots}")
        return " ".join(parts)


PRESETS = {
    # 16-layer speech encoder, d=256, 4 heads, kernel 31
    "conformer-m": ModelConfig(
        layer_kind="conformer", num_layers=16, dim=256, heads=4,
        ff_mult=4, conv_kernel=31, activation="relu",
    ),
    # 16-layer autoregressive LM with 8 heads and 64 persistent slots
    "allattention-lm": ModelConfig(
        layer_kind="all_attention", num_layers=16, dim=512, heads=8,
        persistent_slots=64,
    ),
}


def preset(name: str, seed: int | None = None) -> ModelConfig:
    try:
        cfg = PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        ) from None
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    return cfg


_CONFIG_FIELDS = {f.name: f.type for f in fields(ModelConfig)}
_EXTRA_KEYS = ("reuse", "reuse_groups")


def dump_config(cfg: ModelConfig) -> dict:
    return {f.name: getattr(cfg, f.name) for f in fields(ModelConfig)}


def config_from_dict(doc: dict, context: str = "config") -> tuple[ModelConfig, dict]:
    """Build a ModelConfig from a parsed document.

    Returns the config plus any extra (reuse-related) keys. Unknown keys
    are rejected.
    """
    kwargs = {}
    extras = {}
    for key, value in doc.items():
        if key in _CONFIG_FIELDS:
            kwargs[key] = value
        elif key in _EXTRA_KEYS:
            extras[key] = value
        else:
            raise ConfigError(f"{context}: unknown key {key!r}")
    missing = {"layer_kind", "num_layers", "dim", "heads"} - set(kwargs)
    if missing:
        raise ConfigError(f"{context}: missing required keys {sorted(missing)}")
    try:
        cfg = ModelConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{context}: {exc}") from None
    return cfg, extras


def _coerce_scalar(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            continue
    return text


def load_config(path: str) -> tuple[ModelConfig, dict]:
    """Parse a JSON or key=value config file.

    JSON documents may carry "reuse": "AxB" or "reuse_groups": [[...]];
    the plain-text format supports reuse=AxB. Unknown keys are rejected
    with the offending line.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top-level JSON value must be an object")
        return config_from_dict(doc, context=path)
    doc = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        doc[key.strip()] = _coerce_scalar(value.strip())
    return config_from_dict(doc, context=path)
