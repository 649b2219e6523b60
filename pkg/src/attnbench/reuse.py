"""Attention map reuse: schedules, model construction and forward pass.

A schedule partitions the L layers into consecutive groups. The first
layer of each group (the leader) computes the per-head attention maps;
the remaining members (followers) apply those maps to their own values.
Follower layers carry no query/key side at all — their parameter budget
is spent on a doubled value/output width instead.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from . import layers
from .config import ModelConfig
from .errors import ConfigError
from .matrix import Matrix
from .weights import ModelWeights, build_model


@dataclass
class AttentionCounter:
    """Per-forward tally of computed vs reused attention maps."""
    maps_computed: int = 0
    maps_reused: int = 0

    def reset(self) -> None:
        self.maps_computed = 0
        self.maps_reused = 0

    @property
    def total(self) -> int:
        return self.maps_computed + self.maps_reused


@dataclass(frozen=True)
class ReuseSchedule:
    """Ordered partition of layers into (leader, followers) groups."""
    groups: tuple[tuple[int, tuple[int, ...]], ...]
    group_size: int | None  # uniform M for AxB schedules, else None

    @classmethod
    def from_groups(cls, groups, group_size: int | None = None) -> "ReuseSchedule":
        norm = []
        expected = 0
        for g in groups:
            members = list(g)
            if not members:
                raise ConfigError("reuse groups must be non-empty")
            if members != list(range(members[0], members[0] + len(members))):
                raise ConfigError(
                    f"reuse group {members} is not a run of consecutive layers"
                )
            if members[0] != expected:
                raise ConfigError(
                    f"reuse groups must partition the layers in order; "
                    f"expected group starting at layer {expected}, got {members[0]}"
                )
            expected = members[-1] + 1
            norm.append((members[0], tuple(members[1:])))
        if not norm:
            raise ConfigError("a reuse schedule needs at least one group")
        return cls(groups=tuple(norm), group_size=group_size)

    @property
    def group_count(self) -> int:
        return len(self.groups)

    @property
    def num_layers(self) -> int:
        leader, members = self.groups[-1]
        return (members[-1] if members else leader) + 1

    def follower_flags(self) -> list[bool]:
        flags = [False] * self.num_layers
        for _, members in self.groups:
            for m in members:
                flags[m] = True
        return flags

    def group_ends(self) -> list[bool]:
        ends = [False] * self.num_layers
        for leader, members in self.groups:
            ends[members[-1] if members else leader] = True
        return ends

    def has_followers(self) -> bool:
        return any(members for _, members in self.groups)

    def describe(self) -> str:
        if self.group_size is not None:
            return f"{self.group_size}x{self.group_count}"
        return "+".join(str(1 + len(m)) for _, m in self.groups)


def parse_reuse_config(text: str, num_layers: int) -> ReuseSchedule:
    """Parse "AxB": B groups of A consecutive layers ("1xL" = baseline)."""
    m = re.fullmatch(r"(\d+)[x](\d+)", text.strip())
    if not m:
        raise ConfigError(f"reuse config must look like AxB, got {text!r}")
    a, b = int(m.group(1)), int(m.group(2))
    if a < 1 or b < 1:
        raise ConfigError(f"reuse config needs positive group sizes, got {text!r}")
    if a * b != num_layers:
        raise ConfigError(
            f"reuse config {a}x{b} covers {a * b} layers, model has {num_layers}"
        )
    groups = [range(g * a, (g + 1) * a) for g in range(b)]
    return ReuseSchedule.from_groups(groups, group_size=a)


def singleton_schedule(num_layers: int) -> ReuseSchedule:
    return parse_reuse_config(f"1x{num_layers}", num_layers)


def build_reuse_model(cfg: ModelConfig, schedule: ReuseSchedule) -> ModelWeights:
    """Freshly initialize a model shaped for the given schedule.

    Follower layers drop the query/key side (projections, position
    projection, persistent keys) and double their value/output width;
    leader layers keep the baseline shape, so a 1xL schedule reproduces
    init_weights() bitwise. Head count is preserved everywhere.
    """
    if schedule.num_layers != cfg.num_layers:
        raise ConfigError(
            f"schedule covers {schedule.num_layers} layers, "
            f"model has {cfg.num_layers}"
        )
    value_mult = 2 if schedule.has_followers() else 1
    cfg = replace(cfg, value_mult=value_mult)
    return build_model(cfg, schedule.follower_flags(), value_mult)


def validate_weights_for_schedule(model: ModelWeights, schedule: ReuseSchedule) -> None:
    if schedule.num_layers != model.config.num_layers:
        raise ConfigError(
            f"schedule covers {schedule.num_layers} layers, "
            f"model has {model.config.num_layers}"
        )
    for i, is_follower in enumerate(schedule.follower_flags()):
        has_qk = model.layers[i].attention.has_qk
        if is_follower and has_qk:
            raise ConfigError(
                f"layer {i} is a follower in the schedule but owns query/key weights"
            )
        if not is_follower and not has_qk:
            raise ConfigError(
                f"layer {i} leads its group but has no query/key weights"
            )


def reuse_forward(model: ModelWeights, schedule: ReuseSchedule, x: Matrix,
                  counter: AttentionCounter | None = None) -> Matrix:
    """Forward pass sharing each group leader's attention maps."""
    validate_weights_for_schedule(model, schedule)
    return layers.forward(model, x, schedule=schedule, counter=counter)
