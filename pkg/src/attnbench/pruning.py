"""Gated attention-head pruning.

Each head carries a gate logit. During gate training the gates are
relaxed binary-Concrete samples in (0, 1); the gated attention output
is rescaled by H / sum(g) to keep feature statistics stable. A sparsity
loss (mean open probability) weighted by ``lam`` pushes gates shut.
After training, heads whose deterministic gate is closed are physically
removed and the rescaling is folded into the output projection, so the
pruned model needs no gate machinery at inference.

Gate logits are trained with central finite differences on the total
loss, using common random numbers: the same gate noise and batch serve
both sides of every +/- pair. The task standing in for full language
model training is self-distillation: mean squared error against the
frozen, ungated model's own outputs.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from . import layers
from .config import ModelConfig
from .errors import ConfigError
from .matrix import Matrix
from .weights import AttentionWeights, LayerWeights, ModelWeights

DEFAULT_TEMPERATURE = 2.0 / 3.0


def _sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def binconcrete_gate(log_alpha: float, u: float, beta: float) -> float:
    """Stochastic relaxed gate: sigmoid((logit(u) + log_alpha) / beta)."""
    if not 0.0 < u < 1.0:
        raise ValueError(f"gate noise u must lie in (0, 1), got {u}")
    if beta <= 0.0:
        raise ConfigError(f"temperature must be positive, got {beta}")
    return _sigmoid((math.log(u) - math.log1p(-u) + log_alpha) / beta)


def deterministic_gate(log_alpha: float) -> float:
    """Hard gate used at inference: open iff sigmoid(log_alpha) > 0.5."""
    return 1.0 if _sigmoid(log_alpha) > 0.5 else 0.0


@dataclass
class GateSet:
    """Per-head gate logits for an L-layer, H-head model."""
    log_alpha: list[list[float]]
    temperature: float = DEFAULT_TEMPERATURE
    mode: str = "stochastic"  # or "deterministic"
    lam: float = 0.0

    def __post_init__(self):
        if self.mode not in ("stochastic", "deterministic"):
            raise ConfigError(f"gate mode must be stochastic or deterministic, got {self.mode!r}")
        if self.lam < 0.0:
            raise ConfigError(f"sparsity coefficient must be >= 0, got {self.lam}")
        if self.temperature <= 0.0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")

    @classmethod
    def uniform(cls, num_layers: int, heads: int, log_alpha: float = 1.0,
                **kwargs) -> "GateSet":
        rows = [[log_alpha] * heads for _ in range(num_layers)]
        return cls(rows, **kwargs)

    @property
    def num_gates(self) -> int:
        return sum(len(row) for row in self.log_alpha)

    def open_count(self) -> int:
        return sum(1 for row in self.log_alpha for la in row if la > 0.0)

    def binary_rows(self) -> list[list[float]]:
        return [[deterministic_gate(la) for la in row] for row in self.log_alpha]

    def sample_rows(self, noise: list[list[float]]) -> list[list[float]]:
        return [
            [binconcrete_gate(la, u, self.temperature) for la, u in zip(row, urow)]
            for row, urow in zip(self.log_alpha, noise)
        ]

    def rows(self, noise=None) -> list[list[float]]:
        if self.mode == "deterministic":
            return self.binary_rows()
        if noise is None:
            raise ConfigError("stochastic gates need a noise matrix")
        return self.sample_rows(noise)


def gated_mhsa(x: Matrix, w: AttentionWeights, gates, config: ModelConfig) -> Matrix:
    """(H / sum g) * sum_h g_h SA_h(x) W_O_h + b_O (plain MHSA, gated)."""
    if len(gates) != w.heads:
        raise ConfigError(f"{len(gates)} gates for a {w.heads}-head layer")
    for g in gates:
        if not 0.0 <= g <= 1.0:
            raise ConfigError(f"gate values must lie in [0, 1], got {g}")
    out, _ = layers._attention_core(w, x, config.head_dim, gate_row=list(gates))
    return out


def gated_forward(model: ModelWeights, x: Matrix, gate_rows) -> Matrix:
    """Full forward with per-layer per-head gate values."""
    return layers.forward(model, x, gates=gate_rows)


def sparsity_loss(gates: GateSet) -> float:
    """Expected fraction of open gates: mean sigmoid(log_alpha)."""
    return math.fsum(
        _sigmoid(la) for row in gates.log_alpha for la in row
    ) / gates.num_gates


def total_loss(task_loss: float, gates: GateSet) -> float:
    return task_loss + gates.lam * sparsity_loss(gates)


def sparsity_ratio(pruned: int, total: int) -> float:
    """Pruned heads over total heads before pruning."""
    if total <= 0:
        raise ValueError(f"total head count must be positive, got {total}")
    if not 0 <= pruned <= total:
        raise ValueError(f"pruned count {pruned} out of range [0, {total}]")
    return pruned / total


# --------------------------------------------------------------------
# synthetic task and gate training
# --------------------------------------------------------------------

def mse(a: Matrix, b: Matrix) -> float:
    n = a.rows * a.cols
    return math.fsum((x - y) ** 2 for x, y in zip(a.data, b.data)) / n


class SyntheticTask:
    """Self-distillation batches: inputs plus the ungated model's outputs.

    Deterministic for a fixed (model, seed); targets are computed once
    at construction against the frozen weights.
    """

    def __init__(self, model: ModelWeights, seq_len: int = 12,
                 n_batches: int = 4, seed: int = 0):
        rng = random.Random(seed)
        d = model.config.dim
        self.inputs = [
            Matrix.uniform(seq_len, d, rng, -1.0, 1.0) for _ in range(n_batches)
        ]
        self.targets = [layers.forward(model, x) for x in self.inputs]

    def batch(self, step: int):
        i = step % len(self.inputs)
        return self.inputs[i], self.targets[i]


@dataclass
class GateTrainStep:
    step: int
    sparsity_loss: float
    open_gates: int
    task_loss: float


def train_gates(model: ModelWeights, gates: GateSet, task: SyntheticTask,
                steps: int, learning_rate: float, seed: int = 0,
                fd_step: float = 1e-2) -> tuple[GateSet, list[GateTrainStep]]:
    """Plain gradient descent on gate logits via central finite differences.

    Within one step, every +/- pair of loss evaluations shares the same
    gate noise and batch (common random numbers), and all coordinates
    are updated together from the gradient at the step's starting point.
    Model weights stay frozen; only log_alpha moves.
    """
    rng = random.Random(seed)
    la = [list(row) for row in gates.log_alpha]
    num_layers = len(la)
    heads = len(la[0]) if num_layers else 0
    beta = gates.temperature
    lam = gates.lam
    history: list[GateTrainStep] = []

    def noise_matrix():
        # keep u strictly inside (0, 1)
        return [
            [min(max(rng.random(), 1e-9), 1.0 - 1e-9) for _ in range(heads)]
            for _ in range(num_layers)
        ]

    def task_mse(x, target, noise):
        rows = [
            [binconcrete_gate(la[l][h], noise[l][h], beta) for h in range(heads)]
            for l in range(num_layers)
        ]
        return mse(layers.forward(model, x, gates=rows), target)

    def loss_at(x, target, noise):
        t = task_mse(x, target, noise)
        s = math.fsum(_sigmoid(v) for row in la for v in row) / (num_layers * heads)
        return t + lam * s, t

    for step in range(steps):
        x, target = task.batch(step)
        noise = noise_matrix()
        base_total, base_task = loss_at(x, target, noise)
        if not math.isfinite(base_total):
            raise RuntimeError(f"non-finite loss at step {step}: {base_total}")
        history.append(GateTrainStep(
            step=step,
            sparsity_loss=math.fsum(_sigmoid(v) for row in la for v in row)
            / (num_layers * heads),
            open_gates=sum(1 for row in la for v in row if v > 0.0),
            task_loss=base_task,
        ))
        grad = [[0.0] * heads for _ in range(num_layers)]
        for l in range(num_layers):
            for h in range(heads):
                orig = la[l][h]
                la[l][h] = orig + fd_step
                up, _ = loss_at(x, target, noise)
                la[l][h] = orig - fd_step
                down, _ = loss_at(x, target, noise)
                la[l][h] = orig
                if not (math.isfinite(up) and math.isfinite(down)):
                    raise RuntimeError(f"non-finite loss at step {step}, gate ({l},{h})")
                grad[l][h] = (up - down) / (2.0 * fd_step)
        for l in range(num_layers):
            for h in range(heads):
                la[l][h] -= learning_rate * grad[l][h]

    trained = GateSet(la, temperature=beta, mode=gates.mode, lam=lam)
    return trained, history


def fd_gradient(model: ModelWeights, gates: GateSet, task: SyntheticTask,
                step: int = 0, seed: int = 0, fd_step: float = 1e-2):
    """One central-difference gradient of the total loss (no update).

    Exposed for gradient verification: run twice with different fd_step
    values and compare coordinate-wise.
    """
    rng = random.Random(seed)
    la = [list(row) for row in gates.log_alpha]
    num_layers, heads = len(la), len(la[0])
    beta, lam = gates.temperature, gates.lam
    noise = [
        [min(max(rng.random(), 1e-9), 1.0 - 1e-9) for _ in range(heads)]
        for _ in range(num_layers)
    ]
    x, target = task.batch(step)

    def loss():
        rows = [
            [binconcrete_gate(la[l][h], noise[l][h], beta) for h in range(heads)]
            for l in range(num_layers)
        ]
        t = mse(layers.forward(model, x, gates=rows), target)
        s = math.fsum(_sigmoid(v) for row in la for v in row) / (num_layers * heads)
        return t + lam * s

    grad = [[0.0] * heads for _ in range(num_layers)]
    for l in range(num_layers):
        for h in range(heads):
            orig = la[l][h]
            la[l][h] = orig + fd_step
            up = loss()
            la[l][h] = orig - fd_step
            down = loss()
            la[l][h] = orig
            grad[l][h] = (up - down) / (2.0 * fd_step)
    return grad


# --------------------------------------------------------------------
# surgery
# --------------------------------------------------------------------

def _filter(items, keep):
    return [items[h] for h in keep] if items is not None else None


def prune_heads(model: ModelWeights, gates: GateSet) -> ModelWeights:
    """Physically remove closed heads; fold H/H_kept into W_O.

    The returned model shares unchanged weight buffers with the input
    (weights are immutable by convention); the output projection is
    rebuilt from the surviving head blocks, pre-scaled so the pruned
    forward needs no runtime compensation. Layers that lose every head
    degenerate to emitting their output bias.
    """
    if gates.mode != "deterministic":
        raise ConfigError("prune_heads needs a deterministic GateSet")
    if len(gates.log_alpha) != model.config.num_layers:
        raise ConfigError(
            f"gate set covers {len(gates.log_alpha)} layers, "
            f"model has {model.config.num_layers}"
        )
    binary = gates.binary_rows()
    new_layers = []
    for lw, row in zip(model.layers, binary):
        a = lw.attention
        if len(row) != a.heads:
            raise ConfigError(f"{len(row)} gates for a {a.heads}-head layer")
        keep = [h for h, g in enumerate(row) if g == 1.0]
        kept = len(keep)
        total = a.heads
        if kept == total:
            scale = 1.0
        elif kept == 0:
            new_layers.append(LayerWeights(
                attention=AttentionWeights(
                    w_q=[] if a.has_qk else None, b_q=[] if a.has_qk else None,
                    w_k=[] if a.has_qk else None, b_k=[] if a.has_qk else None,
                    w_v=[], b_v=[], w_o=None, b_o=a.b_o, w_pos=a.w_pos,
                    p_k=[] if a.p_k is not None else None,
                    p_v=[] if a.p_v is not None else None,
                    value_mult=a.value_mult,
                ),
                ffs=lw.ffs, conv=lw.conv, lns=lw.lns,
            ))
            continue
        else:
            scale = total / kept
        block = a.w_o.rows // total  # vm * d_h rows per head
        w_o = Matrix(block * kept, a.w_o.cols)
        for new_h, h in enumerate(keep):
            src = a.w_o.data[h * block * a.w_o.cols:(h + 1) * block * a.w_o.cols]
            dst0 = new_h * block * a.w_o.cols
            if scale == 1.0:
                w_o.data[dst0:dst0 + len(src)] = src
            else:
                for i, v in enumerate(src):
                    w_o.data[dst0 + i] = scale * v
        new_layers.append(LayerWeights(
            attention=AttentionWeights(
                w_q=_filter(a.w_q, keep), b_q=_filter(a.b_q, keep),
                w_k=_filter(a.w_k, keep), b_k=_filter(a.b_k, keep),
                w_v=_filter(a.w_v, keep), b_v=_filter(a.b_v, keep),
                w_o=w_o, b_o=a.b_o, w_pos=a.w_pos,
                p_k=_filter(a.p_k, keep), p_v=_filter(a.p_v, keep),
                value_mult=a.value_mult,
            ),
            ffs=lw.ffs, conv=lw.conv, lns=lw.lns,
        ))
    return ModelWeights(config=model.config, layers=new_layers)
