"""Layer families and the model forward pass.

Three layer kinds share one attention core:

* transformer — post-LN MHSA + FF, as in the classic encoder layer.
* conformer   — half-step FF, relative-position MHSA, conv module,
                half-step FF, each pre-normed, with a closing LN.
* all_attention — causal MHSA with per-head persistent key/value slots
                and no FF; residual + LN close the layer.

The forward pass optionally consumes a reuse schedule (follower layers
apply the group leader's attention maps to their own values), per-head
gates, an attention-computation counter and a submodule timer. Baseline
and singleton-schedule runs take literally the same code path, so a
1xL schedule is bitwise identical to the plain forward.
"""

from __future__ import annotations

import math
from time import perf_counter_ns

from .config import ModelConfig
from .errors import ConfigError, ShapeError
from .matrix import Matrix
from .tensor import (
    add,
    add_bias_,
    add_scaled,
    causal_softmax_rows,
    concat_rows,
    copy_into_cols_,
    depthwise_conv1d,
    layer_norm,
    matmul,
    pointwise_nonlinear,
    rel_shift_add_,
    relative_position_table,
    scale_,
    slice_cols,
    softmax_rows,
)
from .weights import AttentionWeights, FeedForwardWeights, LayerWeights, ModelWeights


def project_qkv(x: Matrix, w: AttentionWeights, head: int):
    """Per-head query/key/value projections (x W + b)."""
    if head >= w.heads:
        raise ShapeError(f"head {head} out of range, layer has {w.heads}")
    if not w.has_qk:
        raise ConfigError("layer has no query/key side (reuse follower)")
    q = add_bias_(matmul(x, w.w_q[head]), w.b_q[head])
    k = add_bias_(matmul(x, w.w_k[head]), w.b_k[head])
    v = add_bias_(matmul(x, w.w_v[head]), w.b_v[head])
    return q, k, v


def attention_map(q: Matrix, k: Matrix) -> Matrix:
    """softmax(q kᵀ / sqrt(d_h)); each row is a probability distribution."""
    if q.cols != k.cols:
        raise ShapeError(f"attention_map dim mismatch: {q.shape} vs {k.shape}")
    logits = matmul(q, k, transpose_b=True)
    scale_(logits, 1.0 / math.sqrt(q.cols))
    return softmax_rows(logits)


def feed_forward(x: Matrix, w: FeedForwardWeights, activation: str) -> Matrix:
    h = add_bias_(matmul(x, w.w1), w.b1)
    h = pointwise_nonlinear(h, activation)
    return add_bias_(matmul(h, w.w2), w.b2)


def _attention_core(aw: AttentionWeights, y: Matrix, head_dim: int, *,
                    causal: bool = False, use_pos: bool = False,
                    use_persistent: bool = False, maps_in=None, gate_row=None):
    """Shared multi-head attention: returns (output, per-head maps).

    When maps_in is given (reuse follower) the query/key side is skipped
    entirely and the given maps are applied to this layer's values.
    gate_row scales per-head contributions and triggers the H/sum(g)
    compensation; a fully closed layer degenerates to the output bias.
    """
    t = y.rows
    heads = aw.heads
    if heads == 0:
        return add_bias_(Matrix(t, len(aw.b_o)), aw.b_o), []

    if maps_in is None:
        if not aw.has_qk:
            raise ConfigError(
                "layer has no query/key side; run it under its reuse schedule"
            )
        rel_proj = None
        if use_pos:
            if aw.w_pos is None:
                raise ConfigError("layer cannot compute maps: no position projection")
            rel_proj = matmul(relative_position_table(t, y.cols), aw.w_pos)
        maps = []
        for h in range(heads):
            q = add_bias_(matmul(y, aw.w_q[h]), aw.b_q[h])
            k = add_bias_(matmul(y, aw.w_k[h]), aw.b_k[h])
            if use_persistent and aw.p_k is not None:
                k = concat_rows(k, aw.p_k[h])
            logits = matmul(q, k, transpose_b=True)
            if rel_proj is not None:
                rel_h = slice_cols(rel_proj, h * head_dim, (h + 1) * head_dim)
                rel_shift_add_(logits, matmul(q, rel_h, transpose_b=True))
            scale_(logits, 1.0 / math.sqrt(head_dim))
            maps.append(causal_softmax_rows(logits, t) if causal
                        else softmax_rows(logits))
    else:
        if len(maps_in) != heads:
            raise ShapeError(
                f"got {len(maps_in)} reused maps for a {heads}-head layer"
            )
        maps = maps_in

    width = aw.value_mult * head_dim
    concat = Matrix(t, heads * width)
    gate_total = 0.0
    for h in range(heads):
        g = 1.0 if gate_row is None else gate_row[h]
        gate_total += g
        if g == 0.0:
            continue  # closed head: contributes exact zeros
        v = add_bias_(matmul(y, aw.w_v[h]), aw.b_v[h])
        if use_persistent and aw.p_v is not None:
            v = concat_rows(v, aw.p_v[h])
        sa = matmul(maps[h], v)
        if g != 1.0:
            scale_(sa, g)
        copy_into_cols_(concat, sa, h * width)
    out = matmul(concat, aw.w_o)
    if gate_row is not None and 0.0 < gate_total != heads:
        scale_(out, heads / gate_total)
    return add_bias_(out, aw.b_o), maps


def mhsa(x: Matrix, w: AttentionWeights, config: ModelConfig) -> Matrix:
    """Plain multi-head self-attention: Concat_h(A_h V_h) W_O + b_O."""
    if x.cols != config.dim:
        raise ShapeError(f"input cols {x.cols} != model dim {config.dim}")
    out, _ = _attention_core(w, x, config.head_dim)
    return out


def _conv_block(y: Matrix, lw: LayerWeights) -> Matrix:
    c = lw.conv
    h = add_bias_(matmul(y, c.pw1), c.b_pw1)
    h = pointwise_nonlinear(h, "glu")
    h = add_bias_(depthwise_conv1d(h, c.dw), c.b_dw)
    return add_bias_(matmul(h, c.pw2), c.b_pw2)


def _transformer_layer(x, lw, cfg, maps_in, gate_row, timer):
    t0 = perf_counter_ns() if timer else 0
    sa, maps = _attention_core(lw.attention, x, cfg.head_dim,
                               maps_in=maps_in, gate_row=gate_row)
    x = layer_norm(add(sa, x), lw.lns[0].gain, lw.lns[0].bias)
    if timer:
        timer.add("sa" if maps_in is None else "reuse_sa", perf_counter_ns() - t0)
        t0 = perf_counter_ns()
    f = feed_forward(x, lw.ffs[0], cfg.activation)
    x = layer_norm(add(f, x), lw.lns[1].gain, lw.lns[1].bias)
    if timer:
        timer.add("ff", perf_counter_ns() - t0)
    return x, maps


def _conformer_layer(x, lw, cfg, maps_in, gate_row, timer):
    t0 = perf_counter_ns() if timer else 0
    y = layer_norm(x, lw.lns[0].gain, lw.lns[0].bias)
    x = add_scaled(x, feed_forward(y, lw.ffs[0], cfg.activation), 0.5)
    if timer:
        timer.add("ff", perf_counter_ns() - t0)
        t0 = perf_counter_ns()
    y = layer_norm(x, lw.lns[1].gain, lw.lns[1].bias)
    sa, maps = _attention_core(lw.attention, y, cfg.head_dim, use_pos=True,
                               maps_in=maps_in, gate_row=gate_row)
    x = add(x, sa)
    if timer:
        timer.add("sa" if maps_in is None else "reuse_sa", perf_counter_ns() - t0)
        t0 = perf_counter_ns()
    y = layer_norm(x, lw.lns[2].gain, lw.lns[2].bias)
    x = add(x, _conv_block(y, lw))
    if timer:
        timer.add("conv", perf_counter_ns() - t0)
        t0 = perf_counter_ns()
    y = layer_norm(x, lw.lns[3].gain, lw.lns[3].bias)
    x = add_scaled(x, feed_forward(y, lw.ffs[1], cfg.activation), 0.5)
    if timer:
        timer.add("ff", perf_counter_ns() - t0)
        t0 = perf_counter_ns()
    x = layer_norm(x, lw.lns[4].gain, lw.lns[4].bias)
    if timer:
        timer.add("ln", perf_counter_ns() - t0)
    return x, maps


def _all_attention_layer(x, lw, cfg, maps_in, gate_row, timer):
    t0 = perf_counter_ns() if timer else 0
    sa, maps = _attention_core(lw.attention, x, cfg.head_dim, causal=True,
                               use_persistent=True, maps_in=maps_in,
                               gate_row=gate_row)
    if timer:
        timer.add("sa" if maps_in is None else "reuse_sa", perf_counter_ns() - t0)
        t0 = perf_counter_ns()
    x = layer_norm(add(sa, x), lw.lns[0].gain, lw.lns[0].bias)
    if timer:
        timer.add("ln", perf_counter_ns() - t0)
    return x, maps


_LAYER_FUNCS = {
    "transformer": _transformer_layer,
    "conformer": _conformer_layer,
    "all_attention": _all_attention_layer,
}


def transformer_layer(x: Matrix, lw: LayerWeights, cfg: ModelConfig) -> Matrix:
    return _transformer_layer(x, lw, cfg, None, None, None)[0]


def conformer_layer(x: Matrix, lw: LayerWeights, cfg: ModelConfig) -> Matrix:
    return _conformer_layer(x, lw, cfg, None, None, None)[0]


def all_attention_layer(x: Matrix, lw: LayerWeights, cfg: ModelConfig) -> Matrix:
    return _all_attention_layer(x, lw, cfg, None, None, None)[0]


def forward(model: ModelWeights, x: Matrix, schedule=None, gates=None,
            counter=None, timer=None) -> Matrix:
    """Run the layer stack.

    schedule: optional ReuseSchedule; followers consume the group
        leader's attention maps. None behaves as all-singleton groups.
    gates: optional per-layer gate rows (see pruning.gated_forward).
    counter: optional AttentionCounter (computed vs reused maps).
    timer: optional SubmoduleTimer for per-submodule latency breakdown.
    """
    cfg = model.config
    if x.cols != cfg.dim:
        raise ShapeError(f"input cols {x.cols} != model dim {cfg.dim}")
    layer_fn = _LAYER_FUNCS[cfg.layer_kind]
    followers = schedule.follower_flags() if schedule is not None else None
    group_ends = schedule.group_ends() if schedule is not None else None
    if followers is not None and len(followers) != cfg.num_layers:
        raise ConfigError(
            f"schedule covers {len(followers)} layers, model has {cfg.num_layers}"
        )
    group_maps = None
    for i, lw in enumerate(model.layers):
        is_follower = followers[i] if followers is not None else False
        if is_follower:
            if group_maps is None:
                raise RuntimeError(
                    f"reuse invariant violated: layer {i} follows no leader"
                )
            maps_in = group_maps
        else:
            maps_in = None
        gate_row = gates[i] if gates is not None else None
        x, maps = layer_fn(x, lw, cfg, maps_in, gate_row, timer)
        if counter is not None:
            if is_follower:
                counter.maps_reused += 1
            else:
                counter.maps_computed += 1
        if not is_follower:
            group_maps = maps
        if group_ends is not None and group_ends[i]:
            group_maps = None  # bound map storage to one group
    return x
