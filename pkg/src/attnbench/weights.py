"""Weight containers, deterministic initialization and binary weight files.

Initialization draws linear weights uniformly from
[-1/sqrt(fan_in), +1/sqrt(fan_in)] using a single Mersenne-Twister
stream, in the same fixed traversal order used by the weight file, so a
given (config, seed) pair always produces bitwise-identical weights.
Biases start at zero and layer norms at gain 1 / bias 0; neither
consumes random draws.

Weight file layout (little-endian):
    magic "ATNB" | format version u32 | header-length u32 | header JSON
    | matrices in traversal order, each as rows u32, cols u32, float32 data
The header JSON records the ModelConfig plus per-layer shape flags
(head count, query/key presence, value width multiplier), which is
enough to reconstruct reuse-built and pruned models exactly. Vectors
are stored as 1 x n matrices.
"""

from __future__ import annotations

import json
import math
import random
import struct
import sys
from array import array
from dataclasses import dataclass, field

from .config import ModelConfig, config_from_dict, dump_config
from .errors import ConfigError, ShapeError
from .matrix import Matrix, Vec, vec, zeros_vec

MAGIC = b"ATNB"
FORMAT_VERSION = 1

# layer-norm slots per layer kind, in forward order
LN_LAYOUT = {
    "transformer": ("after_mhsa", "after_ff"),
    "conformer": ("ff1", "mhsa", "conv", "ff2", "final"),
    "all_attention": ("after_mhsa",),
}


@dataclass
class AttentionWeights:
    w_q: list[Matrix] | None
    b_q: list[Vec] | None
    w_k: list[Matrix] | None
    b_k: list[Vec] | None
    w_v: list[Matrix]
    b_v: list[Vec]
    w_o: Matrix | None
    b_o: Vec
    w_pos: Matrix | None = None
    p_k: list[Matrix] | None = None
    p_v: list[Matrix] | None = None
    value_mult: int = 1

    @property
    def heads(self) -> int:
        return len(self.w_v)

    @property
    def has_qk(self) -> bool:
        return self.w_q is not None


@dataclass
class FeedForwardWeights:
    w1: Matrix
    b1: Vec
    w2: Matrix
    b2: Vec


@dataclass
class ConvWeights:
    pw1: Matrix      # d -> 2d pointwise
    b_pw1: Vec
    dw: Matrix       # k x d depthwise kernel
    b_dw: Vec
    pw2: Matrix      # d -> d pointwise
    b_pw2: Vec


@dataclass
class LayerNormParams:
    gain: Vec
    bias: Vec


@dataclass
class LayerWeights:
    attention: AttentionWeights
    ffs: list[FeedForwardWeights] = field(default_factory=list)
    conv: ConvWeights | None = None
    lns: list[LayerNormParams] = field(default_factory=list)


@dataclass
class ModelWeights:
    config: ModelConfig
    layers: list[LayerWeights]

    def scalar_count(self) -> int:
        return sum(_size(m) for _, _, m in walk(self))


def _size(m) -> int:
    return m.rows * m.cols if isinstance(m, Matrix) else len(m)


def _udraw(rng: random.Random, rows: int, cols: int, fan_in: int) -> Matrix:
    bound = 1.0 / math.sqrt(fan_in)
    u = rng.uniform
    return Matrix(rows, cols, array("f", (u(-bound, bound) for _ in range(rows * cols))))


def _init_attention(cfg: ModelConfig, rng: random.Random,
                    follower: bool, value_mult: int) -> AttentionWeights:
    d, h, dh = cfg.dim, cfg.heads, cfg.head_dim
    # Value/output widening applies to follower layers only; leaders keep
    # the standard width (matches the parameter counts of reuse models).
    vm = value_mult if follower else 1
    w_q = w_k = b_q = b_k = None
    if not follower:
        w_q = [_udraw(rng, d, dh, d) for _ in range(h)]
        w_k = [_udraw(rng, d, dh, d) for _ in range(h)]
        b_q = [zeros_vec(dh) for _ in range(h)]
        b_k = [zeros_vec(dh) for _ in range(h)]
    w_v = [_udraw(rng, d, vm * dh, d) for _ in range(h)]
    b_v = [zeros_vec(vm * dh) for _ in range(h)]
    w_o = _udraw(rng, vm * d, d, vm * d)
    b_o = zeros_vec(d)
    w_pos = None
    if cfg.layer_kind == "conformer" and not follower:
        w_pos = _udraw(rng, d, d, d)
    p_k = p_v = None
    if cfg.layer_kind == "all_attention" and cfg.persistent_slots > 0:
        n = cfg.persistent_slots
        if not follower:
            p_k = [_udraw(rng, n, dh, dh) for _ in range(h)]
        p_v = [_udraw(rng, n, vm * dh, dh) for _ in range(h)]
    return AttentionWeights(w_q, b_q, w_k, b_k, w_v, b_v, w_o, b_o,
                            w_pos, p_k, p_v, vm)


def _init_ff(cfg: ModelConfig, rng: random.Random) -> FeedForwardWeights:
    d, f = cfg.dim, cfg.ff_mult
    return FeedForwardWeights(
        w1=_udraw(rng, d, f * d, d),
        b1=zeros_vec(f * d),
        w2=_udraw(rng, f * d, d, f * d),
        b2=zeros_vec(d),
    )


def _init_conv(cfg: ModelConfig, rng: random.Random) -> ConvWeights:
    d, k = cfg.dim, cfg.conv_kernel
    return ConvWeights(
        pw1=_udraw(rng, d, 2 * d, d),
        b_pw1=zeros_vec(2 * d),
        dw=_udraw(rng, k, d, k),
        b_dw=zeros_vec(d),
        pw2=_udraw(rng, d, d, d),
        b_pw2=zeros_vec(d),
    )


def _init_layer(cfg: ModelConfig, rng: random.Random,
                follower: bool, value_mult: int) -> LayerWeights:
    att = _init_attention(cfg, rng, follower, value_mult)
    ffs = []
    conv = None
    if cfg.layer_kind == "transformer":
        ffs = [_init_ff(cfg, rng)]
    elif cfg.layer_kind == "conformer":
        ffs = [_init_ff(cfg, rng), _init_ff(cfg, rng)]
        conv = _init_conv(cfg, rng)
    lns = [
        LayerNormParams(gain=vec([1.0] * cfg.dim), bias=zeros_vec(cfg.dim))
        for _ in LN_LAYOUT[cfg.layer_kind]
    ]
    return LayerWeights(attention=att, ffs=ffs, conv=conv, lns=lns)


def build_model(cfg: ModelConfig, followers: list[bool] | None = None,
                value_mult: int = 1) -> ModelWeights:
    """Materialize a model; followers (if any) carry no Q/K side."""
    if followers is None:
        followers = [False] * cfg.num_layers
    if len(followers) != cfg.num_layers:
        raise ConfigError(
            f"follower flags cover {len(followers)} layers, model has {cfg.num_layers}"
        )
    rng = random.Random(cfg.seed)
    layers = [_init_layer(cfg, rng, fol, value_mult) for fol in followers]
    return ModelWeights(config=cfg, layers=layers)


def init_weights(cfg: ModelConfig) -> ModelWeights:
    """Baseline initialization: every layer owns its query/key side."""
    if cfg.value_mult != 1:
        raise ConfigError(
            "value_mult=2 requires a reuse schedule; use build_reuse_model"
        )
    return build_model(cfg)


# --------------------------------------------------------------------
# traversal / serialization
# --------------------------------------------------------------------

def walk(model: ModelWeights):
    """Yield (name, kind, buffer) in the canonical traversal order.

    kind is one of sa / persistent_memory / ff / conv / ln; buffers are
    Matrix or float32 vectors. The order here defines both the random
    draw sequence at init and the weight-file layout.
    """
    for li, lw in enumerate(model.layers):
        a = lw.attention
        p = f"layer{li}"
        for h in range(a.heads):
            if a.has_qk:
                yield f"{p}.w_q[{h}]", "sa", a.w_q[h]
                yield f"{p}.w_k[{h}]", "sa", a.w_k[h]
            yield f"{p}.w_v[{h}]", "sa", a.w_v[h]
        if a.w_o is not None:
            yield f"{p}.w_o", "sa", a.w_o
        if a.w_pos is not None:
            yield f"{p}.w_pos", "sa", a.w_pos
        for h in range(a.heads):
            if a.p_k is not None:
                yield f"{p}.p_k[{h}]", "persistent_memory", a.p_k[h]
            if a.p_v is not None:
                yield f"{p}.p_v[{h}]", "persistent_memory", a.p_v[h]
        for h in range(a.heads):
            if a.has_qk:
                yield f"{p}.b_q[{h}]", "sa", a.b_q[h]
                yield f"{p}.b_k[{h}]", "sa", a.b_k[h]
            yield f"{p}.b_v[{h}]", "sa", a.b_v[h]
        yield f"{p}.b_o", "sa", a.b_o
        for fi, ff in enumerate(lw.ffs):
            yield f"{p}.ff{fi}.w1", "ff", ff.w1
            yield f"{p}.ff{fi}.b1", "ff", ff.b1
            yield f"{p}.ff{fi}.w2", "ff", ff.w2
            yield f"{p}.ff{fi}.b2", "ff", ff.b2
        if lw.conv is not None:
            c = lw.conv
            yield f"{p}.conv.pw1", "conv", c.pw1
            yield f"{p}.conv.b_pw1", "conv", c.b_pw1
            yield f"{p}.conv.dw", "conv", c.dw
            yield f"{p}.conv.b_dw", "conv", c.b_dw
            yield f"{p}.conv.pw2", "conv", c.pw2
            yield f"{p}.conv.b_pw2", "conv", c.b_pw2
        for ni, ln in enumerate(lw.lns):
            yield f"{p}.ln{ni}.gain", "ln", ln.gain
            yield f"{p}.ln{ni}.bias", "ln", ln.bias


def _le_floats(buf: array) -> bytes:
    if sys.byteorder == "little":
        return buf.tobytes()
    swapped = array("f", buf)
    swapped.byteswap()
    return swapped.tobytes()


def _write_mat(out: list[bytes], m) -> None:
    if isinstance(m, Matrix):
        out.append(struct.pack("<II", m.rows, m.cols))
        out.append(_le_floats(m.data))
    else:
        out.append(struct.pack("<II", 1, len(m)))
        out.append(_le_floats(m))


def save_weights(model: ModelWeights, path: str | None = None) -> bytes:
    header = {
        "config": dump_config(model.config),
        "layers": [
            {
                "heads": lw.attention.heads,
                "has_qk": lw.attention.has_qk,
                "value_mult": lw.attention.value_mult,
            }
            for lw in model.layers
        ],
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(hbytes)), hbytes]
    for _, _, m in walk(model):
        _write_mat(parts, m)
    blob = b"".join(parts)
    if path is not None:
        with open(path, "wb") as fh:
            fh.write(blob)
    return blob


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.off = 0

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.blob):
            raise ShapeError("weight file truncated")
        chunk = self.blob[self.off : self.off + n]
        self.off += n
        return chunk

    def matrix(self) -> Matrix:
        rows, cols = struct.unpack("<II", self.take(8))
        data = array("f")
        data.frombytes(self.take(4 * rows * cols))
        if sys.byteorder != "little":
            data.byteswap()
        return Matrix(rows, cols, data)

    def vector(self) -> Vec:
        m = self.matrix()
        if m.rows != 1:
            raise ShapeError(f"expected a vector, found {m.shape}")
        return m.data


def load_weights(source: str | bytes) -> ModelWeights:
    blob = source
    if isinstance(source, str):
        with open(source, "rb") as fh:
            blob = fh.read()
    r = _Reader(blob)
    if r.take(4) != MAGIC:
        raise ShapeError("not a weight file (bad magic)")
    version, hlen = struct.unpack("<II", r.take(8))
    if version != FORMAT_VERSION:
        raise ShapeError(f"unsupported weight format version {version}")
    header = json.loads(r.take(hlen).decode("utf-8"))
    cfg, _ = config_from_dict(header["config"], context="weight file")
    layers = []
    for meta in header["layers"]:
        heads, has_qk, vm = meta["heads"], meta["has_qk"], meta["value_mult"]
        w_q = [] if has_qk else None
        w_k = [] if has_qk else None
        w_v = []
        for _ in range(heads):
            if has_qk:
                w_q.append(r.matrix())
                w_k.append(r.matrix())
            w_v.append(r.matrix())
        w_o = r.matrix() if heads > 0 else None
        w_pos = None
        if cfg.layer_kind == "conformer" and has_qk:
            w_pos = r.matrix()
        p_k = [] if (cfg.layer_kind == "all_attention" and cfg.persistent_slots and has_qk) else None
        p_v = [] if (cfg.layer_kind == "all_attention" and cfg.persistent_slots) else None
        for _ in range(heads):
            if p_k is not None:
                p_k.append(r.matrix())
            if p_v is not None:
                p_v.append(r.matrix())
        b_q = [] if has_qk else None
        b_k = [] if has_qk else None
        b_v = []
        for _ in range(heads):
            if has_qk:
                b_q.append(r.vector())
                b_k.append(r.vector())
            b_v.append(r.vector())
        b_o = r.vector()
        att = AttentionWeights(w_q, b_q, w_k, b_k, w_v, b_v, w_o, b_o,
                               w_pos, p_k, p_v, vm)
        n_ffs = {"transformer": 1, "conformer": 2, "all_attention": 0}[cfg.layer_kind]
        ffs = [
            FeedForwardWeights(r.matrix(), r.vector(), r.matrix(), r.vector())
            for _ in range(n_ffs)
        ]
        conv = None
        if cfg.layer_kind == "conformer":
            conv = ConvWeights(r.matrix(), r.vector(), r.matrix(), r.vector(),
                               r.matrix(), r.vector())
        lns = [
            LayerNormParams(r.vector(), r.vector())
            for _ in LN_LAYOUT[cfg.layer_kind]
        ]
        layers.append(LayerWeights(att, ffs, conv, lns))
    if r.off != len(blob):
        raise ShapeError("trailing bytes in weight file")
    return ModelWeights(config=cfg, layers=layers)
