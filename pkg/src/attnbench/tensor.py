"""Dense numeric kernels behind a Matrix-level API.

The five public operations (matmul, softmax_rows, layer_norm,
depthwise_conv1d, pointwise_nonlinear) are pure functions: they never
mutate their inputs and are safe to call concurrently. Helpers with a
trailing underscore mutate their first argument and are meant for the
internal forward-pass hot path.

All arithmetic is float32. matmul accepts an optional row-parallel
worker count through set_num_threads(); results are bitwise independent
of it.
"""

from __future__ import annotations

import math
from array import array

from .backend import kernels
from .errors import ConfigError, ShapeError
from .matrix import Matrix, Vec

DEFAULT_EPS = 1e-5

_num_threads = 1


def set_num_threads(n: int) -> None:
    global _num_threads
    if n < 1:
        raise ConfigError(f"thread count must be >= 1, got {n}")
    _num_threads = int(n)


def get_num_threads() -> int:
    return _num_threads


def _as_vec(v, n: int, what: str) -> Vec:
    if not (isinstance(v, array) and v.typecode == "f"):
        v = array("f", v)
    if len(v) != n:
        raise ShapeError(f"{what} has length {len(v)}, expected {n}")
    return v


# --------------------------------------------------------------------
# public kernel surface
# --------------------------------------------------------------------

def matmul(a: Matrix, b: Matrix, transpose_b: bool = False) -> Matrix:
    """Matrix product a @ b (or a @ b.T when transpose_b)."""
    inner = b.cols if transpose_b else b.rows
    if a.cols != inner:
        raise ShapeError(
            f"matmul shape mismatch: {a.rows}x{a.cols} vs {b.rows}x{b.cols}"
            f" (transpose_b={transpose_b})"
        )
    n = b.rows if transpose_b else b.cols
    out = Matrix(a.rows, n)
    if transpose_b:
        kernels.gemm_tb(a.data, b.data, out.data, a.rows, a.cols, n, _num_threads)
    else:
        kernels.gemm(a.data, b.data, out.data, a.rows, a.cols, n, _num_threads)
    return out


def softmax_rows(m: Matrix) -> Matrix:
    """Row-wise softmax with per-row max subtraction."""
    out = m.copy()
    kernels.softmax_rows(out.data, out.rows, out.cols)
    return out


def causal_softmax_rows(m: Matrix, seq_cols: int) -> Matrix:
    """Row-wise softmax where column j < seq_cols is masked for j > i.

    Columns at and beyond seq_cols (persistent-memory slots) are always
    visible. Masked entries come out exactly zero.
    """
    if seq_cols > m.cols:
        raise ShapeError(f"seq_cols {seq_cols} exceeds matrix cols {m.cols}")
    out = m.copy()
    kernels.softmax_rows_causal(out.data, out.rows, out.cols, seq_cols)
    return out


def layer_norm(m: Matrix, gain, bias, epsilon: float = DEFAULT_EPS) -> Matrix:
    """Per-row normalization followed by elementwise gain and bias."""
    g = _as_vec(gain, m.cols, "layer_norm gain")
    b = _as_vec(bias, m.cols, "layer_norm bias")
    out = Matrix(m.rows, m.cols)
    kernels.layer_norm(m.data, g, b, out.data, m.rows, m.cols, epsilon)
    return out


def depthwise_conv1d(m: Matrix, kernel: Matrix) -> Matrix:
    """Per-channel 1-D convolution with same zero padding; odd kernel only."""
    if kernel.rows % 2 == 0:
        raise ConfigError(f"depthwise kernel size must be odd, got {kernel.rows}")
    if kernel.cols != m.cols:
        raise ShapeError(
            f"kernel channels {kernel.cols} do not match input channels {m.cols}"
        )
    out = Matrix(m.rows, m.cols)
    kernels.depthwise_conv1d(m.data, kernel.data, out.data, m.rows, m.cols, kernel.rows)
    return out


def pointwise_nonlinear(m: Matrix, kind: str) -> Matrix:
    """Elementwise relu/swish/gelu, or glu (gates and halves the columns)."""
    if kind == "glu":
        if m.cols % 2 != 0:
            raise ShapeError(f"glu needs an even column count, got {m.cols}")
        out = Matrix(m.rows, m.cols // 2)
        kernels.glu(m.data, out.data, m.rows, m.cols)
        return out
    try:
        fn = {"relu": kernels.relu, "swish": kernels.swish, "gelu": kernels.gelu}[kind]
    except KeyError:
        raise ConfigError(f"unknown activation {kind!r}") from None
    out = Matrix(m.rows, m.cols)
    fn(m.data, out.data, m.rows * m.cols)
    return out


# --------------------------------------------------------------------
# helpers used by the layer implementations
# --------------------------------------------------------------------

def transpose(m: Matrix) -> Matrix:
    out = Matrix(m.cols, m.rows)
    kernels.transpose(m.data, out.data, m.rows, m.cols)
    return out


def add(a: Matrix, b: Matrix) -> Matrix:
    if a.shape != b.shape:
        raise ShapeError(f"add shape mismatch: {a.shape} vs {b.shape}")
    out = Matrix(a.rows, a.cols)
    kernels.add(a.data, b.data, out.data, a.rows * a.cols)
    return out


def add_scaled(a: Matrix, b: Matrix, s: float) -> Matrix:
    """a + s * b, used for half-step residual connections."""
    if a.shape != b.shape:
        raise ShapeError(f"add_scaled shape mismatch: {a.shape} vs {b.shape}")
    out = Matrix(a.rows, a.cols)
    kernels.add_scaled(a.data, b.data, s, out.data, a.rows * a.cols)
    return out


def add_bias_(m: Matrix, bias) -> Matrix:
    b = _as_vec(bias, m.cols, "bias")
    kernels.add_bias_rows(m.data, b, m.rows, m.cols)
    return m


def scale_(m: Matrix, s: float) -> Matrix:
    kernels.scale(m.data, s, m.rows * m.cols)
    return m


def rel_shift_add_(logits: Matrix, rel: Matrix) -> Matrix:
    """logits[i, j] += rel[i, (t-1) + j - i] for square t x t logits."""
    t = logits.rows
    if logits.cols != t or rel.shape != (t, 2 * t - 1):
        raise ShapeError(
            f"rel_shift_add expects {t}x{t} logits and {t}x{2 * t - 1} rel,"
            f" got {logits.shape} and {rel.shape}"
        )
    kernels.rel_shift_add(logits.data, rel.data, t)
    return logits


def concat_rows(a: Matrix, b: Matrix) -> Matrix:
    if a.cols != b.cols:
        raise ShapeError(f"concat_rows column mismatch: {a.shape} vs {b.shape}")
    return Matrix(a.rows + b.rows, a.cols, a.data + b.data)


def slice_cols(m: Matrix, c0: int, c1: int) -> Matrix:
    if not (0 <= c0 < c1 <= m.cols):
        raise ShapeError(f"column slice [{c0}:{c1}] out of range for {m.shape}")
    out = Matrix(m.rows, c1 - c0)
    kernels.slice_cols(m.data, out.data, m.rows, m.cols, c0, c1)
    return out


def copy_into_cols_(dst: Matrix, src: Matrix, offset: int) -> None:
    if src.rows != dst.rows or offset + src.cols > dst.cols:
        raise ShapeError(
            f"cannot place {src.shape} at column {offset} of {dst.shape}"
        )
    kernels.copy_cols(src.data, dst.data, src.rows, src.cols, dst.cols, offset)


# --------------------------------------------------------------------
# sinusoidal relative-position table (cached per shape)
# --------------------------------------------------------------------

_pos_cache: dict[tuple[int, int], Matrix] = {}


def relative_position_table(t: int, d: int) -> Matrix:
    """(2t-1) x d sinusoid table over relative offsets -(t-1) .. t-1.

    Row r encodes offset r - (t-1). Cached per (t, d); callers must not
    mutate the returned matrix.
    """
    key = (t, d)
    cached = _pos_cache.get(key)
    if cached is not None:
        return cached
    rows = 2 * t - 1
    data = array("f", bytes(4 * rows * d))
    half = d // 2
    inv_freq = [10000.0 ** (-2.0 * i / d) for i in range(half)]
    for r in range(rows):
        offset = r - (t - 1)
        base = r * d
        for i, f in enumerate(inv_freq):
            angle = offset * f
            data[base + 2 * i] = math.sin(angle)
            data[base + 2 * i + 1] = math.cos(angle)
        if d % 2 == 1:
            data[base + d - 1] = math.sin(offset * 10000.0 ** (-(d - 1) / d))
    table = Matrix(rows, d, data)
    _pos_cache[key] = table
    return table
