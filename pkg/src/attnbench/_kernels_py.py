"""Pure-Python kernel backend.

Mirrors the function surface of the compiled ``_core`` extension so
either can be plugged in behind :mod:`attnbench.tensor`. Buffers are
flat row-major ``array('f')`` objects; intermediate accumulation uses
Python floats (64-bit) and results are rounded to float32 on store.

This backend is the portable reference: correct everywhere, fast
nowhere. Benchmarks should run against the compiled core.
"""

import math

NAME = "py"


def gemm(a, b, c, m, k, n, nthreads):
    for i in range(m):
        arow = i * k
        crow = i * n
        acc = [0.0] * n
        for p in range(k):
            av = a[arow + p]
            if av == 0.0:
                continue
            brow = p * n
            for j in range(n):
                acc[j] += av * b[brow + j]
        c[crow : crow + n] = type(c)("f", acc)


def gemm_tb(a, b, c, m, k, n, nthreads):
    for i in range(m):
        arow = i * k
        crow = i * n
        for j in range(n):
            brow = j * k
            s = 0.0
            for p in range(k):
                s += a[arow + p] * b[brow + p]
            c[crow + j] = s


def transpose(src, dst, rows, cols):
    for i in range(rows):
        base = i * cols
        for j in range(cols):
            dst[j * rows + i] = src[base + j]


def _softmax_span(m, base, idx):
    mx = max(m[base + j] for j in idx)
    total = 0.0
    vals = []
    for j in idx:
        e = math.exp(m[base + j] - mx)
        vals.append(e)
        total += e
    for j, e in zip(idx, vals):
        m[base + j] = e / total


def softmax_rows(m, rows, cols):
    idx = range(cols)
    for i in range(rows):
        _softmax_span(m, i * cols, idx)


def softmax_rows_causal(m, rows, cols, seq_cols):
    for i in range(rows):
        visible = min(i + 1, seq_cols)
        idx = list(range(visible)) + list(range(seq_cols, cols))
        base = i * cols
        _softmax_span(m, base, idx)
        for j in range(visible, seq_cols):
            m[base + j] = 0.0


def layer_norm(x, gain, bias, out, rows, cols, eps):
    for i in range(rows):
        base = i * cols
        mean = sum(x[base + j] for j in range(cols)) / cols
        var = sum((x[base + j] - mean) ** 2 for j in range(cols)) / cols
        inv = 1.0 / math.sqrt(var + eps)
        for j in range(cols):
            out[base + j] = (x[base + j] - mean) * inv * gain[j] + bias[j]


def depthwise_conv1d(x, kern, out, t, d, k):
    half = (k - 1) // 2
    for i in range(t):
        obase = i * d
        for c in range(d):
            s = 0.0
            for j in range(k):
                src = i + j - half
                if 0 <= src < t:
                    s += kern[j * d + c] * x[src * d + c]
            out[obase + c] = s


def relu(x, out, n):
    for i in range(n):
        v = x[i]
        out[i] = v if v > 0.0 else 0.0


def swish(x, out, n):
    for i in range(n):
        v = x[i]
        out[i] = v / (1.0 + math.exp(-v))


def gelu(x, out, n):
    for i in range(n):
        v = x[i]
        out[i] = 0.5 * v * (1.0 + math.erf(v * 0.7071067811865476))


def glu(x, out, rows, cols):
    half = cols // 2
    for i in range(rows):
        xbase = i * cols
        obase = i * half
        for j in range(half):
            out[obase + j] = x[xbase + j] / (1.0 + math.exp(-x[xbase + half + j]))


def add(a, b, out, n):
    for i in range(n):
        out[i] = a[i] + b[i]


def add_scaled(a, b, s, out, n):
    for i in range(n):
        out[i] = a[i] + s * b[i]


def add_bias_rows(m, bias, rows, cols):
    for i in range(rows):
        base = i * cols
        for j in range(cols):
            m[base + j] += bias[j]


def scale(m, s, n):
    for i in range(n):
        m[i] *= s


def rel_shift_add(logits, rel, t):
    w = 2 * t - 1
    for i in range(t):
        lbase = i * t
        rbase = i * w + (t - 1 - i)
        for j in range(t):
            logits[lbase + j] += rel[rbase + j]


def copy_cols(src, dst, rows, src_cols, dst_cols, dst_off):
    for i in range(rows):
        sbase = i * src_cols
        dbase = i * dst_cols + dst_off
        dst[dbase : dbase + src_cols] = src[sbase : sbase + src_cols]


def slice_cols(src, dst, rows, src_cols, c0, c1):
    w = c1 - c0
    for i in range(rows):
        sbase = i * src_cols + c0
        dst[i * w : (i + 1) * w] = src[sbase : sbase + w]
