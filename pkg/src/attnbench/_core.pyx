# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled kernel backend. Thin wrappers over the C kernels in csrc/.

Every function takes flat row-major float32 buffers (anything exposing
the buffer protocol, e.g. array('f')) plus explicit shapes. The GIL is
released around every kernel so concurrent forward passes really run
in parallel.
"""

cdef extern from "kernels.h":
    void ab_gemm(const float *a, const float *b, float *c,
                 int m, int k, int n, int nthreads) nogil
    void ab_gemm_tb(const float *a, const float *b, float *c,
                    int m, int k, int n, int nthreads) nogil
    void ab_transpose(const float *src, float *dst, int rows, int cols) nogil
    void ab_softmax_rows(float *m, int rows, int cols) nogil
    void ab_softmax_rows_causal(float *m, int rows, int cols, int seq_cols) nogil
    void ab_layer_norm(const float *x, const float *gain, const float *bias,
                       float *out, int rows, int cols, float eps) nogil
    void ab_depthwise_conv1d(const float *x, const float *kern, float *out,
                             int t, int d, int k) nogil
    void ab_relu(const float *x, float *out, long n) nogil
    void ab_swish(const float *x, float *out, long n) nogil
    void ab_gelu(const float *x, float *out, long n) nogil
    void ab_glu(const float *x, float *out, int rows, int cols) nogil
    void ab_add(const float *a, const float *b, float *out, long n) nogil
    void ab_add_scaled(const float *a, const float *b, float s, float *out, long n) nogil
    void ab_add_bias_rows(float *m, const float *bias, int rows, int cols) nogil
    void ab_scale(float *m, float s, long n) nogil
    void ab_rel_shift_add(float *logits, const float *rel, int t) nogil
    void ab_copy_cols(const float *src, float *dst, int rows,
                      int src_cols, int dst_cols, int dst_off) nogil
    void ab_slice_cols(const float *src, float *dst, int rows,
                       int src_cols, int c0, int c1) nogil

NAME = "c"


def gemm(float[::1] a, float[::1] b, float[::1] c,
         int m, int k, int n, int nthreads):
    with nogil:
        ab_gemm(&a[0], &b[0], &c[0], m, k, n, nthreads)


def gemm_tb(float[::1] a, float[::1] b, float[::1] c,
            int m, int k, int n, int nthreads):
    with nogil:
        ab_gemm_tb(&a[0], &b[0], &c[0], m, k, n, nthreads)


def transpose(float[::1] src, float[::1] dst, int rows, int cols):
    with nogil:
        ab_transpose(&src[0], &dst[0], rows, cols)


def softmax_rows(float[::1] m, int rows, int cols):
    with nogil:
        ab_softmax_rows(&m[0], rows, cols)


def softmax_rows_causal(float[::1] m, int rows, int cols, int seq_cols):
    with nogil:
        ab_softmax_rows_causal(&m[0], rows, cols, seq_cols)


def layer_norm(float[::1] x, float[::1] gain, float[::1] bias,
               float[::1] out, int rows, int cols, float eps):
    with nogil:
        ab_layer_norm(&x[0], &gain[0], &bias[0], &out[0], rows, cols, eps)


def depthwise_conv1d(float[::1] x, float[::1] kern, float[::1] out,
                     int t, int d, int k):
    with nogil:
        ab_depthwise_conv1d(&x[0], &kern[0], &out[0], t, d, k)


def relu(float[::1] x, float[::1] out, long n):
    with nogil:
        ab_relu(&x[0], &out[0], n)


def swish(float[::1] x, float[::1] out, long n):
    with nogil:
        ab_swish(&x[0], &out[0], n)


def gelu(float[::1] x, float[::1] out, long n):
    with nogil:
        ab_gelu(&x[0], &out[0], n)


def glu(float[::1] x, float[::1] out, int rows, int cols):
    with nogil:
        ab_glu(&x[0], &out[0], rows, cols)


def add(float[::1] a, float[::1] b, float[::1] out, long n):
    with nogil:
        ab_add(&a[0], &b[0], &out[0], n)


def add_scaled(float[::1] a, float[::1] b, float s, float[::1] out, long n):
    with nogil:
        ab_add_scaled(&a[0], &b[0], s, &out[0], n)


def add_bias_rows(float[::1] m, float[::1] bias, int rows, int cols):
    with nogil:
        ab_add_bias_rows(&m[0], &bias[0], rows, cols)


def scale(float[::1] m, float s, long n):
    with nogil:
        ab_scale(&m[0], s, n)


def rel_shift_add(float[::1] logits, float[::1] rel, int t):
    with nogil:
        ab_rel_shift_add(&logits[0], &rel[0], t)


def copy_cols(float[::1] src, float[::1] dst, int rows,
              int src_cols, int dst_cols, int dst_off):
    with nogil:
        ab_copy_cols(&src[0], &dst[0], rows, src_cols, dst_cols, dst_off)


def slice_cols(float[::1] src, float[::1] dst, int rows,
               int src_cols, int c0, int c1):
    with nogil:
        ab_slice_cols(&src[0], &dst[0], rows, src_cols, c0, c1)
