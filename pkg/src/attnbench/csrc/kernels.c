#include "kernels.h"

#include <math.h>
#include <stdlib.h>
#include <string.h>

#ifdef _OPENMP
#include <omp.h>
#endif

/* ------------------------------------------------------------------ */
/* matmul                                                              */
/* ------------------------------------------------------------------ */

/* C[i,:] accumulates a[i,p] * B[p,:] with p ascending, so the result is
 * bitwise identical to the naive i-p-j triple loop for any row blocking
 * and any thread count (rows are partitioned, never split). */
static void gemm_rows(const float *restrict a, const float *restrict b,
                      float *restrict c, int i0, int i1, int k, int n)
{
    int i = i0;
    for (; i + 4 <= i1; i += 4) {
        float *restrict c0 = c + (size_t)(i + 0) * n;
        float *restrict c1 = c + (size_t)(i + 1) * n;
        float *restrict c2 = c + (size_t)(i + 2) * n;
        float *restrict c3 = c + (size_t)(i + 3) * n;
        memset(c0, 0, sizeof(float) * (size_t)n);
        memset(c1, 0, sizeof(float) * (size_t)n);
        memset(c2, 0, sizeof(float) * (size_t)n);
        memset(c3, 0, sizeof(float) * (size_t)n);
        for (int p = 0; p < k; p++) {
            const float *restrict br = b + (size_t)p * n;
            const float a0 = a[(size_t)(i + 0) * k + p];
            const float a1 = a[(size_t)(i + 1) * k + p];
            const float a2 = a[(size_t)(i + 2) * k + p];
            const float a3 = a[(size_t)(i + 3) * k + p];
            for (int j = 0; j < n; j++) {
                c0[j] += a0 * br[j];
                c1[j] += a1 * br[j];
                c2[j] += a2 * br[j];
                c3[j] += a3 * br[j];
            }
        }
    }
    for (; i < i1; i++) {
        float *restrict ci = c + (size_t)i * n;
        memset(ci, 0, sizeof(float) * (size_t)n);
        for (int p = 0; p < k; p++) {
            const float *restrict br = b + (size_t)p * n;
            const float ai = a[(size_t)i * k + p];
            for (int j = 0; j < n; j++)
                ci[j] += ai * br[j];
        }
    }
}

void ab_gemm(const float *a, const float *b, float *c,
             int m, int k, int n, int nthreads)
{
#ifdef _OPENMP
    if (nthreads > 1 && m >= 8) {
        /* Chunks of 4 rows keep the blocked kernel intact per thread. */
        int nchunks = (m + 3) / 4;
#pragma omp parallel for schedule(static) num_threads(nthreads)
        for (int ch = 0; ch < nchunks; ch++) {
            int i0 = ch * 4;
            int i1 = i0 + 4 < m ? i0 + 4 : m;
            gemm_rows(a, b, c, i0, i1, k, n);
        }
        return;
    }
#else
    (void)nthreads;
#endif
    gemm_rows(a, b, c, 0, m, k, n);
}

void ab_transpose(const float *src, float *dst, int rows, int cols)
{
    const int B = 32;
    for (int i0 = 0; i0 < rows; i0 += B)
        for (int j0 = 0; j0 < cols; j0 += B) {
            int i1 = i0 + B < rows ? i0 + B : rows;
            int j1 = j0 + B < cols ? j0 + B : cols;
            for (int i = i0; i < i1; i++)
                for (int j = j0; j < j1; j++)
                    dst[(size_t)j * rows + i] = src[(size_t)i * cols + j];
        }
}

void ab_gemm_tb(const float *a, const float *b, float *c,
                int m, int k, int n, int nthreads)
{
    /* C = A * B^T with B given as n x k. Transposing B first turns the
     * dot-product form into the streaming kernel above; the transpose
     * cost is O(n*k) against O(m*n*k) multiplies. */
    float *bt = (float *)malloc(sizeof(float) * (size_t)k * n);
    ab_transpose(b, bt, n, k);
    ab_gemm(a, bt, c, m, k, n, nthreads);
    free(bt);
}

/* ------------------------------------------------------------------ */
/* softmax                                                             */
/* ------------------------------------------------------------------ */

/* Softmax over the union of [lo, hi) and [lo2, hi2); other entries are
 * left untouched by this helper. */
static void softmax_span(float *row, int lo, int hi, int lo2, int hi2)
{
    float mx = -INFINITY;
    for (int j = lo; j < hi; j++)
        if (row[j] > mx) mx = row[j];
    for (int j = lo2; j < hi2; j++)
        if (row[j] > mx) mx = row[j];
    float sum = 0.0f;
    for (int j = lo; j < hi; j++) {
        float e = expf(row[j] - mx);
        row[j] = e;
        sum += e;
    }
    for (int j = lo2; j < hi2; j++) {
        float e = expf(row[j] - mx);
        row[j] = e;
        sum += e;
    }
    const float inv = 1.0f / sum;
    for (int j = lo; j < hi; j++) row[j] *= inv;
    for (int j = lo2; j < hi2; j++) row[j] *= inv;
}

void ab_softmax_rows(float *m, int rows, int cols)
{
    for (int i = 0; i < rows; i++)
        softmax_span(m + (size_t)i * cols, 0, cols, 0, 0);
}

/* Sequence columns [0, seq_cols) are causally masked (row i may only
 * attend to j <= i); columns [seq_cols, cols) are never masked. */
void ab_softmax_rows_causal(float *m, int rows, int cols, int seq_cols)
{
    for (int i = 0; i < rows; i++) {
        float *row = m + (size_t)i * cols;
        int visible = i + 1 < seq_cols ? i + 1 : seq_cols;
        softmax_span(row, 0, visible, seq_cols, cols);
        for (int j = visible; j < seq_cols; j++)
            row[j] = 0.0f;
    }
}

/* ------------------------------------------------------------------ */
/* layer norm                                                          */
/* ------------------------------------------------------------------ */

void ab_layer_norm(const float *x, const float *gain, const float *bias,
                   float *out, int rows, int cols, float eps)
{
    for (int i = 0; i < rows; i++) {
        const float *xr = x + (size_t)i * cols;
        float *or_ = out + (size_t)i * cols;
        float mean = 0.0f;
        for (int j = 0; j < cols; j++)
            mean += xr[j];
        mean /= (float)cols;
        float var = 0.0f;
        for (int j = 0; j < cols; j++) {
            float dlt = xr[j] - mean;
            var += dlt * dlt;
        }
        var /= (float)cols;
        const float inv = 1.0f / sqrtf(var + eps);
        for (int j = 0; j < cols; j++)
            or_[j] = (xr[j] - mean) * inv * gain[j] + bias[j];
    }
}

/* ------------------------------------------------------------------ */
/* depthwise conv (same padding, odd kernel)                           */
/* ------------------------------------------------------------------ */

void ab_depthwise_conv1d(const float *x, const float *kern, float *out,
                         int t, int d, int k)
{
    const int half = (k - 1) / 2;
    memset(out, 0, sizeof(float) * (size_t)t * d);
    for (int i = 0; i < t; i++) {
        float *or_ = out + (size_t)i * d;
        for (int j = 0; j < k; j++) {
            int src = i + j - half;
            if (src < 0 || src >= t)
                continue;
            const float *xr = x + (size_t)src * d;
            const float *kr = kern + (size_t)j * d;
            for (int c = 0; c < d; c++)
                or_[c] += kr[c] * xr[c];
        }
    }
}

/* ------------------------------------------------------------------ */
/* pointwise nonlinearities                                            */
/* ------------------------------------------------------------------ */

void ab_relu(const float *x, float *out, long n)
{
    for (long i = 0; i < n; i++)
        out[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void ab_swish(const float *x, float *out, long n)
{
    for (long i = 0; i < n; i++)
        out[i] = x[i] / (1.0f + expf(-x[i]));
}

void ab_gelu(const float *x, float *out, long n)
{
    for (long i = 0; i < n; i++)
        out[i] = 0.5f * x[i] * (1.0f + erff(x[i] * 0.70710678f));
}

void ab_glu(const float *x, float *out, int rows, int cols)
{
    const int half = cols / 2;
    for (int i = 0; i < rows; i++) {
        const float *xr = x + (size_t)i * cols;
        float *or_ = out + (size_t)i * half;
        for (int j = 0; j < half; j++)
            or_[j] = xr[j] / (1.0f + expf(-xr[half + j]));
    }
}

/* ------------------------------------------------------------------ */
/* elementwise helpers                                                 */
/* ------------------------------------------------------------------ */

void ab_add(const float *a, const float *b, float *out, long n)
{
    for (long i = 0; i < n; i++)
        out[i] = a[i] + b[i];
}

void ab_add_scaled(const float *a, const float *b, float s, float *out, long n)
{
    for (long i = 0; i < n; i++)
        out[i] = a[i] + s * b[i];
}

void ab_add_bias_rows(float *m, const float *bias, int rows, int cols)
{
    for (int i = 0; i < rows; i++) {
        float *row = m + (size_t)i * cols;
        for (int j = 0; j < cols; j++)
            row[j] += bias[j];
    }
}

void ab_scale(float *m, float s, long n)
{
    for (long i = 0; i < n; i++)
        m[i] *= s;
}

/* logits is t x t, rel is t x (2t-1) indexed by offset j-i+(t-1). */
void ab_rel_shift_add(float *logits, const float *rel, int t)
{
    const int w = 2 * t - 1;
    for (int i = 0; i < t; i++) {
        float *lr = logits + (size_t)i * t;
        const float *rr = rel + (size_t)i * w + (t - 1 - i);
        for (int j = 0; j < t; j++)
            lr[j] += rr[j];
    }
}

void ab_copy_cols(const float *src, float *dst, int rows,
                  int src_cols, int dst_cols, int dst_off)
{
    for (int i = 0; i < rows; i++)
        memcpy(dst + (size_t)i * dst_cols + dst_off,
               src + (size_t)i * src_cols,
               sizeof(float) * (size_t)src_cols);
}

void ab_slice_cols(const float *src, float *dst, int rows,
                   int src_cols, int c0, int c1)
{
    const int w = c1 - c0;
    for (int i = 0; i < rows; i++)
        memcpy(dst + (size_t)i * w,
               src + (size_t)i * src_cols + c0,
               sizeof(float) * (size_t)w);
}
