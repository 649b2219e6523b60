#ifndef ATTNBENCH_KERNELS_H
#define ATTNBENCH_KERNELS_H

/* Dense single-precision kernels. All matrices are row-major and
 * contiguous. Accumulation is float32 throughout. Every function is a
 * pure function of its inputs; results do not depend on nthreads. */

void ab_gemm(const float *a, const float *b, float *c,
             int m, int k, int n, int nthreads);
void ab_gemm_tb(const float *a, const float *b, float *c,
                int m, int k, int n, int nthreads);
void ab_transpose(const float *src, float *dst, int rows, int cols);

void ab_softmax_rows(float *m, int rows, int cols);
void ab_softmax_rows_causal(float *m, int rows, int cols, int seq_cols);

void ab_layer_norm(const float *x, const float *gain, const float *bias,
                   float *out, int rows, int cols, float eps);

void ab_depthwise_conv1d(const float *x, const float *kern, float *out,
                         int t, int d, int k);

void ab_relu(const float *x, float *out, long n);
void ab_swish(const float *x, float *out, long n);
void ab_gelu(const float *x, float *out, long n);
void ab_glu(const float *x, float *out, int rows, int cols);

void ab_add(const float *a, const float *b, float *out, long n);
void ab_add_scaled(const float *a, const float *b, float s, float *out, long n);
void ab_add_bias_rows(float *m, const float *bias, int rows, int cols);
void ab_scale(float *m, float s, long n);

void ab_rel_shift_add(float *logits, const float *rel, int t);
void ab_copy_cols(const float *src, float *dst, int rows,
                  int src_cols, int dst_cols, int dst_off);
void ab_slice_cols(const float *src, float *dst, int rows,
                   int src_cols, int c0, int c1);

#endif
