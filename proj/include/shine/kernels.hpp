#pragma once

#include <cstdint>

namespace shine::kernels {

// Dense double-precision kernels behind the autodiff ops. Every kernel exists
// twice: a plain serial reference under kernels::serial, and a dispatching
// version that runs row-parallel under OpenMP once the work is large enough.
// Both orders of accumulation are identical per output element, so the two
// backends produce bit-identical results; tests and tools/bench_kernels rely
// on that.

namespace serial {

// c = a(mxk) * b(kxn), c overwritten
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n);
// c = a^T(mxk stored kxm) * b(kxn)
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n);
// c = a(mxk) * b^T(nxk)
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n);

void add(const double* a, const double* b, double* c, std::size_t n);
void mul(const double* a, const double* b, double* c, std::size_t n);
void scale(const double* a, double s, double* c, std::size_t n);

// Row softmax with max subtraction. colmask (may be null) marks admissible
// columns; masked columns get probability exactly 0. A row with no admissible
// column is reported through *bad_row (set to its index) and left zeroed.
void softmax_rows(const double* x, double* y, int rows, int cols,
                  const std::uint8_t* colmask, int* bad_row);

// y = (x - mean) / sqrt(var + eps) * gain + bias, per row; stores per-row
// mean and inverse stddev for the backward pass when mu/rstd are non-null.
void layer_norm_rows(const double* x, const double* gain, const double* bias,
                     double* y, double* mu, double* rstd, int rows, int cols, double eps);

}  // namespace serial

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n);
void add(const double* a, const double* b, double* c, std::size_t n);
void mul(const double* a, const double* b, double* c, std::size_t n);
void scale(const double* a, double s, double* c, std::size_t n);
void softmax_rows(const double* x, double* y, int rows, int cols,
                  const std::uint8_t* colmask, int* bad_row);
void layer_norm_rows(const double* x, const double* gain, const double* bias,
                     double* y, double* mu, double* rstd, int rows, int cols, double eps);

// True when this build has OpenMP compiled in.
bool parallel_enabled();

}  // namespace shine::kernels
