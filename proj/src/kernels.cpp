#include "shine/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace shine::kernels {

namespace {

// Work sizes below this run serially even when OpenMP is available; thread
// fork overhead dominates on the tiny per-sentence matrices.
constexpr std::size_t kParallelThreshold = 1 << 16;

inline void row_softmax(const double* xr, double* yr, int cols, const std::uint8_t* colmask,
                        int r, int* bad_row) {
  double mx = -1e300;
  for (int j = 0; j < cols; ++j)
    if (!colmask || colmask[j]) mx = std::max(mx, xr[j]);
  if (mx == -1e300) {  // no admissible column
    std::memset(yr, 0, sizeof(double) * cols);
    if (bad_row && *bad_row < 0) *bad_row = r;
    return;
  }
  double denom = 0.0;
  for (int j = 0; j < cols; ++j) {
    if (!colmask || colmask[j]) {
      yr[j] = std::exp(xr[j] - mx);
      denom += yr[j];
    } else {
      yr[j] = 0.0;
    }
  }
  for (int j = 0; j < cols; ++j) yr[j] /= denom;
}

inline void row_layer_norm(const double* xr, const double* gain, const double* bias, double* yr,
                           double* mu, double* rstd, int r, int cols, double eps) {
  double m = 0.0;
  for (int j = 0; j < cols; ++j) m += xr[j];
  m /= cols;
  double var = 0.0;
  for (int j = 0; j < cols; ++j) {
    double d = xr[j] - m;
    var += d * d;
  }
  var /= cols;
  double rs = 1.0 / std::sqrt(var + eps);
  if (mu) mu[r] = m;
  if (rstd) rstd[r] = rs;
  for (int j = 0; j < cols; ++j) yr[j] = (xr[j] - m) * rs * gain[j] + bias[j];
}

}  // namespace

namespace serial {

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  std::memset(c, 0, sizeof(double) * m * n);
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      double aip = a[static_cast<std::size_t>(i) * k + p];
      const double* bp = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  std::memset(c, 0, sizeof(double) * m * n);
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      double api = a[static_cast<std::size_t>(p) * m + i];
      const double* bp = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + static_cast<std::size_t>(j) * k;
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] = s;
    }
  }
}

void add(const double* a, const double* b, double* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) c[i] = a[i] + b[i];
}

void mul(const double* a, const double* b, double* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) c[i] = a[i] * b[i];
}

void scale(const double* a, double s, double* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) c[i] = a[i] * s;
}

void softmax_rows(const double* x, double* y, int rows, int cols, const std::uint8_t* colmask,
                  int* bad_row) {
  if (bad_row) *bad_row = -1;
  for (int r = 0; r < rows; ++r)
    row_softmax(x + static_cast<std::size_t>(r) * cols, y + static_cast<std::size_t>(r) * cols,
                cols, colmask, r, bad_row);
}

void layer_norm_rows(const double* x, const double* gain, const double* bias, double* y,
                     double* mu, double* rstd, int rows, int cols, double eps) {
  for (int r = 0; r < rows; ++r)
    row_layer_norm(x + static_cast<std::size_t>(r) * cols, gain, bias,
                   y + static_cast<std::size_t>(r) * cols, mu, rstd, r, cols, eps);
}

}  // namespace serial

bool parallel_enabled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n) {
#ifdef _OPENMP
  if (static_cast<std::size_t>(m) * k * n >= kParallelThreshold) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
      double* ci = c + static_cast<std::size_t>(i) * n;
      std::memset(ci, 0, sizeof(double) * n);
      for (int p = 0; p < k; ++p) {
        double aip = a[static_cast<std::size_t>(i) * k + p];
        const double* bp = b + static_cast<std::size_t>(p) * n;
        for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
      }
    }
    return;
  }
#endif
  serial::matmul_nn(a, b, c, m, k, n);
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
#ifdef _OPENMP
  if (static_cast<std::size_t>(m) * k * n >= kParallelThreshold) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
      double* ci = c + static_cast<std::size_t>(i) * n;
      std::memset(ci, 0, sizeof(double) * n);
      for (int p = 0; p < k; ++p) {
        double api = a[static_cast<std::size_t>(p) * m + i];
        const double* bp = b + static_cast<std::size_t>(p) * n;
        for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
      }
    }
    return;
  }
#endif
  serial::matmul_tn(a, b, c, m, k, n);
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
#ifdef _OPENMP
  if (static_cast<std::size_t>(m) * k * n >= kParallelThreshold) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
      const double* ai = a + static_cast<std::size_t>(i) * k;
      double* ci = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) {
        const double* bj = b + static_cast<std::size_t>(j) * k;
        double s = 0.0;
        for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
        ci[j] = s;
      }
    }
    return;
  }
#endif
  serial::matmul_nt(a, b, c, m, k, n);
}

void add(const double* a, const double* b, double* c, std::size_t n) {
#ifdef _OPENMP
  if (n >= kParallelThreshold) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) c[i] = a[i] + b[i];
    return;
  }
#endif
  serial::add(a, b, c, n);
}

void mul(const double* a, const double* b, double* c, std::size_t n) {
#ifdef _OPENMP
  if (n >= kParallelThreshold) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) c[i] = a[i] * b[i];
    return;
  }
#endif
  serial::mul(a, b, c, n);
}

void scale(const double* a, double s, double* c, std::size_t n) {
#ifdef _OPENMP
  if (n >= kParallelThreshold) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) c[i] = a[i] * s;
    return;
  }
#endif
  serial::scale(a, s, c, n);
}

void softmax_rows(const double* x, double* y, int rows, int cols, const std::uint8_t* colmask,
                  int* bad_row) {
#ifdef _OPENMP
  if (static_cast<std::size_t>(rows) * cols >= kParallelThreshold) {
    if (bad_row) *bad_row = -1;
    int bad = -1;
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
      int local_bad = -1;
      row_softmax(x + static_cast<std::size_t>(r) * cols, y + static_cast<std::size_t>(r) * cols,
                  cols, colmask, r, &local_bad);
      if (local_bad >= 0) {
#pragma omp critical
        if (bad < 0 || local_bad < bad) bad = local_bad;
      }
    }
    if (bad_row) *bad_row = bad;
    return;
  }
#endif
  serial::softmax_rows(x, y, rows, cols, colmask, bad_row);
}

void layer_norm_rows(const double* x, const double* gain, const double* bias, double* y,
                     double* mu, double* rstd, int rows, int cols, double eps) {
#ifdef _OPENMP
  if (static_cast<std::size_t>(rows) * cols >= kParallelThreshold) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r)
      row_layer_norm(x + static_cast<std::size_t>(r) * cols, gain, bias,
                     y + static_cast<std::size_t>(r) * cols, mu, rstd, r, cols, eps);
    return;
  }
#endif
  serial::layer_norm_rows(x, gain, bias, y, mu, rstd, rows, cols, eps);
}

}  // namespace shine::kernels
