// Times the OpenMP kernel dispatch against the serial reference and checks
// that both produce bit-identical output.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "shine/kernels.hpp"

using clock_type = std::chrono::steady_clock;

namespace {

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::vector<double> random_vec(std::size_t n, std::mt19937_64& gen) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(gen);
  return v;
}

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void bench_matmul(int n, std::mt19937_64& gen) {
  auto a = random_vec(static_cast<std::size_t>(n) * n, gen);
  auto b = random_vec(static_cast<std::size_t>(n) * n, gen);
  std::vector<double> c1(static_cast<std::size_t>(n) * n), c2(c1.size());

  int reps = n <= 128 ? 20 : 4;
  auto t0 = clock_type::now();
  for (int r = 0; r < reps; ++r)
    shine::kernels::serial::matmul_nn(a.data(), b.data(), c1.data(), n, n, n);
  double serial_s = seconds_since(t0) / reps;

  t0 = clock_type::now();
  for (int r = 0; r < reps; ++r)
    shine::kernels::matmul_nn(a.data(), b.data(), c2.data(), n, n, n);
  double parallel_s = seconds_since(t0) / reps;

  double gflop = 2.0 * n * n * n / 1e9;
  std::printf("matmul %4dx%-4d  serial %8.3f ms (%5.2f GF/s)  parallel %8.3f ms (%5.2f GF/s)  "
              "speedup %4.2fx  bits %s\n",
              n, n, serial_s * 1e3, gflop / serial_s, parallel_s * 1e3, gflop / parallel_s,
              serial_s / parallel_s, bits_equal(c1, c2) ? "equal" : "DIFFER");
}

void bench_rows(int rows, int cols, std::mt19937_64& gen) {
  auto x = random_vec(static_cast<std::size_t>(rows) * cols, gen);
  std::vector<double> y1(x.size()), y2(x.size());
  std::vector<double> gain(cols, 1.1), bias(cols, -0.05);

  int reps = 50;
  int bad = -1;
  auto t0 = clock_type::now();
  for (int r = 0; r < reps; ++r)
    shine::kernels::serial::softmax_rows(x.data(), y1.data(), rows, cols, nullptr, &bad);
  double sm_serial = seconds_since(t0) / reps;
  t0 = clock_type::now();
  for (int r = 0; r < reps; ++r)
    shine::kernels::softmax_rows(x.data(), y2.data(), rows, cols, nullptr, &bad);
  double sm_parallel = seconds_since(t0) / reps;
  bool sm_ok = bits_equal(y1, y2);

  t0 = clock_type::now();
  for (int r = 0; r < reps; ++r)
    shine::kernels::serial::layer_norm_rows(x.data(), gain.data(), bias.data(), y1.data(), nullptr,
                                            nullptr, rows, cols, 1e-5);
  double ln_serial = seconds_since(t0) / reps;
  t0 = clock_type::now();
  for (int r = 0; r < reps; ++r)
    shine::kernels::layer_norm_rows(x.data(), gain.data(), bias.data(), y2.data(), nullptr,
                                    nullptr, rows, cols, 1e-5);
  double ln_parallel = seconds_since(t0) / reps;
  bool ln_ok = bits_equal(y1, y2);

  std::printf("softmax %5dx%-4d serial %8.3f ms  parallel %8.3f ms  speedup %4.2fx  bits %s\n",
              rows, cols, sm_serial * 1e3, sm_parallel * 1e3, sm_serial / sm_parallel,
              sm_ok ? "equal" : "DIFFER");
  std::printf("lnorm   %5dx%-4d serial %8.3f ms  parallel %8.3f ms  speedup %4.2fx  bits %s\n",
              rows, cols, ln_serial * 1e3, ln_parallel * 1e3, ln_serial / ln_parallel,
              ln_ok ? "equal" : "DIFFER");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP not enabled; dispatch falls back to the serial path\n");
#endif
  std::mt19937_64 gen(17);
  for (int n : {32, 64, 128, 256, 384}) bench_matmul(n, gen);
  bench_rows(2048, 256, gen);
  bench_rows(8192, 64, gen);
  return 0;
}
