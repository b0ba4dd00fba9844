#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "shine/tensor.hpp"

namespace shine {

// All randomness in the library flows through one of these, seeded
// explicitly, so every run is reproducible from its config.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }
  double normal(double mean, double stddev) {
    return std::normal_distribution<double>(mean, stddev)(gen_);
  }
  // Uniform integer in [0, n).
  int index(int n) { return static_cast<int>(std::uniform_int_distribution<int>(0, n - 1)(gen_)); }
  bool bernoulli(double p) { return std::bernoulli_distribution(p)(gen_); }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

// Weight matrices: uniform in +-sqrt(6/(fan_in+fan_out)).
inline void init_xavier(Tensor& w, Rng& rng) {
  double bound = std::sqrt(6.0 / (w.rows() + w.cols()));
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-bound, bound);
}

// Embedding tables: normal(0, 0.02).
inline void init_embedding(Tensor& w, Rng& rng) {
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.normal(0.0, 0.02);
}

}  // namespace shine
