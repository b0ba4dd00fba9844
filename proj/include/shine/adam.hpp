#pragma once

#include <cstdint>
#include <vector>

#include "shine/autodiff.hpp"

namespace shine {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Linear warmup over this many steps (0 disables).
  int warmup_steps = 0;
};

// Standard Adam with bias correction over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig cfg);

  // Applies one update from the gradients currently held in the parameters.
  // Throws NumericError on non-finite gradients.
  void step();
  void zero_grad();
  std::int64_t steps() const { return step_count_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  AdamConfig cfg_;
  std::int64_t step_count_ = 0;
};

}  // namespace shine
