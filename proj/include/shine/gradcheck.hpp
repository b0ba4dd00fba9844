#pragma once

#include <functional>
#include <string>
#include <vector>

#include "shine/autodiff.hpp"

namespace shine {

struct GradCheckReport {
  struct Entry {
    std::string name;
    double max_rel_err = 0.0;
  };
  std::vector<Entry> entries;
  double tolerance = 0.0;

  double worst() const {
    double w = 0.0;
    for (const auto& e : entries) w = std::max(w, e.max_rel_err);
    return w;
  }
  bool passed() const { return worst() < tolerance; }
};

// Compares reverse-mode gradients of a scalar function against central finite
// differences. `fn` rebuilds the loss graph from the current values of
// `inputs` on every call; it must be deterministic (no dropout).
GradCheckReport gradient_check(const std::function<Tape::Var(Tape&)>& fn,
                               const std::vector<Parameter*>& inputs, double tolerance,
                               double h = 1e-5);

}  // namespace shine
