#pragma once

#include <memory>
#include <string>
#include <vector>

#include "shine/autodiff.hpp"
#include "shine/rng.hpp"

namespace shine {

enum class Init { zeros, xavier, embedding };

// Owns model parameters in creation order; names are unique and stable, which
// keeps checkpoints and optimizer state aligned across runs.
class ParamStore {
 public:
  Parameter& create(const std::string& name, int rows, int cols, Init init, Rng& rng);
  Parameter* find(const std::string& name) const;
  std::vector<Parameter*> all() const;
  std::size_t count() const { return params_.size(); }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

}  // namespace shine
