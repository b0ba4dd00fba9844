#include "shine/adam.hpp"

#include <cmath>

#include "shine/errors.hpp"

namespace shine {

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  if (cfg_.lr <= 0.0) throw ConfigError("adam: learning rate must be > 0");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Parameter* p : params_) {
    m_.emplace_back(p->value.rows(), p->value.cols());
    v_.emplace_back(p->value.rows(), p->value.cols());
  }
}

void Adam::step() {
  ++step_count_;
  double lr = cfg_.lr;
  if (cfg_.warmup_steps > 0 && step_count_ <= cfg_.warmup_steps)
    lr = cfg_.lr * static_cast<double>(step_count_) / cfg_.warmup_steps;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    if (!p.grad.all_finite()) throw NumericError("adam: non-finite gradient in " + p.name);
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      double gi = p.grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      p.value[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

}  // namespace shine
