#include "shine/gradcheck.hpp"

#include <cmath>

namespace shine {

namespace {

double eval(const std::function<Tape::Var(Tape&)>& fn) {
  Tape t;
  return t.scalar(fn(t));
}

}  // namespace

GradCheckReport gradient_check(const std::function<Tape::Var(Tape&)>& fn,
                               const std::vector<Parameter*>& inputs, double tolerance,
                               double h) {
  GradCheckReport report;
  report.tolerance = tolerance;

  for (Parameter* p : inputs) p->zero_grad();
  {
    Tape t;
    t.backward(fn(t));
  }

  for (Parameter* p : inputs) {
    GradCheckReport::Entry e;
    e.name = p->name;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      double orig = p->value[i];
      p->value[i] = orig + h;
      double fp = eval(fn);
      p->value[i] = orig - h;
      double fm = eval(fn);
      p->value[i] = orig;
      double fd = (fp - fm) / (2.0 * h);
      double an = p->grad[i];
      double rel = std::fabs(an - fd) / std::max(1e-3, std::fabs(an) + std::fabs(fd));
      e.max_rel_err = std::max(e.max_rel_err, rel);
    }
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace shine
