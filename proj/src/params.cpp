#include "shine/params.hpp"

#include "shine/errors.hpp"

namespace shine {

Parameter& ParamStore::create(const std::string& name, int rows, int cols, Init init, Rng& rng) {
  if (find(name)) throw Error("duplicate parameter name " + name);
  Tensor t(rows, cols);
  switch (init) {
    case Init::zeros: break;
    case Init::xavier: init_xavier(t, rng); break;
    case Init::embedding: init_embedding(t, rng); break;
  }
  params_.push_back(std::make_unique<Parameter>(name, std::move(t)));
  return *params_.back();
}

Parameter* ParamStore::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

std::vector<Parameter*> ParamStore::all() const {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

}  // namespace shine
