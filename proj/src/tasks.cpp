#include "shine/tasks.hpp"

#include "shine/errors.hpp"

namespace shine {

NerHead NerHead::create(ParamStore& store, int d_model, int num_labels, Rng& rng) {
  NerHead h;
  h.w = &store.create("ner.w", d_model, num_labels, Init::xavier, rng);
  h.b = &store.create("ner.b", 1, num_labels, Init::zeros, rng);
  return h;
}

Tape::Var NerHead::forward(Tape& t, Tape::Var h_f) const {
  return t.softmax_rows(t.add_rowvec(t.matmul(h_f, t.param(*w)), t.param(*b)));
}

Tape::Var ner_loss(Tape& t, Tape::Var probs, const std::vector<int>& gold, const Mask& mask) {
  const Tensor& P = t.val(probs);
  if (static_cast<int>(gold.size()) != P.rows())
    throw DimensionError("ner_loss: " + std::to_string(gold.size()) + " labels for " +
                         std::to_string(P.rows()) + " rows");
  for (int g : gold)
    if (g < 0 || g >= P.cols())
      throw ValidationError("ner_loss: gold label " + std::to_string(g) + " outside schema of " +
                            std::to_string(P.cols()) + " labels");
  Tape::Var picked = t.pick_per_row(probs, gold);
  return t.scale(t.mean_rows_masked(t.log_eps(picked), mask), -1.0);
}

Tape::Var distill_loss(Tape& t, const Tensor& teacher_probs, Tape::Var student_probs) {
  require_same_shape(teacher_probs, t.val(student_probs), "distill_loss");
  Tape::Var diff = t.sub(student_probs, t.input(teacher_probs));
  return t.mean_all(t.mul(diff, diff));
}

PairHead PairHead::create(ParamStore& store, int d_model, int num_classes, Rng& rng) {
  if (num_classes < 2) throw ConfigError("pair head needs at least two classes (incl. None)");
  PairHead h;
  h.w = &store.create("pair.w", 3 * d_model, num_classes, Init::xavier, rng);
  h.b = &store.create("pair.b", 1, num_classes, Init::zeros, rng);
  return h;
}

Tape::Var PairHead::forward(Tape& t, Tape::Var h_f, std::pair<int, int> span_m,
                            std::pair<int, int> span_n, const Mask& mask) const {
  int L = t.val(h_f).rows();
  for (auto [s, e] : {span_m, span_n})
    if (s < 0 || e < s || e >= L)
      throw ValidationError("pair_forward: degenerate span [" + std::to_string(s) + "," +
                            std::to_string(e) + "]");
  Tape::Var hm = t.max_rows(t.slice_rows(h_f, span_m.first, span_m.second + 1));
  Tape::Var hn = t.max_rows(t.slice_rows(h_f, span_n.first, span_n.second + 1));
  Tape::Var hs = t.max_rows_masked(h_f, mask);
  Tape::Var z = t.concat_cols(t.concat_cols(hm, hn), hs);
  return t.softmax_rows(t.add_rowvec(t.matmul(z, t.param(*w)), t.param(*b)));
}

Tape::Var pair_loss(Tape& t, const PairHead& head, Tape::Var h_f,
                    const std::vector<PairExample>& batch, const Mask& mask) {
  if (batch.empty()) throw ValidationError("pair_loss: empty batch");
  int r = head.w->value.cols();
  Tape::Var acc = -1;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const PairExample& ex = batch[i];
    if (ex.gold < 0 || ex.gold >= r)
      throw ValidationError("pair_loss: gold class " + std::to_string(ex.gold) +
                            " outside schema");
    Tape::Var p = head.forward(t, h_f, ex.span_m, ex.span_n, mask);
    Tape::Var ce = t.scale(t.log_eps(t.pick_per_row(p, {ex.gold})), -1.0);
    acc = i == 0 ? ce : t.add(acc, ce);
  }
  return acc;
}

Tape::Var total_loss(Tape& t, Tape::Var task_loss_value, Tape::Var interaction_value,
                     double alpha) {
  if (alpha < 0.0) throw ConfigError("total_loss: alpha must be >= 0");
  return t.add(task_loss_value, t.scale(interaction_value, alpha));
}

}  // namespace shine
