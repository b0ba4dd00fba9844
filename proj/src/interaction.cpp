#include "shine/interaction.hpp"

#include <algorithm>

#include "shine/errors.hpp"

namespace shine {

namespace {

using Pooling = InteractionConfig::Pooling;

int unmasked_prefix(const Mask& mask) {
  int n = 0;
  while (n < static_cast<int>(mask.size()) && mask[n]) ++n;
  for (int i = n; i < static_cast<int>(mask.size()); ++i)
    if (mask[i]) throw ValidationError("mask must be a contiguous prefix of real tokens");
  return n;
}

// KL(p||q) summed over the hidden axis for each row, as an rx1 column.
Tape::Var kl_rows(Tape& t, Tape::Var p, Tape::Var q) {
  return t.row_sum(t.mul(p, t.sub(t.log_eps(p), t.log_eps(q))));
}

// Symmetric KL between two aligned blocks under the chosen pooling.
Tape::Var block_divergence(Tape& t, Tape::Var block_c, Tape::Var block_l, Pooling pooling) {
  if (pooling == Pooling::mean_block) {
    return sym_kl(t, rep_to_distribution(t, block_c), rep_to_distribution(t, block_l));
  }
  Tape::Var p = t.softmax_rows(block_c);
  Tape::Var q = t.softmax_rows(block_l);
  Tape::Var per_token = t.add(kl_rows(t, p, q), kl_rows(t, q, p));
  return t.mean_rows(per_token);  // rx1 -> 1x1
}

}  // namespace

void InteractionConfig::validate() const {
  if (span_length < 1) throw ConfigError("interaction: span length must be >= 1");
  if (alpha < 0.0) throw ConfigError("interaction: alpha must be >= 0");
}

Tape::Var rep_to_distribution(Tape& t, Tape::Var block) {
  if (t.val(block).rows() < 1) throw DimensionError("rep_to_distribution: empty block");
  return t.softmax_rows(t.mean_rows(block));
}

Tape::Var sym_kl(Tape& t, Tape::Var p, Tape::Var q) {
  const Tensor& P = t.val(p);
  const Tensor& Q = t.val(q);
  if (P.rows() != 1 || Q.rows() != 1 || P.cols() != Q.cols())
    throw DimensionError("sym_kl: " + P.shape_str() + " vs " + Q.shape_str());
  Tape::Var forward = t.sum_all(t.mul(p, t.sub(t.log_eps(p), t.log_eps(q))));
  Tape::Var reverse = t.sum_all(t.mul(q, t.sub(t.log_eps(q), t.log_eps(p))));
  return t.add(forward, reverse);
}

Tape::Var global_loss(Tape& t, Tape::Var h_c, Tape::Var h_l, const Mask& mask, Pooling pooling) {
  require_same_shape(t.val(h_c), t.val(h_l), "global_loss");
  int n = unmasked_prefix(mask);
  if (n == 0) throw ValidationError("global_loss: all-masked sentence");
  Tape::Var bc = n == t.val(h_c).rows() ? h_c : t.slice_rows(h_c, 0, n);
  Tape::Var bl = n == t.val(h_l).rows() ? h_l : t.slice_rows(h_l, 0, n);
  return block_divergence(t, bc, bl, pooling);
}

Tape::Var local_loss(Tape& t, Tape::Var h_c, Tape::Var h_l, int span_length, const Mask& mask,
                     Pooling pooling) {
  require_same_shape(t.val(h_c), t.val(h_l), "local_loss");
  if (span_length < 1) throw ConfigError("local_loss: span length must be >= 1");
  int n = unmasked_prefix(mask);
  if (n == 0) throw ValidationError("local_loss: all-masked sentence");
  int window = std::min(span_length, n);
  int count = n - window + 1;
  Tape::Var acc = -1;
  for (int i = 0; i < count; ++i) {
    Tape::Var wc = t.slice_rows(h_c, i, i + window);
    Tape::Var wl = t.slice_rows(h_l, i, i + window);
    Tape::Var d = block_divergence(t, wc, wl, pooling);
    acc = i == 0 ? d : t.add(acc, d);
  }
  return t.scale(acc, 1.0 / count);
}

Tape::Var task_level_loss(Tape& t, Tape::Var h_c, Tape::Var h_l, const MentionSet& mentions,
                          Pooling pooling) {
  require_same_shape(t.val(h_c), t.val(h_l), "task_level_loss");
  if (mentions.empty()) return t.input(Tensor(1, 1));
  int L = t.val(h_c).rows();
  Tape::Var acc = -1;
  for (std::size_t m = 0; m < mentions.size(); ++m) {
    auto [s, e] = mentions[m];
    if (s < 0 || e < s || e >= L)
      throw ValidationError("task_level_loss: mention [" + std::to_string(s) + "," +
                            std::to_string(e) + "] out of range");
    Tape::Var bc = t.slice_rows(h_c, s, e + 1);
    Tape::Var bl = t.slice_rows(h_l, s, e + 1);
    Tape::Var d = block_divergence(t, bc, bl, pooling);
    acc = m == 0 ? d : t.add(acc, d);
  }
  return t.scale(acc, 1.0 / static_cast<double>(mentions.size()));
}

InteractionTerms interaction_loss(Tape& t, Tape::Var h_c, Tape::Var h_l,
                                  const MentionSet& mentions, const Mask& mask,
                                  const InteractionConfig& cfg) {
  cfg.validate();
  InteractionTerms out;
  Tape::Var zero = t.input(Tensor(1, 1));
  out.global = cfg.global_level ? global_loss(t, h_c, h_l, mask, cfg.pooling) : zero;
  out.local = cfg.local_level ? local_loss(t, h_c, h_l, cfg.span_length, mask, cfg.pooling) : zero;
  out.task = cfg.task_level ? task_level_loss(t, h_c, h_l, mentions, cfg.pooling) : zero;
  out.total = t.add(t.add(out.global, out.local), out.task);
  return out;
}

}  // namespace shine
