#pragma once

#include <utility>
#include <vector>

#include "shine/autodiff.hpp"
#include "shine/encoder.hpp"

namespace shine {

// The three alignment granularities between contextual and feature
// representations: whole sentence, sliding sub-spans, task mentions.
struct InteractionConfig {
  int span_length = 4;
  double alpha = 10.0;
  bool global_level = true;
  bool local_level = true;
  bool task_level = true;
  // How a block of representation rows becomes a distribution: mean-pool the
  // block then softmax over the hidden axis, or per-token softmax with the
  // KL averaged over positions.
  enum class Pooling { mean_block, per_token };
  Pooling pooling = Pooling::mean_block;

  void validate() const;
};

using MentionSet = std::vector<std::pair<int, int>>;  // inclusive token intervals

// Mean-pool the rows of a block, then softmax over the hidden axis.
Tape::Var rep_to_distribution(Tape& t, Tape::Var block);

// KL(p||q) + KL(q||p) with epsilon-clamped logs; p and q are 1xN
// distributions.
Tape::Var sym_kl(Tape& t, Tape::Var p, Tape::Var q);

Tape::Var global_loss(Tape& t, Tape::Var h_c, Tape::Var h_l, const Mask& mask,
                      InteractionConfig::Pooling pooling = InteractionConfig::Pooling::mean_block);

// Sliding windows of span_length with stride 1 over the unmasked prefix; a
// sentence shorter than the window is one whole-sentence window.
Tape::Var local_loss(Tape& t, Tape::Var h_c, Tape::Var h_l, int span_length, const Mask& mask,
                     InteractionConfig::Pooling pooling = InteractionConfig::Pooling::mean_block);

// Mean over mention blocks; zero for an empty mention set.
Tape::Var task_level_loss(Tape& t, Tape::Var h_c, Tape::Var h_l, const MentionSet& mentions,
                          InteractionConfig::Pooling pooling = InteractionConfig::Pooling::mean_block);

struct InteractionTerms {
  Tape::Var global = -1;
  Tape::Var local = -1;
  Tape::Var task = -1;
  Tape::Var total = -1;  // sum of the enabled levels, unweighted
};

InteractionTerms interaction_loss(Tape& t, Tape::Var h_c, Tape::Var h_l,
                                  const MentionSet& mentions, const Mask& mask,
                                  const InteractionConfig& cfg);

}  // namespace shine
