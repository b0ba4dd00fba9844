#pragma once

#include <string>
#include <utility>
#include <vector>

#include "shine/autodiff.hpp"
#include "shine/encoder.hpp"
#include "shine/params.hpp"

namespace shine {

// Token-level softmax classifier over the fused representation.
struct NerHead {
  Parameter* w = nullptr;  // d_model x K
  Parameter* b = nullptr;  // 1 x K

  static NerHead create(ParamStore& store, int d_model, int num_labels, Rng& rng);
  Tape::Var forward(Tape& t, Tape::Var h_f) const;  // L x K probabilities
};

// Mean cross-entropy over the unmasked tokens.
Tape::Var ner_loss(Tape& t, Tape::Var probs, const std::vector<int>& gold, const Mask& mask);

// Mean squared error between teacher and student token distributions,
// averaged over tokens and labels.
Tape::Var distill_loss(Tape& t, const Tensor& teacher_probs, Tape::Var student_probs);

// Pair classifier: max-pooled mention representations plus the max-pooled
// sentence representation, concatenated and fed through one softmax layer.
// Used for both relation extraction (two entity mentions) and argument role
// labeling (trigger and argument).
struct PairHead {
  Parameter* w = nullptr;  // 3*d_model x r
  Parameter* b = nullptr;  // 1 x r

  static PairHead create(ParamStore& store, int d_model, int num_classes, Rng& rng);
  Tape::Var forward(Tape& t, Tape::Var h_f, std::pair<int, int> span_m, std::pair<int, int> span_n,
                    const Mask& mask) const;  // 1 x r probabilities
};

struct PairExample {
  std::pair<int, int> span_m;
  std::pair<int, int> span_n;
  int gold = 0;  // class index; the None class is an ordinary label
};

// Sum of cross-entropies over all candidate pairs.
Tape::Var pair_loss(Tape& t, const PairHead& head, Tape::Var h_f,
                    const std::vector<PairExample>& batch, const Mask& mask);

// task + alpha * interaction.
Tape::Var total_loss(Tape& t, Tape::Var task_loss_value, Tape::Var interaction_value,
                     double alpha);

}  // namespace shine
