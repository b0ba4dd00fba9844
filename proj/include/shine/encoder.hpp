#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shine/autodiff.hpp"
#include "shine/params.hpp"
#include "shine/syntax.hpp"

namespace shine {

using Mask = std::vector<std::uint8_t>;  // 1 = real token, 0 = padding

struct EncoderConfig {
  int d_model = 64;
  int heads = 8;
  int contextual_layers = 2;
  int feature_layers = 2;
  int fusion_layers = 1;
  int ffn_width = 0;  // 0 -> 4 * d_model
  double dropout = 0.1;

  int ffn() const { return ffn_width > 0 ? ffn_width : 4 * d_model; }
  int head_dim() const { return d_model / heads; }
  void validate() const;
};

// The concatenated language-universal feature matrix for one sentence:
// POS / dependency-relation / (optional) entity-type one-hots plus the
// constituent span-count columns as reals.
struct FeatureBundle {
  Tensor pos_onehot;
  Tensor deprel_onehot;
  Tensor entity_onehot;  // may be empty (NER drops it)
  Tensor span_counts;    // may be empty (constituency ablation)

  int length() const { return pos_onehot.rows(); }
  int width() const;
  Tensor concat() const;
};

// Sinusoidal position table for a length-L sentence.
Tensor positional_encoding(int length, int d_model);

// Plain scaled dot-product attention per head: softmax(QK^T/sqrt(d)) V with
// masked key columns excluded.
Tape::Var attention(Tape& t, Tape::Var q, Tape::Var k, Tape::Var v, const Mask& mask);

// Frequency-modulated attention: the softmax weights A are reweighted to
// G(A)_ij = F_ij A_ij / sum_j F_ij A_ij before multiplying V. The same F
// modulates every head.
Tape::Var frequency_attention(Tape& t, Tape::Var q, Tape::Var k, Tape::Var v, const Tensor& freq,
                              const Mask& mask);

struct TransformerLayer {
  Parameter *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
  Parameter *ln1_g, *ln1_b;
  Parameter *w1, *b1, *w2, *b2;
  Parameter *ln2_g, *ln2_b;

  static TransformerLayer create(ParamStore& store, const std::string& prefix,
                                 const EncoderConfig& cfg, Rng& rng);

  // freq == nullptr selects plain attention. dropout_rng == nullptr disables
  // dropout (evaluation / gradient checks).
  Tape::Var forward(Tape& t, Tape::Var x, const EncoderConfig& cfg, const Mask& mask,
                    const Tensor* freq, Rng* dropout_rng) const;
};

// Contextual encoder: trainable token embeddings + sinusoidal positions + a
// small transformer stack.
struct ContextualEncoder {
  Parameter* tok_emb = nullptr;
  std::vector<TransformerLayer> layers;

  static ContextualEncoder create(ParamStore& store, const EncoderConfig& cfg, int vocab_size,
                                  Rng& rng);
  Tape::Var forward(Tape& t, const EncoderConfig& cfg, const std::vector<int>& token_ids,
                    const Mask& mask, Rng* dropout_rng) const;
};

// Feature encoder: linear projection of the feature bundle into d_model, then
// a transformer stack without positional encodings (the features themselves
// are position-bound, and span information should survive reordering).
struct FeatureEncoder {
  Parameter* in_w = nullptr;
  Parameter* in_b = nullptr;
  std::vector<TransformerLayer> layers;

  static FeatureEncoder create(ParamStore& store, const EncoderConfig& cfg, int feature_width,
                               Rng& rng);
  Tape::Var forward(Tape& t, const EncoderConfig& cfg, const Tensor& features, const Mask& mask,
                    Rng* dropout_rng) const;
};

// Fusion: Linear([h_c ; h_l]) followed by transformer layers whose
// self-attention is frequency-modulated.
struct FusionEncoder {
  Parameter* fuse_w = nullptr;
  Parameter* fuse_b = nullptr;
  std::vector<TransformerLayer> layers;

  static FusionEncoder create(ParamStore& store, const EncoderConfig& cfg, Rng& rng);
  Tape::Var forward(Tape& t, const EncoderConfig& cfg, Tape::Var h_c, Tape::Var h_l,
                    const Tensor& freq, const Mask& mask, Rng* dropout_rng) const;
};

}  // namespace shine
