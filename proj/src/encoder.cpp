#include "shine/encoder.hpp"

#include <cmath>

#include "shine/errors.hpp"

namespace shine {

void EncoderConfig::validate() const {
  if (d_model < 1 || heads < 1 || contextual_layers < 1 || feature_layers < 1 ||
      fusion_layers < 1)
    throw ConfigError("encoder: all sizes and layer counts must be >= 1");
  if (d_model % heads != 0) throw ConfigError("encoder: d_model must be divisible by heads");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("encoder: dropout must be in [0,1)");
}

int FeatureBundle::width() const {
  int w = pos_onehot.cols() + deprel_onehot.cols();
  if (!entity_onehot.empty()) w += entity_onehot.cols();
  if (!span_counts.empty()) w += span_counts.cols();
  return w;
}

Tensor FeatureBundle::concat() const {
  int L = length();
  Tensor out(L, width());
  int col = 0;
  auto copy_block = [&](const Tensor& b) {
    if (b.empty()) return;
    if (b.rows() != L) throw DimensionError("feature bundle: row mismatch " + b.shape_str());
    for (int i = 0; i < L; ++i)
      for (int j = 0; j < b.cols(); ++j) out.at(i, col + j) = b.at(i, j);
    col += b.cols();
  };
  copy_block(pos_onehot);
  copy_block(deprel_onehot);
  copy_block(entity_onehot);
  copy_block(span_counts);
  return out;
}

Tensor positional_encoding(int length, int d_model) {
  Tensor pe(length, d_model);
  for (int i = 0; i < length; ++i) {
    for (int j = 0; j < d_model; j += 2) {
      double angle = i / std::pow(10000.0, static_cast<double>(j) / d_model);
      pe.at(i, j) = std::sin(angle);
      if (j + 1 < d_model) pe.at(i, j + 1) = std::cos(angle);
    }
  }
  return pe;
}

namespace {

Tape::Var apply_dropout(Tape& t, Tape::Var x, double rate, Rng* rng) {
  if (!rng || rate <= 0.0) return x;
  const Tensor& v = t.val(x);
  Tensor mask(v.rows(), v.cols());
  double keep = 1.0 - rate;
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask[i] = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
  return t.mul(x, t.input(std::move(mask)));
}

Tape::Var attention_weights(Tape& t, Tape::Var q, Tape::Var k, const Mask& mask) {
  int dh = t.val(q).cols();
  Tape::Var scores = t.scale(t.matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(dh)));
  return t.softmax_rows_masked(scores, mask);
}

// One multi-head block: project, run per-head attention, concatenate, project.
Tape::Var multi_head(Tape& t, Tape::Var x, const TransformerLayer& p, const EncoderConfig& cfg,
                     const Mask& mask, const Tensor* freq) {
  Tape::Var q = t.add_rowvec(t.matmul(x, t.param(*p.wq)), t.param(*p.bq));
  Tape::Var k = t.add_rowvec(t.matmul(x, t.param(*p.wk)), t.param(*p.bk));
  Tape::Var v = t.add_rowvec(t.matmul(x, t.param(*p.wv)), t.param(*p.bv));
  int dh = cfg.head_dim();
  Tape::Var merged = -1;
  for (int h = 0; h < cfg.heads; ++h) {
    Tape::Var qh = t.slice_cols(q, h * dh, (h + 1) * dh);
    Tape::Var kh = t.slice_cols(k, h * dh, (h + 1) * dh);
    Tape::Var vh = t.slice_cols(v, h * dh, (h + 1) * dh);
    Tape::Var oh = freq ? frequency_attention(t, qh, kh, vh, *freq, mask)
                        : attention(t, qh, kh, vh, mask);
    merged = h == 0 ? oh : t.concat_cols(merged, oh);
  }
  return t.add_rowvec(t.matmul(merged, t.param(*p.wo)), t.param(*p.bo));
}

}  // namespace

Tape::Var attention(Tape& t, Tape::Var q, Tape::Var k, Tape::Var v, const Mask& mask) {
  return t.matmul(attention_weights(t, q, k, mask), v);
}

Tape::Var frequency_attention(Tape& t, Tape::Var q, Tape::Var k, Tape::Var v, const Tensor& freq,
                              const Mask& mask) {
  int L = t.val(q).rows();
  if (freq.rows() != L || freq.cols() != L)
    throw DimensionError("frequency_attention: F is " + freq.shape_str() + " for length " +
                         std::to_string(L));
  Tape::Var a = attention_weights(t, q, k, mask);
  Tape::Var weighted = t.mul(a, t.input(freq));
  Tape::Var modulated = t.div_colvec(weighted, t.row_sum(weighted));
  return t.matmul(modulated, v);
}

TransformerLayer TransformerLayer::create(ParamStore& store, const std::string& prefix,
                                          const EncoderConfig& cfg, Rng& rng) {
  int d = cfg.d_model, f = cfg.ffn();
  TransformerLayer p;
  p.wq = &store.create(prefix + ".wq", d, d, Init::xavier, rng);
  p.bq = &store.create(prefix + ".bq", 1, d, Init::zeros, rng);
  p.wk = &store.create(prefix + ".wk", d, d, Init::xavier, rng);
  p.bk = &store.create(prefix + ".bk", 1, d, Init::zeros, rng);
  p.wv = &store.create(prefix + ".wv", d, d, Init::xavier, rng);
  p.bv = &store.create(prefix + ".bv", 1, d, Init::zeros, rng);
  p.wo = &store.create(prefix + ".wo", d, d, Init::xavier, rng);
  p.bo = &store.create(prefix + ".bo", 1, d, Init::zeros, rng);
  p.ln1_g = &store.create(prefix + ".ln1_g", 1, d, Init::zeros, rng);
  p.ln1_g->value.fill(1.0);
  p.ln1_b = &store.create(prefix + ".ln1_b", 1, d, Init::zeros, rng);
  p.w1 = &store.create(prefix + ".w1", d, f, Init::xavier, rng);
  p.b1 = &store.create(prefix + ".b1", 1, f, Init::zeros, rng);
  p.w2 = &store.create(prefix + ".w2", f, d, Init::xavier, rng);
  p.b2 = &store.create(prefix + ".b2", 1, d, Init::zeros, rng);
  p.ln2_g = &store.create(prefix + ".ln2_g", 1, d, Init::zeros, rng);
  p.ln2_g->value.fill(1.0);
  p.ln2_b = &store.create(prefix + ".ln2_b", 1, d, Init::zeros, rng);
  return p;
}

Tape::Var TransformerLayer::forward(Tape& t, Tape::Var x, const EncoderConfig& cfg,
                                    const Mask& mask, const Tensor* freq,
                                    Rng* dropout_rng) const {
  Tape::Var attn = multi_head(t, x, *this, cfg, mask, freq);
  attn = apply_dropout(t, attn, cfg.dropout, dropout_rng);
  Tape::Var x1 = t.layer_norm_rows(t.add(x, attn), t.param(*ln1_g), t.param(*ln1_b));
  Tape::Var h = t.relu(t.add_rowvec(t.matmul(x1, t.param(*w1)), t.param(*b1)));
  Tape::Var ff = t.add_rowvec(t.matmul(h, t.param(*w2)), t.param(*b2));
  ff = apply_dropout(t, ff, cfg.dropout, dropout_rng);
  return t.layer_norm_rows(t.add(x1, ff), t.param(*ln2_g), t.param(*ln2_b));
}

ContextualEncoder ContextualEncoder::create(ParamStore& store, const EncoderConfig& cfg,
                                            int vocab_size, Rng& rng) {
  ContextualEncoder e;
  e.tok_emb = &store.create("ctx.tok_emb", vocab_size, cfg.d_model, Init::embedding, rng);
  for (int l = 0; l < cfg.contextual_layers; ++l)
    e.layers.push_back(TransformerLayer::create(store, "ctx.layer" + std::to_string(l), cfg, rng));
  return e;
}

Tape::Var ContextualEncoder::forward(Tape& t, const EncoderConfig& cfg,
                                     const std::vector<int>& token_ids, const Mask& mask,
                                     Rng* dropout_rng) const {
  if (token_ids.empty()) throw ValidationError("contextual_encode: empty sentence");
  if (mask.size() != token_ids.size())
    throw DimensionError("contextual_encode: mask length mismatch");
  Tape::Var x = t.embedding(t.param(*tok_emb), token_ids);
  x = t.add(x, t.input(positional_encoding(static_cast<int>(token_ids.size()), cfg.d_model)));
  for (const auto& layer : layers) x = layer.forward(t, x, cfg, mask, nullptr, dropout_rng);
  return t.zero_rows(x, mask);
}

FeatureEncoder FeatureEncoder::create(ParamStore& store, const EncoderConfig& cfg,
                                      int feature_width, Rng& rng) {
  FeatureEncoder e;
  e.in_w = &store.create("feat.in_w", feature_width, cfg.d_model, Init::xavier, rng);
  e.in_b = &store.create("feat.in_b", 1, cfg.d_model, Init::zeros, rng);
  for (int l = 0; l < cfg.feature_layers; ++l)
    e.layers.push_back(TransformerLayer::create(store, "feat.layer" + std::to_string(l), cfg, rng));
  return e;
}

Tape::Var FeatureEncoder::forward(Tape& t, const EncoderConfig& cfg, const Tensor& features,
                                  const Mask& mask, Rng* dropout_rng) const {
  if (features.cols() != in_w->value.rows())
    throw DimensionError("feature_encode: bundle width " + std::to_string(features.cols()) +
                         " does not match declared schema width " +
                         std::to_string(in_w->value.rows()));
  if (static_cast<int>(mask.size()) != features.rows())
    throw DimensionError("feature_encode: mask length mismatch");
  Tape::Var x = t.add_rowvec(t.matmul(t.input(features), t.param(*in_w)), t.param(*in_b));
  for (const auto& layer : layers) x = layer.forward(t, x, cfg, mask, nullptr, dropout_rng);
  return t.zero_rows(x, mask);
}

FusionEncoder FusionEncoder::create(ParamStore& store, const EncoderConfig& cfg, Rng& rng) {
  FusionEncoder e;
  e.fuse_w = &store.create("fuse.w", 2 * cfg.d_model, cfg.d_model, Init::xavier, rng);
  e.fuse_b = &store.create("fuse.b", 1, cfg.d_model, Init::zeros, rng);
  for (int l = 0; l < cfg.fusion_layers; ++l)
    e.layers.push_back(TransformerLayer::create(store, "fuse.layer" + std::to_string(l), cfg, rng));
  return e;
}

Tape::Var FusionEncoder::forward(Tape& t, const EncoderConfig& cfg, Tape::Var h_c, Tape::Var h_l,
                                 const Tensor& freq, const Mask& mask, Rng* dropout_rng) const {
  require_same_shape(t.val(h_c), t.val(h_l), "fuse");
  Tape::Var x = t.add_rowvec(t.matmul(t.concat_cols(h_c, h_l), t.param(*fuse_w)),
                             t.param(*fuse_b));
  for (const auto& layer : layers) x = layer.forward(t, x, cfg, mask, &freq, dropout_rng);
  return t.zero_rows(x, mask);
}

}  // namespace shine
