#include "shine/model.hpp"

#include <algorithm>

#include "shine/errors.hpp"

namespace shine {

std::string task_name(Task t) {
  switch (t) {
    case Task::ner: return "ner";
    case Task::relation: return "relation";
    case Task::earl: return "earl";
  }
  return "?";
}

Task task_from_name(const std::string& name) {
  if (name == "ner") return Task::ner;
  if (name == "relation") return Task::relation;
  if (name == "earl") return Task::earl;
  throw ConfigError("unknown task '" + name + "'");
}

void ModelConfig::validate() const {
  enc.validate();
  if (vocab_size < 2) throw ConfigError("model: vocab too small");
  if (feature_width < 1) throw ConfigError("model: feature width must be >= 1");
  if (num_labels < 2) throw ConfigError("model: need at least two labels");
}

int feature_width_for(const Schemas& schemas, Task task, bool use_span_counts) {
  int w = static_cast<int>(schemas.pos_tags.size() + schemas.deprel_tags.size());
  if (task != Task::ner) w += static_cast<int>(schemas.bio_entity_tags().size());
  if (use_span_counts) w += 2 * static_cast<int>(schemas.phrase_labels.size());
  return w;
}

namespace {

Tensor one_hot_block(const std::vector<std::string>& tags, const std::vector<std::string>& schema,
                     const char* what) {
  Tensor out(static_cast<int>(tags.size()), static_cast<int>(schema.size()));
  for (std::size_t i = 0; i < tags.size(); ++i) {
    auto it = std::find(schema.begin(), schema.end(), tags[i]);
    if (it == schema.end())
      throw ValidationError(std::string(what) + " tag '" + tags[i] + "' not in schema");
    out.at(static_cast<int>(i), static_cast<int>(it - schema.begin())) = 1.0;
  }
  return out;
}

}  // namespace

FeatureBundle make_feature_bundle(const Sentence& s, const Schemas& schemas, Task task,
                                  bool use_span_counts) {
  FeatureBundle b;
  b.pos_onehot = one_hot_block(s.pos, schemas.pos_tags, "POS");
  b.deprel_onehot = one_hot_block(s.deprel, schemas.deprel_tags, "deprel");
  if (task != Task::ner)
    b.entity_onehot = one_hot_block(s.entity_tags, schemas.bio_entity_tags(), "entity");
  if (use_span_counts) {
    SpanFeatureMatrix counts = build_span_counts(s.spans, s.length(), schemas.phrase_labels);
    Tensor sc(counts.counts.rows, counts.counts.cols);
    for (int i = 0; i < counts.counts.rows; ++i)
      for (int j = 0; j < counts.counts.cols; ++j)
        sc.at(i, j) = static_cast<double>(counts.counts.at(i, j));
    b.span_counts = std::move(sc);
  }
  return b;
}

Tensor frequency_tensor(const Sentence& s, bool use_frequency) {
  int L = s.length();
  if (!use_frequency) return Tensor::full(L, L, 1.0);
  FrequencyMatrix fm = build_frequency_matrix(s.spans, L);
  Tensor out(L, L);
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j) out.at(i, j) = static_cast<double>(fm.f.at(i, j));
  return out;
}

ModelInput make_model_input(const Sentence& s, const Schemas& schemas, const Vocabulary& vocab,
                            const ModelConfig& cfg) {
  ModelInput in;
  in.token_ids.reserve(s.tokens.size());
  for (const auto& tok : s.tokens) in.token_ids.push_back(vocab.id_of(tok));
  in.features = make_feature_bundle(s, schemas, cfg.task, cfg.use_span_counts).concat();
  in.freq = frequency_tensor(s, cfg.use_frequency);
  in.mask.assign(s.tokens.size(), 1);
  return in;
}

ShineModel::ShineModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  contextual_ = ContextualEncoder::create(store_, cfg_.enc, cfg_.vocab_size, rng);
  feature_ = FeatureEncoder::create(store_, cfg_.enc, cfg_.feature_width, rng);
  fusion_ = FusionEncoder::create(store_, cfg_.enc, rng);
  if (cfg_.task == Task::ner)
    ner_ = NerHead::create(store_, cfg_.enc.d_model, cfg_.num_labels, rng);
  else
    pair_ = PairHead::create(store_, cfg_.enc.d_model, cfg_.num_labels, rng);
}

ShineModel::Encoded ShineModel::encode(Tape& t, const ModelInput& in, Rng* dropout_rng) const {
  Encoded out;
  out.h_c = contextual_.forward(t, cfg_.enc, in.token_ids, in.mask, dropout_rng);
  out.h_l = feature_.forward(t, cfg_.enc, in.features, in.mask, dropout_rng);
  out.h_f = fusion_.forward(t, cfg_.enc, out.h_c, out.h_l, in.freq, in.mask, dropout_rng);
  return out;
}

const NerHead& ShineModel::ner_head() const {
  if (cfg_.task != Task::ner) throw Error("model has no NER head");
  return ner_;
}

const PairHead& ShineModel::pair_head() const {
  if (cfg_.task == Task::ner) throw Error("model has no pair head");
  return pair_;
}

void ShineModel::copy_values_from(const ShineModel& other) {
  auto mine = parameters();
  auto theirs = other.parameters();
  if (mine.size() != theirs.size()) throw Error("copy_values_from: parameter layout mismatch");
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i]->name != theirs[i]->name || !mine[i]->value.same_shape(theirs[i]->value))
      throw Error("copy_values_from: parameter layout mismatch at " + mine[i]->name);
    mine[i]->value = theirs[i]->value;
  }
}

}  // namespace shine
