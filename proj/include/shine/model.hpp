#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "shine/corpus.hpp"
#include "shine/encoder.hpp"
#include "shine/params.hpp"
#include "shine/syntax.hpp"
#include "shine/tasks.hpp"

namespace shine {

enum class Task { ner, relation, earl };

std::string task_name(Task t);
Task task_from_name(const std::string& name);

struct ModelConfig {
  Task task = Task::ner;
  EncoderConfig enc;
  int vocab_size = 0;
  int feature_width = 0;
  int num_labels = 0;  // BIO tag count for NER; class count (incl. None) otherwise
  bool use_frequency = true;
  bool use_span_counts = true;

  void validate() const;
};

// Width of the language-universal feature bundle under the given task
// (NER drops the entity-type block) and ablation.
int feature_width_for(const Schemas& schemas, Task task, bool use_span_counts);

// Per-sentence inputs, precomputed once per corpus.
struct ModelInput {
  std::vector<int> token_ids;
  Tensor features;  // L x feature_width
  Tensor freq;      // L x L; all ones when the frequency matrix is ablated
  Mask mask;        // all ones for unpadded sentences
};

FeatureBundle make_feature_bundle(const Sentence& s, const Schemas& schemas, Task task,
                                  bool use_span_counts);
Tensor frequency_tensor(const Sentence& s, bool use_frequency);
ModelInput make_model_input(const Sentence& s, const Schemas& schemas, const Vocabulary& vocab,
                            const ModelConfig& cfg);

// All trainable parameters of the contextual encoder, feature encoder,
// fusion stack and the task head, plus their configuration.
class ShineModel {
 public:
  ShineModel(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  std::vector<Parameter*> parameters() const { return store_.all(); }
  Parameter* parameter(const std::string& name) const { return store_.find(name); }

  struct Encoded {
    Tape::Var h_c = -1;
    Tape::Var h_l = -1;
    Tape::Var h_f = -1;
  };
  Encoded encode(Tape& t, const ModelInput& in, Rng* dropout_rng) const;

  const NerHead& ner_head() const;
  const PairHead& pair_head() const;

  // Copies parameter values from another instance with identical layout.
  void copy_values_from(const ShineModel& other);

 private:
  ModelConfig cfg_;
  ParamStore store_;
  ContextualEncoder contextual_;
  FeatureEncoder feature_;
  FusionEncoder fusion_;
  NerHead ner_;
  PairHead pair_;
};

}  // namespace shine
