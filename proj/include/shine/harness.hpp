#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "shine/adam.hpp"
#include "shine/corpus.hpp"
#include "shine/interaction.hpp"
#include "shine/metrics.hpp"
#include "shine/model.hpp"

namespace shine {

enum class AblationVariant { full, no_interaction, no_frequency, no_constituency, no_all };

std::string variant_name(AblationVariant v);
AblationVariant variant_from_name(const std::string& name);

struct TrainConfig {
  Task task = Task::ner;
  EncoderConfig enc;
  InteractionConfig inter;
  AblationVariant ablation = AblationVariant::full;
  AdamConfig optim{.lr = 5e-4};
  int epochs = 100;
  int batch_size = 8;
  std::uint64_t seed = 1;
  int min_count = 1;
  int eval_every = 5;            // dev-evaluation cadence in epochs
  int patience = 0;              // dev evaluations without improvement; 0 = off
  double stop_at_dev_f1 = 0.0;   // stop once dev F1 reaches this; 0 = off
  bool select_best_dev = true;   // restore the best-dev parameters at the end
  std::string checkpoint_path;   // optional path to save the final model

  bool use_interaction() const {
    return ablation != AblationVariant::no_interaction && ablation != AblationVariant::no_all;
  }
  bool use_frequency() const { return ablation == AblationVariant::full || ablation == AblationVariant::no_interaction; }
  bool use_span_counts() const {
    return ablation != AblationVariant::no_constituency && ablation != AblationVariant::no_all;
  }
  void validate() const;
};

// Key-value config text (one `key = value` per line, `#` comments).
TrainConfig parse_train_config(const std::string& text, const std::string& origin);
TrainConfig load_train_config(const std::string& path);
void apply_config_override(TrainConfig& cfg, const std::string& key, const std::string& value);
std::string train_config_to_text(const TrainConfig& cfg);
std::string config_hash(const std::string& resolved_text);

struct RunReport {
  std::vector<double> task_loss;        // per-epoch means
  std::vector<double> global_loss;
  std::vector<double> local_loss;
  std::vector<double> task_level_loss;
  std::map<std::string, PRF> metrics;   // per evaluation corpus
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string hash;
  int best_epoch = -1;
  double best_dev_f1 = 0.0;
  int epochs_run = 0;

  std::string to_json() const;
  std::string to_text() const;
};

// A trained model with everything needed to run it on new text.
struct TrainedModel {
  ModelConfig model_config;
  InteractionConfig inter;
  Vocabulary vocab;
  Schemas schemas;
  std::unique_ptr<ShineModel> model;
};

TrainedModel train(const TrainConfig& cfg, const Corpus& train_corpus, const Corpus& dev_corpus,
                   RunReport* report);

struct SentencePrediction {
  std::string id;
  std::vector<std::string> tags;  // NER only
  std::vector<Mention> mentions;
};

struct EvalResult {
  PRF prf;
  std::vector<SentencePrediction> predictions;
};

EvalResult evaluate(const TrainedModel& tm, const Corpus& corpus);

// Prediction dump in the corpus mention-record format.
std::string predictions_to_text(const std::vector<SentencePrediction>& preds);
std::string metrics_to_kv(const PRF& prf, Task task, const std::string& language,
                          std::uint64_t seed);
std::string metrics_to_json(const PRF& prf, Task task, const std::string& language,
                            std::uint64_t seed);

void save_checkpoint(const TrainedModel& tm, const std::string& path);
TrainedModel load_checkpoint(const std::string& path);

struct DistillConfig {
  AdamConfig optim{.lr = 5e-4};
  int epochs = 150;
  int batch_size = 8;
  std::uint64_t seed = 1;
  bool init_from_teacher = false;
  double dropout = 0.0;  // student dropout during distillation
};

// Teacher stays frozen; the student (same architecture) is trained on MSE
// against the teacher's token distributions over the unlabeled corpus.
// NER only: the soft labels are per-token distributions.
TrainedModel distill(const TrainedModel& teacher, const Corpus& unlabeled_target,
                     const DistillConfig& cfg, RunReport* report);

struct AblationCell {
  std::vector<double> source_f1;  // per seed
  std::vector<double> target_f1;
  double source_mean = 0.0, source_stdev = 0.0;
  double target_mean = 0.0, target_stdev = 0.0;
};

struct AblationTable {
  std::vector<std::pair<AblationVariant, AblationCell>> rows;
  std::vector<std::uint64_t> seeds;

  const AblationCell& cell(AblationVariant v) const;
  std::string to_text() const;
  std::string to_json() const;
};

struct AblationData {
  const Corpus& source_train;
  const Corpus& source_dev;
  const Corpus& source_test;
  const Corpus& target_test;
};

AblationTable run_ablation(const TrainConfig& base, const AblationData& data,
                           const std::vector<std::uint64_t>& seeds,
                           std::vector<RunReport>* reports = nullptr);

}  // namespace shine
