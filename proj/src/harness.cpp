#include "shine/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "shine/checkpoint.hpp"
#include "shine/errors.hpp"

namespace shine {

namespace {

using json = nlohmann::ordered_json;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int index_in(const std::vector<std::string>& schema, const std::string& v, const char* what) {
  auto it = std::find(schema.begin(), schema.end(), v);
  if (it == schema.end())
    throw ValidationError(std::string(what) + " '" + v + "' not in schema");
  return static_cast<int>(it - schema.begin());
}

// One sentence, featurized once, with task targets attached.
struct Prepared {
  const Sentence* sentence = nullptr;
  ModelInput input;
  std::vector<int> ner_gold;        // NER
  std::vector<PairExample> pairs;   // relation / EARL candidates
  MentionSet task_mentions;         // mention intervals for the task-level loss
};

std::vector<Mention> entity_mentions(const Sentence& s) {
  std::vector<Mention> out;
  for (const auto& m : s.mentions)
    if (m.kind == Mention::Kind::entity) out.push_back(m);
  return out;
}

std::vector<std::pair<int, int>> trigger_spans(const Sentence& s) {
  std::vector<std::pair<int, int>> out;
  for (const auto& m : s.mentions) {
    if (m.kind != Mention::Kind::event_arg) continue;
    if (std::find(out.begin(), out.end(), m.spans[0]) == out.end()) out.push_back(m.spans[0]);
  }
  return out;
}

std::vector<PairExample> make_candidates(const Sentence& s, Task task, const Schemas& schemas) {
  std::vector<PairExample> out;
  auto entities = entity_mentions(s);
  if (task == Task::relation) {
    int none = index_in(schemas.relation_types, "None", "relation type");
    for (std::size_t i = 0; i < entities.size(); ++i) {
      for (std::size_t j = 0; j < entities.size(); ++j) {
        if (i == j) continue;
        PairExample ex;
        ex.span_m = entities[i].spans[0];
        ex.span_n = entities[j].spans[0];
        ex.gold = none;
        for (const auto& m : s.mentions) {
          if (m.kind == Mention::Kind::relation && m.spans[0] == ex.span_m &&
              m.spans[1] == ex.span_n) {
            ex.gold = index_in(schemas.relation_types, m.type, "relation type");
            break;
          }
        }
        out.push_back(ex);
      }
    }
  } else if (task == Task::earl) {
    int none = index_in(schemas.role_types, "None", "role type");
    for (const auto& trig : trigger_spans(s)) {
      for (const auto& ent : entities) {
        PairExample ex;
        ex.span_m = trig;
        ex.span_n = ent.spans[0];
        ex.gold = none;
        for (const auto& m : s.mentions) {
          if (m.kind == Mention::Kind::event_arg && m.spans[0] == trig &&
              m.spans[1] == ex.span_n) {
            ex.gold = index_in(schemas.role_types, m.type, "role type");
            break;
          }
        }
        out.push_back(ex);
      }
    }
  }
  return out;
}

// Task-related mention intervals for the task-level interaction: entity
// mentions, plus trigger spans for argument role labeling. NER derives them
// from the gold tags so they exist even without mention records.
MentionSet make_task_mentions(const Sentence& s, Task task) {
  MentionSet out;
  if (task == Task::ner) {
    for (const auto& seg : decode_bio(s.entity_tags)) out.emplace_back(seg.start, seg.end);
    return out;
  }
  for (const auto& m : entity_mentions(s)) out.push_back(m.spans[0]);
  if (task == Task::earl)
    for (const auto& t : trigger_spans(s)) out.push_back(t);
  return out;
}

std::vector<Prepared> prepare_corpus(const Corpus& corpus, const Vocabulary& vocab,
                                     const ModelConfig& mc, const Schemas& schemas) {
  std::vector<Prepared> out;
  std::vector<std::string> bio = schemas.bio_entity_tags();
  for (const auto& s : corpus.sentences) {
    Prepared p;
    p.sentence = &s;
    p.input = make_model_input(s, schemas, vocab, mc);
    if (mc.task == Task::ner) {
      for (const auto& tag : s.entity_tags) p.ner_gold.push_back(index_in(bio, tag, "entity tag"));
    } else {
      p.pairs = make_candidates(s, mc.task, schemas);
    }
    p.task_mentions = make_task_mentions(s, mc.task);
    out.push_back(std::move(p));
  }
  return out;
}

struct SentenceLosses {
  double task = 0.0, global = 0.0, local = 0.0, task_level = 0.0;
};

// Builds the full loss graph for one sentence. Returns false when the
// sentence contributes nothing to this task (no candidate pairs).
bool sentence_loss(Tape& t, const ShineModel& model, const Prepared& p, const TrainConfig& cfg,
                   Rng* dropout_rng, Tape::Var* total_out, SentenceLosses* vals) {
  if (model.config().task != Task::ner && p.pairs.empty()) return false;
  ShineModel::Encoded enc = model.encode(t, p.input, dropout_rng);
  Tape::Var task_var;
  if (model.config().task == Task::ner) {
    Tape::Var probs = model.ner_head().forward(t, enc.h_f);
    task_var = ner_loss(t, probs, p.ner_gold, p.input.mask);
  } else {
    task_var = pair_loss(t, model.pair_head(), enc.h_f, p.pairs, p.input.mask);
  }
  Tape::Var total;
  if (cfg.use_interaction()) {
    InteractionTerms terms =
        interaction_loss(t, enc.h_c, enc.h_l, p.task_mentions, p.input.mask, cfg.inter);
    total = total_loss(t, task_var, terms.total, cfg.inter.alpha);
    vals->global = t.scalar(terms.global);
    vals->local = t.scalar(terms.local);
    vals->task_level = t.scalar(terms.task);
  } else {
    total = task_var;
  }
  vals->task = t.scalar(task_var);
  *total_out = total;
  return true;
}

PRF eval_prepared(const ShineModel& model, const std::vector<Prepared>& prepared,
                  const Schemas& schemas, std::vector<SentencePrediction>* dump) {
  std::vector<std::string> gold_keys, pred_keys;
  std::vector<std::string> bio = schemas.bio_entity_tags();
  Task task = model.config().task;
  for (const auto& p : prepared) {
    const Sentence& s = *p.sentence;
    SentencePrediction sp;
    sp.id = s.id;
    Tape t;
    ShineModel::Encoded enc = model.encode(t, p.input, nullptr);
    if (task == Task::ner) {
      const Tensor& probs = t.val(model.ner_head().forward(t, enc.h_f));
      std::vector<std::string> tags;
      for (int i = 0; i < probs.rows(); ++i) {
        int best = 0;
        for (int j = 1; j < probs.cols(); ++j)
          if (probs.at(i, j) > probs.at(i, best)) best = j;
        tags.push_back(bio[best]);
      }
      for (const auto& seg : decode_bio(s.entity_tags))
        gold_keys.push_back(entity_key(s.id, seg.start, seg.end, seg.type));
      for (const auto& seg : decode_bio(tags)) {
        pred_keys.push_back(entity_key(s.id, seg.start, seg.end, seg.type));
        Mention m;
        m.kind = Mention::Kind::entity;
        m.spans = {{seg.start, seg.end}};
        m.type = seg.type;
        sp.mentions.push_back(std::move(m));
      }
      sp.tags = std::move(tags);
    } else {
      const auto& types =
          task == Task::relation ? schemas.relation_types : schemas.role_types;
      for (const auto& m : s.mentions) {
        if (task == Task::relation && m.kind == Mention::Kind::relation)
          gold_keys.push_back(relation_key(s.id, m.spans[0], m.spans[1], m.type));
        if (task == Task::earl && m.kind == Mention::Kind::event_arg)
          gold_keys.push_back(argument_key(s.id, m.spans[0], m.spans[1], m.type));
      }
      for (const auto& ex : p.pairs) {
        Tape tp;
        ShineModel::Encoded e2 = model.encode(tp, p.input, nullptr);
        const Tensor& probs =
            tp.val(model.pair_head().forward(tp, e2.h_f, ex.span_m, ex.span_n, p.input.mask));
        int best = 0;
        for (int j = 1; j < probs.cols(); ++j)
          if (probs.at(0, j) > probs.at(0, best)) best = j;
        if (types[best] == "None") continue;
        Mention m;
        m.kind = task == Task::relation ? Mention::Kind::relation : Mention::Kind::event_arg;
        m.spans = {ex.span_m, ex.span_n};
        m.type = types[best];
        sp.mentions.push_back(m);
        pred_keys.push_back(task == Task::relation
                                ? relation_key(s.id, ex.span_m, ex.span_n, m.type)
                                : argument_key(s.id, ex.span_m, ex.span_n, m.type));
      }
    }
    if (dump) dump->push_back(std::move(sp));
  }
  return tuple_f1(gold_keys, pred_keys);
}

std::vector<Tensor> snapshot_values(const ShineModel& model) {
  std::vector<Tensor> out;
  for (const Parameter* p : model.parameters()) out.push_back(p->value);
  return out;
}

void restore_values(ShineModel& model, const std::vector<Tensor>& snap) {
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = snap[i];
}

ModelConfig model_config_for(const TrainConfig& cfg, const Schemas& schemas, int vocab_size) {
  ModelConfig mc;
  mc.task = cfg.task;
  mc.enc = cfg.enc;
  mc.vocab_size = vocab_size;
  mc.use_frequency = cfg.use_frequency();
  mc.use_span_counts = cfg.use_span_counts();
  mc.feature_width = feature_width_for(schemas, cfg.task, mc.use_span_counts);
  switch (cfg.task) {
    case Task::ner: mc.num_labels = static_cast<int>(schemas.bio_entity_tags().size()); break;
    case Task::relation: mc.num_labels = static_cast<int>(schemas.relation_types.size()); break;
    case Task::earl: mc.num_labels = static_cast<int>(schemas.role_types.size()); break;
  }
  return mc;
}

double stdev_of(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / (xs.size() - 1));
}

double mean_of(const std::vector<double>& xs) {
  double acc = 0.0;
  for (double x : xs) acc += x;
  return xs.empty() ? 0.0 : acc / xs.size();
}

}  // namespace

std::string variant_name(AblationVariant v) {
  switch (v) {
    case AblationVariant::full: return "full";
    case AblationVariant::no_interaction: return "no_interaction";
    case AblationVariant::no_frequency: return "no_frequency";
    case AblationVariant::no_constituency: return "no_constituency";
    case AblationVariant::no_all: return "no_all";
  }
  return "?";
}

AblationVariant variant_from_name(const std::string& name) {
  for (AblationVariant v : {AblationVariant::full, AblationVariant::no_interaction,
                            AblationVariant::no_frequency, AblationVariant::no_constituency,
                            AblationVariant::no_all})
    if (variant_name(v) == name) return v;
  throw ConfigError("unknown ablation variant '" + name + "'");
}

void TrainConfig::validate() const {
  enc.validate();
  inter.validate();
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (min_count < 1) throw ConfigError("train: min_count must be >= 1");
  if (eval_every < 1) throw ConfigError("train: eval_every must be >= 1");
  if (optim.lr <= 0.0) throw ConfigError("train: learning rate must be > 0");
}

TrainedModel train(const TrainConfig& cfg, const Corpus& train_corpus, const Corpus& dev_corpus,
                   RunReport* report) {
  auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  validate_corpus(train_corpus);
  validate_corpus(dev_corpus);
  if (!(train_corpus.schemas == dev_corpus.schemas))
    throw ValidationError("train: train/dev schema mismatch");

  TrainedModel tm;
  tm.schemas = train_corpus.schemas;
  tm.vocab = build_vocab(train_corpus, cfg.min_count);
  tm.inter = cfg.inter;
  tm.model_config = model_config_for(cfg, tm.schemas, tm.vocab.size());
  tm.model = std::make_unique<ShineModel>(tm.model_config, cfg.seed);

  std::vector<Prepared> train_prep = prepare_corpus(train_corpus, tm.vocab, tm.model_config, tm.schemas);
  std::vector<Prepared> dev_prep = prepare_corpus(dev_corpus, tm.vocab, tm.model_config, tm.schemas);

  Adam adam(tm.model->parameters(), cfg.optim);
  Rng train_rng(cfg.seed + 1);
  Rng* dropout = cfg.enc.dropout > 0.0 ? &train_rng : nullptr;

  std::vector<int> order(train_prep.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  std::vector<Tensor> best_snapshot;
  double best_f1 = -1.0;
  int best_epoch = -1;
  int evals_since_best = 0;
  bool stop = false;

  if (report) {
    report->seed = cfg.seed;
    report->hash = config_hash(train_config_to_text(cfg));
  }

  int epoch = 0;
  for (; epoch < cfg.epochs && !stop; ++epoch) {
    std::shuffle(order.begin(), order.end(), train_rng.engine());
    double sum_task = 0, sum_g = 0, sum_l = 0, sum_t = 0;
    int contributed = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      std::size_t b_end = std::min(order.size(), b + cfg.batch_size);
      int batch_n = 0;
      for (std::size_t i = b; i < b_end; ++i) {
        const Prepared& p = train_prep[order[i]];
        if (tm.model_config.task != Task::ner && p.pairs.empty()) continue;
        ++batch_n;
      }
      if (batch_n == 0) continue;
      adam.zero_grad();
      for (std::size_t i = b; i < b_end; ++i) {
        const Prepared& p = train_prep[order[i]];
        Tape t;
        Tape::Var total;
        SentenceLosses vals;
        bool used = false;
        try {
          used = sentence_loss(t, *tm.model, p, cfg, dropout, &total, &vals);
          if (used) t.backward(t.scale(total, 1.0 / batch_n));
        } catch (const NumericError& e) {
          throw NumericError("epoch " + std::to_string(epoch) + ", sentence '" +
                             p.sentence->id + "': " + e.what());
        }
        if (!used) continue;
        sum_task += vals.task;
        sum_g += vals.global;
        sum_l += vals.local;
        sum_t += vals.task_level;
        ++contributed;
      }
      adam.step();
    }
    if (report) {
      double n = std::max(1, contributed);
      report->task_loss.push_back(sum_task / n);
      report->global_loss.push_back(sum_g / n);
      report->local_loss.push_back(sum_l / n);
      report->task_level_loss.push_back(sum_t / n);
    }

    bool last_epoch = epoch + 1 == cfg.epochs;
    if ((epoch + 1) % cfg.eval_every == 0 || last_epoch) {
      PRF dev = eval_prepared(*tm.model, dev_prep, tm.schemas, nullptr);
      if (dev.f1 > best_f1) {
        best_f1 = dev.f1;
        best_epoch = epoch;
        evals_since_best = 0;
        if (cfg.select_best_dev) best_snapshot = snapshot_values(*tm.model);
      } else {
        ++evals_since_best;
      }
      if (cfg.stop_at_dev_f1 > 0.0 && dev.f1 >= cfg.stop_at_dev_f1) stop = true;
      if (cfg.patience > 0 && evals_since_best >= cfg.patience) stop = true;
    }
  }

  if (cfg.select_best_dev && !best_snapshot.empty()) restore_values(*tm.model, best_snapshot);

  if (report) {
    report->epochs_run = epoch;
    report->best_epoch = best_epoch;
    report->best_dev_f1 = best_f1;
    report->metrics["dev"] = eval_prepared(*tm.model, dev_prep, tm.schemas, nullptr);
    report->wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  if (!cfg.checkpoint_path.empty()) save_checkpoint(tm, cfg.checkpoint_path);
  return tm;
}

EvalResult evaluate(const TrainedModel& tm, const Corpus& corpus) {
  validate_corpus(corpus);
  if (!(corpus.schemas == tm.schemas))
    throw ValidationError("evaluate: corpus schemas do not match the checkpoint");
  std::vector<Prepared> prep = prepare_corpus(corpus, tm.vocab, tm.model_config, tm.schemas);
  EvalResult out;
  out.prf = eval_prepared(*tm.model, prep, tm.schemas, &out.predictions);
  return out;
}

std::string predictions_to_text(const std::vector<SentencePrediction>& preds) {
  std::ostringstream os;
  for (const auto& sp : preds) {
    os << "#id " << sp.id << "\n";
    for (const auto& m : sp.mentions) {
      json j;
      j["kind"] = kind_name(m.kind);
      json spans = json::array();
      for (auto [s, e] : m.spans) spans.push_back(json::array({s, e}));
      j["spans"] = spans;
      j["type"] = m.type;
      os << "#mentions " << j.dump() << "\n";
    }
  }
  return os.str();
}

std::string metrics_to_kv(const PRF& prf, Task task, const std::string& language,
                          std::uint64_t seed) {
  std::ostringstream os;
  os << "task " << task_name(task) << "\n";
  os << "language " << language << "\n";
  os << "seed " << seed << "\n";
  os << "predicted " << prf.predicted << "\n";
  os << "correct " << prf.correct << "\n";
  os << "gold " << prf.gold << "\n";
  os << "precision " << fmt_double(prf.precision) << "\n";
  os << "recall " << fmt_double(prf.recall) << "\n";
  os << "f1 " << fmt_double(prf.f1) << "\n";
  return os.str();
}

std::string metrics_to_json(const PRF& prf, Task task, const std::string& language,
                            std::uint64_t seed) {
  json j;
  j["task"] = task_name(task);
  j["language"] = language;
  j["seed"] = seed;
  j["predicted"] = prf.predicted;
  j["correct"] = prf.correct;
  j["gold"] = prf.gold;
  j["precision"] = prf.precision;
  j["recall"] = prf.recall;
  j["f1"] = prf.f1;
  return j.dump(2);
}

namespace {

json encoder_to_json(const EncoderConfig& e) {
  json j;
  j["d_model"] = e.d_model;
  j["heads"] = e.heads;
  j["contextual_layers"] = e.contextual_layers;
  j["feature_layers"] = e.feature_layers;
  j["fusion_layers"] = e.fusion_layers;
  j["ffn_width"] = e.ffn_width;
  j["dropout"] = e.dropout;
  return j;
}

EncoderConfig encoder_from_json(const json& j) {
  EncoderConfig e;
  e.d_model = j.at("d_model").get<int>();
  e.heads = j.at("heads").get<int>();
  e.contextual_layers = j.at("contextual_layers").get<int>();
  e.feature_layers = j.at("feature_layers").get<int>();
  e.fusion_layers = j.at("fusion_layers").get<int>();
  e.ffn_width = j.at("ffn_width").get<int>();
  e.dropout = j.at("dropout").get<double>();
  return e;
}

json schemas_to_json(const Schemas& s) {
  json j;
  j["entity"] = s.entity_types;
  j["relation"] = s.relation_types;
  j["role"] = s.role_types;
  j["phrase"] = s.phrase_labels;
  j["pos"] = s.pos_tags;
  j["deprel"] = s.deprel_tags;
  return j;
}

Schemas schemas_from_json(const json& j) {
  Schemas s;
  s.entity_types = j.at("entity").get<std::vector<std::string>>();
  s.relation_types = j.at("relation").get<std::vector<std::string>>();
  s.role_types = j.at("role").get<std::vector<std::string>>();
  s.phrase_labels = j.at("phrase").get<std::vector<std::string>>();
  s.pos_tags = j.at("pos").get<std::vector<std::string>>();
  s.deprel_tags = j.at("deprel").get<std::vector<std::string>>();
  return s;
}

}  // namespace

void save_checkpoint(const TrainedModel& tm, const std::string& path) {
  json header;
  header["version"] = 1;
  header["task"] = task_name(tm.model_config.task);
  header["encoder"] = encoder_to_json(tm.model_config.enc);
  header["vocab_size"] = tm.model_config.vocab_size;
  header["feature_width"] = tm.model_config.feature_width;
  header["num_labels"] = tm.model_config.num_labels;
  header["use_frequency"] = tm.model_config.use_frequency;
  header["use_span_counts"] = tm.model_config.use_span_counts;
  header["alpha"] = tm.inter.alpha;
  header["span_length"] = tm.inter.span_length;
  header["vocab"] = tm.vocab.tokens;
  header["schemas"] = schemas_to_json(tm.schemas);

  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint: " + tmp);
    write_parameter_file(out, header.dump(), tm.model->parameters());
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw IoError("cannot move checkpoint into place: " + path);
}

TrainedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  ParameterFile file = read_parameter_file(in);
  json header = json::parse(file.header);
  if (header.at("version").get<int>() != 1)
    throw ValidationError("checkpoint: unsupported version");

  TrainedModel tm;
  tm.model_config.task = task_from_name(header.at("task").get<std::string>());
  tm.model_config.enc = encoder_from_json(header.at("encoder"));
  tm.model_config.vocab_size = header.at("vocab_size").get<int>();
  tm.model_config.feature_width = header.at("feature_width").get<int>();
  tm.model_config.num_labels = header.at("num_labels").get<int>();
  tm.model_config.use_frequency = header.at("use_frequency").get<bool>();
  tm.model_config.use_span_counts = header.at("use_span_counts").get<bool>();
  tm.inter.alpha = header.at("alpha").get<double>();
  tm.inter.span_length = header.at("span_length").get<int>();
  tm.vocab.tokens = header.at("vocab").get<std::vector<std::string>>();
  for (int i = 0; i < tm.vocab.size(); ++i) tm.vocab.index[tm.vocab.tokens[i]] = i;
  tm.schemas = schemas_from_json(header.at("schemas"));
  tm.model = std::make_unique<ShineModel>(tm.model_config, /*seed=*/0);
  assign_parameters(file, tm.model->parameters());
  return tm;
}

TrainedModel distill(const TrainedModel& teacher, const Corpus& unlabeled_target,
                     const DistillConfig& cfg, RunReport* report) {
  auto t0 = std::chrono::steady_clock::now();
  if (teacher.model_config.task != Task::ner)
    throw ConfigError("distill: soft labels are token distributions; teacher must be a NER model");
  validate_corpus(unlabeled_target);
  if (!(unlabeled_target.schemas == teacher.schemas))
    throw ValidationError("distill: corpus schemas do not match the teacher");

  TrainedModel student;
  student.model_config = teacher.model_config;
  student.model_config.enc.dropout = cfg.dropout;
  student.inter = teacher.inter;
  student.vocab = teacher.vocab;
  student.schemas = teacher.schemas;
  student.model = std::make_unique<ShineModel>(student.model_config, cfg.seed);
  if (cfg.init_from_teacher) student.model->copy_values_from(*teacher.model);

  std::vector<Prepared> prep =
      prepare_corpus(unlabeled_target, teacher.vocab, teacher.model_config, teacher.schemas);

  // Frozen teacher soft labels, computed once.
  std::vector<Tensor> soft;
  soft.reserve(prep.size());
  for (const auto& p : prep) {
    Tape t;
    ShineModel::Encoded enc = teacher.model->encode(t, p.input, nullptr);
    soft.push_back(t.val(teacher.model->ner_head().forward(t, enc.h_f)));
  }

  Adam adam(student.model->parameters(), cfg.optim);
  Rng train_rng(cfg.seed + 1);
  Rng* dropout = cfg.dropout > 0.0 ? &train_rng : nullptr;
  std::vector<int> order(prep.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  if (report) report->seed = cfg.seed;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), train_rng.engine());
    double sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      std::size_t b_end = std::min(order.size(), b + cfg.batch_size);
      adam.zero_grad();
      for (std::size_t i = b; i < b_end; ++i) {
        const Prepared& p = prep[order[i]];
        Tape t;
        ShineModel::Encoded enc = student.model->encode(t, p.input, dropout);
        Tape::Var probs = student.model->ner_head().forward(t, enc.h_f);
        Tape::Var loss = distill_loss(t, soft[order[i]], probs);
        sum += t.scalar(loss);
        t.backward(t.scale(loss, 1.0 / static_cast<double>(b_end - b)));
      }
      adam.step();
    }
    if (report) report->task_loss.push_back(sum / static_cast<double>(prep.size()));
  }
  if (report) {
    report->epochs_run = cfg.epochs;
    report->wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return student;
}

const AblationCell& AblationTable::cell(AblationVariant v) const {
  for (const auto& [variant, c] : rows)
    if (variant == v) return c;
  throw Error("ablation table has no row for " + variant_name(v));
}

std::string AblationTable::to_text() const {
  std::ostringstream os;
  os << "variant            source_f1 (mean+-sd)   target_f1 (mean+-sd)\n";
  for (const auto& [v, c] : rows) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-18s %7.2f +- %5.2f       %7.2f +- %5.2f\n",
                  variant_name(v).c_str(), 100.0 * c.source_mean, 100.0 * c.source_stdev,
                  100.0 * c.target_mean, 100.0 * c.target_stdev);
    os << line;
  }
  return os.str();
}

std::string AblationTable::to_json() const {
  json j;
  json s = json::array();
  for (auto sd : seeds) s.push_back(sd);
  j["seeds"] = s;
  json rows_j = json::array();
  for (const auto& [v, c] : rows) {
    json r;
    r["variant"] = variant_name(v);
    r["source_f1"] = c.source_f1;
    r["target_f1"] = c.target_f1;
    r["source_mean"] = c.source_mean;
    r["source_stdev"] = c.source_stdev;
    r["target_mean"] = c.target_mean;
    r["target_stdev"] = c.target_stdev;
    rows_j.push_back(r);
  }
  j["rows"] = rows_j;
  return j.dump(2);
}

AblationTable run_ablation(const TrainConfig& base, const AblationData& data,
                           const std::vector<std::uint64_t>& seeds,
                           std::vector<RunReport>* reports) {
  if (seeds.empty()) throw ConfigError("ablation: need at least one seed");
  AblationTable table;
  table.seeds = seeds;
  for (AblationVariant v : {AblationVariant::full, AblationVariant::no_interaction,
                            AblationVariant::no_frequency, AblationVariant::no_constituency,
                            AblationVariant::no_all}) {
    AblationCell cell;
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = base;
      cfg.ablation = v;
      cfg.seed = seed;
      cfg.checkpoint_path.clear();
      RunReport rep;
      TrainedModel tm = train(cfg, data.source_train, data.source_dev, &rep);
      PRF src = evaluate(tm, data.source_test).prf;
      PRF tgt = evaluate(tm, data.target_test).prf;
      cell.source_f1.push_back(src.f1);
      cell.target_f1.push_back(tgt.f1);
      rep.metrics["source_test"] = src;
      rep.metrics["target_test"] = tgt;
      if (reports) reports->push_back(std::move(rep));
    }
    cell.source_mean = mean_of(cell.source_f1);
    cell.source_stdev = stdev_of(cell.source_f1, cell.source_mean);
    cell.target_mean = mean_of(cell.target_f1);
    cell.target_stdev = stdev_of(cell.target_f1, cell.target_mean);
    table.rows.emplace_back(v, std::move(cell));
  }
  return table;
}

std::string RunReport::to_json() const {
  json j;
  j["seed"] = seed;
  j["config_hash"] = hash;
  j["epochs_run"] = epochs_run;
  j["best_epoch"] = best_epoch;
  j["best_dev_f1"] = best_dev_f1;
  j["wall_seconds"] = wall_seconds;
  j["task_loss"] = task_loss;
  j["global_loss"] = global_loss;
  j["local_loss"] = local_loss;
  j["task_level_loss"] = task_level_loss;
  json m;
  for (const auto& [name, prf] : metrics) {
    json e;
    e["precision"] = prf.precision;
    e["recall"] = prf.recall;
    e["f1"] = prf.f1;
    e["predicted"] = prf.predicted;
    e["correct"] = prf.correct;
    e["gold"] = prf.gold;
    m[name] = e;
  }
  j["metrics"] = m;
  return j.dump(2);
}

std::string RunReport::to_text() const {
  std::ostringstream os;
  os << "seed " << seed << "  config " << hash << "  epochs " << epochs_run << "  wall "
     << wall_seconds << "s\n";
  if (!task_loss.empty())
    os << "task loss " << fmt_double(task_loss.front()) << " -> " << fmt_double(task_loss.back())
       << "\n";
  for (const auto& [name, prf] : metrics) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-12s P %6.4f  R %6.4f  F1 %6.4f  (A=%lld B=%lld E=%lld)\n",
                  name.c_str(), prf.precision, prf.recall, prf.f1, prf.predicted, prf.correct,
                  prf.gold);
    os << line;
  }
  return os.str();
}

TrainConfig parse_train_config(const std::string& text, const std::string& origin) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    auto trim = [](std::string s) {
      auto a = s.find_first_not_of(" \t\r");
      auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    try {
      apply_config_override(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str(), path);
}

void apply_config_override(TrainConfig& cfg, const std::string& key, const std::string& value) {
  auto to_int = [&](const std::string& v) {
    try {
      return std::stoi(v);
    } catch (...) {
      throw ConfigError("bad integer for " + key + ": '" + v + "'");
    }
  };
  auto to_double = [&](const std::string& v) {
    try {
      return std::stod(v);
    } catch (...) {
      throw ConfigError("bad number for " + key + ": '" + v + "'");
    }
  };
  auto to_bool = [&](const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("bad bool for " + key + ": '" + v + "'");
  };

  if (key == "task") cfg.task = task_from_name(value);
  else if (key == "d_model") cfg.enc.d_model = to_int(value);
  else if (key == "heads") cfg.enc.heads = to_int(value);
  else if (key == "contextual_layers") cfg.enc.contextual_layers = to_int(value);
  else if (key == "feature_layers") cfg.enc.feature_layers = to_int(value);
  else if (key == "fusion_layers") cfg.enc.fusion_layers = to_int(value);
  else if (key == "ffn_width") cfg.enc.ffn_width = to_int(value);
  else if (key == "dropout") cfg.enc.dropout = to_double(value);
  else if (key == "alpha") cfg.inter.alpha = to_double(value);
  else if (key == "span_length") cfg.inter.span_length = to_int(value);
  else if (key == "pooling") {
    if (value == "mean_block") cfg.inter.pooling = InteractionConfig::Pooling::mean_block;
    else if (value == "per_token") cfg.inter.pooling = InteractionConfig::Pooling::per_token;
    else throw ConfigError("unknown pooling '" + value + "'");
  } else if (key == "levels") {
    cfg.inter.global_level = value.find("global") != std::string::npos;
    cfg.inter.local_level = value.find("local") != std::string::npos;
    cfg.inter.task_level = value.find("task") != std::string::npos;
  } else if (key == "ablation") cfg.ablation = variant_from_name(value);
  else if (key == "lr") cfg.optim.lr = to_double(value);
  else if (key == "beta1") cfg.optim.beta1 = to_double(value);
  else if (key == "beta2") cfg.optim.beta2 = to_double(value);
  else if (key == "adam_eps") cfg.optim.eps = to_double(value);
  else if (key == "warmup") cfg.optim.warmup_steps = to_int(value);
  else if (key == "epochs") cfg.epochs = to_int(value);
  else if (key == "batch_size") cfg.batch_size = to_int(value);
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
  else if (key == "min_count") cfg.min_count = to_int(value);
  else if (key == "eval_every") cfg.eval_every = to_int(value);
  else if (key == "patience") cfg.patience = to_int(value);
  else if (key == "stop_at_dev_f1") cfg.stop_at_dev_f1 = to_double(value);
  else if (key == "select_best_dev") cfg.select_best_dev = to_bool(value);
  else if (key == "checkpoint") cfg.checkpoint_path = value;
  else throw ConfigError("unknown config key '" + key + "'");
}

std::string train_config_to_text(const TrainConfig& cfg) {
  std::ostringstream os;
  os << "task = " << task_name(cfg.task) << "\n";
  os << "d_model = " << cfg.enc.d_model << "\n";
  os << "heads = " << cfg.enc.heads << "\n";
  os << "contextual_layers = " << cfg.enc.contextual_layers << "\n";
  os << "feature_layers = " << cfg.enc.feature_layers << "\n";
  os << "fusion_layers = " << cfg.enc.fusion_layers << "\n";
  os << "ffn_width = " << cfg.enc.ffn_width << "\n";
  os << "dropout = " << fmt_double(cfg.enc.dropout) << "\n";
  os << "alpha = " << fmt_double(cfg.inter.alpha) << "\n";
  os << "span_length = " << cfg.inter.span_length << "\n";
  std::string levels;
  if (cfg.inter.global_level) levels += "global";
  if (cfg.inter.local_level) levels += levels.empty() ? "local" : ",local";
  if (cfg.inter.task_level) levels += levels.empty() ? "task" : ",task";
  os << "levels = " << (levels.empty() ? "none" : levels) << "\n";
  os << "pooling = "
     << (cfg.inter.pooling == InteractionConfig::Pooling::mean_block ? "mean_block" : "per_token")
     << "\n";
  os << "ablation = " << variant_name(cfg.ablation) << "\n";
  os << "lr = " << fmt_double(cfg.optim.lr) << "\n";
  os << "beta1 = " << fmt_double(cfg.optim.beta1) << "\n";
  os << "beta2 = " << fmt_double(cfg.optim.beta2) << "\n";
  os << "adam_eps = " << fmt_double(cfg.optim.eps) << "\n";
  os << "warmup = " << cfg.optim.warmup_steps << "\n";
  os << "epochs = " << cfg.epochs << "\n";
  os << "batch_size = " << cfg.batch_size << "\n";
  os << "seed = " << cfg.seed << "\n";
  os << "min_count = " << cfg.min_count << "\n";
  os << "eval_every = " << cfg.eval_every << "\n";
  os << "patience = " << cfg.patience << "\n";
  os << "stop_at_dev_f1 = " << fmt_double(cfg.stop_at_dev_f1) << "\n";
  os << "select_best_dev = " << (cfg.select_best_dev ? "true" : "false") << "\n";
  if (!cfg.checkpoint_path.empty()) os << "checkpoint = " << cfg.checkpoint_path << "\n";
  return os.str();
}

std::string config_hash(const std::string& resolved_text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : resolved_text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace shine
