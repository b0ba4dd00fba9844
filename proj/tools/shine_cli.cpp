// Command-line surface: featurize / gen / train / evaluate / distill / ablate.
//
// Exit codes: 0 success, 1 usage error, 2 data or validation error,
// 3 numeric failure.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "shine/errors.hpp"
#include "shine/harness.hpp"
#include "shine/model.hpp"
#include "shine/synth.hpp"
#include "shine/syntax.hpp"

namespace {

using namespace shine;

void write_file_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out << content;
    if (!out) throw IoError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw IoError("cannot move " + tmp + " into place");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Matrix dump: sentence id header, then rows of space-separated integers.
// Constituent spans are also listed as start,end,label triples.
std::string featurize_dump(const Corpus& corpus) {
  std::ostringstream os;
  for (const auto& s : corpus.sentences) {
    os << "#id " << s.id << " spans\n" << spans_to_csv(s.spans);
    SpanFeatureMatrix xc = build_span_counts(s.spans, s.length(), corpus.schemas.phrase_labels);
    os << "#id " << s.id << " xc " << xc.counts.rows << " " << xc.counts.cols << "\n";
    for (int i = 0; i < xc.counts.rows; ++i) {
      for (int j = 0; j < xc.counts.cols; ++j) os << (j ? " " : "") << xc.counts.at(i, j);
      os << "\n";
    }
    FrequencyMatrix f = build_frequency_matrix(s.spans, s.length());
    os << "#id " << s.id << " f " << f.f.rows << " " << f.f.cols << "\n";
    for (int i = 0; i < f.f.rows; ++i) {
      for (int j = 0; j < f.f.cols; ++j) os << (j ? " " : "") << f.f.at(i, j);
      os << "\n";
    }
    os << "\n";
  }
  return os.str();
}

struct GenFileConfig {
  GenConfig grammar = default_gen_config();
  std::uint64_t seed = 1;
};

GenFileConfig parse_gen_config(const std::string& text, const std::string& origin) {
  GenFileConfig out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto pool_of = [&](const std::string& name) -> GenPool& {
    for (auto& p : out.grammar.pools)
      if (p.name == name) return p;
    throw ConfigError("no pool named " + name);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::size_t eq = line.find('=');
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    std::istringstream key_ss(line.substr(0, eq));
    std::string key;
    key_ss >> key;
    std::istringstream val_ss(line.substr(eq + 1));
    long long value = 0;
    if (!(val_ss >> value))
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected an integer value");
    if (key == "sentences") out.grammar.sentences = static_cast<int>(value);
    else if (key == "max_len") out.grammar.max_len = static_cast<int>(value);
    else if (key == "seed") out.seed = static_cast<std::uint64_t>(value);
    else if (key == "context_nouns") pool_of("cn").size = static_cast<int>(value);
    else if (key == "person_nouns") pool_of("pn").size = static_cast<int>(value);
    else if (key == "org_nouns") pool_of("on").size = static_cast<int>(value);
    else if (key == "verbs") pool_of("v").size = static_cast<int>(value);
    else if (key == "preps") pool_of("p").size = static_cast<int>(value);
    else if (key == "adverbs") pool_of("adv").size = static_cast<int>(value);
    else
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  return out;
}

std::string gen_config_to_text(const GenFileConfig& g) {
  std::ostringstream os;
  os << "sentences = " << g.grammar.sentences << "\n";
  os << "max_len = " << g.grammar.max_len << "\n";
  os << "seed = " << g.seed << "\n";
  for (const auto& p : g.grammar.pools) {
    if (p.name == "cn") os << "context_nouns = " << p.size << "\n";
    if (p.name == "pn") os << "person_nouns = " << p.size << "\n";
    if (p.name == "on") os << "org_nouns = " << p.size << "\n";
    if (p.name == "v") os << "verbs = " << p.size << "\n";
    if (p.name == "p") os << "preps = " << p.size << "\n";
    if (p.name == "adv") os << "adverbs = " << p.size << "\n";
  }
  return os.str();
}

struct CommonOverrides {
  std::string config_path;
  std::string out_prefix;
  std::int64_t seed = -1;
  double alpha = -1.0;
  int span_length = -1;
  std::string ablate;

  void apply(TrainConfig& cfg) const {
    if (!config_path.empty()) cfg = load_train_config(config_path);
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (alpha >= 0.0) cfg.inter.alpha = alpha;
    if (span_length > 0) cfg.inter.span_length = span_length;
    if (!ablate.empty()) cfg.ablation = variant_from_name(ablate);
  }
};

int run(int argc, char** argv) {
  CLI::App app{"SHINE: syntax-augmented hierarchical interactive encoder "
               "for zero-shot cross-lingual information extraction"};
  app.require_subcommand(1);

  // featurize
  auto* featurize = app.add_subcommand(
      "featurize", "Dump span-count and frequency matrices for a corpus");
  std::string feat_corpus, feat_out;
  featurize->add_option("corpus", feat_corpus, "corpus file")->required();
  featurize->add_option("--out", feat_out, "output dump path")->required();

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic source/target corpus pair");
  std::string gen_out, gen_config_path;
  std::int64_t gen_seed = -1;
  int gen_sentences = -1;
  gen->add_option("--out", gen_out, "output prefix")->required();
  gen->add_option("--config", gen_config_path, "generator config file");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--sentences", gen_sentences, "number of sentences per corpus");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model on a source corpus");
  std::string train_path, dev_path;
  CommonOverrides train_over;
  train_cmd->add_option("train_corpus", train_path)->required();
  train_cmd->add_option("dev_corpus", dev_path)->required();
  train_cmd->add_option("--config", train_over.config_path, "train config file");
  train_cmd->add_option("--out", train_over.out_prefix, "output prefix")->required();
  train_cmd->add_option("--seed", train_over.seed);
  train_cmd->add_option("--alpha", train_over.alpha, "interaction weight");
  train_cmd->add_option("--span-length", train_over.span_length, "local interaction window");
  train_cmd->add_option("--ablate", train_over.ablate,
                        "full|no_interaction|no_frequency|no_constituency|no_all");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on a corpus");
  std::string eval_ckpt, eval_corpus, eval_out;
  eval_cmd->add_option("checkpoint", eval_ckpt)->required();
  eval_cmd->add_option("corpus", eval_corpus)->required();
  eval_cmd->add_option("--out", eval_out, "output prefix")->required();

  // distill
  auto* distill_cmd = app.add_subcommand("distill", "Distill a student from a frozen teacher");
  std::string d_teacher, d_corpus, d_out;
  std::int64_t d_seed = 1;
  int d_epochs = 150;
  double d_lr = 5e-4;
  distill_cmd->add_option("teacher_checkpoint", d_teacher)->required();
  distill_cmd->add_option("unlabeled_corpus", d_corpus)->required();
  distill_cmd->add_option("--out", d_out, "output prefix")->required();
  distill_cmd->add_option("--seed", d_seed);
  distill_cmd->add_option("--epochs", d_epochs);
  distill_cmd->add_option("--lr", d_lr);

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "Run the ablation sweep over seeds");
  std::string a_train, a_dev, a_test, a_target, a_seeds = "1,2,3,4,5";
  CommonOverrides ablate_over;
  ablate_cmd->add_option("source_train", a_train)->required();
  ablate_cmd->add_option("source_dev", a_dev)->required();
  ablate_cmd->add_option("source_test", a_test)->required();
  ablate_cmd->add_option("target_test", a_target)->required();
  ablate_cmd->add_option("--config", ablate_over.config_path, "train config file");
  ablate_cmd->add_option("--out", ablate_over.out_prefix, "output prefix")->required();
  ablate_cmd->add_option("--seeds", a_seeds, "comma-separated seed list");
  ablate_cmd->add_option("--alpha", ablate_over.alpha);
  ablate_cmd->add_option("--span-length", ablate_over.span_length);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);  // prints usage text to stderr
    return code == 0 ? 0 : 1;
  }

  if (featurize->parsed()) {
    Corpus corpus = load_corpus(feat_corpus);
    write_file_atomic(feat_out, featurize_dump(corpus));
    std::cout << "wrote " << feat_out << " (" << corpus.sentences.size() << " sentences)\n";
    return 0;
  }

  if (gen->parsed()) {
    GenFileConfig g;
    if (!gen_config_path.empty()) g = parse_gen_config(read_file(gen_config_path), gen_config_path);
    if (gen_seed >= 0) g.seed = static_cast<std::uint64_t>(gen_seed);
    if (gen_sentences > 0) g.grammar.sentences = gen_sentences;
    auto [src, tgt] = generate_synthetic_pair(g.grammar, g.seed);
    write_file_atomic(gen_out + ".source.corpus", corpus_to_text(src));
    write_file_atomic(gen_out + ".target.corpus", corpus_to_text(tgt));
    write_file_atomic(gen_out + ".config", gen_config_to_text(g));
    std::cout << "wrote " << gen_out << ".source.corpus and " << gen_out << ".target.corpus\n";
    return 0;
  }

  if (train_cmd->parsed()) {
    TrainConfig cfg;
    train_over.apply(cfg);
    cfg.checkpoint_path = train_over.out_prefix + ".ckpt";
    Corpus train_corpus = load_corpus(train_path);
    Corpus dev_corpus = load_corpus(dev_path);
    write_file_atomic(train_over.out_prefix + ".config", train_config_to_text(cfg));
    RunReport report;
    train(cfg, train_corpus, dev_corpus, &report);
    write_file_atomic(train_over.out_prefix + ".report.json", report.to_json());
    write_file_atomic(train_over.out_prefix + ".report.txt", report.to_text());
    std::cout << report.to_text();
    return 0;
  }

  if (eval_cmd->parsed()) {
    TrainedModel tm = load_checkpoint(eval_ckpt);
    Corpus corpus = load_corpus(eval_corpus);
    EvalResult res = evaluate(tm, corpus);
    write_file_atomic(eval_out + ".metrics.txt",
                      metrics_to_kv(res.prf, tm.model_config.task, corpus.language, 0));
    write_file_atomic(eval_out + ".metrics.json",
                      metrics_to_json(res.prf, tm.model_config.task, corpus.language, 0));
    write_file_atomic(eval_out + ".predictions.txt", predictions_to_text(res.predictions));
    std::cout << metrics_to_kv(res.prf, tm.model_config.task, corpus.language, 0);
    return 0;
  }

  if (distill_cmd->parsed()) {
    TrainedModel teacher = load_checkpoint(d_teacher);
    Corpus corpus = load_corpus(d_corpus);
    DistillConfig dc;
    dc.seed = static_cast<std::uint64_t>(d_seed);
    dc.epochs = d_epochs;
    dc.optim.lr = d_lr;
    std::ostringstream resolved;
    resolved << "teacher = " << d_teacher << "\nepochs = " << dc.epochs
             << "\nlr = " << dc.optim.lr << "\nseed = " << dc.seed << "\n";
    write_file_atomic(d_out + ".config", resolved.str());
    RunReport report;
    TrainedModel student = distill(teacher, corpus, dc, &report);
    save_checkpoint(student, d_out + ".ckpt");
    write_file_atomic(d_out + ".report.json", report.to_json());
    std::cout << "distilled student written to " << d_out << ".ckpt\n";
    return 0;
  }

  if (ablate_cmd->parsed()) {
    TrainConfig cfg;
    ablate_over.apply(cfg);
    std::vector<std::uint64_t> seeds;
    std::istringstream ss(a_seeds);
    std::string item;
    while (std::getline(ss, item, ',')) seeds.push_back(std::stoull(item));
    Corpus src_train = load_corpus(a_train);
    Corpus src_dev = load_corpus(a_dev);
    Corpus src_test = load_corpus(a_test);
    Corpus tgt_test = load_corpus(a_target);
    write_file_atomic(ablate_over.out_prefix + ".config", train_config_to_text(cfg));
    AblationData data{src_train, src_dev, src_test, tgt_test};
    std::vector<RunReport> reports;
    AblationTable table = run_ablation(cfg, data, seeds, &reports);
    write_file_atomic(ablate_over.out_prefix + ".ablation.txt", table.to_text());
    write_file_atomic(ablate_over.out_prefix + ".ablation.json", table.to_json());
    std::ostringstream all_reports;
    for (const auto& r : reports) all_reports << r.to_json() << "\n";
    write_file_atomic(ablate_over.out_prefix + ".runs.jsonl", all_reports.str());
    std::cout << table.to_text();
    return 0;
  }

  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const DimensionError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
