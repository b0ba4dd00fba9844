// End-to-end tests of the command-line surface. The binary path arrives as
// argv[1] from ctest.

#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string g_cli;
fs::path g_dir;

int run_cli(const std::string& args) {
  std::string cmd = g_cli + " " + args + " > " + (g_dir / "stdout.txt").string() + " 2> " +
                    (g_dir / "stderr.txt").string();
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string cli_stdout() { return slurp(g_dir / "stdout.txt"); }
std::string cli_stderr() { return slurp(g_dir / "stderr.txt"); }

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
}

// The worked five-token sentence with its bracketed tree.
const char* kTable1Corpus =
    "#lang en\n"
    "#schema entity PER\n"
    "#schema relation None\n"
    "#schema role None\n"
    "#schema phrase NP VP S\n"
    "#schema pos NOUN VERB\n"
    "#schema deprel dep root\n"
    "\n"
    "#id t1\n"
    "#tree (S (NP they) (VP have (VP received (NP deployment orders))))\n"
    "0\tthey\tNOUN\tdep\tO\n"
    "1\thave\tVERB\troot\tO\n"
    "2\treceived\tVERB\tdep\tO\n"
    "3\tdeployment\tNOUN\tdep\tO\n"
    "4\torders\tNOUN\tdep\tO\n";

}  // namespace

TEST_CASE("usage errors exit 1 with usage text") {
  CHECK(run_cli("--bogus-flag") == 1);
  CHECK(run_cli("train") == 1);  // missing required arguments
  CHECK(run_cli("") == 1);
  CHECK(cli_stderr().find("--help") != std::string::npos);  // points at the usage text
  CHECK(run_cli("--help") == 0);
  CHECK(cli_stdout().find("Usage") != std::string::npos);
}

TEST_CASE("featurize reproduces the worked matrices end to end") {
  write_file(g_dir / "table1.corpus", kTable1Corpus);
  CHECK(run_cli("featurize " + (g_dir / "table1.corpus").string() + " --out " +
                (g_dir / "dump.txt").string()) == 0);
  std::string dump = slurp(g_dir / "dump.txt");
  // exact Table-1 rows (columns B-NP I-NP B-VP I-VP B-S I-S)
  CHECK(dump.find("#id t1 xc 5 6\n"
                  "1 0 0 0 1 0\n"
                  "0 0 1 0 0 1\n"
                  "0 0 1 1 0 1\n"
                  "1 0 0 2 0 1\n"
                  "0 1 0 2 0 1\n") != std::string::npos);
  CHECK(dump.find("#id t1 f 5 5\n") != std::string::npos);
  // constituent spans as start,end,label triples, pre-order
  CHECK(dump.find("#id t1 spans\n0,4,S\n0,0,NP\n1,4,VP\n2,4,VP\n3,4,NP\n") != std::string::npos);
}

TEST_CASE("featurize on a missing or malformed corpus exits 2") {
  CHECK(run_cli("featurize " + (g_dir / "missing.corpus").string() + " --out " +
                (g_dir / "x.txt").string()) == 2);
  write_file(g_dir / "broken.corpus", "#id s0\n0\tword\n");
  CHECK(run_cli("featurize " + (g_dir / "broken.corpus").string() + " --out " +
                (g_dir / "x.txt").string()) == 2);
}

TEST_CASE("gen is deterministic per seed and writes its resolved config") {
  std::string out1 = (g_dir / "pair1").string();
  std::string out2 = (g_dir / "pair2").string();
  CHECK(run_cli("gen --out " + out1 + " --seed 7 --sentences 10") == 0);
  CHECK(run_cli("gen --out " + out2 + " --seed 7 --sentences 10") == 0);
  CHECK(slurp(out1 + ".source.corpus") == slurp(out2 + ".source.corpus"));
  CHECK(slurp(out1 + ".target.corpus") == slurp(out2 + ".target.corpus"));
  CHECK(!slurp(out1 + ".source.corpus").empty());
  CHECK(slurp(out1 + ".config").find("seed = 7") != std::string::npos);

  std::string out3 = (g_dir / "pair3").string();
  CHECK(run_cli("gen --out " + out3 + " --seed 8 --sentences 10") == 0);
  CHECK(slurp(out1 + ".source.corpus") != slurp(out3 + ".source.corpus"));
}

TEST_CASE("train, evaluate and distill round a small pipeline") {
  std::string pair = (g_dir / "pipe").string();
  REQUIRE(run_cli("gen --out " + pair + " --seed 3 --sentences 16") == 0);

  write_file(g_dir / "train.cfg",
             "d_model = 32\nheads = 4\ncontextual_layers = 1\nfeature_layers = 1\n"
             "fusion_layers = 1\nffn_width = 64\ndropout = 0\nepochs = 30\nlr = 2e-3\n"
             "eval_every = 5\nstop_at_dev_f1 = 0.999\nalpha = 1\n");
  std::string model = (g_dir / "model").string();
  CHECK(run_cli("train " + pair + ".source.corpus " + pair + ".source.corpus --config " +
                (g_dir / "train.cfg").string() + " --out " + model + " --alpha 10 --seed 5") == 0);
  CHECK(fs::exists(model + ".ckpt"));
  CHECK(fs::exists(model + ".report.json"));
  // flag overrides win over the config file and land in the resolved config
  std::string resolved = slurp(model + ".config");
  CHECK(resolved.find("alpha = 10") != std::string::npos);
  CHECK(resolved.find("seed = 5") != std::string::npos);

  std::string eval = (g_dir / "eval").string();
  CHECK(run_cli("evaluate " + model + ".ckpt " + pair + ".source.corpus --out " + eval) == 0);
  std::string metrics = slurp(eval + ".metrics.txt");
  CHECK(metrics.find("f1 ") != std::string::npos);
  CHECK(fs::exists(eval + ".predictions.txt"));
  CHECK(slurp(eval + ".predictions.txt").find("#mentions") != std::string::npos);

  std::string student = (g_dir / "student").string();
  CHECK(run_cli("distill " + model + ".ckpt " + pair + ".target.corpus --out " + student +
                " --epochs 5 --lr 1e-3") == 0);
  CHECK(fs::exists(student + ".ckpt"));

  // evaluating against a schema-incompatible corpus is a data error
  std::string other = (g_dir / "other").string();
  REQUIRE(run_cli("gen --out " + other + " --seed 4 --sentences 6") == 0);
  std::string mutated = slurp(other + ".source.corpus");
  mutated.replace(mutated.find("PER ORG"), 7, "PER LOC");
  write_file(g_dir / "badschema.corpus", mutated);
  CHECK(run_cli("evaluate " + model + ".ckpt " + (g_dir / "badschema.corpus").string() +
                " --out " + (g_dir / "bad").string()) == 2);
}

TEST_CASE("ablate emits the table and per-run reports") {
  std::string pair = (g_dir / "abl").string();
  REQUIRE(run_cli("gen --out " + pair + " --seed 6 --sentences 20") == 0);
  write_file(g_dir / "abl.cfg",
             "d_model = 16\nheads = 4\ncontextual_layers = 1\nfeature_layers = 1\n"
             "fusion_layers = 1\nffn_width = 32\ndropout = 0\nepochs = 2\nlr = 1e-3\n"
             "eval_every = 2\n");
  std::string out = (g_dir / "ablout").string();
  CHECK(run_cli("ablate " + pair + ".source.corpus " + pair + ".source.corpus " + pair +
                ".source.corpus " + pair + ".target.corpus --config " +
                (g_dir / "abl.cfg").string() + " --seeds 1 --out " + out) == 0);
  std::string table = slurp(out + ".ablation.txt");
  for (const char* v : {"full", "no_interaction", "no_frequency", "no_constituency", "no_all"})
    CHECK(table.find(v) != std::string::npos);
  CHECK(slurp(out + ".ablation.json").find("target_mean") != std::string::npos);
  CHECK(!slurp(out + ".runs.jsonl").empty());
}

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: test_cli <path-to-shine-binary> [doctest args]\n");
    return 2;
  }
  g_cli = argv[1];
  g_dir = fs::temp_directory_path() / "shine_cli_test";
  fs::create_directories(g_dir);
  doctest::Context ctx;
  ctx.applyCommandLine(argc - 1, argv + 1);
  int rc = ctx.run();
  fs::remove_all(g_dir);
  return rc;
}
