#include "shine/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "shine/errors.hpp"

namespace shine {

namespace {

using json = nlohmann::ordered_json;

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t t = line.find('\t', start);
    if (t == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, t - start));
    start = t + 1;
  }
  return out;
}

bool in_schema(const std::vector<std::string>& schema, const std::string& v) {
  return std::find(schema.begin(), schema.end(), v) != schema.end();
}

bool valid_bio_tag(const Schemas& s, const std::string& tag) {
  if (tag == "O") return true;
  if (tag.size() < 3 || (tag[0] != 'B' && tag[0] != 'I') || tag[1] != '-') return false;
  return in_schema(s.entity_types, tag.substr(2));
}

struct LineSource {
  std::string origin;
  int line_no = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError(origin + ":" + std::to_string(line_no) + ": " + what);
  }
};

Mention parse_mention_json(const std::string& payload, const LineSource& at) {
  json j;
  try {
    j = json::parse(payload);
  } catch (const json::exception& e) {
    at.fail(std::string("bad mention record: ") + e.what());
  }
  Mention m;
  std::string kind = j.value("kind", "");
  if (kind == "entity")
    m.kind = Mention::Kind::entity;
  else if (kind == "relation")
    m.kind = Mention::Kind::relation;
  else if (kind == "event_arg")
    m.kind = Mention::Kind::event_arg;
  else
    at.fail("unknown mention kind '" + kind + "'");
  if (!j.contains("spans") || !j["spans"].is_array()) at.fail("mention record missing spans");
  for (const auto& sp : j["spans"]) {
    if (!sp.is_array() || sp.size() != 2) at.fail("mention span must be [start,end]");
    m.spans.emplace_back(sp[0].get<int>(), sp[1].get<int>());
  }
  std::size_t want = m.kind == Mention::Kind::entity ? 1 : 2;
  if (m.spans.size() != want)
    at.fail(kind + " mention needs " + std::to_string(want) + " span(s), got " +
            std::to_string(m.spans.size()));
  if (!j.contains("type")) at.fail("mention record missing type");
  m.type = j["type"].get<std::string>();
  return m;
}

std::string mention_to_json(const Mention& m) {
  json j;
  j["kind"] = kind_name(m.kind);
  json spans = json::array();
  for (auto [s, e] : m.spans) spans.push_back(json::array({s, e}));
  j["spans"] = spans;
  j["type"] = m.type;
  return j.dump();
}

void validate_sentence(const Corpus& c, const Sentence& s, const LineSource& at) {
  int L = s.length();
  if (L == 0) at.fail("sentence '" + s.id + "' has no tokens");
  if (static_cast<int>(s.pos.size()) != L || static_cast<int>(s.deprel.size()) != L ||
      static_cast<int>(s.entity_tags.size()) != L)
    at.fail("sentence '" + s.id + "': tag list length mismatch (tokens " + std::to_string(L) +
            ", pos " + std::to_string(s.pos.size()) + ", deprel " + std::to_string(s.deprel.size()) +
            ", entity " + std::to_string(s.entity_tags.size()) + ")");
  for (int i = 0; i < L; ++i) {
    if (!in_schema(c.schemas.pos_tags, s.pos[i]))
      at.fail("sentence '" + s.id + "': POS '" + s.pos[i] + "' not in schema");
    if (!in_schema(c.schemas.deprel_tags, s.deprel[i]))
      at.fail("sentence '" + s.id + "': deprel '" + s.deprel[i] + "' not in schema");
    if (!valid_bio_tag(c.schemas, s.entity_tags[i]))
      at.fail("sentence '" + s.id + "': entity tag '" + s.entity_tags[i] + "' not in schema");
  }
  for (const auto& sp : s.spans)
    if (sp.start < 0 || sp.end < sp.start || sp.end >= L)
      at.fail("sentence '" + s.id + "': constituent span out of range");
  for (const auto& m : s.mentions) {
    for (auto [ms, me] : m.spans)
      if (ms < 0 || me < ms || me >= L)
        at.fail("sentence '" + s.id + "': mention span [" + std::to_string(ms) + "," +
                std::to_string(me) + "] out of range");
    const std::vector<std::string>* schema = nullptr;
    switch (m.kind) {
      case Mention::Kind::entity: schema = &c.schemas.entity_types; break;
      case Mention::Kind::relation: schema = &c.schemas.relation_types; break;
      case Mention::Kind::event_arg: schema = &c.schemas.role_types; break;
    }
    if (!in_schema(*schema, m.type))
      at.fail("sentence '" + s.id + "': mention type '" + m.type + "' not in schema");
  }
}

}  // namespace

std::string kind_name(Mention::Kind k) {
  switch (k) {
    case Mention::Kind::entity: return "entity";
    case Mention::Kind::relation: return "relation";
    case Mention::Kind::event_arg: return "event_arg";
  }
  return "?";
}

std::vector<ConstituentSpan> phrase_spans(const ConstituencyTree& tree, const Schemas& schemas) {
  std::vector<ConstituentSpan> out;
  for (auto& s : extract_spans(tree))
    if (in_schema(schemas.phrase_labels, s.label)) out.push_back(std::move(s));
  return out;
}

std::vector<std::string> Schemas::bio_entity_tags() const {
  std::vector<std::string> out{"O"};
  for (const auto& t : entity_types) {
    out.push_back("B-" + t);
    out.push_back("I-" + t);
  }
  return out;
}

Corpus parse_corpus(const std::string& text, const std::string& origin) {
  Corpus corpus;
  LineSource at{origin, 0};
  std::istringstream in(text);
  std::string line;

  Sentence cur;
  bool in_sentence = false;
  int sentence_line = 0;
  std::unordered_set<std::string> seen_ids;

  auto flush = [&]() {
    if (!in_sentence) return;
    LineSource sat{origin, sentence_line};
    if (cur.id.empty()) sat.fail("sentence without #id");
    if (cur.tree_text.empty()) sat.fail("sentence '" + cur.id + "' without #tree");
    validate_sentence(corpus, cur, sat);
    corpus.sentences.push_back(std::move(cur));
    cur = Sentence{};
    in_sentence = false;
  };

  while (std::getline(in, line)) {
    ++at.line_no;
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') {
      std::istringstream iss(line);
      std::string key;
      iss >> key;
      if (key == "#lang") {
        iss >> corpus.language;
      } else if (key == "#schema") {
        std::string kind;
        iss >> kind;
        std::vector<std::string> labels;
        std::string l;
        while (iss >> l) labels.push_back(l);
        if (labels.empty()) at.fail("empty schema for '" + kind + "'");
        if (kind == "entity")
          corpus.schemas.entity_types = labels;
        else if (kind == "relation")
          corpus.schemas.relation_types = labels;
        else if (kind == "role")
          corpus.schemas.role_types = labels;
        else if (kind == "phrase")
          corpus.schemas.phrase_labels = labels;
        else if (kind == "pos")
          corpus.schemas.pos_tags = labels;
        else if (kind == "deprel")
          corpus.schemas.deprel_tags = labels;
        else
          at.fail("unknown schema kind '" + kind + "'");
      } else if (key == "#id") {
        flush();
        in_sentence = true;
        sentence_line = at.line_no;
        iss >> cur.id;
        if (cur.id.empty()) at.fail("#id without a value");
        if (!seen_ids.insert(cur.id).second) at.fail("duplicate sentence id '" + cur.id + "'");
      } else if (key == "#tree") {
        if (!in_sentence) at.fail("#tree outside a sentence");
        if (line.size() <= 6) at.fail("#tree without a value");
        std::string rest = line.substr(6);
        ConstituencyTree tree;
        try {
          tree = parse_bracketed_tree(rest);
        } catch (const ParseError& e) {
          at.fail("sentence '" + cur.id + "': " + e.what());
        }
        cur.tree_text = serialize_tree(tree);
        cur.spans = phrase_spans(tree, corpus.schemas);
      } else if (key == "#mentions") {
        if (!in_sentence) at.fail("#mentions outside a sentence");
        if (line.size() <= 10) at.fail("#mentions without a record");
        std::string payload = line.substr(10);
        cur.mentions.push_back(parse_mention_json(payload, at));
      } else {
        at.fail("unknown directive '" + key + "'");
      }
      continue;
    }
    // Token row: index, form, pos, deprel, entity tag.
    if (!in_sentence) at.fail("token row outside a sentence");
    auto cols = split_tabs(line);
    if (cols.size() != 5)
      at.fail("token row needs 5 tab-separated fields, got " + std::to_string(cols.size()));
    int idx = -1;
    try {
      idx = std::stoi(cols[0]);
    } catch (...) {
      at.fail("bad token index '" + cols[0] + "'");
    }
    if (idx != static_cast<int>(cur.tokens.size()))
      at.fail("sentence '" + cur.id + "': token index " + cols[0] + " out of order");
    cur.tokens.push_back(cols[1]);
    cur.pos.push_back(cols[2]);
    cur.deprel.push_back(cols[3]);
    cur.entity_tags.push_back(cols[4]);
  }
  flush();
  if (corpus.sentences.empty()) at.fail("corpus has no sentences");

  // Tree yield must match the token column.
  for (const auto& s : corpus.sentences) {
    auto tree = parse_bracketed_tree(s.tree_text);
    if (tree.tokens() != s.tokens)
      throw ValidationError(origin + ": sentence '" + s.id +
                            "': tree tokens do not match token rows");
  }
  return corpus;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_corpus(ss.str(), path);
}

std::string corpus_to_text(const Corpus& corpus) {
  std::ostringstream out;
  if (!corpus.language.empty()) out << "#lang " << corpus.language << "\n";
  auto emit_schema = [&](const char* kind, const std::vector<std::string>& labels) {
    if (labels.empty()) return;
    out << "#schema " << kind;
    for (const auto& l : labels) out << ' ' << l;
    out << "\n";
  };
  emit_schema("entity", corpus.schemas.entity_types);
  emit_schema("relation", corpus.schemas.relation_types);
  emit_schema("role", corpus.schemas.role_types);
  emit_schema("phrase", corpus.schemas.phrase_labels);
  emit_schema("pos", corpus.schemas.pos_tags);
  emit_schema("deprel", corpus.schemas.deprel_tags);
  for (const auto& s : corpus.sentences) {
    out << "\n#id " << s.id << "\n";
    out << "#tree " << s.tree_text << "\n";
    for (const auto& m : s.mentions) out << "#mentions " << mention_to_json(m) << "\n";
    for (int i = 0; i < s.length(); ++i)
      out << i << '\t' << s.tokens[i] << '\t' << s.pos[i] << '\t' << s.deprel[i] << '\t'
          << s.entity_tags[i] << "\n";
  }
  return out.str();
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write corpus file: " + path);
  out << corpus_to_text(corpus);
}

void validate_corpus(const Corpus& corpus) {
  LineSource at{"<memory>", 0};
  std::unordered_set<std::string> ids;
  for (const auto& s : corpus.sentences) {
    if (!ids.insert(s.id).second)
      throw ValidationError("duplicate sentence id '" + s.id + "'");
    validate_sentence(corpus, s, at);
  }
}

std::vector<Corpus> split_corpus(const Corpus& corpus, const std::vector<double>& ratios,
                                 std::uint64_t seed) {
  int n = static_cast<int>(corpus.sentences.size());
  int parts = static_cast<int>(ratios.size());
  if (parts == 0) throw ValidationError("split: no ratios given");
  double sum = 0.0;
  for (double r : ratios) {
    if (r <= 0.0) throw ValidationError("split: ratios must be positive");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("split: ratios must sum to 1");
  if (n < parts)
    throw ValidationError("split: corpus has " + std::to_string(n) + " sentences for " +
                          std::to_string(parts) + " parts");

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 gen(seed);
  std::shuffle(order.begin(), order.end(), gen);

  // Largest-remainder sizing, every part at least 1.
  std::vector<int> sizes(parts);
  std::vector<std::pair<double, int>> rema(parts);
  int assigned = 0;
  for (int k = 0; k < parts; ++k) {
    double exact = ratios[k] * n;
    sizes[k] = static_cast<int>(exact);
    rema[k] = {exact - sizes[k], k};
    assigned += sizes[k];
  }
  std::stable_sort(rema.begin(), rema.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; i < n - assigned; ++i) sizes[rema[i % parts].second] += 1;
  for (int k = 0; k < parts; ++k) {
    if (sizes[k] == 0) {
      int donor = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
      sizes[donor] -= 1;
      sizes[k] += 1;
    }
  }

  std::vector<Corpus> out(parts);
  int cursor = 0;
  for (int k = 0; k < parts; ++k) {
    out[k].language = corpus.language;
    out[k].schemas = corpus.schemas;
    std::vector<int> take(order.begin() + cursor, order.begin() + cursor + sizes[k]);
    std::sort(take.begin(), take.end());  // keep original document order inside each part
    for (int idx : take) out[k].sentences.push_back(corpus.sentences[idx]);
    cursor += sizes[k];
  }
  return out;
}

Vocabulary build_vocab(const Corpus& corpus, int min_count) {
  if (corpus.sentences.empty()) throw ValidationError("build_vocab: empty corpus");
  std::map<std::string, int> freq;
  for (const auto& s : corpus.sentences)
    for (const auto& t : s.tokens) freq[t] += 1;
  std::vector<std::pair<std::string, int>> items(freq.begin(), freq.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  v.tokens = {"<pad>", "<unk>"};
  for (const auto& [tok, count] : items)
    if (count >= min_count) v.tokens.push_back(tok);
  for (int i = 0; i < v.size(); ++i) v.index[v.tokens[i]] = i;
  return v;
}

}  // namespace shine
