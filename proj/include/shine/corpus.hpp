#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "shine/tree.hpp"

namespace shine {

struct Mention {
  enum class Kind { entity, relation, event_arg };
  Kind kind = Kind::entity;
  // entity: one span; relation: subject, object; event_arg: trigger, argument.
  std::vector<std::pair<int, int>> spans;
  std::string type;  // entity type / relation type / argument role

  bool operator==(const Mention&) const = default;
};

std::string kind_name(Mention::Kind k);

struct Sentence {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<std::string> pos;
  std::vector<std::string> deprel;
  std::vector<std::string> entity_tags;  // BIO
  std::string tree_text;                 // canonical bracketed form
  std::vector<ConstituentSpan> spans;    // phrase-schema nodes of the tree
  std::vector<Mention> mentions;

  int length() const { return static_cast<int>(tokens.size()); }
  bool operator==(const Sentence&) const = default;
};

struct Schemas {
  std::vector<std::string> entity_types;
  std::vector<std::string> relation_types;  // includes the None class
  std::vector<std::string> role_types;      // includes the None class
  std::vector<std::string> phrase_labels;
  std::vector<std::string> pos_tags;
  std::vector<std::string> deprel_tags;

  // O, then B-X/I-X per entity type in schema order.
  std::vector<std::string> bio_entity_tags() const;
  bool operator==(const Schemas&) const = default;
};

struct Corpus {
  std::string language;
  Schemas schemas;
  std::vector<Sentence> sentences;

  bool operator==(const Corpus&) const = default;
};

// Token ids for the contextual encoder. PAD and UNK are reserved.
struct Vocabulary {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  std::vector<std::string> tokens;  // index -> surface; [0]=<pad>, [1]=<unk>
  std::unordered_map<std::string, int> index;

  int id_of(const std::string& tok) const {
    auto it = index.find(tok);
    return it == index.end() ? kUnk : it->second;
  }
  int size() const { return static_cast<int>(tokens.size()); }
};

// Spans contributed by a tree: phrase-schema nodes only. Labels outside the
// phrase schema (e.g. POS pre-terminals from an external parser) are allowed
// in trees but do not emit spans.
std::vector<ConstituentSpan> phrase_spans(const ConstituencyTree& tree, const Schemas& schemas);

// Documented text format: a `#schema`/`#lang` header block, then per
// sentence `#id`, `#tree`, optional `#mentions` JSON lines, and one
// tab-separated row per token (index, form, pos, deprel, entity BIO tag),
// sentences separated by blank lines. Errors name the offending line.
Corpus load_corpus(const std::string& path);
Corpus parse_corpus(const std::string& text, const std::string& origin);
std::string corpus_to_text(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::string& path);

// Structural validation: lengths, schema membership, span/mention ranges.
void validate_corpus(const Corpus& corpus);

// Deterministic disjoint partition; sizes within one of ratio * n.
std::vector<Corpus> split_corpus(const Corpus& corpus, const std::vector<double>& ratios,
                                 std::uint64_t seed);

// Tokens with frequency >= min_count, ordered by (-frequency, lexical).
Vocabulary build_vocab(const Corpus& corpus, int min_count);

}  // namespace shine
