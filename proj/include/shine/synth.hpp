#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "shine/corpus.hpp"

namespace shine {

// A weighted grammar for paired pseudo-language corpora. Right-hand-side
// symbols are nonterminal names, or "$pool" to draw one token from a terminal
// pool. The target language is produced from the same derivations by applying
// each rule's target_order permutation and mapping every surface form through
// a disjoint-vocabulary bijection; POS, dependency and phrase schemas are
// shared, so the language-universal features line up by construction.
struct GenRule {
  std::vector<std::string> rhs;
  double weight = 1.0;
  std::vector<int> target_order;  // permutation of rhs; empty = identity
};

struct GenNonterminal {
  std::string name;  // phrase label of the emitted tree node
  std::vector<GenRule> rules;
  // Expansions of an inline nonterminal are spliced into the parent without
  // emitting a tree node (used for optional context runs).
  bool inline_children = false;
  std::string entity_type;  // non-empty: the yield is a gold entity
};

struct GenPool {
  std::string name;
  int size = 1;
  std::string pos;
  std::string deprel;
};

struct GenConfig {
  int sentences = 64;
  std::string start = "S";
  std::vector<GenNonterminal> nonterminals;
  std::vector<GenPool> pools;
  Schemas schemas;
  std::string source_language = "syn_src";
  std::string target_language = "syn_tgt";
  std::string target_token_prefix = "q";
  // Relation type for an ordered (subject, object) entity-type pair; role
  // labels for the first and second entity as arguments of the event trigger,
  // which is the first token drawn from trigger_pool.
  std::vector<std::pair<std::pair<std::string, std::string>, std::string>> relation_map;
  std::string trigger_pool = "v";
  std::string first_entity_role = "Agent";
  std::string second_entity_role = "Theme";
  int max_len = 64;

  // Throws ConfigError on unreachable or undefined symbols, bad weights,
  // or schema inconsistencies.
  void validate() const;
};

// The built-in benchmark grammar: subject and object noun runs whose tokens
// share one POS and one dependency relation, with the gold entity being a
// labeled constituent sub-run. Boundary and type information is therefore
// carried only by the constituency structure once surface forms are unseen.
GenConfig default_gen_config();

// Deterministic given (config, seed). Sentence k of the target corpus is the
// reordered, relexicalized rendering of the same derivation as sentence k of
// the source corpus.
std::pair<Corpus, Corpus> generate_synthetic_pair(const GenConfig& config, std::uint64_t seed);

}  // namespace shine
