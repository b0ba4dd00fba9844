#include "shine/synth.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>

#include "shine/errors.hpp"
#include "shine/rng.hpp"

namespace shine {

namespace {

bool is_pool_ref(const std::string& sym) { return !sym.empty() && sym[0] == '$'; }

struct DerivNode {
  bool terminal = false;
  int pool = -1;        // terminal: pool index
  int draw = -1;        // terminal: token index within pool
  int nt = -1;          // nonterminal index
  int rule = -1;        // chosen alternative
  int entity_id = -1;   // assigned when the nonterminal carries an entity type
  bool is_trigger = false;
  std::vector<DerivNode> children;
};

struct Generator {
  const GenConfig& cfg;
  Rng rng;
  std::unordered_map<std::string, int> nt_index;
  std::unordered_map<std::string, int> pool_index;

  Generator(const GenConfig& c, std::uint64_t seed) : cfg(c), rng(seed) {
    for (std::size_t i = 0; i < c.nonterminals.size(); ++i)
      nt_index[c.nonterminals[i].name] = static_cast<int>(i);
    for (std::size_t i = 0; i < c.pools.size(); ++i)
      pool_index[c.pools[i].name] = static_cast<int>(i);
  }

  int choose_rule(const GenNonterminal& nt) {
    double total = 0.0;
    for (const auto& r : nt.rules) total += r.weight;
    double x = rng.uniform(0.0, total);
    double acc = 0.0;
    for (std::size_t i = 0; i < nt.rules.size(); ++i) {
      acc += nt.rules[i].weight;
      if (x < acc) return static_cast<int>(i);
    }
    return static_cast<int>(nt.rules.size()) - 1;
  }

  DerivNode derive(int nt_id) {
    const GenNonterminal& nt = cfg.nonterminals[nt_id];
    DerivNode node;
    node.nt = nt_id;
    node.rule = choose_rule(nt);
    for (const auto& sym : nt.rules[node.rule].rhs) {
      if (is_pool_ref(sym)) {
        DerivNode leaf;
        leaf.terminal = true;
        leaf.pool = pool_index.at(sym.substr(1));
        leaf.draw = rng.index(cfg.pools[leaf.pool].size);
        node.children.push_back(std::move(leaf));
      } else {
        node.children.push_back(derive(nt_index.at(sym)));
      }
    }
    return node;
  }

  // Conceptual entity order and the trigger are fixed by a pre-order walk in
  // declared rule order, so they name the same derivation slots in both
  // linearizations.
  void annotate(DerivNode& n, int& next_entity, bool& trigger_seen) {
    if (n.terminal) {
      if (!trigger_seen && cfg.pools[n.pool].name == cfg.trigger_pool) {
        n.is_trigger = true;
        trigger_seen = true;
      }
      return;
    }
    if (!cfg.nonterminals[n.nt].entity_type.empty()) n.entity_id = next_entity++;
    for (auto& c : n.children) annotate(c, next_entity, trigger_seen);
  }

  struct Linearized {
    std::vector<std::string> tokens, pos, deprel;
    std::vector<TreeNode> forest;                          // top-level children
    std::map<int, std::pair<int, int>> entity_span;        // entity id -> interval
    std::map<int, std::string> entity_type;
    int trigger_pos = -1;
  };

  // Returns the tree nodes this derivation node contributes (spliced upward
  // for inline nonterminals or empty expansions).
  std::vector<TreeNode> emit(const DerivNode& n, bool target, Linearized& out) {
    if (n.terminal) {
      const GenPool& pool = cfg.pools[n.pool];
      TreeNode leaf;
      leaf.token = (target ? cfg.target_token_prefix : "") + pool.name + std::to_string(n.draw);
      leaf.leaf_index = static_cast<int>(out.tokens.size());
      if (n.is_trigger) out.trigger_pos = leaf.leaf_index;
      out.tokens.push_back(leaf.token);
      out.pos.push_back(pool.pos);
      out.deprel.push_back(pool.deprel);
      return {std::move(leaf)};
    }
    const GenNonterminal& nt = cfg.nonterminals[n.nt];
    const GenRule& rule = nt.rules[n.rule];
    std::vector<int> order(rule.rhs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    if (target && !rule.target_order.empty())
      order.assign(rule.target_order.begin(), rule.target_order.end());

    int first = static_cast<int>(out.tokens.size());
    std::vector<TreeNode> kids;
    for (int idx : order) {
      auto sub = emit(n.children[idx], target, out);
      for (auto& t : sub) kids.push_back(std::move(t));
    }
    int last = static_cast<int>(out.tokens.size()) - 1;
    if (n.entity_id >= 0 && last >= first) {
      out.entity_span[n.entity_id] = {first, last};
      out.entity_type[n.entity_id] = nt.entity_type;
    }
    if (kids.empty()) return {};
    if (nt.inline_children) return kids;
    TreeNode node;
    node.label = nt.name;
    node.children = std::move(kids);
    return {std::move(node)};
  }

  Sentence realize(const DerivNode& deriv, bool target, const std::string& id) {
    Linearized lin;
    auto roots = emit(deriv, target, lin);
    if (roots.size() != 1 || lin.tokens.empty())
      throw Error("generator produced a degenerate derivation");

    ConstituencyTree tree;
    tree.root = std::move(roots[0]);
    tree.num_leaves = static_cast<int>(lin.tokens.size());

    Sentence s;
    s.id = id;
    s.tokens = lin.tokens;
    s.pos = lin.pos;
    s.deprel = lin.deprel;
    s.tree_text = serialize_tree(tree);
    s.spans = phrase_spans(tree, cfg.schemas);
    s.entity_tags.assign(s.tokens.size(), "O");

    std::vector<std::pair<int, std::pair<int, int>>> entities(lin.entity_span.begin(),
                                                              lin.entity_span.end());
    for (const auto& [eid, span] : entities) {
      const std::string& type = lin.entity_type.at(eid);
      s.entity_tags[span.first] = "B-" + type;
      for (int i = span.first + 1; i <= span.second; ++i) s.entity_tags[i] = "I-" + type;
      Mention m;
      m.kind = Mention::Kind::entity;
      m.spans = {span};
      m.type = type;
      s.mentions.push_back(std::move(m));
    }
    if (entities.size() >= 2) {
      const auto& subj = entities[0];
      const auto& obj = entities[1];
      for (const auto& [pair, rel] : cfg.relation_map) {
        if (pair.first == lin.entity_type.at(subj.first) &&
            pair.second == lin.entity_type.at(obj.first)) {
          Mention m;
          m.kind = Mention::Kind::relation;
          m.spans = {subj.second, obj.second};
          m.type = rel;
          s.mentions.push_back(std::move(m));
          break;
        }
      }
    }
    if (lin.trigger_pos >= 0) {
      auto add_arg = [&](std::size_t which, const std::string& role) {
        if (entities.size() <= which || role.empty()) return;
        Mention m;
        m.kind = Mention::Kind::event_arg;
        m.spans = {{lin.trigger_pos, lin.trigger_pos}, entities[which].second};
        m.type = role;
        s.mentions.push_back(std::move(m));
      };
      add_arg(0, cfg.first_entity_role);
      add_arg(1, cfg.second_entity_role);
    }
    return s;
  }
};

}  // namespace

void GenConfig::validate() const {
  if (sentences < 1) throw ConfigError("gen: sentence count must be >= 1");
  if (max_len < 1) throw ConfigError("gen: max_len must be >= 1");
  std::set<std::string> nts, pool_names;
  for (const auto& nt : nonterminals) {
    if (nt.name.empty()) throw ConfigError("gen: nonterminal with empty name");
    if (!nts.insert(nt.name).second) throw ConfigError("gen: duplicate nonterminal " + nt.name);
    if (nt.rules.empty()) throw ConfigError("gen: nonterminal " + nt.name + " has no rules");
    if (nt.inline_children && !nt.entity_type.empty())
      throw ConfigError("gen: inline nonterminal " + nt.name + " cannot be an entity");
  }
  for (const auto& p : pools) {
    if (p.size < 1) throw ConfigError("gen: pool " + p.name + " must have size >= 1");
    if (!pool_names.insert(p.name).second) throw ConfigError("gen: duplicate pool " + p.name);
    if (std::find(schemas.pos_tags.begin(), schemas.pos_tags.end(), p.pos) ==
        schemas.pos_tags.end())
      throw ConfigError("gen: pool " + p.name + " POS '" + p.pos + "' not in schema");
    if (std::find(schemas.deprel_tags.begin(), schemas.deprel_tags.end(), p.deprel) ==
        schemas.deprel_tags.end())
      throw ConfigError("gen: pool " + p.name + " deprel '" + p.deprel + "' not in schema");
  }
  if (!nts.count(start)) throw ConfigError("gen: start symbol " + start + " is not defined");

  for (const auto& nt : nonterminals) {
    if (!nt.inline_children &&
        std::find(schemas.phrase_labels.begin(), schemas.phrase_labels.end(), nt.name) ==
            schemas.phrase_labels.end())
      throw ConfigError("gen: nonterminal " + nt.name + " missing from phrase schema");
    if (!nt.entity_type.empty() &&
        std::find(schemas.entity_types.begin(), schemas.entity_types.end(), nt.entity_type) ==
            schemas.entity_types.end())
      throw ConfigError("gen: entity type " + nt.entity_type + " not in schema");
    for (const auto& r : nt.rules) {
      if (r.weight <= 0.0) throw ConfigError("gen: rule weight must be positive in " + nt.name);
      if (!r.target_order.empty()) {
        if (r.target_order.size() != r.rhs.size())
          throw ConfigError("gen: target_order size mismatch in " + nt.name);
        std::set<int> seen(r.target_order.begin(), r.target_order.end());
        if (seen.size() != r.rhs.size() || *seen.begin() != 0 ||
            *seen.rbegin() != static_cast<int>(r.rhs.size()) - 1)
          throw ConfigError("gen: target_order is not a permutation in " + nt.name);
      }
      for (const auto& sym : r.rhs) {
        if (is_pool_ref(sym)) {
          if (!pool_names.count(sym.substr(1)))
            throw ConfigError("gen: undefined pool " + sym + " in " + nt.name);
        } else if (!nts.count(sym)) {
          throw ConfigError("gen: undefined nonterminal " + sym + " in " + nt.name);
        }
      }
    }
  }

  // Reachability from the start symbol.
  std::set<std::string> reach{start};
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& nt : nonterminals) {
      if (!reach.count(nt.name)) continue;
      for (const auto& r : nt.rules)
        for (const auto& sym : r.rhs)
          if (!is_pool_ref(sym) && reach.insert(sym).second) grew = true;
    }
  }
  for (const auto& nt : nonterminals)
    if (!reach.count(nt.name))
      throw ConfigError("gen: unreachable nonterminal " + nt.name);

  for (const auto& [pair, rel] : relation_map)
    if (std::find(schemas.relation_types.begin(), schemas.relation_types.end(), rel) ==
        schemas.relation_types.end())
      throw ConfigError("gen: relation type " + rel + " not in schema");
  for (const std::string& role : {first_entity_role, second_entity_role})
    if (!role.empty() && std::find(schemas.role_types.begin(), schemas.role_types.end(), role) ==
                             schemas.role_types.end())
      throw ConfigError("gen: role " + role + " not in schema");
}

GenConfig default_gen_config() {
  GenConfig c;
  c.schemas.entity_types = {"PER", "ORG"};
  c.schemas.relation_types = {"None", "Assoc", "Member", "Employs", "Partner"};
  c.schemas.role_types = {"None", "Agent", "Theme"};
  c.schemas.phrase_labels = {"S", "NPS", "NPO", "PNP", "ONP", "VP", "PP", "ADVP"};
  c.schemas.pos_tags = {"NOUN", "VERB", "ADP", "ADV"};
  c.schemas.deprel_tags = {"nmod", "root", "case", "advmod"};

  c.pools = {
      {"cn", 24, "NOUN", "nmod"}, {"pn", 16, "NOUN", "nmod"}, {"on", 16, "NOUN", "nmod"},
      {"v", 10, "VERB", "root"},  {"p", 6, "ADP", "case"},    {"adv", 8, "ADV", "advmod"},
  };

  auto nt = [&](std::string name, std::vector<GenRule> rules, bool inl = false,
                std::string entity = "") {
    GenNonterminal n;
    n.name = std::move(name);
    n.rules = std::move(rules);
    n.inline_children = inl;
    n.entity_type = std::move(entity);
    c.nonterminals.push_back(std::move(n));
  };

  nt("S", {{{"NPS", "VP"}, 0.6, {}}, {{"NPS", "VP", "ADVP"}, 0.4, {}}});
  nt("NPS", {{{"CPRE", "ENT", "CPOST"}, 1.0, {2, 1, 0}}});
  nt("NPO", {{{"CPRE", "ENT", "CPOST"}, 1.0, {2, 1, 0}}});
  nt("ENT", {{{"PNP"}, 0.5, {}}, {{"ONP"}, 0.5, {}}}, /*inl=*/true);
  nt("CPRE", {{{}, 0.4, {}}, {{"$cn"}, 0.35, {}}, {{"$cn", "$cn"}, 0.25, {}}}, /*inl=*/true);
  nt("CPOST", {{{}, 0.4, {}}, {{"$cn"}, 0.35, {}}, {{"$cn", "$cn"}, 0.25, {}}}, /*inl=*/true);
  nt("PNP", {{{"$pn"}, 0.4, {}}, {{"$pn", "$pn"}, 0.35, {}}, {{"$pn", "$pn", "$pn"}, 0.25, {}}},
     /*inl=*/false, "PER");
  nt("ONP", {{{"$on"}, 0.4, {}}, {{"$on", "$on"}, 0.35, {}}, {{"$on", "$on", "$on"}, 0.25, {}}},
     /*inl=*/false, "ORG");
  nt("VP", {{{"$v", "NPO"}, 0.65, {1, 0}}, {{"$v", "NPO", "PP"}, 0.35, {2, 1, 0}}});
  nt("PP", {{{"$p", "NPO"}, 1.0, {1, 0}}});
  nt("ADVP", {{{"$adv"}, 1.0, {}}});

  c.relation_map = {
      {{"PER", "PER"}, "Assoc"},
      {{"PER", "ORG"}, "Member"},
      {{"ORG", "PER"}, "Employs"},
      {{"ORG", "ORG"}, "Partner"},
  };
  return c;
}

std::pair<Corpus, Corpus> generate_synthetic_pair(const GenConfig& config, std::uint64_t seed) {
  config.validate();
  Generator gen(config, seed);
  int start_nt = gen.nt_index.at(config.start);

  Corpus source, target;
  source.language = config.source_language;
  target.language = config.target_language;
  source.schemas = target.schemas = config.schemas;

  for (int k = 0; k < config.sentences; ++k) {
    std::string id = "s" + std::to_string(k);
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000) throw Error("generator failed to produce a sentence within limits");
      DerivNode deriv = gen.derive(start_nt);
      int next_entity = 0;
      bool trigger_seen = false;
      gen.annotate(deriv, next_entity, trigger_seen);
      Sentence src = gen.realize(deriv, /*target=*/false, id);
      if (src.length() > config.max_len) continue;
      Sentence tgt = gen.realize(deriv, /*target=*/true, id);
      source.sentences.push_back(std::move(src));
      target.sentences.push_back(std::move(tgt));
      break;
    }
  }
  validate_corpus(source);
  validate_corpus(target);
  return {std::move(source), std::move(target)};
}

}  // namespace shine
