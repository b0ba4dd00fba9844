#include "shine/tree.hpp"

#include "shine/errors.hpp"

namespace shine {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }
bool is_atom_char(char c) { return !is_space(c) && c != '(' && c != ')'; }

struct Parser {
  std::string_view text;
  std::size_t pos = 0;
  int next_leaf = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("tree parse error at byte " + std::to_string(pos) + ": " + what);
  }

  void skip_space() {
    while (pos < text.size() && is_space(text[pos])) ++pos;
  }

  std::string atom() {
    std::size_t start = pos;
    while (pos < text.size() && is_atom_char(text[pos])) ++pos;
    if (pos == start) fail("expected label or token");
    return std::string(text.substr(start, pos - start));
  }

  TreeNode node() {
    skip_space();
    if (pos >= text.size() || text[pos] != '(') fail("expected '('");
    ++pos;
    skip_space();
    if (pos < text.size() && text[pos] == ')') fail("empty node");
    TreeNode n;
    n.label = atom();
    while (true) {
      skip_space();
      if (pos >= text.size()) fail("unbalanced parentheses");
      char c = text[pos];
      if (c == ')') {
        ++pos;
        break;
      }
      if (c == '(') {
        n.children.push_back(node());
      } else {
        TreeNode leaf;
        leaf.token = atom();
        leaf.leaf_index = next_leaf++;
        n.children.push_back(std::move(leaf));
      }
    }
    if (n.children.empty()) fail("node '" + n.label + "' has no children");
    return n;
  }
};

void collect_tokens(const TreeNode& n, std::vector<std::string>& out) {
  if (n.is_leaf()) {
    out.push_back(n.token);
    return;
  }
  for (const auto& c : n.children) collect_tokens(c, out);
}

void serialize_node(const TreeNode& n, std::string& out) {
  if (n.is_leaf()) {
    out += n.token;
    return;
  }
  out += '(';
  out += n.label;
  for (const auto& c : n.children) {
    out += ' ';
    serialize_node(c, out);
  }
  out += ')';
}

// Returns the (leftmost, rightmost) leaf indices under n.
std::pair<int, int> collect_spans(const TreeNode& n, std::vector<ConstituentSpan>& out) {
  if (n.is_leaf()) return {n.leaf_index, n.leaf_index};
  std::size_t slot = out.size();
  out.push_back({0, 0, n.label});  // pre-order position; interval filled below
  int lo = -1, hi = -1;
  for (const auto& c : n.children) {
    auto [clo, chi] = collect_spans(c, out);
    if (lo < 0) lo = clo;
    hi = chi;
  }
  out[slot].start = lo;
  out[slot].end = hi;
  return {lo, hi};
}

}  // namespace

std::vector<std::string> ConstituencyTree::tokens() const {
  std::vector<std::string> out;
  collect_tokens(root, out);
  return out;
}

ConstituencyTree parse_bracketed_tree(std::string_view text) {
  Parser p{text};
  p.skip_space();
  if (p.pos >= text.size()) throw ParseError("tree parse error at byte 0: empty input");
  ConstituencyTree tree;
  tree.root = p.node();
  p.skip_space();
  if (p.pos < text.size()) p.fail("trailing content after tree");
  if (p.next_leaf == 0) p.fail("tree has no tokens");
  tree.num_leaves = p.next_leaf;
  return tree;
}

std::string serialize_tree(const ConstituencyTree& tree) {
  std::string out;
  serialize_node(tree.root, out);
  return out;
}

std::vector<ConstituentSpan> extract_spans(const ConstituencyTree& tree) {
  std::vector<ConstituentSpan> out;
  collect_spans(tree.root, out);
  return out;
}

std::string spans_to_csv(const std::vector<ConstituentSpan>& spans) {
  std::string out;
  for (const auto& s : spans) {
    out += std::to_string(s.start);
    out += ',';
    out += std::to_string(s.end);
    out += ',';
    out += s.label;
    out += '\n';
  }
  return out;
}

}  // namespace shine
