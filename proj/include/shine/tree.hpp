#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace shine {

// An inclusive token interval with its phrase label.
struct ConstituentSpan {
  int start = 0;
  int end = 0;
  std::string label;

  bool operator==(const ConstituentSpan&) const = default;
};

struct TreeNode {
  std::string label;  // set for internal nodes
  std::string token;  // set for leaves
  int leaf_index = -1;
  std::vector<TreeNode> children;

  bool is_leaf() const { return leaf_index >= 0; }
};

struct ConstituencyTree {
  TreeNode root;
  int num_leaves = 0;

  std::vector<std::string> tokens() const;
};

// Parses `(LABEL child ...)` where a child is a sub-expression or a bare
// token. Labels and tokens are runs of characters other than parentheses and
// whitespace. Throws ParseError naming the byte offset of the first problem.
ConstituencyTree parse_bracketed_tree(std::string_view text);

// Canonical single-space serialization; parse(serialize(t)) == t.
std::string serialize_tree(const ConstituencyTree& tree);

// One span per internal node (leftmost/rightmost leaf index, node label) in
// pre-order. Duplicate triples are retained.
std::vector<ConstituentSpan> extract_spans(const ConstituencyTree& tree);

// Debugging dump: one `start,end,label` line per span.
std::string spans_to_csv(const std::vector<ConstituentSpan>& spans);

}  // namespace shine
