#pragma once

#include <string>
#include <vector>

#include "shine/tree.hpp"

namespace shine {

struct IntMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<int> v;

  IntMatrix() = default;
  IntMatrix(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0) {}
  int& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  int at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
  bool operator==(const IntMatrix&) const = default;
};

// Per-word counts of constituent-span membership under BIO expansion: column
// B-X counts spans labeled X starting at the word, column I-X counts spans
// labeled X containing the word after their start.
struct SpanFeatureMatrix {
  IntMatrix counts;                  // L x (2 * |schema|)
  std::vector<std::string> columns;  // B-X, I-X per schema label, in schema order

  int col_of(const std::string& bio_label) const;  // -1 when absent
};

SpanFeatureMatrix build_span_counts(const std::vector<ConstituentSpan>& spans, int length,
                                    const std::vector<std::string>& schema);

// Symmetric LxL matrix of sub-span importance: entry (i,j) counts the
// constituent spans containing the interval [min(i,j), max(i,j)], floored at
// 1; diagonal fixed to 1.
struct FrequencyMatrix {
  IntMatrix f;
};

FrequencyMatrix build_frequency_matrix(const std::vector<ConstituentSpan>& spans, int length);

}  // namespace shine
