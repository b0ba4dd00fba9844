#include "shine/syntax.hpp"

#include <algorithm>
#include <unordered_map>

#include "shine/errors.hpp"

namespace shine {

int SpanFeatureMatrix::col_of(const std::string& bio_label) const {
  auto it = std::find(columns.begin(), columns.end(), bio_label);
  return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

SpanFeatureMatrix build_span_counts(const std::vector<ConstituentSpan>& spans, int length,
                                    const std::vector<std::string>& schema) {
  if (length <= 0) throw ValidationError("build_span_counts: sentence length must be positive");
  SpanFeatureMatrix out;
  out.counts = IntMatrix(length, 2 * static_cast<int>(schema.size()));
  std::unordered_map<std::string, int> label_col;
  for (std::size_t k = 0; k < schema.size(); ++k) {
    out.columns.push_back("B-" + schema[k]);
    out.columns.push_back("I-" + schema[k]);
    label_col[schema[k]] = static_cast<int>(2 * k);
  }
  for (const auto& s : spans) {
    if (s.start < 0 || s.end < s.start || s.end >= length)
      throw ValidationError("build_span_counts: span (" + std::to_string(s.start) + "," +
                            std::to_string(s.end) + ") out of range for length " +
                            std::to_string(length));
    auto it = label_col.find(s.label);
    if (it == label_col.end())
      throw ValidationError("build_span_counts: label '" + s.label + "' not in schema");
    int b_col = it->second;
    out.counts.at(s.start, b_col) += 1;
    for (int k = s.start + 1; k <= s.end; ++k) out.counts.at(k, b_col + 1) += 1;
  }
  return out;
}

FrequencyMatrix build_frequency_matrix(const std::vector<ConstituentSpan>& spans, int length) {
  if (length <= 0) throw ValidationError("build_frequency_matrix: empty input (length 0)");
  for (const auto& s : spans) {
    if (s.start < 0 || s.end < s.start || s.end >= length)
      throw ValidationError("build_frequency_matrix: span (" + std::to_string(s.start) + "," +
                            std::to_string(s.end) + ") out of range for length " +
                            std::to_string(length));
  }
  // contains(a,b) = #spans with start <= a and b <= end, via a 2-D histogram
  // summed over start prefixes and end suffixes.
  IntMatrix hist(length, length);
  for (const auto& s : spans) hist.at(s.start, s.end) += 1;
  for (int b = 0; b < length; ++b)
    for (int a = 1; a < length; ++a) hist.at(a, b) += hist.at(a - 1, b);
  for (int a = 0; a < length; ++a)
    for (int b = length - 2; b >= 0; --b) hist.at(a, b) += hist.at(a, b + 1);

  FrequencyMatrix out;
  out.f = IntMatrix(length, length);
  for (int i = 0; i < length; ++i) {
    out.f.at(i, i) = 1;
    for (int j = i + 1; j < length; ++j) {
      int raw = hist.at(i, j);
      int v = std::max(1, raw);
      out.f.at(i, j) = v;
      out.f.at(j, i) = v;
    }
  }
  return out;
}

}  // namespace shine
