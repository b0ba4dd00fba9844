#pragma once

#include <string>
#include <utility>
#include <vector>

namespace shine {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long long predicted = 0;  // A
  long long correct = 0;    // B
  long long gold = 0;       // E
};

// P = B/A, R = B/E, F1 = 2PR/(P+R); empty denominators yield 0.
PRF prf_from_counts(long long predicted, long long correct, long long gold);

struct BioSegment {
  int start = 0;
  int end = 0;
  std::string type;

  bool operator==(const BioSegment&) const = default;
  auto operator<=>(const BioSegment&) const = default;
};

// Decodes {O, B-X, I-X} tags into maximal segments. An I-X with no compatible
// open segment starts a new segment of type X. Unknown tag strings throw.
std::vector<BioSegment> decode_bio(const std::vector<std::string>& tags);

// Multiset exact-tuple F1: items are canonical keys (the caller bakes
// sentence identity, offsets and types into the key).
PRF tuple_f1(const std::vector<std::string>& gold, const std::vector<std::string>& pred);

// Canonical keys for the three task granularities.
std::string entity_key(const std::string& sentence_id, int start, int end,
                       const std::string& type);
std::string relation_key(const std::string& sentence_id, std::pair<int, int> subj,
                         std::pair<int, int> obj, const std::string& type);
std::string argument_key(const std::string& sentence_id, std::pair<int, int> trigger,
                         std::pair<int, int> arg, const std::string& role);

PRF entity_f1(const std::vector<std::string>& gold_keys, const std::vector<std::string>& pred_keys);
PRF relation_f1(const std::vector<std::string>& gold_keys,
                const std::vector<std::string>& pred_keys);
PRF argument_f1(const std::vector<std::string>& gold_keys,
                const std::vector<std::string>& pred_keys);

}  // namespace shine
