#include "shine/metrics.hpp"

#include <algorithm>
#include <map>

#include "shine/errors.hpp"

namespace shine {

PRF prf_from_counts(long long predicted, long long correct, long long gold) {
  PRF out;
  out.predicted = predicted;
  out.correct = correct;
  out.gold = gold;
  out.precision = predicted > 0 ? static_cast<double>(correct) / predicted : 0.0;
  out.recall = gold > 0 ? static_cast<double>(correct) / gold : 0.0;
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

std::vector<BioSegment> decode_bio(const std::vector<std::string>& tags) {
  std::vector<BioSegment> out;
  int open_start = -1;
  std::string open_type;
  auto close = [&](int end) {
    if (open_start >= 0) out.push_back({open_start, end, open_type});
    open_start = -1;
  };
  for (int i = 0; i < static_cast<int>(tags.size()); ++i) {
    const std::string& tag = tags[i];
    if (tag == "O") {
      close(i - 1);
      continue;
    }
    if (tag.size() < 3 || (tag[0] != 'B' && tag[0] != 'I') || tag[1] != '-')
      throw ValidationError("decode_bio: unknown tag '" + tag + "'");
    std::string type = tag.substr(2);
    if (tag[0] == 'B' || open_start < 0 || open_type != type) {
      close(i - 1);
      open_start = i;
      open_type = type;
    }
    // I-X continuing a matching open segment extends it.
  }
  close(static_cast<int>(tags.size()) - 1);
  return out;
}

PRF tuple_f1(const std::vector<std::string>& gold, const std::vector<std::string>& pred) {
  std::map<std::string, long long> gold_counts;
  for (const auto& k : gold) gold_counts[k] += 1;
  long long correct = 0;
  for (const auto& k : pred) {
    auto it = gold_counts.find(k);
    if (it != gold_counts.end() && it->second > 0) {
      --it->second;
      ++correct;
    }
  }
  return prf_from_counts(static_cast<long long>(pred.size()), correct,
                         static_cast<long long>(gold.size()));
}

namespace {

std::string span_key(std::pair<int, int> s) {
  return std::to_string(s.first) + ":" + std::to_string(s.second);
}

}  // namespace

std::string entity_key(const std::string& sentence_id, int start, int end,
                       const std::string& type) {
  return sentence_id + "|" + span_key({start, end}) + "|" + type;
}

std::string relation_key(const std::string& sentence_id, std::pair<int, int> subj,
                         std::pair<int, int> obj, const std::string& type) {
  return sentence_id + "|" + span_key(subj) + "|" + span_key(obj) + "|" + type;
}

std::string argument_key(const std::string& sentence_id, std::pair<int, int> trigger,
                         std::pair<int, int> arg, const std::string& role) {
  return sentence_id + "|" + span_key(trigger) + "|" + span_key(arg) + "|" + role;
}

PRF entity_f1(const std::vector<std::string>& gold_keys,
              const std::vector<std::string>& pred_keys) {
  return tuple_f1(gold_keys, pred_keys);
}

PRF relation_f1(const std::vector<std::string>& gold_keys,
                const std::vector<std::string>& pred_keys) {
  return tuple_f1(gold_keys, pred_keys);
}

PRF argument_f1(const std::vector<std::string>& gold_keys,
                const std::vector<std::string>& pred_keys) {
  return tuple_f1(gold_keys, pred_keys);
}

}  // namespace shine
