#pragma once

#include <cstdint>
#include <vector>

#include "qdrank/corpus/types.hpp"
#include "qdrank/errors.hpp"

namespace qdrank::corpus {

struct ChronologicalSplit {
  std::vector<QueryRecord> train;
  std::vector<QueryRecord> dev;
  std::vector<QueryRecord> test;
};

/// train = {t <= first}, dev = {first < t <= second}, test = {t > second}.
/// Every query in dev is strictly later than every query in train, and likewise for test.
inline ChronologicalSplit split_chronological(const std::vector<QueryRecord>& records,
                                              std::int64_t first, std::int64_t second) {
  if (!(first < second)) throw SplitError("split boundaries must satisfy first < second");
  ChronologicalSplit out;
  for (const auto& r : records) {
    if (r.timestamp <= first)
      out.train.push_back(r);
    else if (r.timestamp <= second)
      out.dev.push_back(r);
    else
      out.test.push_back(r);
  }
  if (out.train.empty() || out.dev.empty() || out.test.empty())
    throw SplitError("chronological split produced an empty partition (train=" +
                     std::to_string(out.train.size()) + ", dev=" + std::to_string(out.dev.size()) +
                     ", test=" + std::to_string(out.test.size()) + ")");
  return out;
}

}  // namespace qdrank::corpus
