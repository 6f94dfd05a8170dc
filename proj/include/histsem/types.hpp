#ifndef HISTSEM_TYPES_HPP_
#define HISTSEM_TYPES_HPP_

#include <string>
#include <utility>
#include <vector>

#include "histsem/corpus.hpp"

namespace histsem {

// One occurrence of a focus word: tokens[focus_index] is the occurrence.
struct Usage {
  std::string usage_id;
  std::string word;
  std::vector<std::string> tokens;
  std::size_t focus_index = 0;
  DecadeLabel decade;
};

// Focus-word vector for one usage under one encoder.
struct EmbeddingRecord {
  std::string word;
  std::string usage_id;
  DecadeLabel decade;
  std::vector<double> vector;
  std::string encoder_id;
};

// Unordered usage pair keyed by (usage_id, usage_id).
using UsagePair = std::pair<std::string, std::string>;

}  // namespace histsem

#endif  // HISTSEM_TYPES_HPP_
