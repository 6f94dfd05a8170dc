#ifndef HISTSEM_USAGE_HPP_
#define HISTSEM_USAGE_HPP_

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "histsem/types.hpp"
#include "json.hpp"

namespace histsem {

// One Usage per occurrence of `word` as a whole token. Usage ids are
// "<doc_id>:<sentence index>:<token index>".
std::vector<Usage> find_usages(std::span<const Sentence> sentences, std::string_view word);

// Usage for a snippet whose focus word starts at code point `focus_offset`.
// The snippet is normalized and tokenized; the focus token must begin with
// the normalized word. The id is derived from the snippet contents.
Usage usage_from_snippet(std::string_view word, std::string_view text, std::size_t focus_offset,
                         std::string_view interval);

struct AnnotatedPair {
  std::string word;
  Usage usage_a;
  Usage usage_b;
  std::array<double, 5> scores{};

  double mean_score() const;
};

struct DupsDataset {
  std::vector<std::string> words;  // first-appearance order
  std::vector<AnnotatedPair> pairs;

  std::map<std::string, std::size_t> pair_counts() const;
};

// Columns: word, usage_a_text, usage_a_focus_offset, usage_a_interval,
// usage_b_text, usage_b_focus_offset, usage_b_interval, score_1 .. score_5.
DupsDataset parse_dups(std::string_view csv);
DupsDataset load_dups(const std::filesystem::path& path);

std::vector<std::vector<std::string>> parse_csv(std::string_view text);
std::string csv_escape(std::string_view field);

class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  // All cells start missing.
  SimilarityMatrix(std::string word, std::vector<std::string> usage_ids, std::string source);

  const std::string& word() const { return word_; }
  const std::vector<std::string>& usage_ids() const { return usage_ids_; }
  const std::string& source() const { return source_; }
  std::size_t size() const { return usage_ids_.size(); }

  std::optional<double> at(std::size_t i, std::size_t j) const { return values_[i * size() + j]; }
  bool defined(std::size_t i, std::size_t j) const { return values_[i * size() + j].has_value(); }
  // Sets (i, j) and (j, i).
  void set(std::size_t i, std::size_t j, double value);
  void clear(std::size_t i, std::size_t j);

  std::optional<std::size_t> index_of(std::string_view usage_id) const;
  std::size_t defined_upper_cells() const;
  bool same_pattern(const SimilarityMatrix& other) const;

  nlohmann::json to_json() const;
  static SimilarityMatrix from_json(const nlohmann::json& json);

 private:
  std::string word_;
  std::vector<std::string> usage_ids_;
  std::string source_;
  std::vector<std::optional<double>> values_;
};

// Usages ordered by first appearance in the word's pairs. Repeated
// annotations of a pair are averaged; *duplicates receives how many extra
// annotations were folded in. The diagonal stays missing.
SimilarityMatrix build_human_matrix(const DupsDataset& dataset, std::string_view word,
                                    std::size_t* duplicates = nullptr);

// Cosine similarities for the mask's defined cells, diagonal 1.0. Throws
// MismatchError when a usage has no record or records mix encoders.
SimilarityMatrix build_model_matrix(std::span<const EmbeddingRecord> records, std::string_view word,
                                    const SimilarityMatrix& mask);

// Every usage of every pair in the dataset, each usage id once.
std::vector<Usage> dataset_usages(const DupsDataset& dataset);

}  // namespace histsem

#endif  // HISTSEM_USAGE_HPP_
