#ifndef HISTSEM_SYNTH_HPP_
#define HISTSEM_SYNTH_HPP_

// Bundled synthetic data: a small decade-stamped corpus in which "coach"
// drifts from the transport sense to the sports sense, and DUPS-style
// judgment files derived from encoder similarities.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "histsem/corpus.hpp"
#include "histsem/encoder.hpp"
#include "histsem/random.hpp"

namespace histsem {

struct Topic {
  std::string name;
  std::vector<std::string> nouns;
  std::vector<std::string> verbs;
  std::vector<std::string> adjectives;
};

// transport, sport, fashion, fairy, home.
std::span<const Topic> synthetic_topics();
const Topic& synthetic_topic(std::string_view name);

// A raw sentence (capitalized, final period) drawn from the topic. When
// `focus` is non-empty it appears exactly once, as the subject or object;
// *focus_offset receives its code point offset.
std::string synthetic_sentence(Rng& rng, const Topic& topic, std::string_view focus = {},
                               std::size_t* focus_offset = nullptr);

struct SyntheticCorpusOptions {
  DecadeRange range{DecadeLabel(1910), DecadeLabel(2000)};
  std::size_t docs_per_decade = 6;
  std::size_t sentences_per_doc = 8;
  // Adds one document before and one after the range.
  bool out_of_range_docs = true;
};

std::vector<RawDocument> synthetic_corpus(std::uint64_t seed, const SyntheticCorpusOptions& options = {});

// Writes doc_<year>_<id>.txt files.
void write_documents(std::span<const RawDocument> docs, const std::filesystem::path& dir);

struct SyntheticDupsOptions {
  std::vector<std::string> words = {"coach", "bag", "ball", "signal"};
  std::size_t usages_per_word = 10;
  // Per-annotator Gaussian noise on the 1..4 score scale.
  double noise = 0.1;
};

// All usage pairs per word, each with five scores that are a noisy
// increasing function of the encoder's cosine similarity for the pair.
std::string synthetic_dups_csv(const Encoder& encoder, std::uint64_t seed, const SyntheticDupsOptions& options = {});

struct SyntheticClusterOptions {
  std::size_t clusters = 3;
  std::size_t per_cluster = 8;
  std::size_t dim = 16;
  // Scale of the cluster centres relative to unit within-cluster noise.
  double spread = 5.0;
  // Perturbed point = g + separation * (c - g) + shrink * (x - c), for
  // cluster centroid c and global mean g. Shrinking alone cannot raise the
  // mean inter-cluster distance, hence the separation factor.
  double shrink = 0.5;
  double separation = 1.2;
};

struct SyntheticClusters {
  std::vector<EmbeddingRecord> baseline;
  std::vector<EmbeddingRecord> perturbed;
  std::vector<std::pair<std::string, std::string>> labels;  // (usage_id, cluster)
};

// Gaussian clusters of usages of `word` ("k<c>-u<i>" ids, clusters "k<c>").
SyntheticClusters synthetic_clusters(std::uint64_t seed, std::string_view word = "coach",
                                     const SyntheticClusterOptions& options = {});

}  // namespace histsem

#endif  // HISTSEM_SYNTH_HPP_
