#ifndef HISTSEM_ENCODER_HPP_
#define HISTSEM_ENCODER_HPP_

// Contextual encoders and focus-word representation extraction.

#include <Eigen/Dense>

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "histsem/checkpoint.hpp"
#include "histsem/types.hpp"
#include "histsem/vocab.hpp"

namespace histsem {

// Half-open range of subtoken rows [begin, end) belonging to one input word.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const TokenSpan&) const = default;
};

// Per-layer hidden vectors (rows = subtoken positions, including [CLS] at
// row 0 and the closing [SEP]) and the word -> subtoken map. Words cut off
// by sequence truncation have no span.
struct HiddenStates {
  std::vector<Eigen::MatrixXd> layers;
  std::vector<TokenSpan> token_spans;

  std::size_t num_layers() const { return layers.size(); }
  std::size_t sequence_length() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers[0].rows()); }
  std::size_t hidden_dim() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers[0].cols()); }
};

// WordPiece segmentation of a word sequence wrapped in [CLS] ... [SEP] and
// cut to max_seq_length subtokens; words past the cut are dropped.
struct SegmentedSequence {
  std::vector<Subtoken> subtokens;  // includes [CLS] and [SEP]
  std::vector<TokenSpan> token_spans;
};

SegmentedSequence segment_words(const Vocabulary& vocab, std::span<const std::string> words,
                                std::size_t max_seq_length);

class Encoder {
 public:
  virtual ~Encoder() = default;

  // Throws InputError for an empty word list. Deterministic.
  virtual HiddenStates encode(std::span<const std::string> words) const = 0;
  virtual const EncoderConfig& config() const = 0;
  virtual const std::string& id() const = 0;
};

// Training-free test double. Each subtoken vector is the normalized sum of a
// token component and a context component, both drawn from Gaussian streams
// keyed on a digest of (surface, layer) and (surface window of +-2, layer).
class MockEncoder : public Encoder {
 public:
  explicit MockEncoder(const Checkpoint& checkpoint);

  HiddenStates encode(std::span<const std::string> words) const override;
  const EncoderConfig& config() const override { return config_; }
  const std::string& id() const override { return id_; }

 private:
  EncoderConfig config_;
  Vocabulary vocab_;
  std::string id_;
};

// A mock checkpoint carries no weights, only dimensions and vocabulary.
Checkpoint make_mock_checkpoint(const EncoderConfig& config,
                                const Vocabulary& vocab = Vocabulary::builtin());

std::unique_ptr<Encoder> make_encoder(const Checkpoint& checkpoint);

// Mean-pools the focus word's subtoken rows in each of the last_k layers and
// sums the pooled vectors dimension-wise.
Eigen::VectorXd extract_usage_embedding(const HiddenStates& states, std::size_t focus_word_index,
                                        std::size_t last_k = 4);

// Dimension-wise sum of the last_k already pooled per-layer vectors.
Eigen::VectorXd sum_last_layers(std::span<const Eigen::VectorXd> per_layer, std::size_t last_k = 4);

// One record per usage, in order. Duplicate usage ids are rejected before
// any encoding; per-usage failures are rethrown with the usage id attached.
std::vector<EmbeddingRecord> batch_extract(const Encoder& encoder, std::span<const Usage> usages,
                                           std::size_t last_k = 4, std::size_t jobs = 1);

// JSON Lines embedding store: word, usage_id, decade, encoder_id, dim, vector.
std::string embedding_record_to_json_line(const EmbeddingRecord& record);
EmbeddingRecord embedding_record_from_json_line(std::string_view line);
void write_embedding_store(const std::filesystem::path& path, std::span<const EmbeddingRecord> records);
std::vector<EmbeddingRecord> read_embedding_store(const std::filesystem::path& path);

}  // namespace histsem

#endif  // HISTSEM_ENCODER_HPP_
