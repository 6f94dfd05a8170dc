#ifndef HISTSEM_CHECKPOINT_HPP_
#define HISTSEM_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace histsem {

// Masked-LM pre-training hyperparameters plus encoder dimensions.
struct EncoderConfig {
  std::size_t max_seq_length = 128;
  std::size_t max_predictions_per_seq = 20;
  double masked_lm_prob = 0.15;
  std::size_t train_batch_size = 32;
  std::size_t num_warmup_steps = 10000;
  std::size_t num_train_steps = 10000;
  double learning_rate = 2e-5;
  std::size_t hidden_dim = 768;
  std::size_t num_layers = 12;
  std::uint64_t seed = 0;

  // Published settings for the keyword-restricted prototype and the 5- and
  // 10-decade models, at the full 12 x 768 encoder size.
  static EncoderConfig histbert_proto();
  static EncoderConfig histbert_5();
  static EncoderConfig histbert_10();
  // Desk-scale defaults: 4 layers x 64 dims, larger step size, short run.
  static EncoderConfig toy();

  // Throws InputError. Step counts may be zero; everything else positive.
  void validate() const;

  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& json);
  std::string digest() const;

  bool operator==(const EncoderConfig&) const = default;
};

enum class EncoderKind { kMock, kToy };

std::string_view to_string(EncoderKind kind);
EncoderKind encoder_kind_from_string(std::string_view text);

// One training run in a checkpoint's lineage.
struct ProvenanceEntry {
  std::string corpus_digest;
  std::uint64_t steps = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> decades;
  std::string note;

  nlohmann::json to_json() const;
  static ProvenanceEntry from_json(const nlohmann::json& json);
  bool operator==(const ProvenanceEntry&) const = default;
};

// A named float32 tensor, row-major.
struct ParamBlock {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  bool operator==(const ParamBlock&) const = default;
};

// Encoder weights with their configuration, vocabulary and training lineage.
//
// File layout: the 8-byte magic "HSCKPT01", a little-endian uint64 header
// length, a UTF-8 JSON header {kind, config, vocab, provenance, blocks,
// digest}, then every parameter block as IEEE-754 float32 little-endian in
// header order.
class Checkpoint {
 public:
  Checkpoint(EncoderKind kind, EncoderConfig config, std::vector<std::string> vocab,
             std::vector<ParamBlock> params);

  EncoderKind kind() const { return kind_; }
  const EncoderConfig& config() const { return config_; }
  const std::vector<std::string>& vocab() const { return vocab_; }
  const std::vector<ParamBlock>& params() const { return params_; }
  const std::vector<ProvenanceEntry>& provenance() const { return provenance_; }

  void append_provenance(ProvenanceEntry entry) { provenance_.push_back(std::move(entry)); }

  // Identity of the encoder function: kind, config, vocabulary and weights.
  // Provenance is excluded, so identical weights share an id.
  const std::string& digest() const { return digest_; }

  std::string serialize() const;
  static Checkpoint deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

 private:
  void compute_digest();

  EncoderKind kind_;
  EncoderConfig config_;
  std::vector<std::string> vocab_;
  std::vector<ParamBlock> params_;
  std::vector<ProvenanceEntry> provenance_;
  std::string digest_;
};

}  // namespace histsem

#endif  // HISTSEM_CHECKPOINT_HPP_
