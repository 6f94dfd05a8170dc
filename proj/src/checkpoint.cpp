#include "histsem/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "histsem/digest.hpp"
#include "histsem/error.hpp"

namespace histsem {
namespace {

constexpr std::string_view kMagic = "HSCKPT01";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::string_view bytes, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  return v;
}

std::string encode_blocks(const std::vector<ParamBlock>& params) {
  std::string out;
  for (const auto& block : params) {
    for (float f : block.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

nlohmann::json block_layout(const std::vector<ParamBlock>& params) {
  nlohmann::json layout = nlohmann::json::array();
  for (const auto& b : params) layout.push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}});
  return layout;
}

template <typename T>
T require_field(const nlohmann::json& json, const char* key) {
  try {
    return json.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace

EncoderConfig EncoderConfig::histbert_proto() {
  EncoderConfig c;
  c.num_warmup_steps = 10000;
  c.num_train_steps = 10000;
  return c;
}

EncoderConfig EncoderConfig::histbert_5() {
  EncoderConfig c;
  c.num_warmup_steps = 500000;
  c.num_train_steps = 200000;
  return c;
}

EncoderConfig EncoderConfig::histbert_10() { return histbert_5(); }

EncoderConfig EncoderConfig::toy() {
  EncoderConfig c;
  c.hidden_dim = 64;
  c.num_layers = 4;
  c.max_seq_length = 64;
  c.num_warmup_steps = 20;
  c.num_train_steps = 300;
  c.learning_rate = 0.05;
  return c;
}

void EncoderConfig::validate() const {
  if (!(masked_lm_prob > 0.0 && masked_lm_prob < 1.0)) {
    throw InputError("masked_lm_prob must lie in (0, 1)");
  }
  if (max_seq_length < 3) throw InputError("max_seq_length must be at least 3");
  if (max_predictions_per_seq == 0) throw InputError("max_predictions_per_seq must be positive");
  if (max_predictions_per_seq > max_seq_length) {
    throw InputError("max_predictions_per_seq must not exceed max_seq_length");
  }
  if (train_batch_size == 0) throw InputError("train_batch_size must be positive");
  if (hidden_dim == 0) throw InputError("hidden_dim must be positive");
  if (num_layers == 0) throw InputError("num_layers must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw InputError("learning_rate must be positive and finite");
  }
}

nlohmann::json EncoderConfig::to_json() const {
  return {{"max_seq_length", max_seq_length},
          {"max_predictions_per_seq", max_predictions_per_seq},
          {"masked_lm_prob", masked_lm_prob},
          {"train_batch_size", train_batch_size},
          {"num_warmup_steps", num_warmup_steps},
          {"num_train_steps", num_train_steps},
          {"learning_rate", learning_rate},
          {"hidden_dim", hidden_dim},
          {"num_layers", num_layers},
          {"seed", seed}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& json) {
  EncoderConfig c;
  c.max_seq_length = require_field<std::size_t>(json, "max_seq_length");
  c.max_predictions_per_seq = require_field<std::size_t>(json, "max_predictions_per_seq");
  c.masked_lm_prob = require_field<double>(json, "masked_lm_prob");
  c.train_batch_size = require_field<std::size_t>(json, "train_batch_size");
  c.num_warmup_steps = require_field<std::size_t>(json, "num_warmup_steps");
  c.num_train_steps = require_field<std::size_t>(json, "num_train_steps");
  c.learning_rate = require_field<double>(json, "learning_rate");
  c.hidden_dim = require_field<std::size_t>(json, "hidden_dim");
  c.num_layers = require_field<std::size_t>(json, "num_layers");
  c.seed = require_field<std::uint64_t>(json, "seed");
  return c;
}

std::string EncoderConfig::digest() const { return sha256_hex(to_json().dump()); }

std::string_view to_string(EncoderKind kind) { return kind == EncoderKind::kMock ? "mock" : "toy"; }

EncoderKind encoder_kind_from_string(std::string_view text) {
  if (text == "mock") return EncoderKind::kMock;
  if (text == "toy") return EncoderKind::kToy;
  throw InputError("unknown encoder kind '" + std::string(text) + "'");
}

nlohmann::json ProvenanceEntry::to_json() const {
  return {{"corpus_digest", corpus_digest}, {"steps", steps}, {"seed", seed},
          {"decades", decades},             {"note", note}};
}

ProvenanceEntry ProvenanceEntry::from_json(const nlohmann::json& json) {
  ProvenanceEntry e;
  e.corpus_digest = json.value("corpus_digest", "");
  e.steps = json.value("steps", std::uint64_t{0});
  e.seed = json.value("seed", std::uint64_t{0});
  e.decades = json.value("decades", std::vector<std::string>{});
  e.note = json.value("note", "");
  return e;
}

Checkpoint::Checkpoint(EncoderKind kind, EncoderConfig config, std::vector<std::string> vocab,
                       std::vector<ParamBlock> params)
    : kind_(kind), config_(std::move(config)), vocab_(std::move(vocab)), params_(std::move(params)) {
  config_.validate();
  for (const auto& b : params_) {
    if (b.data.size() != b.rows * b.cols) throw InputError("parameter block '" + b.name + "' has wrong size");
    for (float f : b.data) {
      if (!std::isfinite(f)) throw InputError("parameter block '" + b.name + "' holds a non-finite value");
    }
  }
  compute_digest();
}

void Checkpoint::compute_digest() {
  Sha256 hash;
  hash.update(to_string(kind_)).update("\n").update(config_.to_json().dump()).update("\n");
  for (const auto& piece : vocab_) hash.update(piece).update("\n");
  hash.update(block_layout(params_).dump()).update("\n").update(encode_blocks(params_));
  digest_ = hash.hex_digest();
}

std::string Checkpoint::serialize() const {
  nlohmann::json provenance = nlohmann::json::array();
  for (const auto& p : provenance_) provenance.push_back(p.to_json());
  const nlohmann::json header = {{"kind", to_string(kind_)},   {"config", config_.to_json()},
                                 {"vocab", vocab_},            {"provenance", provenance},
                                 {"blocks", block_layout(params_)}, {"digest", digest_}};
  const std::string header_text = header.dump();
  std::string out(kMagic);
  put_u64(out, header_text.size());
  out += header_text;
  out += encode_blocks(params_);
  return out;
}

Checkpoint Checkpoint::deserialize(std::string_view bytes) {
  if (bytes.size() < kMagic.size() + 8 || bytes.substr(0, kMagic.size()) != kMagic) {
    throw InputError("not a checkpoint file (bad magic)");
  }
  const std::uint64_t header_len = get_u64(bytes, kMagic.size());
  const std::size_t header_at = kMagic.size() + 8;
  if (header_len > bytes.size() - header_at) throw InputError("truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(header_at, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("corrupt checkpoint header: ") + e.what());
  }

  std::size_t at = header_at + header_len;
  std::vector<ParamBlock> params;
  try {
    for (const auto& layout : header.at("blocks")) {
      ParamBlock block;
      block.name = layout.at("name").get<std::string>();
      block.rows = layout.at("rows").get<std::size_t>();
      block.cols = layout.at("cols").get<std::size_t>();
      const std::size_t count = block.rows * block.cols;
      if (count > (bytes.size() - at) / 4) throw InputError("truncated parameter block " + block.name);
      block.data.resize(count);
      for (std::size_t i = 0; i < count; ++i, at += 4) block.data[i] = std::bit_cast<float>(get_u32(bytes, at));
      params.push_back(std::move(block));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("corrupt checkpoint layout: ") + e.what());
  }
  if (at != bytes.size()) throw InputError("trailing bytes after checkpoint parameters");

  Checkpoint ckpt(encoder_kind_from_string(header.at("kind").get<std::string>()),
                  EncoderConfig::from_json(header.at("config")),
                  header.at("vocab").get<std::vector<std::string>>(), std::move(params));
  for (const auto& p : header.at("provenance")) ckpt.append_provenance(ProvenanceEntry::from_json(p));
  if (header.value("digest", "") != ckpt.digest()) throw InputError("checkpoint digest mismatch");
  return ckpt;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  const std::string bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

}  // namespace histsem
