#include "histsem/encoder.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "histsem/error.hpp"
#include "histsem/parallel.hpp"
#include "histsem/random.hpp"
#include "histsem/toy_model.hpp"

namespace histsem {
namespace {

constexpr std::size_t kMockWindow = 2;

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Eigen::VectorXd gaussian(std::uint64_t seed, std::size_t dim) {
  Rng rng(seed);
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  return v;
}

}  // namespace

SegmentedSequence segment_words(const Vocabulary& vocab, std::span<const std::string> words,
                                std::size_t max_seq_length) {
  if (words.empty()) throw InputError("cannot encode an empty token list");
  if (max_seq_length < 3) throw InputError("max_seq_length must be at least 3");
  const std::size_t budget = max_seq_length - 2;
  SegmentedSequence seq;
  seq.subtokens.push_back(Subtoken{vocab.cls_id(), std::string(Vocabulary::kCls)});
  for (const auto& word : words) {
    const std::size_t used = seq.subtokens.size() - 1;
    if (used >= budget) break;
    auto pieces = vocab.wordpiece(word);
    if (pieces.empty()) throw InputError("empty token in input");
    const std::size_t take = std::min(pieces.size(), budget - used);
    const std::size_t begin = seq.subtokens.size();
    for (std::size_t i = 0; i < take; ++i) seq.subtokens.push_back(std::move(pieces[i]));
    seq.token_spans.push_back(TokenSpan{begin, seq.subtokens.size()});
  }
  seq.subtokens.push_back(Subtoken{vocab.sep_id(), std::string(Vocabulary::kSep)});
  return seq;
}

MockEncoder::MockEncoder(const Checkpoint& checkpoint)
    : config_(checkpoint.config()), vocab_(checkpoint.vocab()), id_(checkpoint.digest()) {
  if (checkpoint.kind() != EncoderKind::kMock) throw InputError("not a mock checkpoint");
}

HiddenStates MockEncoder::encode(std::span<const std::string> words) const {
  const SegmentedSequence seq = segment_words(vocab_, words, config_.max_seq_length);
  const auto n = seq.subtokens.size();
  const auto dim = config_.hidden_dim;
  HiddenStates states;
  states.token_spans = seq.token_spans;
  states.layers.assign(config_.num_layers, Eigen::MatrixXd(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim)));
  for (std::size_t p = 0; p < n; ++p) {
    std::string window;
    for (std::size_t q = p; q < p + 2 * kMockWindow + 1; ++q) {
      // q is offset by kMockWindow so positions before the sequence stay unsigned.
      if (q < kMockWindow) {
        window += "<s>";
      } else if (q - kMockWindow >= n) {
        window += "</s>";
      } else {
        window += seq.subtokens[q - kMockWindow].surface;
      }
      window.push_back('\x1f');
    }
    const std::uint64_t tok_key = fnv1a("tok\x1f" + seq.subtokens[p].surface);
    const std::uint64_t ctx_key = fnv1a("ctx\x1f" + window);
    for (std::size_t l = 0; l < config_.num_layers; ++l) {
      Eigen::VectorXd v = gaussian(mix_seed(tok_key, l), dim) + gaussian(mix_seed(ctx_key, l), dim);
      v /= v.norm();
      states.layers[l].row(static_cast<Eigen::Index>(p)) = v.transpose();
    }
  }
  return states;
}

Checkpoint make_mock_checkpoint(const EncoderConfig& config, const Vocabulary& vocab) {
  return Checkpoint(EncoderKind::kMock, config, vocab.pieces(), {});
}

std::unique_ptr<Encoder> make_encoder(const Checkpoint& checkpoint) {
  switch (checkpoint.kind()) {
    case EncoderKind::kMock:
      return std::make_unique<MockEncoder>(checkpoint);
    case EncoderKind::kToy:
      return std::make_unique<ToyEncoder>(checkpoint);
  }
  throw InputError("unsupported encoder kind");
}

Eigen::VectorXd extract_usage_embedding(const HiddenStates& states, std::size_t focus_word_index,
                                        std::size_t last_k) {
  if (last_k == 0) throw InputError("last_k must be positive");
  if (last_k > states.num_layers()) {
    throw InputError("last_k (" + std::to_string(last_k) + ") exceeds the number of layers (" +
                     std::to_string(states.num_layers()) + ")");
  }
  if (focus_word_index >= states.token_spans.size()) {
    throw InputError("focus word index " + std::to_string(focus_word_index) + " out of range");
  }
  const TokenSpan span = states.token_spans[focus_word_index];
  if (span.size() == 0) throw InputError("focus word has no subtokens");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(states.hidden_dim()));
  for (std::size_t l = states.num_layers() - last_k; l < states.num_layers(); ++l) {
    const auto rows = states.layers[l].middleRows(static_cast<Eigen::Index>(span.begin),
                                                  static_cast<Eigen::Index>(span.size()));
    Eigen::VectorXd pooled = rows.colwise().sum().transpose();
    pooled /= static_cast<double>(span.size());
    out += pooled;
  }
  return out;
}

Eigen::VectorXd sum_last_layers(std::span<const Eigen::VectorXd> per_layer, std::size_t last_k) {
  if (last_k == 0) throw InputError("last_k must be positive");
  if (last_k > per_layer.size()) throw InputError("last_k exceeds the number of layers");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(per_layer.back().size());
  for (std::size_t l = per_layer.size() - last_k; l < per_layer.size(); ++l) {
    if (per_layer[l].size() != out.size()) throw InputError("layer vectors differ in dimension");
    out += per_layer[l];
  }
  return out;
}

std::vector<EmbeddingRecord> batch_extract(const Encoder& encoder, std::span<const Usage> usages,
                                           std::size_t last_k, std::size_t jobs) {
  std::set<std::string_view> ids;
  for (const auto& u : usages) {
    if (!ids.insert(u.usage_id).second) throw InputError("duplicate usage id: " + u.usage_id);
  }
  std::vector<EmbeddingRecord> records(usages.size());
  parallel_for(usages.size(), jobs, [&](std::size_t i) {
    const Usage& usage = usages[i];
    try {
      const HiddenStates states = encoder.encode(usage.tokens);
      const Eigen::VectorXd v = extract_usage_embedding(states, usage.focus_index, last_k);
      if (!v.allFinite()) throw InputError("non-finite embedding");
      records[i] = EmbeddingRecord{usage.word, usage.usage_id, usage.decade,
                                   std::vector<double>(v.data(), v.data() + v.size()), encoder.id()};
    } catch (const Error& e) {
      throw InputError("usage " + usage.usage_id + ": " + e.what());
    }
  });
  return records;
}

std::string embedding_record_to_json_line(const EmbeddingRecord& r) {
  nlohmann::json j = {{"word", r.word},
                      {"usage_id", r.usage_id},
                      {"decade", r.decade.str()},
                      {"encoder_id", r.encoder_id},
                      {"dim", r.vector.size()},
                      {"vector", r.vector}};
  return j.dump();
}

EmbeddingRecord embedding_record_from_json_line(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    EmbeddingRecord r;
    r.word = j.at("word").get<std::string>();
    r.usage_id = j.at("usage_id").get<std::string>();
    r.decade = DecadeLabel::parse(j.at("decade").get<std::string>());
    r.encoder_id = j.at("encoder_id").get<std::string>();
    r.vector = j.at("vector").get<std::vector<double>>();
    if (j.at("dim").get<std::size_t>() != r.vector.size()) {
      throw InputError("record " + r.usage_id + ": dim does not match vector length");
    }
    for (double x : r.vector) {
      if (!std::isfinite(x)) throw InputError("record " + r.usage_id + ": non-finite entry");
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed embedding record: ") + e.what());
  }
}

void write_embedding_store(const std::filesystem::path& path, std::span<const EmbeddingRecord> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : records) out << embedding_record_to_json_line(r) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<EmbeddingRecord> read_embedding_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<EmbeddingRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(embedding_record_from_json_line(line));
  }
  return records;
}

}  // namespace histsem
