#include "histsem/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "histsem/digest.hpp"
#include "histsem/error.hpp"
#include "histsem/parallel.hpp"

namespace histsem {
namespace {

constexpr std::size_t kGradientGroup = 4;
constexpr std::uint64_t kPositionStream = 0x706f73;

std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<int> to_ids(const std::vector<std::string>& words, const Vocabulary& vocab) {
  std::vector<int> ids;
  for (const auto& w : words) {
    for (const auto& piece : vocab.wordpiece(w)) ids.push_back(piece.id);
  }
  return ids;
}

int random_regular_id(Rng& rng, const Vocabulary& vocab) {
  while (true) {
    const int id = static_cast<int>(rng.below(vocab.size()));
    if (!vocab.is_special(id)) return id;
  }
}

class AdamState {
 public:
  explicit AdamState(const ModelParams& like) : m_(like.zeros_like()), v_(like.zeros_like()) {}

  void step(ModelParams& params, const ModelParams& grad, double grad_scale, double lr) {
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-6;
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    const auto p = params.tensors();
    const auto g = grad.tensors();
    const auto m = m_.tensors();
    const auto v = v_.tensors();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const Eigen::ArrayXXd gi = g[i]->array() * grad_scale;
      m[i]->array() = kBeta1 * m[i]->array() + (1.0 - kBeta1) * gi;
      v[i]->array() = kBeta2 * v[i]->array() + (1.0 - kBeta2) * gi.square();
      p[i]->array() -= lr * (m[i]->array() / c1) / ((v[i]->array() / c2).sqrt() + kEps);
    }
  }

 private:
  ModelParams m_, v_;
  std::size_t t_ = 0;
};

}  // namespace

std::size_t TrainingCorpus::sentence_count() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.size();
  return n;
}

TrainingCorpus make_training_corpus(std::span<const PretrainingDocument> documents, const Vocabulary& vocab) {
  TrainingCorpus corpus;
  Sha256 hash;
  for (const auto& doc : documents) {
    std::vector<std::vector<int>> sentences;
    for (const auto& sentence : doc) {
      for (const auto& w : sentence) hash.update(w).update(" ");
      hash.update("\n");
      auto ids = to_ids(sentence, vocab);
      if (!ids.empty()) sentences.push_back(std::move(ids));
    }
    hash.update("\n");
    if (!sentences.empty()) corpus.documents.push_back(std::move(sentences));
  }
  corpus.digest = hash.hex_digest();
  return corpus;
}

TrainingCorpus load_training_corpus(std::span<const std::filesystem::path> files, const Vocabulary& vocab) {
  std::vector<PretrainingDocument> documents;
  std::vector<std::string> decades;
  Sha256 hash;
  for (const auto& file : files) {
    const std::string bytes = read_bytes(file);
    hash.update(file.filename().string()).update(std::string_view("\0", 1)).update(bytes);
    auto docs = parse_pretraining_text(bytes);
    documents.insert(documents.end(), std::make_move_iterator(docs.begin()), std::make_move_iterator(docs.end()));
    const auto decade = decade_from_file_name(file);
    decades.push_back(decade ? decade->str() : file.stem().string());
  }
  TrainingCorpus corpus = make_training_corpus(documents, vocab);
  corpus.digest = hash.hex_digest();
  corpus.decades = std::move(decades);
  return corpus;
}

void apply_masking(TrainingInstance& instance, Rng& rng, const Vocabulary& vocab, double masked_lm_prob,
                   std::size_t max_predictions_per_seq) {
  std::vector<std::size_t> selected;
  for (std::size_t i = 0; i < instance.ids.size(); ++i) {
    const int id = instance.ids[i];
    if (id == vocab.cls_id() || id == vocab.sep_id() || id == vocab.pad_id()) continue;
    if (rng.uniform() < masked_lm_prob) selected.push_back(i);
  }
  if (selected.size() > max_predictions_per_seq) {
    rng.shuffle(selected.begin(), selected.end());
    selected.resize(max_predictions_per_seq);
    std::sort(selected.begin(), selected.end());
  }
  instance.mlm_positions = selected;
  instance.mlm_labels.clear();
  for (std::size_t pos : selected) {
    instance.mlm_labels.push_back(instance.ids[pos]);
    const double r = rng.uniform();
    if (r < 0.8) {
      instance.ids[pos] = vocab.mask_id();
    } else if (r < 0.9) {
      instance.ids[pos] = random_regular_id(rng, vocab);
    }
  }
}

TrainingInstance make_instance(Rng& rng, const Vocabulary& vocab, const EncoderConfig& config,
                               std::span<const int> a, std::span<const int> b, bool has_pair, bool is_next) {
  std::size_t len_a = a.size();
  std::size_t len_b = has_pair ? b.size() : 0;
  const std::size_t budget = config.max_seq_length - (has_pair ? 3 : 2);
  while (len_a + len_b > budget) {
    if (len_a > len_b) {
      --len_a;
    } else {
      --len_b;
    }
  }
  TrainingInstance instance;
  instance.ids.push_back(vocab.cls_id());
  instance.ids.insert(instance.ids.end(), a.begin(), a.begin() + static_cast<std::ptrdiff_t>(len_a));
  instance.ids.push_back(vocab.sep_id());
  instance.segments.assign(instance.ids.size(), 0);
  if (has_pair) {
    instance.ids.insert(instance.ids.end(), b.begin(), b.begin() + static_cast<std::ptrdiff_t>(len_b));
    instance.ids.push_back(vocab.sep_id());
    instance.segments.resize(instance.ids.size(), 1);
    instance.has_nsp = true;
    instance.is_next = is_next;
  }
  apply_masking(instance, rng, vocab, config.masked_lm_prob, config.max_predictions_per_seq);
  return instance;
}

TrainingInstance sample_instance(Rng& rng, const TrainingCorpus& corpus, const Vocabulary& vocab,
                                 const EncoderConfig& config) {
  const auto& docs = corpus.documents;
  std::size_t k = static_cast<std::size_t>(rng.below(corpus.sentence_count()));
  std::size_t d = 0;
  while (k >= docs[d].size()) k -= docs[d++].size();
  const auto& a = docs[d][k];
  const bool has_next = k + 1 < docs[d].size();
  const bool has_other = docs.size() > 1;
  if (has_next && (!has_other || rng.uniform() < 0.5)) {
    return make_instance(rng, vocab, config, a, docs[d][k + 1], true, true);
  }
  if (has_other) {
    std::size_t other = static_cast<std::size_t>(rng.below(docs.size() - 1));
    if (other >= d) ++other;
    const auto& b = docs[other][static_cast<std::size_t>(rng.below(docs[other].size()))];
    return make_instance(rng, vocab, config, a, b, true, false);
  }
  return make_instance(rng, vocab, config, a, {}, false, false);
}

double learning_rate_at(const EncoderConfig& config, std::size_t step) {
  if (step < config.num_warmup_steps) {
    return config.learning_rate * static_cast<double>(step + 1) / static_cast<double>(config.num_warmup_steps);
  }
  return config.learning_rate;
}

Checkpoint init_toy_checkpoint(const EncoderConfig& config, const Vocabulary& vocab) {
  config.validate();
  ModelDims dims{vocab.size(), config.max_seq_length, config.hidden_dim, config.num_layers, 4 * config.hidden_dim};
  ToyModel model(dims, config.seed);
  Checkpoint ckpt(EncoderKind::kToy, config, vocab.pieces(), model.to_blocks());
  ckpt.append_provenance(ProvenanceEntry{"", 0, config.seed, {}, "fresh initialization"});
  return ckpt;
}

std::string_view to_string(Optimizer optimizer) { return optimizer == Optimizer::kAdam ? "adam" : "sgd"; }

Optimizer optimizer_from_string(std::string_view text) {
  if (text == "sgd") return Optimizer::kSgd;
  if (text == "adam") return Optimizer::kAdam;
  throw InputError("unknown optimizer '" + std::string(text) + "' (expected sgd or adam)");
}

Checkpoint train_toy(const Checkpoint& start, const TrainingCorpus& corpus, const EncoderConfig& config,
                     const TrainOptions& options) {
  config.validate();
  if (start.kind() != EncoderKind::kToy) throw InputError("only toy checkpoints can be trained");
  if (config.num_train_steps == 0) return start;
  if (config.hidden_dim != start.config().hidden_dim || config.num_layers != start.config().num_layers) {
    throw MismatchError("config dimensions (" + std::to_string(config.num_layers) + "x" +
                        std::to_string(config.hidden_dim) + ") do not match the checkpoint (" +
                        std::to_string(start.config().num_layers) + "x" +
                        std::to_string(start.config().hidden_dim) + ")");
  }
  if (corpus.sentence_count() == 0) throw InputError("training corpus contains no sentences");

  const Vocabulary vocab(start.vocab());
  ToyModel model(start);
  ModelParams& params = model.params();
  if (config.max_seq_length > static_cast<std::size_t>(params.pos.rows())) {
    // Longer sequences than the base was trained on: new position rows.
    Rng rng(mix_seed(config.seed, kPositionStream));
    const auto old_rows = params.pos.rows();
    params.pos.conservativeResize(static_cast<Eigen::Index>(config.max_seq_length), Eigen::NoChange);
    for (Eigen::Index r = old_rows; r < params.pos.rows(); ++r) {
      for (Eigen::Index c = 0; c < params.pos.cols(); ++c) params.pos(r, c) = 0.02 * rng.normal();
    }
  }

  Rng rng(config.seed);
  const std::size_t groups = (config.train_batch_size + kGradientGroup - 1) / kGradientGroup;
  std::vector<ModelParams> group_grads(groups, params.zeros_like());
  std::vector<double> group_loss(groups);
  ModelParams total = params.zeros_like();
  AdamState adam(params);
  std::vector<TrainingInstance> batch(config.train_batch_size);

  for (std::size_t step = 0; step < config.num_train_steps; ++step) {
    std::size_t masked = 0;
    std::size_t nsp = 0;
    for (auto& instance : batch) {
      instance = sample_instance(rng, corpus, vocab, config);
      masked += instance.mlm_positions.size();
      nsp += instance.has_nsp ? 1 : 0;
    }
    const double mlm_scale = masked > 0 ? 1.0 / static_cast<double>(masked) : 0.0;
    const double nsp_scale = nsp > 0 ? 1.0 / static_cast<double>(nsp) : 0.0;

    parallel_for(groups, options.jobs, [&](std::size_t g) {
      group_grads[g].set_zero();
      group_loss[g] = 0.0;
      const std::size_t end = std::min(batch.size(), (g + 1) * kGradientGroup);
      for (std::size_t i = g * kGradientGroup; i < end; ++i) {
        group_loss[g] += model.loss(batch[i], mlm_scale, nsp_scale, &group_grads[g]);
      }
    });
    if (options.on_step) options.on_step(step, std::accumulate(group_loss.begin(), group_loss.end(), 0.0));
    total.set_zero();
    for (const auto& g : group_grads) total.add_scaled(g, 1.0);

    const double norm = std::sqrt(total.squared_norm());
    const double clip = norm > options.clip_norm && norm > 0.0 ? options.clip_norm / norm : 1.0;
    const double lr = learning_rate_at(config, step);
    if (options.optimizer == Optimizer::kSgd) {
      params.add_scaled(total, -lr * clip);
    } else {
      adam.step(params, total, clip, lr);
    }
  }

  Checkpoint out(EncoderKind::kToy, config, start.vocab(), model.to_blocks());
  for (const auto& entry : start.provenance()) out.append_provenance(entry);
  std::string note = options.note;
  if (options.optimizer != Optimizer::kSgd) note += (note.empty() ? "" : "; ") + std::string("optimizer ") + std::string(to_string(options.optimizer));
  out.append_provenance(ProvenanceEntry{corpus.digest, config.num_train_steps, config.seed, corpus.decades, note});
  return out;
}

Checkpoint train_toy(const Checkpoint& start, std::span<const std::filesystem::path> corpus_files,
                     const EncoderConfig& config, const TrainOptions& options) {
  config.validate();
  if (config.num_train_steps == 0) return start;
  const TrainingCorpus corpus = load_training_corpus(corpus_files, Vocabulary(start.vocab()));
  return train_toy(start, corpus, config, options);
}

Checkpoint continue_pretraining(const Checkpoint& base, std::span<const std::filesystem::path> decade_files,
                                const EncoderConfig& config, const TrainOptions& options) {
  if (decade_files.empty()) throw InputError("continued pre-training needs at least one decade file");
  TrainOptions opts = options;
  if (opts.note.empty()) opts.note = "continued pre-training";
  return train_toy(base, decade_files, config, opts);
}

double masked_prediction_accuracy(const Checkpoint& checkpoint, std::span<const std::string> words) {
  const ToyEncoder encoder(checkpoint);
  const SegmentedSequence seq = segment_words(encoder.vocab(), words, checkpoint.config().max_seq_length);
  std::vector<int> ids;
  for (const auto& s : seq.subtokens) ids.push_back(s.id);
  const std::vector<int> segments(ids.size(), 0);
  std::size_t correct = 0;
  std::size_t total = 0;
  for (std::size_t p = 1; p + 1 < ids.size(); ++p) {
    std::vector<int> masked = ids;
    masked[p] = encoder.vocab().mask_id();
    const auto layers = encoder.model().hidden_states(masked, segments);
    const std::size_t positions[] = {p};
    const Eigen::MatrixXd logits = encoder.model().mlm_logits(layers.back(), positions);
    Eigen::Index best = 0;
    logits.row(0).maxCoeff(&best);
    correct += static_cast<int>(best) == ids[p] ? 1 : 0;
    ++total;
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace histsem
