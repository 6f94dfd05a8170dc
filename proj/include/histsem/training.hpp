#ifndef HISTSEM_TRAINING_HPP_
#define HISTSEM_TRAINING_HPP_

// Desk-scale masked-LM + next-sentence-prediction pre-training of the toy
// encoder, including continued pre-training from an existing checkpoint.

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "histsem/checkpoint.hpp"
#include "histsem/corpus.hpp"
#include "histsem/random.hpp"
#include "histsem/toy_model.hpp"
#include "histsem/vocab.hpp"

namespace histsem {

// Sentences as subtoken ids, grouped by document.
struct TrainingCorpus {
  std::vector<std::vector<std::vector<int>>> documents;
  std::string digest;
  std::vector<std::string> decades;

  std::size_t sentence_count() const;
};

TrainingCorpus make_training_corpus(std::span<const PretrainingDocument> documents, const Vocabulary& vocab);

// Reads pre-training files (coha_<decade>s.txt); decades are taken from the
// file names, the digest covers every file's bytes in order.
TrainingCorpus load_training_corpus(std::span<const std::filesystem::path> files, const Vocabulary& vocab);

// Selects positions for masked-LM: every non-special position independently
// with probability masked_lm_prob, then a random subset of at most
// max_predictions_per_seq. Selected tokens become [MASK] (80%), a random
// non-special token (10%) or stay unchanged (10%).
void apply_masking(TrainingInstance& instance, Rng& rng, const Vocabulary& vocab, double masked_lm_prob,
                   std::size_t max_predictions_per_seq);

// [CLS] a [SEP] (b [SEP]), truncated to max_seq_length by trimming the longer
// segment from its end, then masked. Without b the instance carries no NSP
// label.
TrainingInstance make_instance(Rng& rng, const Vocabulary& vocab, const EncoderConfig& config,
                               std::span<const int> a, std::span<const int> b, bool has_pair, bool is_next);

// Samples one instance: a random sentence paired with its successor (50%)
// or a random sentence of another document. Sentences with neither partner
// available form single-segment instances.
TrainingInstance sample_instance(Rng& rng, const TrainingCorpus& corpus, const Vocabulary& vocab,
                                 const EncoderConfig& config);

// Linear warmup to learning_rate over num_warmup_steps, constant afterwards.
double learning_rate_at(const EncoderConfig& config, std::size_t step);

// Fresh toy encoder weights for the given config.
Checkpoint init_toy_checkpoint(const EncoderConfig& config, const Vocabulary& vocab = Vocabulary::builtin());

enum class Optimizer { kSgd, kAdam };

std::string_view to_string(Optimizer optimizer);
Optimizer optimizer_from_string(std::string_view text);

struct TrainOptions {
  std::size_t jobs = 1;
  // kSgd: plain gradient descent. kAdam: bias-corrected Adam (beta1 0.9,
  // beta2 0.999, eps 1e-6) without weight decay.
  Optimizer optimizer = Optimizer::kSgd;
  std::string note;
  // Gradients are rescaled to at most this global L2 norm.
  double clip_norm = 1.0;
  // Called after each step with the batch's mean MLM + NSP loss.
  std::function<void(std::size_t step, double loss)> on_step;
};

// Runs num_train_steps steps of gradient descent from `start` and appends a
// provenance entry. num_train_steps == 0 returns `start` unchanged. Results
// do not depend on `jobs`. Throws MismatchError if the config's hidden_dim
// or num_layers disagree with the checkpoint.
Checkpoint train_toy(const Checkpoint& start, const TrainingCorpus& corpus, const EncoderConfig& config,
                     const TrainOptions& options = {});
Checkpoint train_toy(const Checkpoint& start, std::span<const std::filesystem::path> corpus_files,
                     const EncoderConfig& config, const TrainOptions& options = {});

// train_toy from `base` over the concatenation of the decade files. The
// provenance entry records the decade of each file. Throws InputError for an
// empty file list.
Checkpoint continue_pretraining(const Checkpoint& base, std::span<const std::filesystem::path> decade_files,
                                const EncoderConfig& config, const TrainOptions& options = {});

// Fraction of the sentence's subtokens predicted correctly when each one is
// masked on its own in a single-segment input.
double masked_prediction_accuracy(const Checkpoint& checkpoint, std::span<const std::string> words);

}  // namespace histsem

#endif  // HISTSEM_TRAINING_HPP_
