#include <gtest/gtest.h>

#include <cmath>

#include "histsem/corpus.hpp"
#include "histsem/error.hpp"
#include "histsem/synth.hpp"
#include "histsem/toy_model.hpp"
#include "histsem/training.hpp"
#include "test_util.hpp"

namespace histsem {
namespace {

EncoderConfig tiny(std::size_t steps = 3) {
  EncoderConfig c = EncoderConfig::toy();
  c.hidden_dim = 16;
  c.num_layers = 2;
  c.max_seq_length = 24;
  c.train_batch_size = 4;
  c.num_warmup_steps = 2;
  c.num_train_steps = steps;
  c.seed = 5;
  return c;
}

TrainingCorpus small_corpus() {
  std::vector<PretrainingDocument> docs;
  const auto raw = synthetic_corpus(3, SyntheticCorpusOptions{{DecadeLabel(1910), DecadeLabel(1920)}, 2, 4, false});
  for (const auto& d : raw) {
    PretrainingDocument doc;
    for (const auto& s : prepare_document(d)) doc.push_back(s.tokens);
    docs.push_back(doc);
  }
  return make_training_corpus(docs, Vocabulary::builtin());
}

TEST(ToyModel, GradientMatchesFiniteDifferences) {
  const ModelDims d{40, 12, 8, 2, 32};
  ToyModel m(d, 3);
  TrainingInstance inst;
  inst.ids = {2, 7, 9, 4, 3, 11, 12, 3};
  inst.segments = {0, 0, 0, 0, 0, 1, 1, 1};
  inst.mlm_positions = {2, 5};
  inst.mlm_labels = {10, 13};
  inst.has_nsp = true;
  inst.is_next = false;
  ModelParams g = m.params().zeros_like();
  m.loss(inst, 1.0, 1.0, &g);
  auto params = m.params().tensors();
  const auto grads = std::as_const(g).tensors();
  ASSERT_EQ(params.size(), grads.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    Eigen::MatrixXd& x = *params[k];
    for (long t = 0; t < std::min<long>(x.size(), 6); ++t) {
      const long idx = (t * 7919) % x.size();
      const double orig = x.data()[idx];
      const double h = 1e-5;
      x.data()[idx] = orig + h;
      const double up = m.loss(inst, 1, 1, nullptr);
      x.data()[idx] = orig - h;
      const double down = m.loss(inst, 1, 1, nullptr);
      x.data()[idx] = orig;
      const double fd = (up - down) / (2 * h);
      const double an = grads[k]->data()[idx];
      EXPECT_LE(std::abs(fd - an), 1e-4 * std::max(1e-3, std::abs(fd) + std::abs(an))) << "tensor " << k << " idx " << idx;
    }
  }
}

TEST(Training, LearningRateWarmup) {
  EncoderConfig c = tiny();
  c.num_warmup_steps = 4;
  c.learning_rate = 0.8;
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 0), 0.2);
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 3), 0.8);
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 100), 0.8);
  c.num_warmup_steps = 0;
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 0), 0.8);
}

// Mean and variance of min(Binomial(n, p), cap).
std::pair<double, double> capped_binomial_moments(int n, double p, int cap) {
  double mean = 0, second = 0;
  for (int k = 0; k <= n; ++k) {
    const double log_pmf = std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1) + k * std::log(p) +
                           (n - k) * std::log1p(-p);
    const double v = std::min(k, cap);
    mean += std::exp(log_pmf) * v;
    second += std::exp(log_pmf) * v * v;
  }
  return {mean, second - mean * mean};
}

TEST(Masking, RateWithinBinomialBound) {
  const auto& vocab = Vocabulary::builtin();
  EncoderConfig c = EncoderConfig::toy();
  c.max_seq_length = 64;
  c.max_predictions_per_seq = 6;
  std::vector<int> a, b;
  for (int i = 0; i < 20; ++i) a.push_back(*vocab.find("horse"));
  for (int i = 0; i < 10; ++i) b.push_back(*vocab.find("coach"));
  Rng rng(12);
  const int sequences = 12000;
  std::size_t selected = 0, as_mask = 0, as_original = 0;
  for (int s = 0; s < sequences; ++s) {
    const auto inst = make_instance(rng, vocab, c, a, b, true, s % 2 == 0);
    ASSERT_EQ(inst.ids.size(), 33u);
    ASSERT_LE(inst.mlm_positions.size(), c.max_predictions_per_seq);
    selected += inst.mlm_positions.size();
    for (std::size_t k = 0; k < inst.mlm_positions.size(); ++k) {
      const int id = inst.ids[inst.mlm_positions[k]];
      as_mask += id == vocab.mask_id();
      as_original += id == inst.mlm_labels[k];
      EXPECT_FALSE(vocab.is_special(inst.mlm_labels[k]));
    }
  }
  // n = 30 maskable positions, cap 6: the cap binds in about 21% of sequences.
  const auto [mean, var] = capped_binomial_moments(30, c.masked_lm_prob, 6);
  EXPECT_LE(std::abs(selected - sequences * mean), 3 * std::sqrt(sequences * var));
  const double n = static_cast<double>(selected);
  EXPECT_LE(std::abs(as_mask - 0.8 * n), 3 * std::sqrt(n * 0.8 * 0.2));
  EXPECT_LE(std::abs(as_original - 0.1 * n), 3 * std::sqrt(n * 0.1 * 0.9) + 0.1 * n / vocab.size() * 10);
}

TEST(Masking, UncappedRateMatchesProbability) {
  const auto& vocab = Vocabulary::builtin();
  EncoderConfig c = EncoderConfig::toy();
  std::vector<int> a(40, *vocab.find("the"));
  Rng rng(13);
  const int sequences = 10000;
  std::size_t selected = 0;
  for (int s = 0; s < sequences; ++s) selected += make_instance(rng, vocab, c, a, {}, false, false).mlm_positions.size();
  const auto [mean, var] = capped_binomial_moments(40, c.masked_lm_prob, 20);
  EXPECT_NEAR(mean / 40, 0.15, 1e-6);
  EXPECT_LE(std::abs(selected - sequences * mean), 3 * std::sqrt(sequences * var));
}

TEST(MakeInstance, LayoutAndTruncation) {
  const auto& vocab = Vocabulary::builtin();
  EncoderConfig c = EncoderConfig::toy();
  c.max_seq_length = 10;
  c.max_predictions_per_seq = 2;
  std::vector<int> a(8, *vocab.find("the")), b(3, *vocab.find("coach"));
  Rng rng(1);
  const auto inst = make_instance(rng, vocab, c, a, b, true, true);
  ASSERT_EQ(inst.ids.size(), 10u);
  EXPECT_EQ(inst.ids.front(), vocab.cls_id());
  EXPECT_EQ(inst.ids.back(), vocab.sep_id());
  EXPECT_TRUE(inst.has_nsp);
  EXPECT_TRUE(inst.is_next);
  const auto single = make_instance(rng, vocab, c, b, {}, false, false);
  EXPECT_FALSE(single.has_nsp);
  EXPECT_EQ(single.ids.size(), 5u);
}

TEST(Training, ZeroStepsIsIdentity) {
  const Checkpoint start = init_toy_checkpoint(tiny());
  const Checkpoint out = train_toy(start, small_corpus(), tiny(0));
  EXPECT_EQ(out.params(), start.params());
  EXPECT_EQ(out.serialize(), start.serialize());
}

TEST(Training, DeterministicAndIndependentOfJobs) {
  const Checkpoint start = init_toy_checkpoint(tiny());
  const TrainingCorpus corpus = small_corpus();
  TrainOptions one, four;
  four.jobs = 4;
  const Checkpoint a = train_toy(start, corpus, tiny(), one);
  const Checkpoint b = train_toy(start, corpus, tiny(), one);
  const Checkpoint c = train_toy(start, corpus, tiny(), four);
  EXPECT_EQ(a.serialize(), b.serialize());
  EXPECT_EQ(a.digest(), c.digest());
  EXPECT_NE(a.digest(), start.digest());
  ASSERT_EQ(a.provenance().size(), start.provenance().size() + 1);
  EXPECT_EQ(a.provenance().back().steps, 3u);
  EXPECT_EQ(a.provenance().back().corpus_digest, corpus.digest);
}

TEST(Training, AdamRecordedInProvenance) {
  const Checkpoint start = init_toy_checkpoint(tiny());
  TrainOptions o;
  o.optimizer = Optimizer::kAdam;
  const Checkpoint a = train_toy(start, small_corpus(), tiny(), o);
  EXPECT_NE(a.provenance().back().note.find("adam"), std::string::npos);
  EXPECT_EQ(optimizer_from_string("adam"), Optimizer::kAdam);
  EXPECT_THROW(optimizer_from_string("rmsprop"), InputError);
}

TEST(Training, LossDecreasesOnRepeatedSentence) {
  const std::vector<std::string> words = {"the", "old", "coach", "drove", "the", "horses", "down", "the", "muddy", "road", "."};
  const std::vector<PretrainingDocument> docs = {{words}};
  const TrainingCorpus corpus = make_training_corpus(docs, Vocabulary::builtin());
  EncoderConfig c = EncoderConfig::toy();
  c.num_train_steps = 200;
  TrainOptions o;
  o.jobs = 4;
  const Checkpoint out = train_toy(init_toy_checkpoint(c), corpus, c, o);
  EXPECT_GE(masked_prediction_accuracy(out, words), 0.9);
}

TEST(Training, DimensionMismatch) {
  const Checkpoint start = init_toy_checkpoint(tiny());
  EncoderConfig other = tiny();
  other.hidden_dim = 32;
  EXPECT_THROW(train_toy(start, small_corpus(), other), MismatchError);
  other = tiny();
  other.num_layers = 3;
  EXPECT_THROW(train_toy(start, small_corpus(), other), MismatchError);
}

TEST(Training, InvalidConfigRejected) {
  const Checkpoint start = init_toy_checkpoint(tiny());
  EncoderConfig bad = tiny();
  bad.masked_lm_prob = 1.5;
  EXPECT_THROW(train_toy(start, small_corpus(), bad), InputError);
  EXPECT_THROW(train_toy(make_mock_checkpoint(tiny()), small_corpus(), tiny()), InputError);
}

class ContinuePretraining : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto docs = synthetic_corpus(4, SyntheticCorpusOptions{{DecadeLabel(1910), DecadeLabel(2000)}, 1, 3, false});
    const DecadeRange range{DecadeLabel(1910), DecadeLabel(2000)};
    const auto manifest = bucket_by_decade(docs, range);
    SentencesByDoc sentences;
    for (const auto& d : docs) sentences[d.doc_id] = prepare_document(d);
    files_ = write_pretraining_corpus(manifest, sentences, 0.0, 1, dir_.path()).files;
  }
  testing::TempDir dir_;
  std::vector<std::filesystem::path> files_;
};

TEST_F(ContinuePretraining, RecordsFiveDecades) {
  ASSERT_EQ(files_.size(), 10u);
  const std::vector<std::filesystem::path> five(files_.begin(), files_.begin() + 5);
  const Checkpoint out = continue_pretraining(init_toy_checkpoint(tiny()), five, tiny(2));
  EXPECT_EQ(out.provenance().back().decades,
            (std::vector<std::string>{"1910s", "1920s", "1930s", "1940s", "1950s"}));
}

TEST_F(ContinuePretraining, RecordsTenDecades) {
  const Checkpoint out = continue_pretraining(init_toy_checkpoint(tiny()), files_, tiny(2));
  EXPECT_EQ(out.provenance().back().decades.size(), 10u);
  EXPECT_EQ(out.provenance().back().decades.back(), "2000s");
}

TEST_F(ContinuePretraining, EmptyListRejected) {
  EXPECT_THROW(continue_pretraining(init_toy_checkpoint(tiny()), {}, tiny(2)), InputError);
}

TEST_F(ContinuePretraining, MatchesTrainToyOverTheFiles) {
  const Checkpoint base = init_toy_checkpoint(tiny());
  TrainOptions o;
  o.note = "continued pre-training";
  EXPECT_EQ(continue_pretraining(base, files_, tiny(2)).serialize(), train_toy(base, files_, tiny(2), o).serialize());
}

TEST_F(ContinuePretraining, BaseDimensionMismatch) {
  EncoderConfig other = tiny(2);
  other.hidden_dim = 8;
  EXPECT_THROW(continue_pretraining(init_toy_checkpoint(tiny()), files_, other), MismatchError);
}

}  // namespace
}  // namespace histsem
