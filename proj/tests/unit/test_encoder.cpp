#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "histsem/adapter.hpp"
#include "histsem/encoder.hpp"
#include "histsem/error.hpp"
#include "histsem/random.hpp"
#include "histsem/stats.hpp"
#include "histsem/training.hpp"
#include "test_util.hpp"

namespace histsem {
namespace {

Checkpoint mock(std::size_t hidden = 16, std::size_t layers = 4, std::size_t max_seq = 64) {
  EncoderConfig c = EncoderConfig::toy();
  c.hidden_dim = hidden;
  c.num_layers = layers;
  c.max_seq_length = max_seq;
  c.max_predictions_per_seq = std::min<std::size_t>(c.max_predictions_per_seq, max_seq);
  return make_mock_checkpoint(c);
}

std::vector<std::string> words(std::initializer_list<const char*> list) { return {list.begin(), list.end()}; }

Usage usage(std::string id, std::vector<std::string> tokens, std::size_t focus) {
  return Usage{std::move(id), "coach", std::move(tokens), focus, DecadeLabel(1910)};
}

HiddenStates random_states(Rng& rng, std::size_t layers, std::size_t seq, std::size_t dim) {
  HiddenStates s;
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd m(seq, dim);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    s.layers.push_back(m);
  }
  s.token_spans = {{1, 2}, {2, 4}, {4, seq - 1}};
  return s;
}

TEST(MockEncoder, Deterministic) {
  const auto enc = make_encoder(mock());
  const auto a = enc->encode(words({"the", "coach", "left"}));
  const auto b = enc->encode(words({"the", "coach", "left"}));
  ASSERT_EQ(a.num_layers(), 4u);
  for (std::size_t l = 0; l < 4; ++l) EXPECT_EQ(a.layers[l], b.layers[l]);
  EXPECT_EQ(a.token_spans, b.token_spans);
  // A fresh encoder from the same checkpoint agrees too.
  EXPECT_EQ(make_encoder(mock())->encode(words({"the", "coach", "left"})).layers[3], a.layers[3]);
}

TEST(MockEncoder, ContextSensitive) {
  const auto enc = make_encoder(mock());
  const auto a = extract_usage_embedding(enc->encode(words({"the", "coach", "left"})), 1);
  const auto b = extract_usage_embedding(enc->encode(words({"football", "coach", "won"})), 1);
  EXPECT_NE(a, b);
  EXPECT_LT(cosine_similarity(a, b), 1.0 - 1e-6);
}

TEST(MockEncoder, ShapeInvariants) {
  const auto s = make_encoder(mock())->encode(words({"the", "coaches", "were", "coaching"}));
  ASSERT_EQ(s.token_spans.size(), 4u);
  EXPECT_EQ(s.token_spans.front().begin, 1u);
  for (std::size_t i = 0; i < s.token_spans.size(); ++i) {
    EXPECT_GT(s.token_spans[i].size(), 0u);
    if (i > 0) EXPECT_EQ(s.token_spans[i].begin, s.token_spans[i - 1].end);
  }
  EXPECT_EQ(s.sequence_length(), s.token_spans.back().end + 1);
  for (const auto& layer : s.layers) {
    EXPECT_EQ(layer.rows(), static_cast<Eigen::Index>(s.sequence_length()));
    EXPECT_EQ(layer.cols(), 16);
    EXPECT_TRUE(layer.allFinite());
  }
}

TEST(MockEncoder, TruncatesToMaxSeqLength) {
  const auto enc = make_encoder(mock(16, 4, 8));
  std::vector<std::string> long_sentence(20, "horse");
  const auto s = enc->encode(long_sentence);
  EXPECT_EQ(s.sequence_length(), 8u);
  EXPECT_EQ(s.token_spans.size(), 6u);
}

TEST(MockEncoder, EmptyInputRejected) {
  EXPECT_THROW(make_encoder(mock())->encode(std::vector<std::string>{}), InputError);
}

TEST(SegmentWords, MultiPieceWordCutAtLimit) {
  const auto& vocab = Vocabulary::builtin();
  const auto pieces = vocab.wordpiece("horseback");
  ASSERT_GE(pieces.size(), 2u);
  std::vector<std::string> in = {"a", "horseback"};
  // Room for [CLS], "a", one piece, [SEP].
  const auto seq = segment_words(vocab, in, 4);
  ASSERT_EQ(seq.token_spans.size(), 2u);
  EXPECT_EQ(seq.token_spans[1].size(), 1u);
  EXPECT_EQ(seq.subtokens.back().surface, "[SEP]");
}

TEST(ExtractUsageEmbedding, ZeroLayersGiveZeroVector) {
  HiddenStates s;
  for (int l = 0; l < 4; ++l) s.layers.push_back(Eigen::MatrixXd::Zero(5, 8));
  s.token_spans = {{1, 2}, {2, 4}};
  EXPECT_EQ(extract_usage_embedding(s, 1), Eigen::VectorXd::Zero(8));
}

TEST(ExtractUsageEmbedding, BasisVectorSum) {
  HiddenStates s;
  const Eigen::RowVector4d e1(1, 0, 0, 0), e2(0, 1, 0, 0);
  for (int l = 0; l < 4; ++l) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 4);
    m.row(1) = (l % 2 == 0) ? e1 : e2;
    s.layers.push_back(m);
  }
  s.token_spans = {{1, 2}};
  EXPECT_EQ(extract_usage_embedding(s, 0), Eigen::Vector4d(2, 2, 0, 0));
}

// Five layers; layer l has rows (1, 2l, 3) and (3, 0, -1) for the two
// subtokens of word 0. Mean per layer is (2, l, 1); the last four layers
// (l = 1..4) sum to (8, 10, 4).
HiddenStates two_subtoken_fixture() {
  HiddenStates s;
  for (int l = 0; l < 5; ++l) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(4, 3, 100.0);
    m.row(1) << 1, 2.0 * l, 3;
    m.row(2) << 3, 0, -1;
    s.layers.push_back(m);
  }
  s.token_spans = {{1, 3}};
  return s;
}

TEST(ExtractUsageEmbedding, TwoSubtokenFixture) {
  EXPECT_EQ(extract_usage_embedding(two_subtoken_fixture(), 0, 4), Eigen::Vector3d(8, 10, 4));
  EXPECT_EQ(extract_usage_embedding(two_subtoken_fixture(), 0, 1), Eigen::Vector3d(2, 4, 1));
  EXPECT_EQ(extract_usage_embedding(two_subtoken_fixture(), 0, 5), Eigen::Vector3d(10, 10, 5));
}

TEST(ExtractUsageEmbedding, LinearityExactForPowersOfTwo) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const HiddenStates s = random_states(rng, 6, 9, 7);
    for (double c : {2.0, 0.5, -4.0, 1024.0, 0.0}) {
      HiddenStates scaled = s;
      for (auto& layer : scaled.layers) layer *= c;
      for (std::size_t w = 0; w < 3; ++w) {
        ASSERT_EQ(extract_usage_embedding(scaled, w), c * extract_usage_embedding(s, w));
      }
    }
  }
}

TEST(ExtractUsageEmbedding, LinearityForArbitraryScale) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const HiddenStates s = random_states(rng, 6, 9, 7);
    const double c = rng.normal() * 10;
    HiddenStates scaled = s;
    for (auto& layer : scaled.layers) layer *= c;
    const Eigen::VectorXd want = c * extract_usage_embedding(s, 1);
    ASSERT_LE((extract_usage_embedding(scaled, 1) - want).norm(), 1e-12 * (1 + want.norm()));
  }
}

TEST(ExtractUsageEmbedding, AllLayersMatchesDirectSum) {
  Rng rng(3);
  const HiddenStates s = random_states(rng, 6, 9, 5);
  const TokenSpan span = s.token_spans[2];
  Eigen::VectorXd oracle = Eigen::VectorXd::Zero(5);
  for (const auto& layer : s.layers) {
    Eigen::VectorXd pooled = Eigen::VectorXd::Zero(5);
    for (std::size_t r = span.begin; r < span.end; ++r) pooled += layer.row(static_cast<Eigen::Index>(r)).transpose();
    oracle += pooled / static_cast<double>(span.size());
  }
  EXPECT_LE((extract_usage_embedding(s, 2, 6) - oracle).norm(), 1e-12);
}

TEST(ExtractUsageEmbedding, Errors) {
  const HiddenStates s = two_subtoken_fixture();
  EXPECT_THROW(extract_usage_embedding(s, 0, 0), InputError);
  EXPECT_THROW(extract_usage_embedding(s, 0, 6), InputError);
  EXPECT_THROW(extract_usage_embedding(s, 1, 4), InputError);
}

TEST(SumLastLayers, Arithmetic) {
  const std::vector<Eigen::VectorXd> v = {Eigen::Vector2d(100, 100), Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1),
                                          Eigen::Vector2d(1, 1), Eigen::Vector2d(2, 3)};
  EXPECT_EQ(sum_last_layers(v, 4), Eigen::Vector2d(4, 5));
  EXPECT_THROW(sum_last_layers(v, 6), InputError);
  EXPECT_THROW(sum_last_layers(v, 0), InputError);
}

TEST(BatchExtract, Basics) {
  const auto ck = mock();
  const auto enc = make_encoder(ck);
  EXPECT_TRUE(batch_extract(*enc, std::vector<Usage>{}).empty());
  const std::vector<Usage> us = {usage("u1", words({"the", "coach", "left"}), 1),
                                 usage("u2", words({"coach", "and", "horses"}), 0)};
  const auto records = batch_extract(*enc, us);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].usage_id, "u1");
  EXPECT_EQ(records[1].usage_id, "u2");
  EXPECT_EQ(records[0].encoder_id, ck.digest());
  EXPECT_EQ(records[0].vector.size(), 16u);
  const Eigen::VectorXd direct = extract_usage_embedding(enc->encode(us[0].tokens), 1);
  EXPECT_EQ(Eigen::Map<const Eigen::VectorXd>(records[0].vector.data(), 16), direct);
}

TEST(BatchExtract, DuplicateIdsRejected) {
  const auto enc = make_encoder(mock());
  const std::vector<Usage> us = {usage("u", words({"coach"}), 0), usage("u", words({"coach"}), 0)};
  EXPECT_THROW(batch_extract(*enc, us), InputError);
}

TEST(BatchExtract, ErrorNamesUsage) {
  const auto enc = make_encoder(mock());
  const std::vector<Usage> us = {usage("ok", words({"coach"}), 0), usage("bad-one", words({"coach"}), 5)};
  try {
    batch_extract(*enc, us);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("bad-one"), std::string::npos);
  }
}

TEST(BatchExtract, JobsDoNotChangeResults) {
  const auto enc = make_encoder(mock());
  std::vector<Usage> us;
  for (int i = 0; i < 40; ++i) us.push_back(usage("u" + std::to_string(i), words({"a", "coach", "ran", "home"}), i % 4));
  const auto a = batch_extract(*enc, us, 4, 1);
  const auto b = batch_extract(*enc, us, 4, 4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].vector, b[i].vector);
}

TEST(EmbeddingStore, JsonLinesRoundTrip) {
  testing::TempDir dir;
  const auto enc = make_encoder(mock());
  const std::vector<Usage> us = {usage("u1", words({"the", "coach"}), 1), usage("u2", words({"coach"}), 0)};
  const auto records = batch_extract(*enc, us);
  write_embedding_store(dir / "e.jsonl", records);
  const auto back = read_embedding_store(dir / "e.jsonl");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].usage_id, records[i].usage_id);
    EXPECT_EQ(back[i].vector, records[i].vector);
    EXPECT_EQ(back[i].decade, records[i].decade);
    EXPECT_EQ(back[i].encoder_id, records[i].encoder_id);
  }
  const auto j = nlohmann::json::parse(embedding_record_to_json_line(records[0]));
  for (const char* key : {"word", "usage_id", "decade", "encoder_id", "dim", "vector"}) EXPECT_TRUE(j.contains(key));
}

TEST(EmbeddingStore, RejectsBadRecords) {
  EXPECT_THROW(embedding_record_from_json_line("{}"), InputError);
  EXPECT_THROW(embedding_record_from_json_line(
                   R"({"word":"w","usage_id":"u","decade":"1910s","encoder_id":"e","dim":3,"vector":[1,2]})"),
               InputError);
  EXPECT_THROW(read_embedding_store("/nonexistent.jsonl"), IoError);
}

TEST(ToyEncoder, DeterministicAndRoundTrips) {
  EncoderConfig c = EncoderConfig::toy();
  c.hidden_dim = 16;
  c.num_layers = 4;
  const Checkpoint ck = init_toy_checkpoint(c);
  const auto s1 = make_encoder(ck)->encode(words({"the", "coach", "left"}));
  const auto s2 = make_encoder(Checkpoint::deserialize(ck.serialize()))->encode(words({"the", "coach", "left"}));
  ASSERT_EQ(s1.num_layers(), 4u);
  for (std::size_t l = 0; l < 4; ++l) EXPECT_EQ(s1.layers[l], s2.layers[l]);
}

class AdapterTest : public ::testing::Test {
 protected:
  // Echoes focus_index-dependent layers: layer l is (l, focus_index).
  void SetUp() override {
    testing::spit(dir_ / "fake.py", R"(import json, sys
for line in sys.stdin:
    req = json.loads(line)
    layers = [[float(l), float(req["focus_index"])] for l in range(5)]
    if req["usage_id"] != "drop":
        print(json.dumps({"usage_id": req["usage_id"], "layers": layers}))
)");
    testing::spit(dir_ / "fail.py", "import sys\nsys.exit(3)\n");
  }
  std::string python(const char* script) const { return "python3 " + (dir_ / script).string(); }
  testing::TempDir dir_;
};

TEST_F(AdapterTest, SumsLastLayers) {
  const ExternalAdapter adapter(python("fake.py"));
  const std::vector<Usage> us = {usage("a", words({"the", "coach"}), 1), usage("b", words({"coach"}), 0)};
  const auto records = adapter.extract(us, 4);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].vector, (std::vector<double>{1 + 2 + 3 + 4, 4}));
  EXPECT_EQ(records[1].vector, (std::vector<double>{10, 0}));
  EXPECT_EQ(records[0].encoder_id, adapter.id());
  EXPECT_EQ(adapter.id().rfind("external:", 0), 0u);
}

TEST_F(AdapterTest, Failures) {
  EXPECT_THROW(ExternalAdapter(python("fail.py")).extract(std::vector<Usage>{usage("a", words({"coach"}), 0)}), IoError);
  EXPECT_THROW(ExternalAdapter(python("fake.py")).extract(std::vector<Usage>{usage("drop", words({"coach"}), 0)}),
               MismatchError);
  EXPECT_THROW(ExternalAdapter(""), InputError);
}

TEST(Adapter, RequestAndResponseLines) {
  const auto req = nlohmann::json::parse(ExternalAdapter::request_line(usage("x", words({"a", "coach"}), 1)));
  EXPECT_EQ(req.at("usage_id"), "x");
  EXPECT_EQ(req.at("focus_index"), 1);
  EXPECT_EQ(req.at("tokens").size(), 2u);
  const auto [id, layers] = ExternalAdapter::parse_response_line(R"({"usage_id":"x","layers":[[1,2],[3,4]]})");
  EXPECT_EQ(id, "x");
  ASSERT_EQ(layers.size(), 2u);
  EXPECT_EQ(layers[1], Eigen::Vector2d(3, 4));
  EXPECT_THROW(ExternalAdapter::parse_response_line(R"({"usage_id":"x","layers":[]})"), InputError);
  EXPECT_THROW(ExternalAdapter::parse_response_line("not json"), InputError);
}

}  // namespace
}  // namespace histsem
