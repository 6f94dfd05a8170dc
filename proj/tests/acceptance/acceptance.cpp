// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Set HISTSEM_ACCEPTANCE_KEEP=1 to keep the work directory.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "histsem/cli.hpp"
#include "histsem/corpus.hpp"
#include "histsem/encoder.hpp"
#include "histsem/random.hpp"
#include "histsem/report.hpp"
#include "histsem/stats.hpp"
#include "histsem/synth.hpp"
#include "histsem/training.hpp"
#include "histsem/usage.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace histsem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

fs::path g_work;

fs::path work(const std::string& name) {
  const fs::path p = g_work / name;
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).generic_string()] = slurp(e.path());
  }
  return files;
}

int cli(std::vector<std::string> args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = run_cli(args, o, e);
  if (out) *out = o.str();
  if (code != 0) std::fprintf(stderr, "  histsem %s failed (%d): %s", args.front().c_str(), code, e.str().c_str());
  return code;
}

std::string fmt(double v, int digits = 4) { return format_fixed(v, digits); }

// ------------------------------------------------------------------- AC1

Outcome ac1() {
  Outcome o;
  o.check(rejoin_contractions(normalize_text("do n't")) == "don't", "contraction example");
  o.check(normalize_text("The COACH") == "the coach", "lowercasing");
  o.check(normalize_text("caf\xC3\xA9 na\xC3\xAFve") == "cafe naive", "accent stripping");

  std::ifstream in(HISTSEM_FIXTURES "/normalization_cases.tsv");
  std::string line;
  int cases = 0, bad = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    const std::string raw = line.substr(0, tab), expected = line.substr(tab + 1);
    const std::string got = rejoin_contractions(normalize_text(raw));
    if (got != expected || rejoin_contractions(normalize_text(got)) != got) ++bad;
    ++cases;
  }
  o.check(cases == 50, "fixture has " + std::to_string(cases) + " cases");
  o.check(bad == 0, std::to_string(bad) + " fixture cases differ");

  // Pre-training files round-trip: bundled corpus, no truncation.
  const auto docs = synthetic_corpus(1);
  const DecadeRange range{DecadeLabel(1910), DecadeLabel(2000)};
  const CorpusManifest manifest = bucket_by_decade(docs, range);
  SentencesByDoc sentences;
  for (const auto& d : docs) sentences[d.doc_id] = prepare_document(d);
  const fs::path dir = work("ac1");
  const auto written = write_pretraining_corpus(manifest, sentences, 0.0, 1, dir);
  std::size_t mismatched = 0;
  for (const auto& [decade, ids] : manifest.buckets) {
    const auto parsed = read_pretraining_file(dir / pretraining_file_name(decade));
    if (parsed.size() != ids.size()) {
      ++mismatched;
      continue;
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto& want = sentences.at(ids[i]);
      if (parsed[i].size() != want.size()) {
        ++mismatched;
        continue;
      }
      for (std::size_t s = 0; s < want.size(); ++s) mismatched += parsed[i][s] != want[s].tokens;
    }
  }
  o.check(mismatched == 0, std::to_string(mismatched) + " documents or sentences did not round-trip");
  o.detail = std::to_string(cases) + " cases, " + std::to_string(written.sentences) + " sentences round-tripped" +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// ------------------------------------------------------------------- AC2

Outcome ac2() {
  Outcome o;
  constexpr std::size_t kSentences = 100000;
  constexpr std::size_t kPerDoc = 50;
  Rng rng(123);
  const auto topics = synthetic_topics();
  CorpusManifest manifest;
  SentencesByDoc sentences;
  const DecadeLabel decade(1950);
  for (std::size_t d = 0; d < kSentences / kPerDoc; ++d) {
    char id[16];
    std::snprintf(id, sizeof id, "d%05zu", d);
    manifest.buckets[decade].push_back(id);
    auto& list = sentences[id];
    for (std::size_t s = 0; s < kPerDoc; ++s) {
      list.push_back(Sentence{id, s, tokenize(synthetic_sentence(rng, topics[rng.below(topics.size())])), decade});
    }
  }
  const auto a = write_pretraining_corpus(manifest, sentences, 0.02, 42, work("ac2/a"));
  const auto b = write_pretraining_corpus(manifest, sentences, 0.02, 42, work("ac2/b"));
  const double sigma = std::sqrt(kSentences * 0.02 * 0.98);
  const double dev = std::abs(static_cast<double>(a.truncated) - 2000.0);
  o.check(a.sentences == kSentences, "wrote " + std::to_string(a.sentences) + " sentences");
  o.check(dev <= 3 * sigma, "truncated count outside 3 sigma");
  o.check(tree(g_work / "ac2/a") == tree(g_work / "ac2/b"), "same seed gave different files");
  o.detail = "truncated " + std::to_string(a.truncated) + " of " + std::to_string(a.sentences) + " (|dev| " +
             fmt(dev, 0) + " <= " + fmt(3 * sigma, 1) + ")" + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// ------------------------------------------------------------------- AC3

double spearman_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  auto rank = [n](const std::vector<double>& v, std::size_t i) {
    std::size_t r = 1;
    for (std::size_t j = 0; j < n; ++j) r += v[j] < v[i];
    return static_cast<double>(r);
  };
  double d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = rank(x, i) - rank(y, i);
    d2 += d * d;
  }
  const double nn = static_cast<double>(n);
  return 1.0 - 6.0 * d2 / (nn * (nn * nn - 1.0));
}

SimilarityMatrix random_matrix(Rng& rng, std::size_t n, const std::string& word = "w") {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("u" + std::to_string(i));
  SimilarityMatrix m(word, ids, "random");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) m.set(i, j, rng.uniform());
  }
  return m;
}

Outcome ac3() {
  Outcome o;
  Rng rng(31);
  std::size_t compared = 0, spearman_bad = 0;
  for (std::size_t n = 3; n <= 8; ++n) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i) + rng.uniform() * 0.5;
    do {
      std::vector<double> y(n);
      for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<double>(perm[i]) * 1.5 - 3.0;
      if (std::abs(spearman(x, y) - spearman_oracle(x, y)) > 1e-12) ++spearman_bad;
      ++compared;
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  o.check(spearman_bad == 0, std::to_string(spearman_bad) + " Spearman mismatches");

  double worst_p = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const SimilarityMatrix a = random_matrix(rng, 5);
    SimilarityMatrix b = random_matrix(rng, 5);
    // Mix in A so the p-values span the range.
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = i + 1; j < 5; ++j) b.set(i, j, *b.at(i, j) + (trial % 4) * 0.5 * *a.at(i, j));
    }
    MantelOptions ex;
    ex.mode = MantelMode::kExhaustive;
    MantelOptions sa;
    sa.mode = MantelMode::kSampled;
    sa.permutations = 9999;
    sa.seed = static_cast<std::uint64_t>(trial);
    worst_p = std::max(worst_p, std::abs(mantel_test(a, b, ex).p_value - mantel_test(a, b, sa).p_value));
  }
  o.check(worst_p <= 0.02, "sampled p off by " + fmt(worst_p));

  std::size_t rho_bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const SimilarityMatrix a = random_matrix(rng, 4 + rng.below(9));
    MantelOptions opt;
    opt.permutations = 99;
    opt.seed = static_cast<std::uint64_t>(trial);
    rho_bad += mantel_test(a, a, opt).rho != 1.0;
  }
  o.check(rho_bad == 0, std::to_string(rho_bad) + " of 100 mantel(A,A) with rho != 1");

  double worst_pca = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd x(10, 5);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal() * (1.0 + static_cast<double>(i % 5));
    const Projection p = pca_project(x, 5);
    const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / 9.0;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    for (Eigen::Index k = 0; k < 5; ++k) {
      Eigen::VectorXd v = eig.eigenvectors().col(4 - k);
      Eigen::Index arg = 0;
      v.cwiseAbs().maxCoeff(&arg);
      if (v(arg) < 0) v = -v;
      worst_pca = std::max(worst_pca, std::abs(eig.eigenvalues()(4 - k) - p.explained_variance(k)));
      worst_pca = std::max(worst_pca, (centered * v - p.coordinates.col(k)).cwiseAbs().maxCoeff());
    }
  }
  o.check(worst_pca <= 1e-8, "PCA deviates by " + std::to_string(worst_pca));
  o.detail = std::to_string(compared) + " Spearman inputs, max |p_sampled - p_exact| " + fmt(worst_p) +
             ", PCA max error " + [&] {
               char b[32];
               std::snprintf(b, sizeof b, "%.1e", worst_pca);
               return std::string(b);
             }() + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// ------------------------------------------------------------------- AC4

HiddenStates random_states(Rng& rng, std::size_t layers, std::size_t rows, std::size_t dim) {
  HiddenStates s;
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd m(rows, dim);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    s.layers.push_back(m);
  }
  s.token_spans = {{1, 2}, {2, 5}, {5, rows - 1}};
  return s;
}

Outcome ac4() {
  Outcome o;
  Rng rng(4);
  std::size_t exact_bad = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const HiddenStates s = random_states(rng, 6, 10, 8);
    for (double c : {2.0, 0.5, -4.0, 0.125, 1024.0, 0.0, -1.0}) {
      HiddenStates scaled = s;
      for (auto& layer : scaled.layers) layer *= c;
      for (std::size_t w = 0; w < 3; ++w) exact_bad += extract_usage_embedding(scaled, w) != c * extract_usage_embedding(s, w);
    }
    const double c = rng.normal() * 10.0;
    HiddenStates scaled = s;
    for (auto& layer : scaled.layers) layer *= c;
    const Eigen::VectorXd want = c * extract_usage_embedding(s, 1);
    worst = std::max(worst, (extract_usage_embedding(scaled, 1) - want).norm() / (1.0 + want.norm()));
  }
  o.check(exact_bad == 0, std::to_string(exact_bad) + " inexact power-of-two scalings");
  o.check(worst <= 1e-12, "arbitrary scale relative error " + std::to_string(worst));

  HiddenStates zero;
  for (int l = 0; l < 4; ++l) zero.layers.push_back(Eigen::MatrixXd::Zero(6, 8));
  zero.token_spans = {{1, 3}, {3, 5}};
  o.check(extract_usage_embedding(zero, 0) == Eigen::VectorXd::Zero(8), "zero layers");

  // Layer l: subtoken rows (1, 2l, 3) and (3, 0, -1); means (2, l, 1) summed
  // over l = 1..4.
  HiddenStates fx;
  for (int l = 0; l < 5; ++l) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(4, 3, 100.0);
    m.row(1) << 1, 2.0 * l, 3;
    m.row(2) << 3, 0, -1;
    fx.layers.push_back(m);
  }
  fx.token_spans = {{1, 3}};
  o.check(extract_usage_embedding(fx, 0, 4) == Eigen::Vector3d(8, 10, 4), "two-subtoken fixture");
  o.detail = "power-of-two scalings exact, arbitrary scale rel. error <= 1e-12" + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// ------------------------------------------------------------------- AC5

// The focus word sits in transport contexts in the old corpus and in sport
// contexts in the new one; every other sentence is unchanged in kind.
constexpr std::string_view kFocus = "coach";
constexpr std::size_t kAc5Runs = 10;
constexpr std::size_t kAc5Docs = 40;
constexpr std::size_t kAc5SentencesPerDoc = 6;
constexpr double kAc5FocusRate = 0.5;
constexpr std::size_t kAc5Probes = 12;
constexpr std::size_t kAc5BaseSteps = 1500;
constexpr double kAc5BaseLr = 0.003;
constexpr std::size_t kAc5ContinueSteps = 1500;
constexpr double kAc5ContinueLr = 0.02;

void write_corpus_file(Rng& rng, const Topic& focus_topic, const Topic& other, const fs::path& file) {
  std::string text;
  for (std::size_t d = 0; d < kAc5Docs; ++d) {
    const Topic& t = d % 2 == 0 ? focus_topic : other;
    if (d > 0) text += "\n";
    for (std::size_t s = 0; s < kAc5SentencesPerDoc; ++s) {
      const bool use = &t == &focus_topic && rng.uniform() < kAc5FocusRate;
      const auto tokens = tokenize(synthetic_sentence(rng, t, use ? kFocus : std::string_view()));
      for (std::size_t i = 0; i < tokens.size(); ++i) text += (i ? " " : "") + tokens[i];
      text += "\n";
    }
  }
  write_text_file(file, text);
}

Usage probe(Rng& rng, const Topic& topic, std::string_view focus, std::string id) {
  std::size_t offset = 0;
  const std::string text = synthetic_sentence(rng, topic, focus, &offset);
  Usage u = usage_from_snippet(focus, text, offset, "1910-1920");
  u.usage_id = std::move(id);
  u.word = std::string(kFocus);
  return u;
}

Outcome ac5() {
  Outcome o;
  const Topic& old_sense = synthetic_topic("transport");
  const Topic& new_sense = synthetic_topic("sport");
  std::size_t planted = 0, increased = 0;
  std::string runs;
  for (std::size_t r = 0; r < kAc5Runs; ++r) {
    Rng rng(mix_seed(1000 + r, 1));
    const fs::path dir = work("ac5/run" + std::to_string(r));
    const std::vector<fs::path> old_files = {dir / "coha_1910s.txt"};
    const std::vector<fs::path> new_files = {dir / "coha_1990s.txt"};
    write_corpus_file(rng, old_sense, new_sense, old_files[0]);
    write_corpus_file(rng, new_sense, old_sense, new_files[0]);

    // "w" probes: the focus word in old-sense contexts. "n" probes: new-sense
    // nouns in new-sense contexts. Planted pairs join one of each.
    std::vector<Usage> probes;
    for (std::size_t k = 0; k < kAc5Probes; ++k) probes.push_back(probe(rng, old_sense, kFocus, "w" + std::to_string(k)));
    for (std::size_t k = 0; k < kAc5Probes; ++k) {
      probes.push_back(probe(rng, new_sense, new_sense.nouns[k % new_sense.nouns.size()], "n" + std::to_string(k)));
    }

    EncoderConfig config = EncoderConfig::toy();
    config.hidden_dim = 32;
    config.max_seq_length = 32;
    config.train_batch_size = 16;
    config.num_warmup_steps = 20;
    config.seed = 77 + r;
    config.learning_rate = kAc5BaseLr;
    config.num_train_steps = kAc5BaseSteps;
    TrainOptions options;
    options.optimizer = Optimizer::kAdam;
    const Checkpoint base = train_toy(init_toy_checkpoint(config), old_files, config, options);
    // Adam escapes the unigram plateau from a fresh start; the continuation
    // uses plain gradient descent, which leaves converged weights nearly still.
    config.seed += 1000;
    options.optimizer = Optimizer::kSgd;
    config.learning_rate = kAc5ContinueLr;
    config.num_train_steps = kAc5ContinueSteps;
    const Checkpoint continued = continue_pretraining(base, new_files, config, options);

    const auto before = pairwise_similarities(batch_extract(ToyEncoder(base), probes), kFocus);
    const auto after = pairwise_similarities(batch_extract(ToyEncoder(continued), probes), kFocus);
    auto is_planted = [](const UsagePair& p) { return p.first[0] != p.second[0]; };
    double m0 = 0.0, m1 = 0.0;
    std::size_t n = 0;
    for (const auto& [pair, sim] : before) {
      if (!is_planted(pair)) continue;
      m0 += sim;
      m1 += after.at(pair);
      ++n;
    }
    m0 /= static_cast<double>(n);
    m1 /= static_cast<double>(n);
    const ShiftReport report = embedding_shift(before, after, std::string(kFocus));
    const bool hit = is_planted(report.max_increase.first);
    planted += hit;
    increased += m1 > m0;
    runs += " " + fmt(m0, 3) + "->" + fmt(m1, 3) + (hit ? "P" : "-");
    std::fprintf(stderr, "  AC5 run %zu: planted-pair mean cosine %s -> %s, max_increase %s-%s (%s)\n", r,
                 fmt(m0).c_str(), fmt(m1).c_str(), report.max_increase.first.first.c_str(),
                 report.max_increase.first.second.c_str(), hit ? "planted" : "not planted");
  }
  o.check(increased == kAc5Runs, "mean cosine rose in " + std::to_string(increased) + " of 10 runs");
  o.check(planted >= 9, "max_increase planted in " + std::to_string(planted) + " of 10 runs");
  o.detail = "increased " + std::to_string(increased) + "/10, planted " + std::to_string(planted) + "/10;" + runs +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// ------------------------------------------------------------------- AC6

Outcome ac6() {
  Outcome o;
  const fs::path dir = work("ac6");
  const std::string d = dir.string();
  o.check(cli({"synth", "--out", d, "--seed", "6", "--docs-per-decade", "1"}) == 0, "synth");
  o.check(cli({"extract", "--dups", d + "/dups.csv", "--ckpt", d + "/mock.ckpt", "--out", d + "/dups.jsonl"}) == 0,
          "extract");
  std::string report;
  o.check(cli({"eval-dups", "--dups", d + "/dups.csv", "--emb", d + "/dups.jsonl", "--perms", "999", "--mode",
               "sampled", "--format", "json", "--seed", "6"},
              &report) == 0,
          "eval-dups");
  if (!o.pass) return o;
  const auto j = nlohmann::json::parse(report);
  double min_rho = 1.0, max_p = 0.0, min_p = 1.0;
  for (const auto& row : j.at("results")) {
    min_rho = std::min(min_rho, row.at("rho").get<double>());
    max_p = std::max(max_p, row.at("p_value").get<double>());
    min_p = std::min(min_p, row.at("p_value").get<double>());
    o.check(row.at("permutations").get<std::size_t>() == 999, "permutation count");
  }
  o.check(j.at("results").size() == 4, "expected 4 words");
  o.check(min_rho >= 0.9, "rho below 0.9");
  o.check(max_p <= 0.05, "p above 0.05");
  o.check(min_p == 1.0 / 1000.0, "p floor is not 0.001");
  o.detail = std::to_string(j.at("results").size()) + " words, min rho " + fmt(min_rho) + ", max p " + fmt(max_p) +
             ", min p " + fmt(min_p, 6) + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// ------------------------------------------------------------------- AC7

Eigen::MatrixXd as_matrix(const std::vector<EmbeddingRecord>& records) {
  Eigen::MatrixXd m(records.size(), records.front().vector.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t k = 0; k < records[i].vector.size(); ++k) m(i, k) = records[i].vector[k];
  }
  return m;
}

Outcome ac7() {
  Outcome o;
  std::size_t violations = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto c = synthetic_clusters(seed);
    std::vector<std::string> labels;
    for (const auto& l : c.labels) labels.push_back(l.second);
    const auto before = cluster_distances(as_matrix(c.baseline), labels);
    const auto after = cluster_distances(as_matrix(c.perturbed), labels);
    for (const auto& [k, v] : before.intra) violations += !(after.intra.at(k) < v);
    for (const auto& [k, v] : before.inter) violations += !(after.inter.at(k) >= v);
  }
  o.check(violations == 0, std::to_string(violations) + " distance violations");

  // Same inputs as the golden files in tests/golden.
  const fs::path dir = work("ac7");
  const auto c = synthetic_clusters(7);
  write_embedding_store(dir / "baseline.jsonl", c.baseline);
  write_embedding_store(dir / "perturbed.jsonl", c.perturbed);
  std::string labels;
  for (const auto& [id, cluster] : c.labels) labels += id + "\t" + cluster + "\n";
  write_text_file(dir / "clusters.tsv", labels);
  o.check(cli({"pca-plot", "--emb", (dir / "baseline.jsonl").string(), "--emb-new", (dir / "perturbed.jsonl").string(),
               "--csv", (dir / "pca.csv").string(), "--svg", (dir / "pca.svg").string(), "--clusters",
               (dir / "clusters.tsv").string(), "--cluster-report", (dir / "clusters.json").string(), "--seed",
               "7"}) == 0,
          "pca-plot");
  for (const char* f : {"pca.csv", "pca.svg", "clusters.json"}) {
    o.check(fs::exists(fs::path(HISTSEM_GOLDEN) / f) && slurp(dir / f) == slurp(fs::path(HISTSEM_GOLDEN) / f),
            std::string(f) + " differs from golden");
  }
  o.detail = "50 seeds x 3 clusters, golden CSV/SVG/report identical" + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// ------------------------------------------------------------------- AC8

// The full command sequence on the bundled synthetic corpus.
bool pipeline(const fs::path& root) {
  const std::string r = root.string();
  const std::vector<std::vector<std::string>> steps = {
      {"synth", "--out", r + "/synth", "--seed", "8"},
      {"preprocess", "--in", r + "/synth/docs", "--out", r + "/corpus", "--seed", "8"},
      {"preprocess", "--in", r + "/synth/docs", "--out", r + "/corpus_coach", "--keyword", "coach", "--seed", "8"},
      {"init-ckpt", "--out", r + "/ckpt/init.ckpt", "--seed", "8"},
      {"pretrain-toy", "--base", r + "/ckpt/init.ckpt", "--corpus", r + "/corpus", "--decades", "1910:1950", "--out",
       r + "/ckpt/base.ckpt", "--seed", "8", "--optimizer", "adam", "--lr", "0.003"},
      {"pretrain-toy", "--base", r + "/ckpt/base.ckpt", "--corpus", r + "/corpus", "--decades", "1960:2000", "--out",
       r + "/ckpt/new.ckpt", "--seed", "9", "--optimizer", "adam", "--lr", "0.001", "--jobs", "2"},
      {"extract", "--corpus", r + "/corpus", "--word", "coach", "--ckpt", r + "/ckpt/base.ckpt", "--out",
       r + "/emb/base.jsonl"},
      {"extract", "--corpus", r + "/corpus", "--word", "coach", "--ckpt", r + "/ckpt/new.ckpt", "--out",
       r + "/emb/new.jsonl", "--jobs", "2"},
      {"extract", "--dups", r + "/synth/dups.csv", "--ckpt", r + "/synth/mock.ckpt", "--out", r + "/emb/dups.jsonl"},
      {"eval-dups", "--dups", r + "/synth/dups.csv", "--emb", r + "/emb/dups.jsonl", "--out", r + "/reports/dups.tsv",
       "--matrices", r + "/reports/matrices", "--seed", "8"},
      {"eval-dups", "--dups", r + "/synth/dups.csv", "--emb", r + "/emb/dups.jsonl", "--out",
       r + "/reports/dups.json", "--format", "json", "--tail", "two-sided", "--seed", "8", "--jobs", "2"},
      {"shift-report", "--old", r + "/emb/base.jsonl", "--new", r + "/emb/new.jsonl", "--out",
       r + "/reports/shift.tsv"},
      {"shift-report", "--old", r + "/emb/base.jsonl", "--new", r + "/emb/new.jsonl", "--format", "json", "--out",
       r + "/reports/shift.json"},
      {"pca-plot", "--emb", r + "/emb/base.jsonl", "--emb-new", r + "/emb/new.jsonl", "--csv", r + "/reports/pca.csv",
       "--svg", r + "/reports/pca.svg", "--seed", "8"},
  };
  for (const auto& s : steps) {
    if (cli(s) != 0) return false;
  }
  return true;
}

Outcome ac8() {
  Outcome o;
  const fs::path a = work("ac8/a"), b = work("ac8/b");
  o.check(pipeline(a), "first pipeline run failed");
  o.check(pipeline(b), "second pipeline run failed");
  if (!o.pass) return o;
  const auto ta = tree(a), tb = tree(b);
  std::size_t differing = 0;
  for (const auto& [name, bytes] : ta) {
    const auto it = tb.find(name);
    if (it == tb.end() || it->second != bytes) {
      ++differing;
      std::fprintf(stderr, "  AC8 differs: %s\n", name.c_str());
    }
  }
  o.check(ta.size() == tb.size() && differing == 0, std::to_string(differing) + " files differ");
  o.detail = std::to_string(ta.size()) + " output files byte-identical across runs" +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    double limit_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, 5, ac1}, {2, 30, ac2}, {3, 120, ac3}, {4, 5, ac4}, {5, 900, ac5}, {6, 120, ac6}, {7, 30, ac7}, {8, 1200, ac8},
  };
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));

  char tmpl[] = "/tmp/histsem_acceptance_XXXXXX";
  if (mkdtemp(tmpl) == nullptr) {
    std::perror("mkdtemp");
    return 2;
  }
  g_work = tmpl;
  bool all = true;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (seconds > c.limit_seconds) {
      o.pass = false;
      o.detail += "; runtime over " + fmt(c.limit_seconds, 0) + " s";
    }
    all = all && o.pass;
    std::printf("AC%d %s (%.1f s, limit %.0f s) %s\n", c.id, o.pass ? "PASS" : "FAIL", seconds, c.limit_seconds,
                o.detail.c_str());
    std::fflush(stdout);
  }
  const char* keep = std::getenv("HISTSEM_ACCEPTANCE_KEEP");
  if (keep == nullptr || std::string(keep) != "1") fs::remove_all(g_work);
  return all ? 0 : 1;
}
