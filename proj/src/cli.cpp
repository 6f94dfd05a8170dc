#include "histsem/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "histsem/adapter.hpp"
#include "histsem/checkpoint.hpp"
#include "histsem/corpus.hpp"
#include "histsem/digest.hpp"
#include "histsem/encoder.hpp"
#include "histsem/error.hpp"
#include "histsem/parallel.hpp"
#include "histsem/report.hpp"
#include "histsem/stats.hpp"
#include "histsem/synth.hpp"
#include "histsem/training.hpp"
#include "histsem/usage.hpp"

namespace histsem {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::string_view kVersion = "0.1.0";

// Options shared by every subcommand.
struct Common {
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
};

std::uint64_t resolve_seed(const Common& common) {
  if (common.seed) return *common.seed;
  const char* env = std::getenv("HISTSEM_SEED");
  if (env == nullptr || *env == '\0') return 0;
  const std::string_view text(env);
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw InputError("HISTSEM_SEED is not a non-negative integer: '" + std::string(text) + "'");
  }
  return value;
}

// File: sha256 of its bytes. Directory: sha256 over the sorted relative paths
// and digests of the regular files below it.
std::string digest_path(const fs::path& path) {
  if (fs::is_regular_file(path)) return sha256_file(path);
  if (!fs::is_directory(path)) throw IoError("no such file or directory: " + path.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(path)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), path));
  }
  std::sort(files.begin(), files.end());
  Sha256 hash;
  for (const auto& f : files) hash.update(f.generic_string()).update("\n").update(sha256_file(path / f)).update("\n");
  return hash.hex_digest();
}

void require_file(const fs::path& path, std::string_view flag) {
  if (!fs::is_regular_file(path)) throw IoError(std::string(flag) + ": no such file: " + path.string());
}

void require_dir(const fs::path& path, std::string_view flag) {
  if (!fs::is_directory(path)) throw IoError(std::string(flag) + ": no such directory: " + path.string());
}

void ensure_parent(const fs::path& file) {
  const fs::path parent = file.parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec || !fs::is_directory(parent)) throw IoError("cannot create directory " + parent.string());
}

RunMeta make_meta(std::string command, std::uint64_t seed, const json& config,
                  std::vector<std::pair<std::string, std::string>> inputs) {
  return RunMeta{std::move(command), seed, sha256_hex(config.dump()), std::move(inputs)};
}

void emit(const std::string& content, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << content;
    return;
  }
  ensure_parent(out_path);
  write_text_file(out_path, content);
}

std::string json_text(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------- preprocess

struct PreprocessArgs {
  std::string in;
  std::string out;
  std::string decades = "1910:2000";
  std::string keyword;
  double truncate = 0.02;
};

int cmd_preprocess(const PreprocessArgs& a, const Common& c, std::ostream& out, std::ostream& err) {
  const std::uint64_t seed = resolve_seed(c);
  const DecadeRange range = DecadeRange::parse(a.decades);
  if (!(a.truncate >= 0.0 && a.truncate <= 1.0)) throw InputError("--truncate must be in [0, 1]");
  require_dir(a.in, "--in");

  std::vector<RawDocument> docs = load_documents(a.in);
  const std::size_t loaded = docs.size();
  std::string keyword;
  if (!a.keyword.empty()) {
    keyword = normalize_text(a.keyword);
    docs = select_by_keyword(docs, keyword);
    err << "keyword '" << keyword << "': kept " << docs.size() << " of " << loaded << " documents\n";
  }
  CorpusManifest manifest = bucket_by_decade(docs, range);
  if (!manifest.excluded.empty()) {
    err << "excluded " << manifest.excluded.size() << " document(s) outside " << range.first.str() << "-"
        << range.last.str() << "\n";
  }

  std::vector<std::vector<Sentence>> prepared(docs.size());
  parallel_for(docs.size(), c.jobs, [&](std::size_t i) { prepared[i] = prepare_document(docs[i]); });
  SentencesByDoc sentences;
  for (std::size_t i = 0; i < docs.size(); ++i) sentences[docs[i].doc_id] = std::move(prepared[i]);

  const json config = {{"command", "preprocess"}, {"decades", a.decades}, {"keyword", keyword},
                       {"truncate", a.truncate}, {"seed", seed}};
  manifest.seed = seed;
  manifest.config_digest = sha256_hex(config.dump());

  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (!fs::is_directory(a.out)) throw IoError("cannot create output directory " + a.out);
  const PretrainingWriteResult written = write_pretraining_corpus(manifest, sentences, a.truncate, seed, a.out);
  manifest.content_digest = written.content_digest;

  json j = manifest_to_json(manifest);
  j["meta"] = make_meta("preprocess", seed, config, {{"in", digest_path(a.in)}}).to_json();
  j["sentences"] = written.sentences;
  j["truncated"] = written.truncated;
  j["truncate_fraction"] = a.truncate;
  write_text_file(fs::path(a.out) / "manifest.json", json_text(j));
  out << "wrote " << written.files.size() << " decade file(s), " << written.sentences << " sentences ("
      << written.truncated << " truncated) to " << a.out << "\n";
  return kExitOk;
}

// ----------------------------------------------------------------- init-ckpt

struct ModelOverrides {
  std::optional<std::size_t> hidden, layers, max_seq, max_pred, batch, warmup, steps;
  std::optional<double> lr, mlm_prob;

  void apply(EncoderConfig& config) const {
    if (hidden) config.hidden_dim = *hidden;
    if (layers) config.num_layers = *layers;
    if (max_seq) config.max_seq_length = *max_seq;
    if (max_pred) config.max_predictions_per_seq = *max_pred;
    if (batch) config.train_batch_size = *batch;
    if (warmup) config.num_warmup_steps = *warmup;
    if (steps) config.num_train_steps = *steps;
    if (lr) config.learning_rate = *lr;
    if (mlm_prob) config.masked_lm_prob = *mlm_prob;
  }

  void add_to(CLI::App* app) {
    app->add_option("--hidden", hidden, "Hidden dimension");
    app->add_option("--layers", layers, "Number of encoder layers");
    app->add_option("--max-seq", max_seq, "max_seq_length");
    app->add_option("--max-pred", max_pred, "max_predictions_per_seq");
    app->add_option("--batch", batch, "train_batch_size");
    app->add_option("--warmup", warmup, "num_warmup_steps");
    app->add_option("--steps", steps, "num_train_steps");
    app->add_option("--lr", lr, "learning_rate");
    app->add_option("--mlm-prob", mlm_prob, "masked_lm_prob");
  }
};

EncoderConfig preset_config(std::string_view name) {
  if (name == "toy") return EncoderConfig::toy();
  if (name == "histbert-proto") return EncoderConfig::histbert_proto();
  if (name == "histbert-5") return EncoderConfig::histbert_5();
  if (name == "histbert-10") return EncoderConfig::histbert_10();
  throw InputError("unknown preset '" + std::string(name) + "'");
}

struct InitArgs {
  std::string kind = "toy";
  std::string preset = "toy";
  std::string out;
  ModelOverrides overrides;
};

int cmd_init(const InitArgs& a, const Common& c, std::ostream& out, std::ostream&) {
  EncoderConfig config = preset_config(a.preset);
  a.overrides.apply(config);
  config.seed = resolve_seed(c);
  config.validate();
  const EncoderKind kind = encoder_kind_from_string(a.kind);
  const Checkpoint ckpt =
      kind == EncoderKind::kMock ? make_mock_checkpoint(config) : init_toy_checkpoint(config);
  ensure_parent(a.out);
  ckpt.save(a.out);
  out << "wrote " << a.kind << " checkpoint " << ckpt.digest().substr(0, 16) << " to " << a.out << "\n";
  return kExitOk;
}

// -------------------------------------------------------------- pretrain-toy

struct PretrainArgs {
  std::string base;
  std::string corpus;
  std::string out;
  std::string decades;
  std::string note;
  std::string optimizer = "sgd";
  ModelOverrides overrides;
};

int cmd_pretrain(const PretrainArgs& a, const Common& c, std::ostream& out, std::ostream& err) {
  require_file(a.base, "--base");
  require_dir(a.corpus, "--corpus");
  const Checkpoint base = Checkpoint::load(a.base);
  EncoderConfig config = base.config();
  a.overrides.apply(config);
  config.seed = resolve_seed(c);
  config.validate();
  const Optimizer optimizer = optimizer_from_string(a.optimizer);

  std::vector<fs::path> files = list_pretraining_files(a.corpus);
  if (!a.decades.empty()) {
    const DecadeRange range = DecadeRange::parse(a.decades);
    std::erase_if(files, [&](const fs::path& f) {
      const auto d = decade_from_file_name(f);
      return !d || *d < range.first || range.last < *d;
    });
  }
  if (files.empty()) throw InputError("no pre-training files selected in " + a.corpus);

  ensure_parent(a.out);
  if (config.num_train_steps == 0) {
    err << "note: --steps 0, checkpoint copied unchanged from " << a.base << "\n";
    write_text_file(a.out, read_text_file(a.base));
    out << "wrote " << a.out << "\n";
    return kExitOk;
  }
  TrainOptions options;
  options.jobs = c.jobs;
  options.optimizer = optimizer;
  options.note = a.note.empty() ? "continued pre-training" : a.note;
  const Checkpoint trained = continue_pretraining(base, files, config, options);
  trained.save(a.out);
  out << "trained " << config.num_train_steps << " steps over " << files.size() << " decade file(s); wrote "
      << trained.digest().substr(0, 16) << " to " << a.out << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- extract

struct ExtractArgs {
  std::string word;
  std::string corpus;
  std::string dups;
  std::string ckpt;
  std::string adapter;
  std::string out;
  std::size_t last_k = 4;
};

std::vector<Sentence> corpus_sentences(const fs::path& dir) {
  std::vector<Sentence> sentences;
  for (const auto& file : list_pretraining_files(dir)) {
    const auto decade = decade_from_file_name(file);
    if (!decade) continue;
    const auto docs = read_pretraining_file(file);
    for (std::size_t d = 0; d < docs.size(); ++d) {
      for (std::size_t s = 0; s < docs[d].size(); ++s) {
        sentences.push_back(Sentence{decade->str() + "-" + std::to_string(d), s, docs[d][s], *decade});
      }
    }
  }
  return sentences;
}

int cmd_extract(const ExtractArgs& a, const Common& c, std::ostream& out, std::ostream& err) {
  const std::uint64_t seed = resolve_seed(c);
  if (a.corpus.empty() == a.dups.empty()) throw InputError("give exactly one of --corpus or --dups");
  if (a.ckpt.empty() == a.adapter.empty()) throw InputError("give exactly one of --ckpt or --adapter");
  if (!a.corpus.empty() && a.word.empty()) throw InputError("--word is required with --corpus");

  std::vector<std::pair<std::string, std::string>> inputs;
  std::vector<Usage> usages;
  const std::string word = a.word.empty() ? std::string() : normalize_text(a.word);
  if (!a.corpus.empty()) {
    require_dir(a.corpus, "--corpus");
    inputs.emplace_back("corpus", digest_path(a.corpus));
    const auto sentences = corpus_sentences(a.corpus);
    usages = find_usages(sentences, word);
  } else {
    require_file(a.dups, "--dups");
    inputs.emplace_back("dups", digest_path(a.dups));
    usages = dataset_usages(load_dups(a.dups));
    if (!word.empty()) std::erase_if(usages, [&](const Usage& u) { return u.word != word; });
  }

  std::vector<EmbeddingRecord> records;
  std::string encoder_id;
  if (!a.ckpt.empty()) {
    require_file(a.ckpt, "--ckpt");
    inputs.emplace_back("ckpt", digest_path(a.ckpt));
    const Checkpoint ckpt = Checkpoint::load(a.ckpt);
    const auto encoder = make_encoder(ckpt);
    encoder_id = encoder->id();
    records = batch_extract(*encoder, usages, a.last_k, c.jobs);
  } else {
    const ExternalAdapter adapter(a.adapter);
    encoder_id = adapter.id();
    records = adapter.extract(usages, a.last_k);
  }
  if (records.empty()) err << "warning: no usages" << (word.empty() ? "" : " of '" + word + "'") << " found\n";

  ensure_parent(a.out);
  write_embedding_store(a.out, records);
  const json config = {{"command", "extract"}, {"word", word}, {"last_k", a.last_k}, {"adapter", a.adapter}};
  json sidecar = {{"meta", make_meta("extract", seed, config, inputs).to_json()},
                  {"encoder_id", encoder_id},
                  {"records", records.size()},
                  {"store_digest", sha256_file(a.out)}};
  write_text_file(a.out + ".meta.json", json_text(sidecar));
  out << "wrote " << records.size() << " record(s) to " << a.out << "\n";
  return kExitOk;
}

// ----------------------------------------------------------------- eval-dups

struct EvalArgs {
  std::string dups;
  std::string emb;
  std::string out;
  std::string format = "tsv";
  std::string tail = "greater";
  std::string mode = "auto";
  std::string matrices;
  std::size_t perms = 999;
};

int cmd_eval(const EvalArgs& a, const Common& c, std::ostream& out, std::ostream& err) {
  const std::uint64_t seed = resolve_seed(c);
  require_file(a.dups, "--dups");
  require_file(a.emb, "--emb");
  if (a.format != "tsv" && a.format != "json") throw InputError("--format must be tsv or json");
  MantelOptions options;
  options.permutations = a.perms;
  options.seed = seed;
  options.jobs = c.jobs;
  if (a.tail == "greater") {
    options.tail = MantelTail::kGreater;
  } else if (a.tail == "two-sided") {
    options.tail = MantelTail::kTwoSided;
  } else {
    throw InputError("--tail must be greater or two-sided");
  }
  if (a.mode == "auto") {
    options.mode = MantelMode::kAuto;
  } else if (a.mode == "sampled") {
    options.mode = MantelMode::kSampled;
  } else if (a.mode == "exhaustive") {
    options.mode = MantelMode::kExhaustive;
  } else {
    throw InputError("--mode must be auto, sampled or exhaustive");
  }

  const DupsDataset dataset = load_dups(a.dups);
  const std::vector<EmbeddingRecord> records = read_embedding_store(a.emb);
  const json config = {{"command", "eval-dups"}, {"perms", a.perms}, {"tail", a.tail}, {"mode", a.mode}};
  const RunMeta meta = make_meta("eval-dups", seed, config, {{"dups", digest_path(a.dups)}, {"emb", digest_path(a.emb)}});

  if (!a.matrices.empty()) {
    std::error_code ec;
    fs::create_directories(a.matrices, ec);
    if (!fs::is_directory(a.matrices)) throw IoError("cannot create " + a.matrices);
  }
  json rows = json::array();
  std::string tsv = meta.comment_block() + "word\trho\tp\n";
  for (const auto& word : dataset.words) {
    std::size_t duplicates = 0;
    const SimilarityMatrix human = build_human_matrix(dataset, word, &duplicates);
    if (duplicates > 0) err << "word '" << word << "': averaged " << duplicates << " duplicate annotation(s)\n";
    const SimilarityMatrix model = build_model_matrix(records, word, human);
    MantelResult r;
    try {
      r = mantel_test(human, model, options);
    } catch (const InputError& e) {
      throw InputError("word '" + word + "': " + e.what());
    }
    tsv += format_correlation_row(word, r.rho, r.p_value) + "\n";
    rows.push_back({{"word", word},
                    {"rho", r.rho},
                    {"p_value", r.p_value},
                    {"permutations", r.permutations},
                    {"exhaustive", r.exhaustive},
                    {"observed_cells", r.observed_cells},
                    {"usages", human.size()},
                    {"duplicate_annotations", duplicates}});
    if (!a.matrices.empty()) {
      write_text_file(fs::path(a.matrices) / (word + ".human.json"), json_text(human.to_json()));
      write_text_file(fs::path(a.matrices) / (word + ".model.json"), json_text(model.to_json()));
    }
  }
  if (a.format == "json") {
    emit(json_text({{"meta", meta.to_json()}, {"results", rows}}), a.out, out);
  } else {
    emit(tsv, a.out, out);
  }
  return kExitOk;
}

// -------------------------------------------------------------- shift-report

struct ShiftArgs {
  std::string old_store;
  std::string new_store;
  std::string word;
  std::string out;
  std::string format = "tsv";
};

std::vector<std::string> store_words(const std::vector<EmbeddingRecord>& records) {
  std::vector<std::string> words;
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (seen.insert(r.word).second) words.push_back(r.word);
  }
  return words;
}

int cmd_shift(const ShiftArgs& a, const Common& c, std::ostream& out, std::ostream&) {
  const std::uint64_t seed = resolve_seed(c);
  require_file(a.old_store, "--old");
  require_file(a.new_store, "--new");
  if (a.format != "tsv" && a.format != "json") throw InputError("--format must be tsv or json");
  const auto old_records = read_embedding_store(a.old_store);
  const auto new_records = read_embedding_store(a.new_store);
  std::vector<std::string> words;
  if (!a.word.empty()) {
    words.push_back(normalize_text(a.word));
  } else {
    words = store_words(old_records);
    if (store_words(new_records) != words) throw MismatchError("the stores cover different words");
  }
  if (words.empty()) throw InputError("empty embedding stores");

  const json config = {{"command", "shift-report"}, {"words", words}};
  const RunMeta meta =
      make_meta("shift-report", seed, config, {{"old", digest_path(a.old_store)}, {"new", digest_path(a.new_store)}});
  std::string summary;
  std::string body = "word\tusage_a\tusage_b\tsim_old\tsim_new\tshift\n";
  json reports = json::array();
  for (const auto& word : words) {
    const PairSimilarities old_sims = pairwise_similarities(old_records, word);
    const PairSimilarities new_sims = pairwise_similarities(new_records, word);
    ShiftReport report;
    try {
      report = embedding_shift(old_sims, new_sims, word);
    } catch (const MismatchError& e) {
      throw MismatchError("word '" + word + "': " + e.what());
    } catch (const InputError& e) {
      throw MismatchError("word '" + word + "': fewer than two shared usages");
    }
    auto pair_text = [](const std::pair<UsagePair, double>& p) {
      return p.first.first + "\t" + p.first.second + "\t" + format_fixed(p.second, 6);
    };
    summary += "# " + word + "\taverage\t" + format_fixed(report.average, 6) + "\n";
    summary += "# " + word + "\tmax_increase\t" + pair_text(report.max_increase) + "\n";
    summary += "# " + word + "\tmax_decrease\t" + pair_text(report.max_decrease) + "\n";
    json shifts = json::array();
    for (const auto& [pair, shift] : report.shifts) {
      const double o = old_sims.at(pair), n = new_sims.at(pair);
      body += word + "\t" + pair.first + "\t" + pair.second + "\t" + format_fixed(o, 6) + "\t" + format_fixed(n, 6) +
              "\t" + format_fixed(shift, 6) + "\n";
      shifts.push_back({{"usage_a", pair.first}, {"usage_b", pair.second}, {"sim_old", o}, {"sim_new", n},
                        {"shift", shift}});
    }
    auto pair_json = [](const std::pair<UsagePair, double>& p) {
      return json{{"usage_a", p.first.first}, {"usage_b", p.first.second}, {"shift", p.second}};
    };
    reports.push_back({{"word", word},
                       {"pairs", report.shifts.size()},
                       {"average", report.average},
                       {"max_increase", pair_json(report.max_increase)},
                       {"max_decrease", pair_json(report.max_decrease)},
                       {"shifts", shifts}});
  }
  if (a.format == "json") {
    emit(json_text({{"meta", meta.to_json()}, {"reports", reports}}), a.out, out);
  } else {
    emit(meta.comment_block() + summary + body, a.out, out);
  }
  return kExitOk;
}

// ------------------------------------------------------------------ pca-plot

struct PcaArgs {
  std::string emb;
  std::string emb_new;
  std::string word;
  std::string csv;
  std::string svg;
  std::string clusters;
  std::string cluster_report;
  std::size_t dims = 2;
};

std::vector<const EmbeddingRecord*> word_records(const std::vector<EmbeddingRecord>& records,
                                                 const std::string& word) {
  std::vector<const EmbeddingRecord*> out;
  for (const auto& r : records) {
    if (r.word == word) out.push_back(&r);
  }
  return out;
}

std::map<std::string, std::string> read_cluster_labels(const fs::path& path) {
  std::map<std::string, std::string> labels;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.starts_with('#')) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw InputError("cluster file lines must be usage_id<TAB>cluster");
    labels[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return labels;
}

int cmd_pca(const PcaArgs& a, const Common& c, std::ostream& out, std::ostream&) {
  const std::uint64_t seed = resolve_seed(c);
  if (!a.svg.empty() && a.dims != 2) throw InputError("plots are two-dimensional; use --dims 2 with --svg");
  require_file(a.emb, "--emb");
  if (!a.emb_new.empty()) require_file(a.emb_new, "--emb-new");
  if (!a.clusters.empty()) require_file(a.clusters, "--clusters");

  const auto base = read_embedding_store(a.emb);
  std::string word = a.word.empty() ? std::string() : normalize_text(a.word);
  if (word.empty()) {
    const auto words = store_words(base);
    if (words.size() != 1) throw InputError("--word is required when the store holds several words");
    word = words.front();
  }
  const auto base_rows = word_records(base, word);
  if (base_rows.size() < 2) throw InputError("need at least two usages of '" + word + "'");

  std::vector<EmbeddingRecord> fresh;
  std::vector<const EmbeddingRecord*> new_rows;
  if (!a.emb_new.empty()) {
    fresh = read_embedding_store(a.emb_new);
    std::map<std::string_view, const EmbeddingRecord*> by_id;
    for (const auto* r : word_records(fresh, word)) by_id[r->usage_id] = r;
    if (by_id.size() != base_rows.size()) throw MismatchError("the stores hold different usages of '" + word + "'");
    for (const auto* r : base_rows) {
      const auto it = by_id.find(r->usage_id);
      if (it == by_id.end()) throw MismatchError("usage " + r->usage_id + " missing from --emb-new");
      new_rows.push_back(it->second);
    }
  }

  std::vector<const EmbeddingRecord*> all = base_rows;
  all.insert(all.end(), new_rows.begin(), new_rows.end());
  const std::size_t dim = all.front()->vector.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(all.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i]->vector.size() != dim) throw MismatchError("embedding dimensions differ");
    for (std::size_t j = 0; j < dim; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = all[i]->vector[j];
  }
  const Projection proj = pca_project(x, a.dims);

  std::vector<std::pair<std::string, std::string>> inputs = {{"emb", digest_path(a.emb)}};
  if (!a.emb_new.empty()) inputs.emplace_back("emb_new", digest_path(a.emb_new));
  if (!a.clusters.empty()) inputs.emplace_back("clusters", digest_path(a.clusters));
  const json config = {{"command", "pca-plot"}, {"word", word}, {"dims", a.dims}};
  const RunMeta meta = make_meta("pca-plot", seed, config, inputs);

  std::string csv = meta.comment_block();
  csv += "# explained_variance:";
  for (Eigen::Index i = 0; i < proj.explained_variance.size(); ++i) csv += " " + format_fixed(proj.explained_variance[i], 6);
  csv += "\nlabel,usage_id,series";
  for (std::size_t d = 0; d < a.dims; ++d) csv += ",pc" + std::to_string(d + 1);
  csv += "\n";
  std::vector<ScatterPoint> points;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const bool is_new = i >= base_rows.size();
    const std::size_t number = (is_new ? i - base_rows.size() : i) + 1;
    const std::string label = std::to_string(number) + (is_new ? "_new" : "");
    csv += label + "," + csv_escape(all[i]->usage_id) + "," + (is_new ? "retrained" : "baseline");
    for (std::size_t d = 0; d < a.dims; ++d) {
      csv += "," + format_fixed(proj.coordinates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)), 6);
    }
    csv += "\n";
    if (a.dims == 2) {
      points.push_back(ScatterPoint{proj.coordinates(static_cast<Eigen::Index>(i), 0),
                                    proj.coordinates(static_cast<Eigen::Index>(i), 1), label, is_new ? 1 : 0});
    }
  }
  ensure_parent(a.csv);
  write_text_file(a.csv, csv);
  if (!a.svg.empty()) {
    std::vector<std::string> series = {"baseline"};
    if (!new_rows.empty()) series.emplace_back("retrained (_new)");
    ensure_parent(a.svg);
    write_text_file(a.svg, render_scatter_svg(points, "PCA of usages of '" + word + "'", series, meta));
  }

  if (!a.clusters.empty()) {
    const auto labels = read_cluster_labels(a.clusters);
    auto distances = [&](const std::vector<const EmbeddingRecord*>& rows) {
      Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
      std::vector<std::string> cl;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto it = labels.find(rows[i]->usage_id);
        if (it == labels.end()) throw MismatchError("no cluster label for usage " + rows[i]->usage_id);
        cl.push_back(it->second);
        for (std::size_t j = 0; j < dim; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i]->vector[j];
      }
      const ClusterDistances cd = cluster_distances(m, cl);
      json inter = json::array();
      for (const auto& [pair, v] : cd.inter) inter.push_back({{"a", pair.first}, {"b", pair.second}, {"distance", v}});
      return json{{"intra", cd.intra}, {"inter", inter}};
    };
    json report = {{"meta", meta.to_json()}, {"word", word}, {"baseline", distances(base_rows)}};
    if (!new_rows.empty()) report["retrained"] = distances(new_rows);
    emit(json_text(report), a.cluster_report, out);
  }
  out << "projected " << all.size() << " vector(s) of '" << word << "' to " << a.csv << "\n";
  return kExitOk;
}

// --------------------------------------------------------------------- synth

struct SynthArgs {
  std::string out;
  std::size_t docs_per_decade = 6;
  std::size_t usages_per_word = 10;
};

int cmd_synth(const SynthArgs& a, const Common& c, std::ostream& out, std::ostream&) {
  const std::uint64_t seed = resolve_seed(c);
  const fs::path root(a.out);
  SyntheticCorpusOptions corpus_options;
  corpus_options.docs_per_decade = a.docs_per_decade;
  write_documents(synthetic_corpus(seed, corpus_options), root / "docs");

  EncoderConfig config = EncoderConfig::toy();
  config.seed = seed;
  const Checkpoint mock = make_mock_checkpoint(config);
  mock.save(root / "mock.ckpt");
  const MockEncoder encoder(mock);
  SyntheticDupsOptions dups_options;
  dups_options.usages_per_word = a.usages_per_word;
  const json config_json = {{"command", "synth"}, {"docs_per_decade", a.docs_per_decade},
                            {"usages_per_word", a.usages_per_word}};
  const RunMeta meta = make_meta("synth", seed, config_json, {});
  write_text_file(root / "dups.csv", meta.comment_block() + synthetic_dups_csv(encoder, seed, dups_options));
  out << "wrote synthetic corpus, mock checkpoint and DUPS file to " << a.out << "\n";
  return kExitOk;
}

void add_common(CLI::App* app, Common& common) {
  app->add_option("--seed", common.seed, "Random seed (falls back to $HISTSEM_SEED, then 0)");
  app->add_option("--jobs", common.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Diachronic semantic change toolkit: corpus preparation, toy continued pre-training, usage "
               "embeddings and similarity statistics."};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Common common;

  PreprocessArgs pre;
  auto* pre_cmd = app.add_subcommand("preprocess", "Normalize documents and write per-decade pre-training files");
  pre_cmd->add_option("--in", pre.in, "Document directory")->required();
  pre_cmd->add_option("--out", pre.out, "Output directory")->required();
  pre_cmd->add_option("--decades", pre.decades, "Decade range, e.g. 1910:2000");
  pre_cmd->add_option("--keyword", pre.keyword, "Keep only documents containing this token");
  pre_cmd->add_option("--truncate", pre.truncate, "Fraction of sentences truncated to a random prefix");
  add_common(pre_cmd, common);

  InitArgs init;
  auto* init_cmd = app.add_subcommand("init-ckpt", "Create a fresh toy or mock encoder checkpoint");
  init_cmd->add_option("--kind", init.kind, "toy or mock");
  init_cmd->add_option("--preset", init.preset, "toy, histbert-proto, histbert-5 or histbert-10");
  init_cmd->add_option("--out", init.out, "Checkpoint path")->required();
  init.overrides.add_to(init_cmd);
  add_common(init_cmd, common);

  PretrainArgs pt;
  auto* pt_cmd = app.add_subcommand("pretrain-toy", "Continue masked-LM + NSP pre-training of a toy checkpoint");
  pt_cmd->add_option("--base", pt.base, "Starting checkpoint")->required();
  pt_cmd->add_option("--corpus", pt.corpus, "Directory of coha_<decade>s.txt files")->required();
  pt_cmd->add_option("--out", pt.out, "Output checkpoint")->required();
  pt_cmd->add_option("--decades", pt.decades, "Restrict to a decade range, e.g. 1910:1950");
  pt_cmd->add_option("--note", pt.note, "Provenance note");
  pt_cmd->add_option("--optimizer", pt.optimizer, "sgd (default) or adam");
  pt.overrides.add_to(pt_cmd);
  add_common(pt_cmd, common);

  ExtractArgs ex;
  auto* ex_cmd = app.add_subcommand("extract", "Extract focus-word usage embeddings");
  ex_cmd->add_option("--word", ex.word, "Focus word");
  ex_cmd->add_option("--corpus", ex.corpus, "Pre-training corpus directory");
  ex_cmd->add_option("--dups", ex.dups, "DUPS CSV file");
  ex_cmd->add_option("--ckpt", ex.ckpt, "Encoder checkpoint");
  ex_cmd->add_option("--adapter", ex.adapter, "External encoder command");
  ex_cmd->add_option("--out", ex.out, "Embedding store (JSON Lines)")->required();
  ex_cmd->add_option("--last-k", ex.last_k, "Number of top layers summed");
  add_common(ex_cmd, common);

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval-dups", "Mantel test of model against human usage-pair similarities");
  ev_cmd->add_option("--dups", ev.dups, "DUPS CSV file")->required();
  ev_cmd->add_option("--emb", ev.emb, "Embedding store")->required();
  ev_cmd->add_option("--perms", ev.perms, "Sampled permutations");
  ev_cmd->add_option("--tail", ev.tail, "greater or two-sided");
  ev_cmd->add_option("--mode", ev.mode, "auto, sampled or exhaustive");
  ev_cmd->add_option("--format", ev.format, "tsv or json");
  ev_cmd->add_option("--out", ev.out, "Report path (default stdout)");
  ev_cmd->add_option("--matrices", ev.matrices, "Directory for per-word matrix JSON files");
  add_common(ev_cmd, common);

  ShiftArgs sh;
  auto* sh_cmd = app.add_subcommand("shift-report", "Pairwise similarity shift between two embedding stores");
  sh_cmd->add_option("--old", sh.old_store, "Baseline embedding store")->required();
  sh_cmd->add_option("--new", sh.new_store, "Retrained embedding store")->required();
  sh_cmd->add_option("--word", sh.word, "Focus word (default: every word)");
  sh_cmd->add_option("--format", sh.format, "tsv or json");
  sh_cmd->add_option("--out", sh.out, "Report path (default stdout)");
  add_common(sh_cmd, common);

  PcaArgs pc;
  auto* pc_cmd = app.add_subcommand("pca-plot", "PCA coordinates and SVG scatter of usage embeddings");
  pc_cmd->add_option("--emb", pc.emb, "Baseline embedding store")->required();
  pc_cmd->add_option("--emb-new", pc.emb_new, "Retrained embedding store");
  pc_cmd->add_option("--word", pc.word, "Focus word");
  pc_cmd->add_option("--dims", pc.dims, "Number of components")->check(CLI::PositiveNumber);
  pc_cmd->add_option("--csv", pc.csv, "Coordinates CSV")->required();
  pc_cmd->add_option("--svg", pc.svg, "Scatter plot SVG");
  pc_cmd->add_option("--clusters", pc.clusters, "TSV of usage_id and cluster label");
  pc_cmd->add_option("--cluster-report", pc.cluster_report, "Cluster distance JSON (default stdout)");
  add_common(pc_cmd, common);

  SynthArgs sy;
  auto* sy_cmd = app.add_subcommand("synth", "Write the bundled synthetic corpus and DUPS file");
  sy_cmd->add_option("--out", sy.out, "Output directory")->required();
  sy_cmd->add_option("--docs-per-decade", sy.docs_per_decade, "Documents per decade");
  sy_cmd->add_option("--usages-per-word", sy.usages_per_word, "Usages per synthetic DUPS word");
  add_common(sy_cmd, common);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*pre_cmd) return cmd_preprocess(pre, common, out, err);
    if (*init_cmd) return cmd_init(init, common, out, err);
    if (*pt_cmd) return cmd_pretrain(pt, common, out, err);
    if (*ex_cmd) return cmd_extract(ex, common, out, err);
    if (*ev_cmd) return cmd_eval(ev, common, out, err);
    if (*sh_cmd) return cmd_shift(sh, common, out, err);
    if (*pc_cmd) return cmd_pca(pc, common, out, err);
    if (*sy_cmd) return cmd_synth(sy, common, out, err);
  } catch (const MismatchError& e) {
    err << "error: " << e.what() << "\n";
    return kExitMismatch;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace histsem
