#include "histsem/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "histsem/digest.hpp"
#include "histsem/error.hpp"
#include "histsem/random.hpp"

namespace histsem {
namespace {

constexpr std::string_view kFilePrefix = "coha_";
constexpr std::string_view kFileSuffix = "s.txt";

int parse_int(std::string_view text, std::string_view what) {
  int value = 0;
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw InputError("invalid " + std::string(what) + ": '" + std::string(text) + "'");
  }
  return value;
}

int floor_div10(int year) { return (year >= 0 ? year / 10 : -((-year + 9) / 10)) * 10; }

bool is_terminal(std::string_view token) { return token == "." || token == "!" || token == "?"; }

bool is_closer(std::string_view token) {
  return token == "\"" || token == "'" || token == ")" || token == "]" || token == "}" ||
         token == "\xc2\xbb" /* » */ || token == "\xe2\x80\x9d" /* ” */;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

DecadeLabel::DecadeLabel(int start_year) : start_year_(start_year) {
  if (start_year % 10 != 0) {
    throw InputError("decade start year must be divisible by 10: " + std::to_string(start_year));
  }
}

DecadeLabel DecadeLabel::containing(int year) { return DecadeLabel(floor_div10(year)); }

DecadeLabel DecadeLabel::parse(std::string_view text) {
  if (text.empty()) throw InputError("missing decade label");
  if (const auto dash = text.find('-', 1); dash != std::string_view::npos) {
    const int from = parse_int(text.substr(0, dash), "decade interval");
    const int to = parse_int(text.substr(dash + 1), "decade interval");
    if (from % 10 != 0 || (to != from + 10 && to != from + 9)) {
      throw InputError("interval is not a decade: '" + std::string(text) + "'");
    }
    return DecadeLabel(from);
  }
  if (text.back() == 's') text.remove_suffix(1);
  return DecadeLabel(parse_int(text, "decade"));
}

std::string DecadeLabel::str() const { return std::to_string(start_year_) + "s"; }

DecadeRange DecadeRange::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw InputError("decade range must look like 1910:2000, got '" + std::string(text) + "'");
  }
  DecadeRange range{DecadeLabel::parse(text.substr(0, colon)),
                    DecadeLabel::parse(text.substr(colon + 1))};
  if (range.last < range.first) throw InputError("decade range start is after its end");
  return range;
}

std::vector<DecadeLabel> DecadeRange::decades() const {
  std::vector<DecadeLabel> out;
  for (int y = first.start_year(); y <= last.start_year(); y += 10) out.emplace_back(y);
  return out;
}

std::size_t CorpusManifest::document_count() const {
  std::size_t n = 0;
  for (const auto& [decade, ids] : buckets) n += ids.size();
  return n;
}

std::vector<Sentence> split_sentences(const RawDocument& doc) {
  const DecadeLabel decade = DecadeLabel::containing(doc.year);
  const std::vector<std::string> tokens = split_tokens(doc.text);

  std::vector<std::vector<std::string>> segments;
  std::vector<std::string> current;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    current.push_back(tokens[i]);
    if (!is_terminal(tokens[i])) continue;
    while (i + 1 < tokens.size() && (is_terminal(tokens[i + 1]) || is_closer(tokens[i + 1]))) {
      current.push_back(tokens[++i]);
    }
    segments.push_back(std::move(current));
    current.clear();
  }
  if (!current.empty()) segments.push_back(std::move(current));

  // Fold segments without letters into a neighbour so the token stream is
  // preserved and no sentence is pure punctuation or numbers.
  std::vector<std::vector<std::string>> merged;
  std::vector<std::string> carry;
  for (auto& seg : segments) {
    const bool alphabetic = std::any_of(seg.begin(), seg.end(), has_alphabetic);
    if (!alphabetic) {
      if (!merged.empty()) {
        merged.back().insert(merged.back().end(), seg.begin(), seg.end());
      } else {
        carry.insert(carry.end(), seg.begin(), seg.end());
      }
      continue;
    }
    if (!carry.empty()) {
      seg.insert(seg.begin(), carry.begin(), carry.end());
      carry.clear();
    }
    merged.push_back(std::move(seg));
  }

  std::vector<Sentence> out;
  out.reserve(merged.size());
  for (std::size_t i = 0; i < merged.size(); ++i) {
    out.push_back(Sentence{doc.doc_id, i, std::move(merged[i]), decade});
  }
  return out;
}

std::vector<Sentence> prepare_document(const RawDocument& doc, const TextOptions& options) {
  RawDocument normalized = doc;
  normalized.text = rejoin_contractions(normalize_text(doc.text, options));
  return split_sentences(normalized);
}

CorpusManifest bucket_by_decade(std::span<const RawDocument> docs, const DecadeRange& range,
                                const TextOptions& options) {
  CorpusManifest manifest;
  for (const auto& decade : range.decades()) {
    manifest.buckets[decade];
    manifest.token_counts[decade] = 0;
  }
  std::set<std::string> seen;
  for (const auto& doc : docs) {
    if (!seen.insert(doc.doc_id).second) throw InputError("duplicate doc_id: " + doc.doc_id);
    if (!range.contains(doc.year)) {
      manifest.excluded.push_back(doc.doc_id);
      continue;
    }
    const DecadeLabel decade = DecadeLabel::containing(doc.year);
    manifest.buckets[decade].push_back(doc.doc_id);
    manifest.token_counts[decade] += tokenize(doc.text, options).size();
  }
  for (auto& [decade, ids] : manifest.buckets) std::sort(ids.begin(), ids.end());
  std::sort(manifest.excluded.begin(), manifest.excluded.end());
  return manifest;
}

std::vector<RawDocument> select_by_keyword(std::span<const RawDocument> docs,
                                           std::string_view keyword, const TextOptions& options) {
  if (keyword.empty()) throw InputError("keyword must not be empty");
  if (split_tokens(keyword).size() != 1 || keyword.find(' ') != std::string_view::npos) {
    throw InputError("keyword must be a single token: '" + std::string(keyword) + "'");
  }
  std::vector<RawDocument> out;
  for (const auto& doc : docs) {
    const auto tokens = tokenize(doc.text, options);
    if (std::find(tokens.begin(), tokens.end(), keyword) != tokens.end()) out.push_back(doc);
  }
  return out;
}

std::string pretraining_file_name(DecadeLabel decade) {
  return std::string(kFilePrefix) + std::to_string(decade.start_year()) + std::string(kFileSuffix);
}

std::optional<DecadeLabel> decade_from_file_name(const std::filesystem::path& path) {
  const std::string name = path.filename().string();
  if (name.size() <= kFilePrefix.size() + kFileSuffix.size() || !name.starts_with(kFilePrefix) ||
      !name.ends_with(kFileSuffix)) {
    return std::nullopt;
  }
  const std::string_view digits(name.data() + kFilePrefix.size(),
                                name.size() - kFilePrefix.size() - kFileSuffix.size());
  try {
    return DecadeLabel(parse_int(digits, "decade"));
  } catch (const InputError&) {
    return std::nullopt;
  }
}

PretrainingWriteResult write_pretraining_corpus(const CorpusManifest& manifest,
                                                const SentencesByDoc& sentences,
                                                double truncate_fraction, std::uint64_t seed,
                                                const std::filesystem::path& out_dir) {
  if (!(truncate_fraction >= 0.0 && truncate_fraction <= 1.0)) {
    throw InputError("truncate_fraction must lie in [0, 1]");
  }
  for (const auto& [decade, ids] : manifest.buckets) {
    for (const auto& id : ids) {
      if (!sentences.contains(id)) throw InputError("manifest references missing document " + id);
    }
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  PretrainingWriteResult result;
  Rng rng(seed);
  Sha256 digest;
  for (const auto& [decade, ids] : manifest.buckets) {
    std::string text;
    bool first_doc = true;
    for (const auto& id : ids) {
      const auto& doc_sentences = sentences.at(id);
      if (doc_sentences.empty()) continue;
      if (!first_doc) text.push_back('\n');
      first_doc = false;
      for (const auto& sentence : doc_sentences) {
        if (sentence.tokens.empty()) throw InputError("empty sentence in document " + id);
        std::size_t keep = sentence.tokens.size();
        const bool draw = rng.uniform() < truncate_fraction;
        if (draw && keep >= 2) {
          keep = 1 + static_cast<std::size_t>(rng.below(keep - 1));
          ++result.truncated;
        }
        for (std::size_t t = 0; t < keep; ++t) {
          if (t > 0) text.push_back(' ');
          text.append(sentence.tokens[t]);
        }
        text.push_back('\n');
        ++result.sentences;
      }
    }
    const auto path = out_dir / pretraining_file_name(decade);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write failed: " + path.string());
    digest.update(path.filename().string()).update(std::string_view("\0", 1)).update(text);
    result.files.push_back(path);
  }
  result.content_digest = digest.hex_digest();
  return result;
}

std::vector<PretrainingDocument> parse_pretraining_text(std::string_view text) {
  std::vector<PretrainingDocument> docs;
  PretrainingDocument current;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t j = text.find('\n', i);
    if (j == std::string_view::npos) j = text.size();
    const std::string_view line = text.substr(i, j - i);
    if (line.empty()) {
      if (!current.empty()) docs.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(split_tokens(line));
    }
    i = j + 1;
  }
  if (!current.empty()) docs.push_back(std::move(current));
  return docs;
}

std::vector<PretrainingDocument> read_pretraining_file(const std::filesystem::path& path) {
  return parse_pretraining_text(read_file(path));
}

std::vector<std::filesystem::path> list_pretraining_files(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && decade_from_file_name(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<RawDocument> load_documents(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
  std::vector<RawDocument> docs;
  const auto manifest_path = dir / "manifest.tsv";
  if (std::filesystem::exists(manifest_path)) {
    std::istringstream lines(read_file(manifest_path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::vector<std::string> fields;
      std::size_t start = 0;
      while (true) {
        const auto tab = line.find('\t', start);
        fields.push_back(line.substr(start, tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
      }
      if (line_no == 1 && fields[0] == "doc_id") continue;
      if (fields.size() != 4) {
        throw InputError("manifest.tsv line " + std::to_string(line_no) + ": expected 4 fields");
      }
      RawDocument doc;
      doc.doc_id = fields[0];
      doc.year = parse_int(fields[1], "year");
      if (!fields[2].empty()) doc.genre = fields[2];
      doc.text = read_file(dir / fields[3]);
      docs.push_back(std::move(doc));
    }
  } else {
    static const std::regex kPattern(R"(doc_(-?[0-9]+)_(.+)\.txt)");
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      const std::string name = entry.path().filename().string();
      std::smatch match;
      if (!std::regex_match(name, match, kPattern)) continue;
      RawDocument doc;
      doc.doc_id = match[2].str();
      doc.year = parse_int(match[1].str(), "year");
      doc.text = read_file(entry.path());
      docs.push_back(std::move(doc));
    }
  }
  std::sort(docs.begin(), docs.end(),
            [](const RawDocument& a, const RawDocument& b) { return a.doc_id < b.doc_id; });
  for (std::size_t i = 1; i < docs.size(); ++i) {
    if (docs[i].doc_id == docs[i - 1].doc_id) throw InputError("duplicate doc_id: " + docs[i].doc_id);
  }
  return docs;
}

nlohmann::json manifest_to_json(const CorpusManifest& manifest) {
  nlohmann::json decades = nlohmann::json::object();
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [decade, ids] : manifest.buckets) decades[decade.str()] = ids;
  for (const auto& [decade, n] : manifest.token_counts) counts[decade.str()] = n;
  return {{"decades", decades},
          {"token_counts", counts},
          {"excluded", manifest.excluded},
          {"excluded_count", manifest.excluded.size()},
          {"seed", manifest.seed},
          {"config_digest", manifest.config_digest},
          {"content_digest", manifest.content_digest}};
}

CorpusManifest manifest_from_json(const nlohmann::json& json) {
  CorpusManifest manifest;
  try {
    for (const auto& [key, ids] : json.at("decades").items()) {
      manifest.buckets[DecadeLabel::parse(key)] = ids.get<std::vector<std::string>>();
    }
    for (const auto& [key, n] : json.at("token_counts").items()) {
      manifest.token_counts[DecadeLabel::parse(key)] = n.get<std::size_t>();
    }
    manifest.excluded = json.at("excluded").get<std::vector<std::string>>();
    manifest.seed = json.at("seed").get<std::uint64_t>();
    manifest.config_digest = json.value("config_digest", "");
    manifest.content_digest = json.value("content_digest", "");
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed corpus manifest: ") + e.what());
  }
  return manifest;
}

}  // namespace histsem
