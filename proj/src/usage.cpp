#include "histsem/usage.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "histsem/digest.hpp"
#include "histsem/error.hpp"
#include "histsem/stats.hpp"

namespace histsem {
namespace {

constexpr std::array<std::string_view, 12> kDupsColumns = {
    "word",    "usage_a_text", "usage_a_focus_offset", "usage_a_interval", "usage_b_text", "usage_b_focus_offset",
    "usage_b_interval", "score_1", "score_2", "score_3", "score_4", "score_5"};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& field, const std::string& what) {
  const std::string t = trim(field);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(value)) {
    throw InputError(what + ": not a number: '" + field + "'");
  }
  return value;
}

std::size_t parse_offset(const std::string& field, const std::string& what) {
  const std::string t = trim(field);
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw InputError(what + ": invalid focus offset '" + field + "'");
  }
  return value;
}

// Byte position of the code point at index `offset`.
std::size_t byte_offset(std::string_view text, std::size_t offset) {
  std::size_t cp = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if ((c & 0xC0) == 0x80) continue;
    if (cp == offset) return i;
    ++cp;
  }
  if (cp == offset) return text.size();
  throw InputError("focus offset " + std::to_string(offset) + " beyond the snippet");
}

}  // namespace

std::vector<Usage> find_usages(std::span<const Sentence> sentences, std::string_view word) {
  std::vector<Usage> usages;
  if (word.empty()) throw InputError("focus word must not be empty");
  for (const auto& s : sentences) {
    for (std::size_t t = 0; t < s.tokens.size(); ++t) {
      if (s.tokens[t] != word) continue;
      usages.push_back(Usage{s.doc_id + ":" + std::to_string(s.index) + ":" + std::to_string(t), std::string(word),
                             s.tokens, t, s.decade});
    }
  }
  return usages;
}

Usage usage_from_snippet(std::string_view word, std::string_view text, std::size_t focus_offset,
                         std::string_view interval) {
  const std::string norm_word = normalize_text(word);
  if (norm_word.empty() || norm_word.find(' ') != std::string::npos) {
    throw InputError("focus word must be a single token: '" + std::string(word) + "'");
  }
  DecadeLabel decade;
  try {
    decade = DecadeLabel::parse(trim(interval));
  } catch (const Error&) {
    throw InputError("missing or invalid decade label '" + std::string(interval) + "'");
  }
  const std::size_t cut = byte_offset(text, focus_offset);
  std::vector<std::string> tokens = tokenize(text);
  const std::size_t focus = tokenize(text.substr(0, cut)).size();
  if (focus >= tokens.size() || !tokens[focus].starts_with(norm_word)) {
    throw InputError("focus offset " + std::to_string(focus_offset) + " does not point at '" + norm_word +
                     "' in: " + std::string(text));
  }
  std::string key(text);
  key += '\x1f' + std::to_string(focus_offset) + '\x1f' + std::string(interval);
  Usage u;
  u.usage_id = norm_word + "-" + sha256_hex(key).substr(0, 12);
  u.word = norm_word;
  u.tokens = std::move(tokens);
  u.focus_index = focus;
  u.decade = decade;
  return u;
}

double AnnotatedPair::mean_score() const {
  // Sorted summation keeps the mean independent of score order.
  std::array<double, 5> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  return std::accumulate(sorted.begin(), sorted.end(), 0.0) / 5.0;
}

std::map<std::string, std::size_t> DupsDataset::pair_counts() const {
  std::map<std::string, std::size_t> counts;
  for (const auto& w : words) counts[w] = 0;
  for (const auto& p : pairs) ++counts[p.word];
  return counts;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t line = 1;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      end_row();
      ++line;
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (quoted) throw InputError("unterminated quoted field near line " + std::to_string(line));
  if (!field.empty() || !row.empty()) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    end_row();
  }
  return rows;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

DupsDataset parse_dups(std::string_view csv) {
  auto rows = parse_csv(csv);
  // Comment lines carry run metadata.
  std::erase_if(rows, [](const auto& r) { return !r.empty() && r[0].starts_with("#"); });
  if (rows.empty()) throw InputError("DUPS file has no header");
  const auto& header = rows.front();
  if (header.size() != kDupsColumns.size()) {
    throw InputError("DUPS header has " + std::to_string(header.size()) + " columns, expected 12");
  }
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (trim(header[c]) != kDupsColumns[c]) {
      throw InputError("DUPS header column " + std::to_string(c + 1) + " is '" + header[c] + "', expected '" +
                       std::string(kDupsColumns[c]) + "'");
    }
  }
  DupsDataset ds;
  std::set<std::string> seen_words;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = "DUPS record " + std::to_string(r);
    if (row.size() != kDupsColumns.size()) {
      throw InputError(where + ": " + std::to_string(row.size()) + " columns, expected 12");
    }
    AnnotatedPair pair;
    pair.word = normalize_text(row[0]);
    if (pair.word.empty()) throw InputError(where + ": empty word");
    try {
      pair.usage_a = usage_from_snippet(pair.word, row[1], parse_offset(row[2], where), row[3]);
      pair.usage_b = usage_from_snippet(pair.word, row[4], parse_offset(row[5], where), row[6]);
    } catch (const Error& e) {
      throw InputError(where + ": " + e.what());
    }
    for (std::size_t s = 0; s < 5; ++s) {
      pair.scores[s] = parse_double(row[7 + s], where);
      if (pair.scores[s] <= 0.0) throw InputError(where + ": scores must be positive");
    }
    if (seen_words.insert(pair.word).second) ds.words.push_back(pair.word);
    ds.pairs.push_back(std::move(pair));
  }
  return ds;
}

DupsDataset load_dups(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dups(buf.str());
}

SimilarityMatrix::SimilarityMatrix(std::string word, std::vector<std::string> usage_ids, std::string source)
    : word_(std::move(word)),
      usage_ids_(std::move(usage_ids)),
      source_(std::move(source)),
      values_(usage_ids_.size() * usage_ids_.size()) {
  std::set<std::string_view> ids(usage_ids_.begin(), usage_ids_.end());
  if (ids.size() != usage_ids_.size()) throw InputError("duplicate usage id in matrix for " + word_);
}

void SimilarityMatrix::set(std::size_t i, std::size_t j, double value) {
  values_[i * size() + j] = value;
  values_[j * size() + i] = value;
}

void SimilarityMatrix::clear(std::size_t i, std::size_t j) {
  values_[i * size() + j].reset();
  values_[j * size() + i].reset();
}

std::optional<std::size_t> SimilarityMatrix::index_of(std::string_view usage_id) const {
  for (std::size_t i = 0; i < usage_ids_.size(); ++i) {
    if (usage_ids_[i] == usage_id) return i;
  }
  return std::nullopt;
}

std::size_t SimilarityMatrix::defined_upper_cells() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = i + 1; j < size(); ++j) n += defined(i, j) ? 1 : 0;
  }
  return n;
}

bool SimilarityMatrix::same_pattern(const SimilarityMatrix& other) const {
  if (usage_ids_ != other.usage_ids_) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = 0; j < size(); ++j) {
      if (i != j && defined(i, j) != other.defined(i, j)) return false;
    }
  }
  return true;
}

nlohmann::json SimilarityMatrix::to_json() const {
  nlohmann::json values = nlohmann::json::array();
  for (const auto& v : values_) values.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
  return {{"word", word_}, {"usage_ids", usage_ids_}, {"values", values}, {"source", source_}};
}

SimilarityMatrix SimilarityMatrix::from_json(const nlohmann::json& json) {
  try {
    SimilarityMatrix m(json.at("word").get<std::string>(), json.at("usage_ids").get<std::vector<std::string>>(),
                       json.at("source").get<std::string>());
    const auto& values = json.at("values");
    if (values.size() != m.values_.size()) throw InputError("matrix values do not match usage_ids");
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (!values[k].is_null()) m.values_[k] = values[k].get<double>();
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed matrix: ") + e.what());
  }
}

SimilarityMatrix build_human_matrix(const DupsDataset& dataset, std::string_view word, std::size_t* duplicates) {
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& p : dataset.pairs) {
    if (p.word != word) continue;
    for (const Usage* u : {&p.usage_a, &p.usage_b}) {
      if (seen.insert(u->usage_id).second) ids.push_back(u->usage_id);
    }
  }
  if (ids.empty()) throw InputError("word '" + std::string(word) + "' not in the dataset");
  SimilarityMatrix m(std::string(word), ids, "human");
  std::map<std::pair<std::size_t, std::size_t>, std::pair<double, std::size_t>> acc;
  std::size_t extra = 0;
  for (const auto& p : dataset.pairs) {
    if (p.word != word) continue;
    auto i = *m.index_of(p.usage_a.usage_id);
    auto j = *m.index_of(p.usage_b.usage_id);
    if (i == j) throw InputError("pair of a usage with itself for '" + std::string(word) + "'");
    if (i > j) std::swap(i, j);
    auto& slot = acc[{i, j}];
    if (slot.second > 0) ++extra;
    slot.first += p.mean_score();
    ++slot.second;
  }
  for (const auto& [cell, sum] : acc) m.set(cell.first, cell.second, sum.first / static_cast<double>(sum.second));
  if (duplicates != nullptr) *duplicates = extra;
  return m;
}

SimilarityMatrix build_model_matrix(std::span<const EmbeddingRecord> records, std::string_view word,
                                    const SimilarityMatrix& mask) {
  std::map<std::string_view, const EmbeddingRecord*> by_id;
  for (const auto& r : records) {
    if (r.word == word) by_id[r.usage_id] = &r;
  }
  std::vector<const EmbeddingRecord*> rows;
  std::string encoder_id;
  for (const auto& id : mask.usage_ids()) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw MismatchError("word '" + std::string(word) + "': no embedding for usage " + id);
    }
    if (encoder_id.empty()) {
      encoder_id = it->second->encoder_id;
    } else if (encoder_id != it->second->encoder_id) {
      throw MismatchError("word '" + std::string(word) + "': embeddings come from more than one encoder");
    }
    rows.push_back(it->second);
  }
  SimilarityMatrix m(std::string(word), mask.usage_ids(), encoder_id);
  for (std::size_t i = 0; i < m.size(); ++i) {
    m.set(i, i, 1.0);
    for (std::size_t j = i + 1; j < m.size(); ++j) {
      if (mask.defined(i, j)) m.set(i, j, cosine_similarity(rows[i]->vector, rows[j]->vector));
    }
  }
  return m;
}

std::vector<Usage> dataset_usages(const DupsDataset& dataset) {
  std::vector<Usage> usages;
  std::set<std::string> seen;
  for (const auto& p : dataset.pairs) {
    for (const Usage* u : {&p.usage_a, &p.usage_b}) {
      if (seen.insert(u->usage_id).second) usages.push_back(*u);
    }
  }
  return usages;
}

}  // namespace histsem
