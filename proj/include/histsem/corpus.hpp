#ifndef HISTSEM_CORPUS_HPP_
#define HISTSEM_CORPUS_HPP_

// Historical corpus ingestion: text normalization, sentence splitting,
// decade bucketing and the pre-training file format (one sentence per line,
// documents separated by a single empty line).

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace histsem {

// A decade [start_year, start_year + 9]; start_year is a multiple of ten.
class DecadeLabel {
 public:
  DecadeLabel() = default;
  // Throws InputError if start_year is not divisible by ten.
  explicit DecadeLabel(int start_year);

  static DecadeLabel containing(int year);
  // Accepts "1910s", "1910" or an interval such as "1910-1920" / "1910-1919".
  static DecadeLabel parse(std::string_view text);

  int start_year() const { return start_year_; }
  int end_year() const { return start_year_ + 9; }
  bool contains(int year) const { return year >= start_year_ && year <= end_year(); }
  std::string str() const;  // "1910s"

  auto operator<=>(const DecadeLabel&) const = default;

 private:
  int start_year_ = 0;
};

// Inclusive range of decades, e.g. 1910s..2000s.
struct DecadeRange {
  DecadeLabel first;
  DecadeLabel last;

  // "1910:2000" style; either bound may also carry the "s" suffix.
  static DecadeRange parse(std::string_view text);
  bool contains(int year) const { return year >= first.start_year() && year <= last.end_year(); }
  std::vector<DecadeLabel> decades() const;
};

struct RawDocument {
  std::string doc_id;
  int year = 0;
  std::optional<std::string> genre;
  std::string text;
};

struct Sentence {
  std::string doc_id;
  std::size_t index = 0;
  std::vector<std::string> tokens;
  DecadeLabel decade;
};

struct CorpusManifest {
  std::map<DecadeLabel, std::vector<std::string>> buckets;  // doc ids, sorted
  std::map<DecadeLabel, std::size_t> token_counts;
  std::vector<std::string> excluded;  // out-of-range doc ids, sorted
  std::uint64_t seed = 0;
  std::string config_digest;
  std::string content_digest;

  std::size_t document_count() const;
};

struct TextOptions {
  // Abbreviations keep their period attached and never end a sentence. Entries
  // are lowercase and end in '.'.
  std::vector<std::string> abbreviations = default_abbreviations();

  static std::vector<std::string> default_abbreviations();
};

// Lowercases, strips combining accents after canonical decomposition,
// separates punctuation from word characters and collapses whitespace.
// Word-internal apostrophes ("don't"), clitic-leading apostrophes ("'s"),
// digit-internal separators ("3.5") and listed abbreviations stay attached.
std::string normalize_text(std::string_view raw, const TextOptions& options = {});

// Attaches the clitic tokens n't 's 're 've 'll 'd 'm to the preceding token.
std::string rejoin_contractions(std::string_view text);

// The clitic inventory used by rejoin_contractions.
std::span<const std::string_view> contraction_clitics();

// normalize_text followed by rejoin_contractions, split on spaces.
std::vector<std::string> tokenize(std::string_view raw, const TextOptions& options = {});

// Splits whitespace-separated normalized text into tokens.
std::vector<std::string> split_tokens(std::string_view text);

// True if the UTF-8 string contains at least one alphabetic code point.
bool has_alphabetic(std::string_view token);

// Rule-based split of a normalized document on standalone '.', '!' and '?'
// tokens (closing quotes/brackets and repeated terminators stay with the
// sentence they close). Segments without alphabetic content are merged into a
// neighbour; a document without any alphabetic content yields no sentences.
std::vector<Sentence> split_sentences(const RawDocument& doc);

// normalize + rejoin + split_sentences for one raw document.
std::vector<Sentence> prepare_document(const RawDocument& doc, const TextOptions& options = {});

// Assigns in-range documents to decades; out-of-range documents are listed
// in `excluded`. Every decade in the range gets a (possibly empty) bucket.
// Throws InputError on duplicate doc ids.
CorpusManifest bucket_by_decade(std::span<const RawDocument> docs, const DecadeRange& range,
                                const TextOptions& options = {});

// Documents whose normalized token stream contains `keyword` as a whole
// token, in input order. Throws InputError for an empty or multi-token keyword.
std::vector<RawDocument> select_by_keyword(std::span<const RawDocument> docs,
                                           std::string_view keyword,
                                           const TextOptions& options = {});

struct PretrainingWriteResult {
  std::vector<std::filesystem::path> files;  // one per manifest decade
  std::size_t sentences = 0;
  std::size_t truncated = 0;
  std::string content_digest;
};

std::string pretraining_file_name(DecadeLabel decade);  // coha_1910s.txt
std::optional<DecadeLabel> decade_from_file_name(const std::filesystem::path& path);

using SentencesByDoc = std::map<std::string, std::vector<Sentence>>;

// Writes one file per decade into out_dir. Documents appear in bucket order
// (sorted doc ids); each sentence is, with probability truncate_fraction,
// shortened to a uniformly drawn prefix of [1, len-1] tokens. Single-token
// sentences are never shortened. Output is byte-identical for identical
// inputs and seed.
PretrainingWriteResult write_pretraining_corpus(const CorpusManifest& manifest,
                                                const SentencesByDoc& sentences,
                                                double truncate_fraction, std::uint64_t seed,
                                                const std::filesystem::path& out_dir);

// A parsed pre-training document: sentences of tokens.
using PretrainingDocument = std::vector<std::vector<std::string>>;

std::vector<PretrainingDocument> parse_pretraining_text(std::string_view text);
std::vector<PretrainingDocument> read_pretraining_file(const std::filesystem::path& path);

// Sorted coha_*.txt files in a corpus directory.
std::vector<std::filesystem::path> list_pretraining_files(const std::filesystem::path& dir);

// Loads either <dir>/manifest.tsv (doc_id, year, genre, path) or every
// doc_<year>_<id>.txt file in dir. Documents are returned sorted by doc id.
std::vector<RawDocument> load_documents(const std::filesystem::path& dir);

nlohmann::json manifest_to_json(const CorpusManifest& manifest);
CorpusManifest manifest_from_json(const nlohmann::json& json);

}  // namespace histsem

#endif  // HISTSEM_CORPUS_HPP_
