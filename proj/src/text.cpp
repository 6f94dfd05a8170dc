#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <array>

#include "histsem/corpus.hpp"
#include "histsem/error.hpp"

namespace histsem {
namespace {

constexpr std::array<std::string_view, 7> kClitics = {"n't", "'s", "'re", "'ve", "'ll", "'d", "'m"};

// Letters that may follow a token-initial apostrophe and still form a clitic.
constexpr std::array<std::u32string_view, 6> kCliticTails = {U"s", U"re", U"ve", U"ll", U"d", U"m"};

bool is_space(UChar32 c) { return u_isUWhiteSpace(c) || u_iscntrl(c); }

bool is_punct(UChar32 c) {
  if (c < 128) return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
                      (c >= 123 && c <= 126);
  return u_ispunct(c);
}

bool is_letter(UChar32 c) { return u_isalpha(c); }
bool is_digit(UChar32 c) { return u_isdigit(c); }
bool is_alnum(UChar32 c) { return u_isalnum(c); }

void append_utf8(std::string& out, std::u32string_view cps) {
  for (char32_t c : cps) {
    char buf[U8_MAX_LENGTH];
    int32_t len = 0;
    UBool error = false;
    U8_APPEND(reinterpret_cast<uint8_t*>(buf), len, U8_MAX_LENGTH, static_cast<UChar32>(c), error);
    if (!error) out.append(buf, static_cast<std::size_t>(len));
  }
}

// Lowercase, NFD, drop non-spacing marks and format characters, map curly
// single quotes to ASCII and every whitespace/control character to ' '.
std::u32string fold(std::string_view raw) {
  icu::UnicodeString text =
      icu::UnicodeString::fromUTF8(icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size())));
  text.toLower(icu::Locale::getRoot());
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfd = icu::Normalizer2::getNFDInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFD normalizer unavailable");
  icu::UnicodeString decomposed = nfd->normalize(text, status);
  if (U_FAILURE(status)) throw Error("ICU normalization failed");

  std::u32string out;
  out.reserve(static_cast<std::size_t>(decomposed.length()));
  for (int32_t i = 0; i < decomposed.length();) {
    const UChar32 c = decomposed.char32At(i);
    i += U16_LENGTH(c);
    const auto category = u_charType(c);
    if (category == U_NON_SPACING_MARK || category == U_FORMAT_CHAR) continue;
    if (c == 0x2018 || c == 0x2019) {
      out.push_back(U'\'');
    } else if (is_space(c)) {
      out.push_back(U' ');
    } else {
      out.push_back(static_cast<char32_t>(c));
    }
  }
  return out;
}

bool clitic_starts_at(std::u32string_view chunk, std::size_t i) {
  if (chunk[i] != U'\'') return false;
  std::size_t j = i + 1;
  while (j < chunk.size() && is_letter(static_cast<UChar32>(chunk[j]))) ++j;
  const auto tail = chunk.substr(i + 1, j - i - 1);
  return std::find(kCliticTails.begin(), kCliticTails.end(), tail) != kCliticTails.end();
}

std::size_t abbreviation_at(std::u32string_view chunk, std::size_t i,
                            const std::vector<std::u32string>& abbreviations) {
  std::size_t best = 0;
  for (const auto& abbr : abbreviations) {
    if (abbr.size() <= best || chunk.size() - i < abbr.size()) continue;
    if (chunk.compare(i, abbr.size(), abbr) != 0) continue;
    const std::size_t end = i + abbr.size();
    if (end < chunk.size() && is_alnum(static_cast<UChar32>(chunk[end]))) continue;
    best = abbr.size();
  }
  return best;
}

void tokenize_chunk(std::u32string_view chunk, const std::vector<std::u32string>& abbreviations,
                    std::vector<std::u32string_view>& out) {
  std::size_t i = 0;
  const std::size_t n = chunk.size();
  while (i < n) {
    const auto c = static_cast<UChar32>(chunk[i]);
    if (is_punct(c) && !clitic_starts_at(chunk, i)) {
      out.push_back(chunk.substr(i, 1));
      ++i;
      continue;
    }
    if (const std::size_t len = abbreviation_at(chunk, i, abbreviations); len > 0) {
      out.push_back(chunk.substr(i, len));
      i += len;
      continue;
    }
    std::size_t j = i;
    while (j < n) {
      const auto cj = static_cast<UChar32>(chunk[j]);
      if (!is_punct(cj)) {
        ++j;
        continue;
      }
      const bool has_prev = j > i;
      const bool has_next = j + 1 < n;
      const auto prev = has_prev ? static_cast<UChar32>(chunk[j - 1]) : 0;
      const auto next = has_next ? static_cast<UChar32>(chunk[j + 1]) : 0;
      if (cj == '\'' && !has_prev) {
        ++j;  // token-initial clitic apostrophe, checked above
      } else if (cj == '\'' && has_prev && has_next && is_letter(prev) && is_letter(next)) {
        ++j;
      } else if ((cj == '.' || cj == ',' || cj == ':') && has_prev && has_next && is_digit(prev) &&
                 is_digit(next)) {
        ++j;
      } else {
        break;
      }
    }
    out.push_back(chunk.substr(i, j - i));
    i = j;
  }
}

std::vector<std::u32string> to_u32(const std::vector<std::string>& items) {
  std::vector<std::u32string> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(fold(item));
  return out;
}

}  // namespace

std::vector<std::string> TextOptions::default_abbreviations() {
  return {"mr.",   "mrs.",  "ms.",  "dr.",   "prof.", "sr.",  "jr.",  "st.",  "vs.",
          "etc.",  "e.g.",  "i.e.", "gen.",  "col.",  "capt.", "lt.", "sgt.", "rev.",
          "gov.",  "sen.",  "hon.", "mt.",   "ft.",   "u.s.", "a.m.", "p.m.", "jan.",
          "feb.",  "aug.",  "sept.", "oct.", "nov.",  "dec.", "messrs.", "inc.", "co.",
          "corp.", "bros."};
}

std::string normalize_text(std::string_view raw, const TextOptions& options) {
  const std::u32string folded = fold(raw);
  const std::vector<std::u32string> abbreviations = to_u32(options.abbreviations);

  std::vector<std::u32string_view> tokens;
  std::u32string_view view(folded);
  std::size_t i = 0;
  while (i < view.size()) {
    while (i < view.size() && view[i] == U' ') ++i;
    std::size_t j = i;
    while (j < view.size() && view[j] != U' ') ++j;
    if (j > i) tokenize_chunk(view.substr(i, j - i), abbreviations, tokens);
    i = j;
  }

  std::string out;
  out.reserve(raw.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (t > 0) out.push_back(' ');
    append_utf8(out, tokens[t]);
  }
  return out;
}

std::span<const std::string_view> contraction_clitics() { return kClitics; }

std::string rejoin_contractions(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  bool first = true;
  while (i <= text.size()) {
    std::size_t j = text.find(' ', i);
    if (j == std::string_view::npos) j = text.size();
    const std::string_view token = text.substr(i, j - i);
    if (!token.empty()) {
      const bool clitic = std::find(kClitics.begin(), kClitics.end(), token) != kClitics.end();
      if (!first && !clitic) out.push_back(' ');
      out.append(token);
      first = false;
    }
    i = j + 1;
  }
  return out;
}

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\n' || text[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ' && text[j] != '\t' && text[j] != '\n' && text[j] != '\r') ++j;
    if (j > i) tokens.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return tokens;
}

std::vector<std::string> tokenize(std::string_view raw, const TextOptions& options) {
  return split_tokens(rejoin_contractions(normalize_text(raw, options)));
}

bool has_alphabetic(std::string_view token) {
  for (int32_t i = 0; i < static_cast<int32_t>(token.size());) {
    UChar32 c;
    U8_NEXT(reinterpret_cast<const uint8_t*>(token.data()), i, static_cast<int32_t>(token.size()), c);
    if (c >= 0 && u_isalpha(c)) return true;
  }
  return false;
}

}  // namespace histsem
