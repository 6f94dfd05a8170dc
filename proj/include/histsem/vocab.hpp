#ifndef HISTSEM_VOCAB_HPP_
#define HISTSEM_VOCAB_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace histsem {

// One WordPiece unit. `surface` is the text the piece covers; for words that
// cannot be segmented it is the whole word while `id` is [UNK].
struct Subtoken {
  int id = 0;
  std::string surface;
};

// Fixed subword vocabulary with greedy longest-match-first WordPiece
// segmentation. Continuation pieces carry a "##" prefix.
class Vocabulary {
 public:
  static constexpr std::string_view kPad = "[PAD]";
  static constexpr std::string_view kUnk = "[UNK]";
  static constexpr std::string_view kCls = "[CLS]";
  static constexpr std::string_view kSep = "[SEP]";
  static constexpr std::string_view kMask = "[MASK]";

  // The shipped vocabulary: special tokens, ASCII characters and their
  // continuation forms, common suffixes, clitics and a list of common English
  // words.
  static Vocabulary builtin();

  // The five special tokens must be present.
  explicit Vocabulary(std::vector<std::string> pieces);

  std::size_t size() const { return pieces_.size(); }
  const std::vector<std::string>& pieces() const { return pieces_; }
  const std::string& piece(int id) const { return pieces_.at(static_cast<std::size_t>(id)); }
  std::optional<int> find(std::string_view piece) const;

  int pad_id() const { return pad_; }
  int unk_id() const { return unk_; }
  int cls_id() const { return cls_; }
  int sep_id() const { return sep_; }
  int mask_id() const { return mask_; }
  bool is_special(int id) const { return id == pad_ || id == unk_ || id == cls_ || id == sep_ || id == mask_; }

  std::vector<Subtoken> wordpiece(std::string_view word) const;

  std::string digest() const;

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> index_;
  int pad_ = 0, unk_ = 0, cls_ = 0, sep_ = 0, mask_ = 0;
};

// Words of the shipped vocabulary that are whole lowercase words (no "##",
// no punctuation). Synthetic corpora draw from this list.
std::span<const std::string_view> builtin_words();

}  // namespace histsem

#endif  // HISTSEM_VOCAB_HPP_
