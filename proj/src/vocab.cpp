#include "histsem/vocab.hpp"

#include <array>

#include "histsem/digest.hpp"
#include "histsem/error.hpp"

namespace histsem {
namespace {

// clang-format off
constexpr std::string_view kWords[] = {
  "the", "a", "an", "and", "or", "but", "if", "of", "to", "in", "on", "at", "by", "for", "with",
  "from", "into", "over", "under", "after", "before", "about", "through", "up", "down", "out",
  "off", "near", "along", "across", "behind", "between", "toward", "against", "without",
  "i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us", "them", "my", "your",
  "his", "its", "our", "their", "this", "that", "these", "those", "who", "what", "which",
  "where", "when", "why", "how", "there", "here", "all", "some", "any", "no", "not", "each",
  "every", "one", "two", "three", "four", "five", "ten", "first", "last", "next", "other",
  "another", "many", "much", "more", "most", "few", "very", "too", "so", "then", "now", "still",
  "again", "also", "just", "only", "even", "never", "always", "often", "once", "soon", "yet",
  "is", "are", "was", "were", "be", "been", "being", "am", "has", "have", "had", "do", "does",
  "did", "will", "would", "can", "could", "shall", "should", "may", "might", "must",
  "go", "goes", "went", "gone", "come", "came", "get", "got", "make", "made", "take", "took",
  "give", "gave", "see", "saw", "know", "knew", "think", "thought", "say", "said", "tell",
  "told", "ask", "asked", "find", "found", "leave", "left", "keep", "kept", "bring", "brought",
  "run", "ran", "walk", "walked", "ride", "rode", "drive", "drove", "carry", "carried", "pull",
  "pulled", "wait", "waited", "meet", "met", "win", "won", "lose", "lost", "play", "played",
  "train", "trained", "buy", "bought", "sell", "sold", "wear", "wore", "stop", "stopped",
  "start", "started", "arrive", "arrived", "travel", "traveled", "watch", "watched", "call",
  "called", "hold", "held", "turn", "turned", "stand", "stood", "sit", "sat", "read", "write",
  "wrote", "speak", "spoke", "hear", "heard", "feel", "felt", "love", "loved", "like", "liked",
  "want", "wanted", "need", "needed", "use", "used", "work", "worked", "live", "lived", "look",
  "looked", "open", "opened", "close", "closed", "build", "built", "send", "sent", "show",
  "shown", "move", "moved", "fall", "fell", "rise", "rose", "grow", "grew", "break", "broke",
  "good", "bad", "new", "old", "young", "great", "small", "large", "big", "little", "long",
  "short", "high", "low", "fast", "slow", "early", "late", "dark", "light", "heavy", "rich",
  "poor", "cold", "warm", "hot", "quiet", "loud", "happy", "sad", "strong", "weak", "red",
  "black", "white", "green", "blue", "brown", "golden", "public", "private", "local",
  "national", "federal", "modern", "ancient", "famous", "luxury", "cheap", "comfortable",
  "man", "men", "woman", "women", "child", "children", "boy", "girl", "people", "family",
  "friend", "father", "mother", "king", "queen", "prince", "princess", "lady", "gentleman",
  "driver", "passenger", "passengers", "player", "players", "team", "teams", "captain",
  "coach", "coaches", "coachman", "stagecoach", "stage", "carriage", "wagon", "cart", "horse",
  "horses", "wheel", "wheels", "road", "roads", "bridge", "town", "city", "village", "country",
  "station", "bus", "train", "car", "ship", "boat", "journey", "trip", "ticket", "seat",
  "route", "express", "mail", "inn", "whip", "reins", "dust", "mud", "hill", "river", "valley",
  "game", "games", "season", "match", "field", "ball", "score", "goal", "league", "club",
  "school", "college", "coaching", "practice", "training", "athlete", "sport", "sports",
  "football", "basketball", "baseball", "soccer", "victory", "defeat", "championship",
  "brand", "handbag", "handbags", "bag", "bags", "leather", "store", "shop", "fashion",
  "design", "designer", "collection", "price", "style", "purse", "luggage", "wallet",
  "cinderella", "pumpkin", "midnight", "ball", "glass", "slipper", "fairy", "magic",
  "house", "home", "room", "door", "window", "wall", "floor", "table", "chair", "bed", "roof",
  "street", "corner", "office", "church", "market", "farm", "garden", "tree", "trees", "leaf",
  "leaves", "flower", "grass", "stone", "brick", "wood", "iron", "gold", "silver", "paper",
  "card", "cards", "letter", "book", "books", "page", "news", "story", "word", "words",
  "name", "voice", "song", "music", "picture", "mirror", "window", "lamp", "fire", "water",
  "sea", "sky", "sun", "moon", "star", "rain", "snow", "wind", "storm", "air", "land",
  "world", "war", "peace", "army", "soldier", "government", "state", "law", "court",
  "money", "bank", "business", "company", "trade", "power", "energy", "oil", "coal", "gas",
  "signal", "radio", "telephone", "wire", "machine", "engine", "computer", "disk", "drive",
  "program", "data", "virtual", "virus", "optical", "compact", "network", "screen", "sphere",
  "net", "spine", "cell", "body", "head", "face", "eye", "eyes", "hand", "hands", "foot",
  "heart", "blood", "doctor", "nurse", "hospital", "disease", "medicine",
  "day", "days", "night", "morning", "evening", "week", "year", "years", "time", "hour",
  "minute", "moment", "century", "summer", "winter", "spring", "autumn",
  "way", "thing", "things", "place", "part", "side", "end", "life", "death", "idea", "fact",
  "case", "point", "number", "kind", "sort", "line", "order", "rest", "help", "question",
  "food", "bread", "meat", "milk", "tea", "coffee", "wine", "dinner", "supper", "breakfast",
  "dog", "cat", "bird", "cow", "sheep", "animal", "animals",
  "mr", "mrs", "miss", "sir", "john", "mary", "james", "smith", "new", "york", "london",
  "america", "american", "english", "west", "east", "north", "south",
  "passed", "reached", "praised", "showed", "kitchen", "cleaned", "wooden", "dusty", "muddy",
};

constexpr std::string_view kSuffixes[] = {
  "##s", "##es", "##ed", "##ing", "##er", "##ers", "##est", "##ly", "##ness", "##ment",
  "##tion", "##sion", "##ion", "##al", "##ful", "##less", "##able", "##ible", "##ity", "##ous",
  "##ive", "##ic", "##ism", "##ist", "##man", "##men", "##ship", "##hood", "##ward", "##y",
  "##n't", "##'s", "##'re", "##'ve", "##'ll", "##'d", "##'m", "##'",
};
// clang-format on

constexpr std::string_view kClitics[] = {"n't", "'s", "'re", "'ve", "'ll", "'d", "'m"};

std::vector<std::string> builtin_pieces() {
  std::vector<std::string> pieces = {std::string(Vocabulary::kPad), std::string(Vocabulary::kUnk),
                                     std::string(Vocabulary::kCls), std::string(Vocabulary::kSep),
                                     std::string(Vocabulary::kMask)};
  for (char c = 33; c < 127; ++c) {
    if ((c >= 'A' && c <= 'Z')) continue;
    pieces.emplace_back(1, c);
  }
  for (char c = '0'; c <= '9'; ++c) pieces.push_back(std::string("##") + c);
  for (char c = 'a'; c <= 'z'; ++c) pieces.push_back(std::string("##") + c);
  for (auto s : kSuffixes) pieces.emplace_back(s);
  for (auto s : kClitics) pieces.emplace_back(s);
  for (auto w : kWords) pieces.emplace_back(w);
  return pieces;
}

bool is_continuation_byte(char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; }

}  // namespace

std::span<const std::string_view> builtin_words() { return kWords; }

Vocabulary Vocabulary::builtin() { return Vocabulary(builtin_pieces()); }

Vocabulary::Vocabulary(std::vector<std::string> pieces) {
  // Duplicates keep their first id so the builtin list may repeat words.
  for (auto& piece : pieces) {
    if (index_.contains(piece)) continue;
    index_.emplace(piece, static_cast<int>(pieces_.size()));
    pieces_.push_back(std::move(piece));
  }
  const auto require = [&](std::string_view name) {
    const auto id = find(name);
    if (!id) throw InputError("vocabulary lacks special token " + std::string(name));
    return *id;
  };
  pad_ = require(kPad);
  unk_ = require(kUnk);
  cls_ = require(kCls);
  sep_ = require(kSep);
  mask_ = require(kMask);
}

std::optional<int> Vocabulary::find(std::string_view piece) const {
  const auto it = index_.find(std::string(piece));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<Subtoken> Vocabulary::wordpiece(std::string_view word) const {
  constexpr std::size_t kMaxChars = 100;
  if (word.empty()) return {};
  if (word.size() > kMaxChars) return {Subtoken{unk_, std::string(word)}};
  std::vector<Subtoken> out;
  std::size_t start = 0;
  std::string candidate;
  while (start < word.size()) {
    std::size_t end = word.size();
    std::optional<int> match;
    while (end > start) {
      if (end < word.size() && is_continuation_byte(word[end])) {
        --end;
        continue;
      }
      candidate.assign(start > 0 ? "##" : "");
      candidate.append(word.substr(start, end - start));
      match = find(candidate);
      if (match) break;
      --end;
    }
    if (!match) return {Subtoken{unk_, std::string(word)}};
    out.push_back(Subtoken{*match, std::string(word.substr(start, end - start))});
    start = end;
  }
  return out;
}

std::string Vocabulary::digest() const {
  Sha256 hash;
  for (const auto& piece : pieces_) hash.update(piece).update("\n");
  return hash.hex_digest();
}

}  // namespace histsem
