#include "histsem/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "histsem/error.hpp"
#include "histsem/report.hpp"
#include "histsem/stats.hpp"
#include "histsem/usage.hpp"

namespace histsem {
namespace {

const std::vector<Topic>& topics() {
  static const std::vector<Topic> kTopics = {
      {"transport",
       {"horse", "horses", "carriage", "wagon", "road", "driver", "passengers", "whip", "reins", "wheels", "inn",
        "mail", "journey", "bridge", "village", "hill", "route", "station"},
       {"drove", "pulled", "carried", "stopped", "left", "passed", "reached"},
       {"dusty", "muddy", "heavy", "old", "slow", "long", "wooden"}},
      {"sport",
       {"team", "players", "game", "season", "match", "field", "ball", "score", "league", "club", "school",
        "college", "practice", "championship", "victory", "athlete", "football", "captain"},
       {"trained", "won", "lost", "played", "watched", "called", "praised"},
       {"young", "strong", "fast", "national", "famous", "local", "new"}},
      {"fashion",
       {"brand", "handbag", "leather", "store", "shop", "design", "designer", "collection", "price", "style",
        "purse", "wallet", "luggage", "fashion"},
       {"bought", "sold", "showed", "carried", "wore", "liked", "wanted"},
       {"luxury", "cheap", "modern", "black", "brown", "famous", "new"}},
      {"fairy",
       {"pumpkin", "princess", "prince", "slipper", "fairy", "magic", "midnight", "queen", "glass", "mirror",
        "king", "lady"},
       {"saw", "loved", "found", "held", "lost", "turned", "watched"},
       {"golden", "little", "white", "ancient", "happy", "quiet", "dark"}},
      {"home",
       {"house", "garden", "door", "window", "table", "chair", "kitchen", "mother", "father", "children", "dog",
        "dinner", "fire", "room"},
       {"opened", "closed", "liked", "kept", "built", "moved", "cleaned"},
       {"warm", "small", "quiet", "green", "old", "big", "cold"}},
  };
  return kTopics;
}

constexpr std::string_view kPrepositions[] = {"near", "across", "along", "behind", "toward", "with", "at", "by"};
constexpr std::string_view kNames[] = {"john", "mary", "james", "smith"};

template <typename Container>
const auto& pick(Rng& rng, const Container& items) {
  return items[rng.below(std::size(items))];
}

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::size_t code_points(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

std::string decade_interval(DecadeLabel d) {
  return std::to_string(d.start_year()) + "-" + std::to_string(d.start_year() + 10);
}

}  // namespace

std::span<const Topic> synthetic_topics() { return topics(); }

const Topic& synthetic_topic(std::string_view name) {
  for (const auto& t : topics()) {
    if (t.name == name) return t;
  }
  throw InputError("unknown synthetic topic: " + std::string(name));
}

std::string synthetic_sentence(Rng& rng, const Topic& topic, std::string_view focus, std::size_t* focus_offset) {
  std::string subject = pick(rng, topic.nouns);
  std::string object = pick(rng, topic.nouns);
  const std::string place = pick(rng, topic.nouns);
  const bool focus_subject = rng.below(2) == 0;
  if (!focus.empty()) (focus_subject ? subject : object) = std::string(focus);

  std::string text = "The " + pick(rng, topic.adjectives) + " ";
  if (!focus.empty() && focus_subject && focus_offset) *focus_offset = code_points(text);
  text += subject + " " + pick(rng, topic.verbs) + " the ";
  if (!focus.empty() && !focus_subject && focus_offset) *focus_offset = code_points(text);
  text += object + " " + std::string(pick(rng, kPrepositions)) + " the " + place + ".";
  return text;
}

std::vector<RawDocument> synthetic_corpus(std::uint64_t seed, const SyntheticCorpusOptions& options) {
  Rng rng(mix_seed(seed, 0x5e17));
  const auto decades = options.range.decades();
  const Topic& transport = synthetic_topic("transport");
  const Topic& sport = synthetic_topic("sport");
  std::vector<RawDocument> docs;

  auto make_doc = [&](std::string id, int year, double p_transport) {
    RawDocument doc;
    doc.doc_id = std::move(id);
    doc.year = year;
    doc.genre = pick(rng, std::vector<std::string>{"fiction", "non-fiction", "newspaper", "magazine"});
    const Topic& main = topics()[rng.below(topics().size())];
    std::string text;
    for (std::size_t s = 0; s < options.sentences_per_doc; ++s) {
      if (!text.empty()) text += rng.below(5) == 0 ? "\n" : " ";
      const double r = rng.uniform();
      if (r < 0.3) {
        const Topic& sense = rng.uniform() < p_transport ? transport : sport;
        text += synthetic_sentence(rng, sense, "coach");
      } else if (r < 0.38) {
        const Topic& t = topics()[rng.below(topics().size())];
        text += capitalize(std::string(pick(rng, kNames))) + "'s " + pick(rng, t.nouns) + " wasn't " +
                pick(rng, t.adjectives) + ".";
      } else if (r < 0.44) {
        text += "Mr. Smith didn't see the " + pick(rng, main.nouns) + "!";
      } else {
        const Topic& t = rng.uniform() < 0.7 ? main : topics()[rng.below(topics().size())];
        text += synthetic_sentence(rng, t);
      }
    }
    doc.text = std::move(text);
    docs.push_back(std::move(doc));
  };

  for (std::size_t i = 0; i < decades.size(); ++i) {
    const double p_transport =
        decades.size() == 1 ? 1.0 : 1.0 - static_cast<double>(i) / static_cast<double>(decades.size() - 1);
    for (std::size_t k = 0; k < options.docs_per_decade; ++k) {
      const int year = decades[i].start_year() + static_cast<int>(rng.below(10));
      make_doc("s" + std::to_string(decades[i].start_year()) + "-" + std::to_string(k), year, p_transport);
    }
  }
  if (options.out_of_range_docs) {
    make_doc("early-0", decades.front().start_year() - 15, 1.0);
    make_doc("late-0", decades.back().start_year() + 15, 0.0);
  }
  return docs;
}

void write_documents(std::span<const RawDocument> docs, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string());
  for (const auto& d : docs) {
    write_text_file(dir / ("doc_" + std::to_string(d.year) + "_" + d.doc_id + ".txt"), d.text + "\n");
  }
}

std::string synthetic_dups_csv(const Encoder& encoder, std::uint64_t seed, const SyntheticDupsOptions& options) {
  if (options.usages_per_word < 2) throw InputError("need at least two usages per word");
  Rng rng(mix_seed(seed, 0xd0b5));
  const std::size_t last_k = std::min<std::size_t>(4, encoder.config().num_layers);
  const std::vector<DecadeLabel> decades = DecadeRange{DecadeLabel(1910), DecadeLabel(2000)}.decades();

  std::ostringstream csv;
  csv << "word,usage_a_text,usage_a_focus_offset,usage_a_interval,usage_b_text,usage_b_focus_offset,"
         "usage_b_interval,score_1,score_2,score_3,score_4,score_5\n";
  for (const auto& word : options.words) {
    struct Item {
      std::string text;
      std::size_t offset = 0;
      std::string interval;
      Eigen::VectorXd vec;
    };
    std::vector<Item> items;
    std::set<std::string> ids;
    std::size_t attempts = 0;
    while (items.size() < options.usages_per_word) {
      if (++attempts > 100 * options.usages_per_word) throw InputError("cannot generate distinct usages");
      Item it;
      const Topic& topic = topics()[rng.below(4)];
      it.text = synthetic_sentence(rng, topic, word, &it.offset);
      it.interval = decade_interval(decades[rng.below(decades.size())]);
      const Usage u = usage_from_snippet(word, it.text, it.offset, it.interval);
      if (!ids.insert(u.usage_id).second) continue;
      it.vec = extract_usage_embedding(encoder.encode(u.tokens), u.focus_index, last_k);
      items.push_back(std::move(it));
    }
    std::vector<double> cos;
    for (std::size_t i = 0; i < items.size(); ++i) {
      for (std::size_t j = i + 1; j < items.size(); ++j) cos.push_back(cosine_similarity(items[i].vec, items[j].vec));
    }
    const auto [lo, hi] = std::minmax_element(cos.begin(), cos.end());
    const double range = std::max(*hi - *lo, 1e-12);
    std::size_t c = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
      for (std::size_t j = i + 1; j < items.size(); ++j, ++c) {
        const double t = (cos[c] - *lo) / range;
        const double base = 1.0 + 3.0 * t * std::sqrt(t);
        csv << csv_escape(word) << ',' << csv_escape(items[i].text) << ',' << items[i].offset << ','
            << items[i].interval << ',' << csv_escape(items[j].text) << ',' << items[j].offset << ','
            << items[j].interval;
        for (int k = 0; k < 5; ++k) csv << ',' << format_fixed(std::max(0.05, base + options.noise * rng.normal()), 3);
        csv << '\n';
      }
    }
  }
  return csv.str();
}

SyntheticClusters synthetic_clusters(std::uint64_t seed, std::string_view word,
                                     const SyntheticClusterOptions& options) {
  if (options.clusters == 0 || options.per_cluster == 0 || options.dim == 0) {
    throw InputError("synthetic clusters need at least one cluster, point and dimension");
  }
  Rng rng(mix_seed(seed, 0xc105));
  const std::size_t n = options.clusters * options.per_cluster;
  std::vector<std::vector<double>> points(n, std::vector<double>(options.dim));
  std::vector<std::vector<double>> centroids(options.clusters, std::vector<double>(options.dim, 0.0));
  std::vector<double> global(options.dim, 0.0);
  for (std::size_t c = 0; c < options.clusters; ++c) {
    std::vector<double> centre(options.dim);
    for (auto& v : centre) v = options.spread * rng.normal();
    for (std::size_t i = 0; i < options.per_cluster; ++i) {
      auto& p = points[c * options.per_cluster + i];
      for (std::size_t d = 0; d < options.dim; ++d) {
        p[d] = centre[d] + rng.normal();
        centroids[c][d] += p[d] / static_cast<double>(options.per_cluster);
        global[d] += p[d] / static_cast<double>(n);
      }
    }
  }

  SyntheticClusters out;
  for (std::size_t c = 0; c < options.clusters; ++c) {
    const std::string cluster = "k" + std::to_string(c);
    for (std::size_t i = 0; i < options.per_cluster; ++i) {
      const auto& p = points[c * options.per_cluster + i];
      EmbeddingRecord r{std::string(word), cluster + "-u" + std::to_string(i), DecadeLabel(1910), p, "synthetic"};
      out.labels.emplace_back(r.usage_id, cluster);
      out.baseline.push_back(r);
      for (std::size_t d = 0; d < options.dim; ++d) {
        r.vector[d] = global[d] + options.separation * (centroids[c][d] - global[d]) +
                      options.shrink * (p[d] - centroids[c][d]);
      }
      out.perturbed.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace histsem
