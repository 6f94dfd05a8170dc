#ifndef HISTSEM_RANDOM_HPP_
#define HISTSEM_RANDOM_HPP_

#include <cstdint>
#include <iterator>
#include <random>
#include <utility>

namespace histsem {

// splitmix64 finalizer; combines a seed with a stream index so independent
// streams can be derived from (seed, index) without sharing state.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// Seeded generator with platform-independent distributions. The std
// distribution objects are implementation-defined, so byte-identical outputs
// across standard libraries need these hand-rolled transforms on top of the
// (fully specified) mt19937_64 engine.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform();

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  // Standard normal (Box-Muller).
  double normal();

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(std::distance(first, last));
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = below(i);
      using std::swap;
      swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace histsem

#endif  // HISTSEM_RANDOM_HPP_
