#ifndef HISTSEM_STATS_HPP_
#define HISTSEM_STATS_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "histsem/types.hpp"
#include "histsem/usage.hpp"

namespace histsem {

// dot(u, v) / (|u| |v|), clamped to [-1, 1]. Throws InputError for unequal
// dimensions or a zero-norm argument.
double cosine_similarity(std::span<const double> u, std::span<const double> v);
double cosine_similarity(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

// 1-based ranks, ties receive the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> values);

double pearson(std::span<const double> x, std::span<const double> y);

// Pearson correlation of average ranks. Needs n >= 3 and non-constant input.
double spearman(std::span<const double> x, std::span<const double> y);

enum class MantelTail { kGreater, kTwoSided };
enum class MantelMode { kAuto, kSampled, kExhaustive };

struct MantelOptions {
  std::size_t permutations = 999;
  std::uint64_t seed = 0;
  MantelTail tail = MantelTail::kGreater;
  // kAuto enumerates all n! relabelings when n <= 6 and samples otherwise.
  MantelMode mode = MantelMode::kAuto;
  std::size_t jobs = 1;
};

struct MantelResult {
  double rho = 0.0;
  double p_value = 1.0;
  // Relabelings that entered the p-value (n! in exhaustive mode).
  std::size_t permutations = 0;
  std::size_t observed_cells = 0;
  bool exhaustive = false;
};

// Spearman rho over the upper-triangle cells defined in both matrices. Each
// permutation relabels B's rows and columns (and its missing-cell mask)
// simultaneously. Sampled: p = (1 + #{rho_perm >= rho}) / (1 + permutations).
// Exhaustive: p = #{rho_perm >= rho} / n!, identity included. Relabelings
// leaving fewer than 3 cells or constant cells are skipped.
MantelResult mantel_test(const SimilarityMatrix& a, const SimilarityMatrix& b, const MantelOptions& options = {});

// Unordered pair similarities, keys stored with first <= second.
using PairSimilarities = std::map<UsagePair, double>;

UsagePair make_pair_key(std::string a, std::string b);

// Cosines between all usage pairs of `word` in one embedding store.
PairSimilarities pairwise_similarities(std::span<const EmbeddingRecord> records, std::string_view word);

struct ShiftReport {
  std::string word;
  std::map<UsagePair, double> shifts;  // new - old
  double average = 0.0;
  std::pair<UsagePair, double> max_increase;
  std::pair<UsagePair, double> max_decrease;
};

// Positive shift = the pair became more similar. Ties for the extremes go to
// the first pair in key order. Throws MismatchError when key sets differ and
// InputError when they are empty.
ShiftReport embedding_shift(const PairSimilarities& old_sims, const PairSimilarities& new_sims,
                            std::string word = {});

struct Projection {
  Eigen::MatrixXd coordinates;       // n x d
  Eigen::VectorXd explained_variance;  // d, non-increasing
  Eigen::MatrixXd basis;             // d x dim, orthonormal rows
  Eigen::VectorXd mean;
};

// Principal components by SVD of the centered data. explained_variance[i] is
// sigma_i^2 / (n - 1); each basis row has its largest-magnitude entry
// positive.
Projection pca_project(const Eigen::MatrixXd& vectors, std::size_t d = 2);

struct ClusterDistances {
  std::map<std::string, double> intra;
  std::map<std::pair<std::string, std::string>, double> inter;
};

// Mean pairwise Euclidean distances within each cluster (0 for a singleton)
// and across every cluster pair (first < second).
ClusterDistances cluster_distances(const Eigen::MatrixXd& points, std::span<const std::string> labels);

}  // namespace histsem

#endif  // HISTSEM_STATS_HPP_
