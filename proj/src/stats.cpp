#include "histsem/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "histsem/error.hpp"
#include "histsem/parallel.hpp"
#include "histsem/random.hpp"

namespace histsem {
namespace {

constexpr double kTieTolerance = 1e-12;
constexpr std::size_t kMaxExhaustive = 8;

bool constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

struct CellVectors {
  std::vector<double> x, y;
};

// Upper-triangle cells defined in A and in B relabeled by perm.
CellVectors aligned_cells(const SimilarityMatrix& a, const SimilarityMatrix& b, std::span<const std::size_t> perm) {
  CellVectors cells;
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto va = a.at(i, j);
      const auto vb = b.at(perm[i], perm[j]);
      if (va && vb) {
        cells.x.push_back(*va);
        cells.y.push_back(*vb);
      }
    }
  }
  return cells;
}

std::optional<double> permuted_rho(const SimilarityMatrix& a, const SimilarityMatrix& b,
                                   std::span<const std::size_t> perm) {
  const CellVectors cells = aligned_cells(a, b, perm);
  if (cells.x.size() < 3 || constant(cells.x) || constant(cells.y)) return std::nullopt;
  return spearman(cells.x, cells.y);
}

bool at_least_as_extreme(double permuted, double observed, MantelTail tail) {
  if (tail == MantelTail::kTwoSided) return std::abs(permuted) >= std::abs(observed) - kTieTolerance;
  return permuted >= observed - kTieTolerance;
}

}  // namespace

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw InputError("cosine of vectors with different dimensions");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw InputError("cosine of a zero vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

double cosine_similarity(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  return cosine_similarity(std::span<const double>(u.data(), static_cast<std::size_t>(u.size())),
                           std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("correlation of lists with different lengths");
  if (x.size() < 2) throw InputError("correlation needs at least two values");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw InputError("correlation undefined for constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("spearman of lists with different lengths");
  if (x.size() < 3) throw InputError("spearman needs at least three values");
  if (constant(x) || constant(y)) throw InputError("spearman undefined for constant input");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

MantelResult mantel_test(const SimilarityMatrix& a, const SimilarityMatrix& b, const MantelOptions& options) {
  if (a.usage_ids() != b.usage_ids()) {
    throw MismatchError("word '" + a.word() + "': matrices list different usages");
  }
  if (!a.same_pattern(b)) throw MismatchError("word '" + a.word() + "': missing-cell patterns differ");
  const std::size_t n = a.size();
  if (n < 3) throw InputError("word '" + a.word() + "': Mantel test needs at least 3 usages");

  std::vector<std::size_t> identity(n);
  std::iota(identity.begin(), identity.end(), 0);
  const CellVectors cells = aligned_cells(a, b, identity);
  if (cells.x.size() < 3) throw InputError("word '" + a.word() + "': fewer than 3 defined cells");
  if (constant(cells.x) || constant(cells.y)) throw InputError("word '" + a.word() + "': constant cell values");

  MantelResult result;
  result.rho = spearman(cells.x, cells.y);
  result.observed_cells = cells.x.size();

  const bool exhaustive = options.mode == MantelMode::kExhaustive || (options.mode == MantelMode::kAuto && n <= 6);
  if (exhaustive && n > kMaxExhaustive) {
    throw InputError("exhaustive Mantel enumeration limited to " + std::to_string(kMaxExhaustive) + " usages");
  }

  std::vector<std::vector<std::size_t>> perms;
  if (exhaustive) {
    std::vector<std::size_t> p = identity;
    do {
      perms.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
  } else {
    if (options.permutations == 0) throw InputError("Mantel test needs at least one permutation");
    perms.resize(options.permutations);
    for (std::size_t k = 0; k < options.permutations; ++k) {
      Rng rng(mix_seed(options.seed, k));
      perms[k] = identity;
      rng.shuffle(perms[k].begin(), perms[k].end());
    }
  }

  std::vector<std::optional<double>> rhos(perms.size());
  parallel_for(perms.size(), options.jobs, [&](std::size_t k) { rhos[k] = permuted_rho(a, b, perms[k]); });

  std::size_t valid = 0, extreme = 0;
  for (const auto& r : rhos) {
    if (!r) continue;
    ++valid;
    if (at_least_as_extreme(*r, result.rho, options.tail)) ++extreme;
  }
  result.exhaustive = exhaustive;
  result.permutations = valid;
  if (exhaustive) {
    result.p_value = static_cast<double>(extreme) / static_cast<double>(valid);
  } else {
    result.p_value = static_cast<double>(1 + extreme) / static_cast<double>(1 + valid);
  }
  return result;
}

UsagePair make_pair_key(std::string a, std::string b) {
  if (b < a) std::swap(a, b);
  return {std::move(a), std::move(b)};
}

PairSimilarities pairwise_similarities(std::span<const EmbeddingRecord> records, std::string_view word) {
  std::vector<const EmbeddingRecord*> rows;
  std::set<std::string_view> ids;
  for (const auto& r : records) {
    if (r.word != word) continue;
    if (!ids.insert(r.usage_id).second) throw InputError("duplicate usage id: " + r.usage_id);
    rows.push_back(&r);
  }
  PairSimilarities sims;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      sims[make_pair_key(rows[i]->usage_id, rows[j]->usage_id)] = cosine_similarity(rows[i]->vector, rows[j]->vector);
    }
  }
  return sims;
}

ShiftReport embedding_shift(const PairSimilarities& old_sims, const PairSimilarities& new_sims, std::string word) {
  if (old_sims.empty() && new_sims.empty()) throw InputError("embedding shift over an empty pair set");
  if (old_sims.size() != new_sims.size()) throw MismatchError("pair sets differ in size");
  ShiftReport report;
  report.word = std::move(word);
  double total = 0.0;
  bool first = true;
  for (auto it_old = old_sims.begin(), it_new = new_sims.begin(); it_old != old_sims.end(); ++it_old, ++it_new) {
    if (it_old->first != it_new->first) {
      throw MismatchError("pair (" + it_old->first.first + ", " + it_old->first.second + ") missing from one side");
    }
    const double shift = it_new->second - it_old->second;
    report.shifts[it_old->first] = shift;
    total += shift;
    if (first || shift > report.max_increase.second) report.max_increase = {it_old->first, shift};
    if (first || shift < report.max_decrease.second) report.max_decrease = {it_old->first, shift};
    first = false;
  }
  report.average = total / static_cast<double>(report.shifts.size());
  return report;
}

Projection pca_project(const Eigen::MatrixXd& vectors, std::size_t d) {
  const auto n = static_cast<std::size_t>(vectors.rows());
  const auto dim = static_cast<std::size_t>(vectors.cols());
  if (n < 2) throw InputError("PCA needs at least two vectors");
  if (d == 0 || d > std::min(n - 1, dim)) {
    throw InputError("PCA dimension must be in [1, " + std::to_string(std::min(n - 1, dim)) + "]");
  }
  if (!vectors.allFinite()) throw InputError("PCA input has non-finite entries");
  Projection p;
  p.mean = vectors.colwise().mean().transpose();
  const Eigen::MatrixXd centered = vectors.rowwise() - p.mean.transpose();
  if (centered.squaredNorm() == 0.0) throw InputError("PCA input has zero variance");

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const auto di = static_cast<Eigen::Index>(d);
  p.basis = svd.matrixV().leftCols(di).transpose();
  for (Eigen::Index r = 0; r < di; ++r) {
    Eigen::Index arg = 0;
    p.basis.row(r).cwiseAbs().maxCoeff(&arg);
    if (p.basis(r, arg) < 0) p.basis.row(r) *= -1.0;
  }
  p.explained_variance = svd.singularValues().head(di).array().square() / static_cast<double>(n - 1);
  p.coordinates = centered * p.basis.transpose();
  return p;
}

ClusterDistances cluster_distances(const Eigen::MatrixXd& points, std::span<const std::string> labels) {
  if (static_cast<std::size_t>(points.rows()) != labels.size()) {
    throw InputError("cluster labels do not match the number of points");
  }
  std::map<std::string, std::vector<Eigen::Index>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(static_cast<Eigen::Index>(i));
  auto dist = [&](Eigen::Index i, Eigen::Index j) { return (points.row(i) - points.row(j)).norm(); };

  ClusterDistances out;
  for (const auto& [label, idx] : members) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = i + 1; j < idx.size(); ++j) {
        sum += dist(idx[i], idx[j]);
        ++count;
      }
    }
    out.intra[label] = count == 0 ? 0.0 : sum / static_cast<double>(count);
  }
  for (auto a = members.begin(); a != members.end(); ++a) {
    for (auto b = std::next(a); b != members.end(); ++b) {
      double sum = 0.0;
      for (auto i : a->second) {
        for (auto j : b->second) sum += dist(i, j);
      }
      out.inter[{a->first, b->first}] = sum / static_cast<double>(a->second.size() * b->second.size());
    }
  }
  return out;
}

}  // namespace histsem
