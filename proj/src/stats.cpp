#include "surrobench/stats.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numeric>

#include "surrobench/util.hpp"

namespace surrobench {

double rmse(std::span<const double> truth, std::span<const double> pred) {
  if (truth.size() != pred.size()) throw Error("rmse: length mismatch");
  if (truth.empty()) throw Error("rmse: empty input");
  double ss = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) ss += (truth[i] - pred[i]) * (truth[i] - pred[i]);
  return std::sqrt(ss / static_cast<double>(truth.size()));
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i + j) / 2.0) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("spearman: length mismatch");
  if (a.size() < 2) throw Error("spearman: need at least two points");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) throw Error("spearman: correlation undefined for constant input");
  return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

namespace {

void check_samples(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error("rank-sum test needs two non-empty samples");
}

bool has_ties(std::span<const double> a, std::span<const double> b) {
  std::vector<double> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  return std::adjacent_find(all.begin(), all.end()) != all.end();
}

double rank_sum_of_first(std::span<const double> a, std::span<const double> b) {
  std::vector<double> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  const auto ranks = average_ranks(all);
  return std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(a.size()), 0.0);
}

}  // namespace

double wilcoxon_exact(std::span<const double> a, std::span<const double> b) {
  check_samples(a, b);
  if (has_ties(a, b)) throw Error("exact rank-sum test requires tie-free samples");
  const std::size_t n = a.size();
  const std::size_t total = a.size() + b.size();
  const auto w = static_cast<std::size_t>(std::lround(rank_sum_of_first(a, b)));
  // count[k][s]: subsets of size k from the ranks seen so far with rank sum s.
  const std::size_t max_sum = total * (total + 1) / 2;
  std::vector<std::vector<double>> count(n + 1, std::vector<double>(max_sum + 1, 0.0));
  count[0][0] = 1.0;
  for (std::size_t r = 1; r <= total; ++r) {
    for (std::size_t k = std::min(n, r); k >= 1; --k) {
      for (std::size_t s = max_sum; s >= r; --s) count[k][s] += count[k - 1][s - r];
    }
  }
  double all = 0, lower = 0, upper = 0;
  for (std::size_t s = 0; s <= max_sum; ++s) {
    all += count[n][s];
    if (s <= w) lower += count[n][s];
    if (s >= w) upper += count[n][s];
  }
  return std::min(1.0, 2.0 * std::min(lower, upper) / all);
}

double wilcoxon_normal(std::span<const double> a, std::span<const double> b) {
  check_samples(a, b);
  const double n = static_cast<double>(a.size());
  const double m = static_cast<double>(b.size());
  const double total = n + m;
  const double u = rank_sum_of_first(a, b) - n * (n + 1) / 2.0;

  std::vector<double> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j] == all[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double var = n * m / 12.0 * ((total + 1) - tie_term / (total * (total - 1)));
  if (!(var > 0.0)) return 1.0;
  const double z = std::max(0.0, std::abs(u - n * m / 2.0) - 0.5) / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

double wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b) {
  check_samples(a, b);
  if (std::max(a.size(), b.size()) <= kExactRankSumLimit && !has_ties(a, b)) return wilcoxon_exact(a, b);
  return wilcoxon_normal(a, b);
}

KruskalWallis kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw Error("Kruskal-Wallis needs at least two groups");
  std::vector<double> all;
  for (const auto& g : groups) {
    if (g.empty()) throw Error("Kruskal-Wallis groups must be non-empty");
    all.insert(all.end(), g.begin(), g.end());
  }
  const auto ranks = average_ranks(all);
  const double n = static_cast<double>(all.size());
  double sum = 0.0;
  std::size_t offset = 0;
  for (const auto& g : groups) {
    double r = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) r += ranks[offset + i];
    offset += g.size();
    sum += r * r / static_cast<double>(g.size());
  }
  double h = 12.0 / (n * (n + 1)) * sum - 3.0 * (n + 1);

  std::vector<double> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double correction = 1.0 - tie_term / (n * n * n - n);
  if (!(correction > 0.0)) return {0.0, 1.0};  // every value tied
  h = std::max(0.0, h / correction);
  const double df = static_cast<double>(groups.size() - 1);
  return {h, h == 0.0 ? 1.0 : boost::math::gamma_q(df / 2.0, h / 2.0)};
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::better:
      return "better";
    case Outcome::equal:
      return "equal";
    case Outcome::worse:
      return "worse";
  }
  return "?";
}

Outcome inverse(Outcome o) {
  if (o == Outcome::better) return Outcome::worse;
  if (o == Outcome::worse) return Outcome::better;
  return Outcome::equal;
}

double median(std::vector<double> v) {
  if (v.empty()) throw Error("median of empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : (v[h - 1] + v[h]) / 2.0;
}

Outcome pairwise_outcome(std::span<const double> a, std::span<const double> b,
                         const std::vector<std::vector<double>>& groups, double alpha) {
  if (kruskal_wallis(groups).p >= alpha) return Outcome::equal;
  const double k = static_cast<double>(groups.size());
  const double pairs = k * (k - 1) / 2.0;
  if (wilcoxon_rank_sum(a, b) >= alpha / pairs) return Outcome::equal;
  const double ma = median({a.begin(), a.end()});
  const double mb = median({b.begin(), b.end()});
  if (ma < mb) return Outcome::better;
  if (ma > mb) return Outcome::worse;
  return Outcome::equal;
}

double outcome_penalty(Outcome original, Outcome surrogate) {
  if (original == surrogate) return 0.0;
  if (original == Outcome::equal || surrogate == Outcome::equal) return 0.5;
  return 1.0;
}

double surrogate_error(const std::vector<std::vector<Outcome>>& original,
                       const std::vector<std::vector<Outcome>>& surrogate) {
  if (original.size() != surrogate.size() || original.empty()) {
    throw Error("surrogate_error: budget index sets differ or are empty");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < original.size(); ++t) {
    if (original[t].size() != surrogate[t].size() || original[t].empty()) {
      throw Error("surrogate_error: pair index sets differ at budget " + std::to_string(t));
    }
    double row = 0.0;
    for (std::size_t p = 0; p < original[t].size(); ++p) row += outcome_penalty(original[t][p], surrogate[t][p]);
    total += row / static_cast<double>(original[t].size());
  }
  return total / static_cast<double>(original.size());
}

}  // namespace surrobench
