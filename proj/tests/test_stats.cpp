#include <cmath>
#include <numeric>

#include "doctest.h"
#include "surrobench/stats.hpp"
#include "surrobench/util.hpp"

using namespace surrobench;

namespace {

// Oracle: enumerate every assignment of the pooled ranks to the first sample.
double brute_force_rank_sum_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> all(a);
  all.insert(all.end(), b.begin(), b.end());
  const std::size_t total = all.size(), n = a.size();
  std::vector<double> sorted(all);
  std::sort(sorted.begin(), sorted.end());
  auto rank = [&](double v) { return static_cast<double>(std::lower_bound(sorted.begin(), sorted.end(), v) - sorted.begin() + 1); };
  double observed = 0;
  for (double v : a) observed += rank(v);
  double le = 0, ge = 0, count = 0;
  for (std::uint32_t mask = 0; mask < (1u << total); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != n) continue;
    double s = 0;
    for (std::size_t i = 0; i < total; ++i) {
      if (mask >> i & 1u) s += static_cast<double>(i + 1);
    }
    count += 1;
    if (s <= observed) le += 1;
    if (s >= observed) ge += 1;
  }
  return std::min(1.0, 2 * std::min(le, ge) / count);
}

// Oracle: H from the textbook formula without tie correction.
double textbook_h(const std::vector<std::vector<double>>& groups) {
  std::vector<double> all;
  for (const auto& g : groups) all.insert(all.end(), g.begin(), g.end());
  std::sort(all.begin(), all.end());
  const double n = static_cast<double>(all.size());
  double s = 0;
  for (const auto& g : groups) {
    double r = 0;
    for (double v : g) r += static_cast<double>(std::lower_bound(all.begin(), all.end(), v) - all.begin() + 1);
    s += r * r / static_cast<double>(g.size());
  }
  return 12 / (n * (n + 1)) * s - 3 * (n + 1);
}

std::vector<double> draw(Random& r, std::size_t n, double shift) {
  std::vector<double> v(n);
  for (auto& x : v) x = r.normal() + shift;
  return v;
}

}  // namespace

TEST_CASE("rmse") {
  const std::vector<double> t{1, 2, 3};
  CHECK(rmse(t, t) == 0.0);
  CHECK(rmse(std::vector<double>{0, 0}, std::vector<double>{0, 2}) == doctest::Approx(std::sqrt(2.0)));
  CHECK(rmse(std::vector<double>{1}, std::vector<double>{4}) == 3.0);
  CHECK_THROWS_AS(rmse(t, std::vector<double>{1}), Error);
}

TEST_CASE("spearman") {
  const std::vector<double> a{1, 2, 3, 4};
  CHECK(spearman(a, std::vector<double>{10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman(a, std::vector<double>{4, 3, 2, 1}) == doctest::Approx(-1.0));
  // Average ranks of b are (1, 2.5, 2.5, 4): covariance 4.5, variances 5 and 4.5.
  CHECK(spearman(a, std::vector<double>{1, 2, 2, 4}) == doctest::Approx(4.5 / std::sqrt(5.0 * 4.5)));
  CHECK(spearman(a, std::vector<double>{1, 2, 2, 4}) == doctest::Approx(0.9487).epsilon(1e-4));
  CHECK_THROWS_AS(spearman(a, std::vector<double>{1, 1, 1, 1}), Error);
}

TEST_CASE("wilcoxon rank-sum examples") {
  CHECK(wilcoxon_rank_sum(std::vector<double>{1, 2, 3}, std::vector<double>{4, 5, 6}) == doctest::Approx(0.1));
  const std::vector<double> a{3, 1, 4, 1, 5};
  CHECK(wilcoxon_rank_sum(a, a) == 1.0);
  CHECK_THROWS_AS(wilcoxon_rank_sum(std::vector<double>{}, a), Error);
}

TEST_CASE("normal approximation against exact at n = m = 7, every rank split") {
  // All C(14, 7) assignments of ranks 1..14 to the first sample.
  double worst_tail = 0, worst = 0;
  for (std::uint32_t mask = 0; mask < (1u << 14); ++mask) {
    if (__builtin_popcount(mask) != 7) continue;
    std::vector<double> a, b;
    for (int i = 0; i < 14; ++i) (mask >> i & 1u ? a : b).push_back(i + 1);
    const double exact = wilcoxon_exact(a, b);
    const double gap = std::abs(wilcoxon_normal(a, b) - exact);
    worst = std::max(worst, gap);
    if (exact <= 0.25) worst_tail = std::max(worst_tail, gap);
  }
  // Within 0.01 wherever a test at conventional levels could reject; the
  // continuity-corrected approximation peaks at 0.0124 near p = 0.46.
  CHECK(worst_tail <= 0.01);
  CHECK(worst <= 0.0125);
}

TEST_CASE("property: exact rank-sum matches enumeration for all n, m <= 7") {
  Random r(8);
  for (std::size_t n = 1; n <= 7; ++n) {
    for (std::size_t m = 1; m <= 7; ++m) {
      for (int t = 0; t < 4; ++t) {
        const auto a = draw(r, n, r.uniform(-1, 1));
        const auto b = draw(r, m, 0);
        CHECK(std::abs(wilcoxon_exact(a, b) - brute_force_rank_sum_p(a, b)) <= 1e-12);
        CHECK(wilcoxon_rank_sum(a, b) == wilcoxon_exact(a, b));
      }
    }
  }
}

TEST_CASE("rank-sum switches to the approximation on ties or large samples") {
  const std::vector<double> tied{1, 2, 2, 3};
  const std::vector<double> other{4, 5, 6};
  CHECK(wilcoxon_rank_sum(tied, other) == wilcoxon_normal(tied, other));
  Random r(9);
  const auto big = draw(r, 13, 0);
  const auto small = draw(r, 5, 1);
  CHECK(wilcoxon_rank_sum(big, small) == wilcoxon_normal(big, small));
  CHECK(wilcoxon_normal(std::vector<double>{2, 2}, std::vector<double>{2, 2, 2}) == 1.0);
}

TEST_CASE("kruskal-wallis") {
  const auto kw = kruskal_wallis({{1, 2, 3}, {4, 5, 6}});
  CHECK(kw.h == doctest::Approx(3.857142857).epsilon(1e-9));
  CHECK(kw.h == doctest::Approx(textbook_h({{1, 2, 3}, {4, 5, 6}})));
  // Chi-squared(1) upper tail at 27/7.
  CHECK(kw.p == doctest::Approx(std::erfc(std::sqrt(kw.h / 2))).epsilon(1e-10));
  const auto balanced = kruskal_wallis({{1, 6, 8}, {2, 4, 9}, {3, 5, 7}});
  CHECK(balanced.h == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(balanced.p == doctest::Approx(1.0));
  CHECK_THROWS_AS(kruskal_wallis({{1, 2}}), Error);
  CHECK(kruskal_wallis({{1, 1}, {1, 1}}).p == 1.0);
}

TEST_CASE("property: kruskal-wallis H is non-negative and matches the formula without ties") {
  Random r(10);
  for (int t = 0; t < 300; ++t) {
    std::vector<std::vector<double>> g(2 + r.index(4));
    for (auto& v : g) v = draw(r, 1 + r.index(8), r.uniform(-1, 1));
    const auto kw = kruskal_wallis(g);
    CHECK(kw.h >= 0.0);
    CHECK(kw.p >= 0.0);
    CHECK(kw.p <= 1.0);
    CHECK(kw.h == doctest::Approx(std::max(0.0, textbook_h(g))).epsilon(1e-9));
  }
}

TEST_CASE("pairwise outcome") {
  SUBCASE("identical groups are equal") {
    std::vector<double> a{1, 2, 3, 4, 5};
    CHECK(pairwise_outcome(a, a, {a, a, a}) == Outcome::equal);
  }
  SUBCASE("clear separation with ten runs each") {
    std::vector<double> a, b;
    for (int i = 0; i < 10; ++i) {
      a.push_back(1 + 0.2 * i);
      b.push_back(40 + 2.0 * i);
    }
    CHECK(pairwise_outcome(a, b, {a, b}) == Outcome::better);
    CHECK(pairwise_outcome(b, a, {a, b}) == Outcome::worse);
  }
  SUBCASE("three runs cannot reach significance") {
    std::vector<double> a{1, 2, 3}, b{40, 50, 60};
    CHECK(pairwise_outcome(a, b, {a, b}) == Outcome::equal);
  }
}

TEST_CASE("property: pairwise outcome is antisymmetric") {
  Random r(11);
  for (int t = 0; t < 300; ++t) {
    std::vector<std::vector<double>> g(2 + r.index(3));
    for (auto& v : g) v = draw(r, 3 + r.index(12), r.uniform(-2, 2));
    const auto& a = g[0];
    const auto& b = g[1];
    CHECK(pairwise_outcome(a, b, g) == inverse(pairwise_outcome(b, a, g)));
  }
}

TEST_CASE("surrogate error metric") {
  using O = Outcome;
  CHECK(surrogate_error({{O::better, O::equal}}, {{O::better, O::equal}}) == 0.0);
  CHECK(surrogate_error({{O::better}}, {{O::worse}}) == 1.0);
  CHECK(surrogate_error({{O::better}}, {{O::equal}}) == 0.5);
  // Mean over pairs then budgets: (0.5 + 0) / 2 = 0.25, then (0.25 + 1) / 2.
  CHECK(surrogate_error({{O::better, O::equal}, {O::worse}}, {{O::equal, O::equal}, {O::better}}) == 0.625);
  CHECK_THROWS_AS(surrogate_error({{O::better}}, {{O::better, O::equal}}), Error);
}

TEST_CASE("property: surrogate error symmetric and bounded") {
  Random r(12);
  for (int t = 0; t < 500; ++t) {
    const std::size_t budgets = 1 + r.index(5), pairs = 1 + r.index(6);
    std::vector<std::vector<Outcome>> a(budgets), b(budgets);
    for (std::size_t i = 0; i < budgets; ++i) {
      for (std::size_t j = 0; j < pairs; ++j) {
        a[i].push_back(static_cast<Outcome>(r.index(3)));
        b[i].push_back(static_cast<Outcome>(r.index(3)));
      }
    }
    const double e = surrogate_error(a, b);
    CHECK(e == surrogate_error(b, a));
    CHECK(e >= 0.0);
    CHECK(e <= 1.0);
  }
}
