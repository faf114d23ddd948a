#include <cmath>

#include "doctest.h"
#include "generators.hpp"
#include "surrobench/censor_impute.hpp"

using namespace surrobench;

namespace {

// Oracle: E[Z | Z >= lb] by composite Simpson quadrature of the truncated density on [lb, lb + 20 sigma].
double simpson_trunc_mean(double mu, double sigma, double lb) {
  const int n = 200000;
  const double a = lb, b = lb + 20 * sigma, h = (b - a) / n;
  double num = 0, den = 0;
  for (int i = 0; i <= n; ++i) {
    const double z = a + i * h;
    const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    const double dens = std::exp(-0.5 * ((z - mu) / sigma) * ((z - mu) / sigma));
    num += w * z * dens;
    den += w * dens;
  }
  return num / den;
}

struct Problem {
  gen::Matrix u, c;
  std::vector<double> truth;
};

// Log-normal runtimes: log10 t = 1 + 1.5 x0 - x1 + 0.2 z; 30% of rows censored at U * t.
Problem lognormal_problem(Random& r, std::size_t n) {
  Problem p;
  p.u.cols = p.c.cols = 2;
  p.u.cards = p.c.cards = {0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    const double x0 = r.uniform(), x1 = r.uniform();
    const double y = 1 + 1.5 * x0 - x1 + 0.2 * r.normal();
    if (r.bernoulli(0.3)) {
      p.c.x.insert(p.c.x.end(), {x0, x1});
      p.c.y.push_back(y + std::log10(r.uniform(0.02, 1.0)));
      p.truth.push_back(y);
    } else {
      p.u.x.insert(p.u.x.end(), {x0, x1});
      p.u.y.push_back(y);
    }
  }
  return p;
}

CensoredProblem view(const Problem& p, double cap = std::numeric_limits<double>::infinity()) {
  return {2, p.u.cards, p.u.x, p.u.y, p.c.x, p.c.y, cap};
}

}  // namespace

TEST_CASE("truncated normal mean against quadrature") {
  CHECK(trunc_normal_mean(0, 1, 0) == doctest::Approx(0.79788).epsilon(1e-5));
  CHECK(trunc_normal_mean(0, 1, 3) == doctest::Approx(3.28310).epsilon(1e-5));
  for (double lb : {-2.0, 0.0, 0.7, 3.0, 6.0}) {
    CHECK(trunc_normal_mean(1.5, 2.0, lb) == doctest::Approx(simpson_trunc_mean(1.5, 2.0, lb)).epsilon(1e-8));
  }
  CHECK(simpson_trunc_mean(0, 1, 0) == doctest::Approx(std::sqrt(2 / M_PI)).epsilon(1e-9));
}

TEST_CASE("truncated normal mean in the tails") {
  CHECK(std::abs(trunc_normal_mean(4.0, 0.5, 4.0 - 10 * 0.5) - 4.0) < 1e-6 * 0.5);
  // Beyond the crossover the continued fraction takes over; both branches must agree near it.
  const double below = trunc_normal_mean(0, 1, 8.0 - 1e-9);
  const double above = trunc_normal_mean(0, 1, 8.0 + 1e-9);
  CHECK(below == doctest::Approx(above).epsilon(1e-9));
  // Asymptotically the excess over the bound behaves like 1 / a.
  const double a = 40.0;
  CHECK(trunc_normal_mean(0, 1, a) - a == doctest::Approx(1 / a - 2 / (a * a * a)).epsilon(1e-4));
  CHECK(trunc_normal_mean(0, 1, 1e6) >= 1e6);
  CHECK_THROWS_AS(trunc_normal_mean(0, 0, 1), Error);
}

TEST_CASE("no censored rows means no iterations") {
  Random r(1);
  auto p = lognormal_problem(r, 50);
  p.c = {2, {}, {}, {0, 0}};
  p.truth.clear();
  const auto rep = impute_censored(view(p), ForestConfig{}, 1);
  CHECK(rep.imputed.empty());
  CHECK(rep.iterations == 0);
}

TEST_CASE("imputation needs uncensored data and consistent shapes") {
  Random r(1);
  auto p = lognormal_problem(r, 50);
  auto v = view(p);
  v.y_u = {};
  v.x_u = {};
  CHECK_THROWS_AS(impute_censored(v, ForestConfig{}, 1), Error);
  v = view(p);
  v.x_c = v.x_c.subspan(1);
  CHECK_THROWS_AS(impute_censored(v, ForestConfig{}, 1), Error);
}

TEST_CASE("imputation beats the raw lower bounds on log-normal data") {
  int wins = 0;
  for (int rep = 0; rep < 20; ++rep) {
    Random r(derive_seed(100, rep));
    const auto p = lognormal_problem(r, 400);
    const auto out = impute_censored(view(p), ForestConfig{}, rep);
    double mae_imp = 0, mae_raw = 0;
    for (std::size_t i = 0; i < p.truth.size(); ++i) {
      mae_imp += std::abs(out.imputed[i] - p.truth[i]);
      mae_raw += std::abs(p.c.y[i] - p.truth[i]);
    }
    if (mae_imp < mae_raw) ++wins;
    CHECK(out.iterations <= kImputeMaxIterations);
  }
  CHECK(wins >= 16);
}

TEST_CASE("property: imputations respect bounds and cap, deterministically") {
  for (int t = 0; t < 10; ++t) {
    Random r(derive_seed(200, t));
    const auto p = lognormal_problem(r, 100 + r.index(200));
    const double cap = 2.0;
    const auto a = impute_censored(view(p, cap), ForestConfig{}, t);
    const auto b = impute_censored(view(p, cap), ForestConfig{}, t);
    CHECK(a.imputed == b.imputed);
    REQUIRE(a.imputed.size() == p.c.y.size());
    for (std::size_t i = 0; i < a.imputed.size(); ++i) {
      CHECK(a.imputed[i] >= p.c.y[i]);
      if (p.c.y[i] <= cap) CHECK(a.imputed[i] <= cap);
    }
  }
}

TEST_CASE("impute_matrix replaces only censored responses") {
  Random r(3);
  TrainingMatrix m;
  m.cols = 1;
  m.cardinalities = {0};
  m.response_cap = 3.0;
  for (int i = 0; i < 100; ++i) {
    const double x = r.uniform();
    m.x.push_back(x);
    m.y.push_back(2 * x);
    m.censored.push_back(i % 4 == 0);
  }
  const auto before = m.y;
  const auto rep = impute_matrix(m, ForestConfig{}, 1);
  CHECK(rep.imputed.size() == 25);
  for (int i = 0; i < 100; ++i) {
    CHECK(m.censored[i] == 0);
    if (i % 4) CHECK(m.y[i] == before[i]);
    else CHECK(m.y[i] >= before[i]);
  }
  TrainingMatrix clean = m;
  const auto again = impute_matrix(clean, ForestConfig{}, 1);
  CHECK(again.iterations == 0);
  CHECK(clean.y == m.y);
}
