#include "surrobench/censor_impute.hpp"

#include <algorithm>
#include <cmath>

namespace surrobench {

namespace {

// 1 / Mills ratio, phi(a) / (1 - Phi(a)), via the Laplace continued fraction; accurate for large a.
double inverse_mills_tail(double a) {
  double frac = a;
  for (int k = 60; k >= 1; --k) frac = a + k / frac;
  return frac;
}

}  // namespace

double trunc_normal_mean(double mu, double sigma, double lb) {
  if (!(sigma > 0.0)) throw Error("trunc_normal_mean requires sigma > 0");
  const double a = (lb - mu) / sigma;
  double hazard;
  if (a > 8.0) {
    hazard = inverse_mills_tail(a);
  } else {
    const double pdf = std::exp(-0.5 * a * a) / std::sqrt(2.0 * M_PI);
    hazard = pdf / (0.5 * std::erfc(a / std::sqrt(2.0)));
  }
  return std::max(lb, mu + sigma * hazard);
}

ImputationReport impute_censored(const CensoredProblem& p, const ForestConfig& cfg, std::uint64_t seed) {
  const std::size_t nu = p.y_u.size();
  const std::size_t nc = p.y_c.size();
  if (p.x_u.size() != nu * p.cols || p.x_c.size() != nc * p.cols) throw Error("imputation input shape mismatch");
  if (p.cardinalities.size() != p.cols) throw Error("imputation cardinalities do not match the column count");
  ImputationReport report;
  if (nc == 0) return report;
  if (nu == 0) throw Error("imputation needs at least one uncensored row");

  std::vector<double> x(p.x_u.begin(), p.x_u.end());
  x.insert(x.end(), p.x_c.begin(), p.x_c.end());
  std::vector<double> y(p.y_u.begin(), p.y_u.end());

  QuantileForest forest = QuantileForest::fit(
      MatrixView{std::span<const double>(x.data(), nu * p.cols), p.cols, y, p.cardinalities}, cfg, seed);
  std::vector<double> previous(p.y_c.begin(), p.y_c.end());
  std::vector<double> current(nc);
  while (true) {
    parallel_for(nc, [&](std::size_t i) {
      const auto row = p.x_c.subspan(i * p.cols, p.cols);
      const MeanVar mv = forest.predict_mean_var(row);
      const double lb = p.y_c[i];
      double v = mv.variance > 0.0 ? trunc_normal_mean(mv.mean, std::sqrt(mv.variance), lb) : std::max(mv.mean, lb);
      current[i] = std::max(lb, std::min(v, p.cap));
    });
    ++report.iterations;
    double change = 0.0;
    for (std::size_t i = 0; i < nc; ++i) change = std::max(change, std::abs(current[i] - previous[i]));
    report.max_change = change;
    previous = current;
    if (change < kImputeTolerance || report.iterations >= kImputeMaxIterations) break;
    y.resize(nu);
    y.insert(y.end(), current.begin(), current.end());
    forest = QuantileForest::fit(MatrixView{x, p.cols, y, p.cardinalities}, cfg, seed);
  }
  report.imputed = std::move(current);
  return report;
}

ImputationReport impute_matrix(TrainingMatrix& m, const ForestConfig& cfg, std::uint64_t seed) {
  std::vector<double> xu, yu, xc, yc;
  std::vector<std::size_t> censored_rows;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto row = m.row(i);
    if (m.censored[i]) {
      xc.insert(xc.end(), row.begin(), row.end());
      yc.push_back(m.y[i]);
      censored_rows.push_back(i);
    } else {
      xu.insert(xu.end(), row.begin(), row.end());
      yu.push_back(m.y[i]);
    }
  }
  CensoredProblem p{m.cols, m.cardinalities, xu, yu, xc, yc, m.response_cap};
  ImputationReport report = impute_censored(p, cfg, seed);
  for (std::size_t k = 0; k < censored_rows.size(); ++k) {
    m.y[censored_rows[k]] = report.imputed[k];
    m.censored[censored_rows[k]] = 0;
  }
  return report;
}

}  // namespace surrobench
