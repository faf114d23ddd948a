#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "surrobench/qrf.hpp"
#include "surrobench/run_data.hpp"

namespace surrobench {

/// Imputation stops once no value moves by more than this (log10 units).
inline constexpr double kImputeTolerance = 1e-3;
inline constexpr std::size_t kImputeMaxIterations = 10;

struct ImputationReport {
  std::vector<double> imputed;  // aligned with the censored rows
  std::size_t iterations = 0;
  double max_change = 0.0;
};

/// E[Z | Z >= lb] for Z ~ N(mu, sigma^2).
double trunc_normal_mean(double mu, double sigma, double lb);

/// Row-major inputs of the uncensored (u) and censored (c) rows; y_c are lower bounds.
struct CensoredProblem {
  std::size_t cols = 0;
  std::span<const std::uint32_t> cardinalities;
  std::span<const double> x_u;
  std::span<const double> y_u;
  std::span<const double> x_c;
  std::span<const double> y_c;
  /// Upper clamp for imputed values (+inf when unbounded).
  double cap = 0.0;
};

ImputationReport impute_censored(const CensoredProblem& p, const ForestConfig& cfg, std::uint64_t seed);

/// Replaces the censored responses of `m` by their imputations and clears the mask.
ImputationReport impute_matrix(TrainingMatrix& m, const ForestConfig& cfg, std::uint64_t seed);

}  // namespace surrobench
