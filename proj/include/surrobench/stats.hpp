#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace surrobench {

double rmse(std::span<const double> truth, std::span<const double> pred);

/// Pearson correlation of average ranks. Throws on constant input.
double spearman(std::span<const double> a, std::span<const double> b);

/// Average (1-based) ranks; ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> v);

/// Two-sided rank-sum p-value: exact when max(|a|, |b|) <= 12 and there are no
/// ties, normal approximation otherwise.
double wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b);
/// Exact permutation p-value; requires tie-free data.
double wilcoxon_exact(std::span<const double> a, std::span<const double> b);
/// Normal approximation with tie and continuity correction.
double wilcoxon_normal(std::span<const double> a, std::span<const double> b);

inline constexpr std::size_t kExactRankSumLimit = 12;

struct KruskalWallis {
  double h = 0.0;
  double p = 1.0;
};

KruskalWallis kruskal_wallis(const std::vector<std::vector<double>>& groups);

enum class Outcome { better, equal, worse };

std::string_view to_string(Outcome o);
Outcome inverse(Outcome o);

/// Kruskal-Wallis gate over all groups, then a Bonferroni-corrected rank-sum
/// test of (a, b); lower median is better.
Outcome pairwise_outcome(std::span<const double> a, std::span<const double> b,
                         const std::vector<std::vector<double>>& groups, double alpha = 0.05);

/// Disagreement penalty between two outcomes: 0 match, 0.5 equal vs decided, 1 opposite.
double outcome_penalty(Outcome original, Outcome surrogate);

/// Outcomes indexed [budget][pair]. Mean penalty over pairs, then over budgets.
double surrogate_error(const std::vector<std::vector<Outcome>>& original,
                       const std::vector<std::vector<Outcome>>& surrogate);

double median(std::vector<double> v);

}  // namespace surrobench
