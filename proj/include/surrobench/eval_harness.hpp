#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "surrobench/configurators.hpp"
#include "surrobench/stats.hpp"
#include "surrobench/surrogate.hpp"

namespace surrobench {

// ---------------------------------------------------------------------------
// Data collection

struct CollectOptions {
  std::vector<std::string> configurators{"random", "roar"};
  std::size_t repetitions = 5;
  ConfiguratorOptions configurator;
  /// Validate each run's last incumbents on the test instances.
  bool validate = true;
  std::size_t max_incumbents = 10;
  std::uint64_t seed = 1;
};

/// Seed of repetition `rep` of the `index`-th configurator; shared by every harness entry point.
std::uint64_t repetition_seed(std::uint64_t master, std::size_t index, std::size_t rep);

/// Runs every (configurator, repetition) cell and exports the logs as one dataset.
Dataset collect_runs(const BenchmarkBackend& backend, const CollectOptions& opts);

// ---------------------------------------------------------------------------
// Split plans

struct DataSplit {
  std::string name;
  std::vector<RunLabel> train;
  std::vector<RunLabel> held_out;
};

using SplitPlan = std::vector<DataSplit>;

/// Distinct run labels of a dataset, sorted.
std::vector<RunLabel> run_labels(const Dataset& ds);
/// Records whose source is one of `labels`, in dataset order.
Dataset select_runs(const Dataset& ds, const std::vector<RunLabel>& labels);

/// Split r holds out repetition r of every configurator.
SplitPlan loro_splits(const Dataset& ds);
/// One split per configurator, holding out all of its runs.
SplitPlan loco_splits(const Dataset& ds);

// ---------------------------------------------------------------------------
// Model quality

struct QualityRow {
  std::string split;
  std::string scope;  // "configuration", "validation", or either with "/<configurator>"
  std::size_t rows = 0;
  double rmse = 0.0;
  std::optional<double> cc;  // missing when the truth or the predictions are constant
};

struct QualityReport {
  std::vector<QualityRow> rows;
  /// Per scope: mean RMSE and mean/median CC over the splits where they are defined.
  struct Summary {
    std::string scope;
    std::size_t splits = 0;
    double mean_rmse = 0.0;
    std::optional<double> mean_cc;
    std::optional<double> median_cc;
  };
  std::vector<Summary> summary;

  const Summary* find(const std::string& scope) const;
  nlohmann::json to_json() const;
  void write_csv(std::ostream& out) const;
};

/// Builds a surrogate per split and scores median predictions on the held-out
/// rows. Censored and crashed held-out rows carry no usable truth and are skipped.
QualityReport model_quality(const Dataset& ds, const SplitPlan& plan, const BuildOptions& opts, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Fidelity comparison

struct CompareOptions {
  std::vector<std::string> configurators{"roar", "ils", "random"};
  std::size_t n_runs = 10;
  ConfiguratorOptions configurator;  // budget is the per-run total
  /// Budget grid; empty means default_budget_grid.
  std::vector<double> grid;
  /// Training-cost evaluations per incumbent: every training instance this many times.
  std::size_t seeds_per_instance = 1;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  /// Requests used for the speedup estimate; 0 skips timing.
  std::size_t timing_requests = 1000;
};

/// `points` log-spaced budgets from the cutoff (time) or 2 (evaluations) up to the total.
std::vector<double> default_budget_grid(const Budget& total, double cutoff, std::size_t points = 20);

struct TrajectoryPoint {
  double budget = 0.0;
  std::size_t run = 0;
  std::string configurator;
  std::string backend;
  double cost = 0.0;
};

struct Timing {
  std::size_t requests = 0;
  double mean_original_cost = 0.0;  // seconds of target time per evaluation
  double mean_latency = 0.0;        // wall seconds per surrogate evaluation
  double speedup = 0.0;
};

struct FidelityReport {
  std::vector<std::string> configurators;
  std::vector<double> grid;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  /// Best training cost found, [configurator][run][budget].
  std::vector<std::vector<std::vector<double>>> original_performance;
  std::vector<std::vector<std::vector<double>>> surrogate_performance;
  /// Outcomes, [budget][pair].
  std::vector<std::vector<Outcome>> original_outcomes;
  std::vector<std::vector<Outcome>> surrogate_outcomes;
  double error = 0.0;
  /// Wall-clock measurements; kept apart from the reproducible part.
  std::optional<Timing> timing;

  std::vector<TrajectoryPoint> trajectory_points() const;
  /// Reproducible content only unless `with_timing`.
  nlohmann::json to_json(bool with_timing = false) const;
  void write_outcomes_csv(std::ostream& out) const;
  void write_trajectories_csv(std::ostream& out) const;
};

/// Runs every configurator n_runs times on both backends with matched seeds
/// and scores the agreement of the pairwise outcomes.
FidelityReport compare(const BenchmarkBackend& original, const BenchmarkBackend& surrogate,
                       const CompareOptions& opts);

/// Mean PAR10 of a configuration over the training instances, with fixed seeds.
double training_cost(const BenchmarkBackend& backend, const Configuration& config, std::size_t seeds_per_instance,
                     std::uint64_t seed);

}  // namespace surrobench
