#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <string_view>

#include "json.hpp"
#include "surrobench/censor_impute.hpp"
#include "surrobench/qrf.hpp"
#include "surrobench/run_data.hpp"

namespace surrobench {

inline constexpr std::uint32_t kModelFormatVersion = 1;
inline constexpr std::size_t kDefaultSubsampleCap = 1000000;

/// Model file could not be read. `kind` distinguishes the failure.
class ModelFileError : public Error {
 public:
  enum class Kind { bad_magic, version, truncated, digest, corrupt };
  ModelFileError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct LossBounds {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

struct BuildOptions {
  TrainingSetting setting = TrainingSetting::all;
  ForestConfig forest;
  std::size_t subsample_cap = kDefaultSubsampleCap;
  /// Answer every request with the median instead of a seeded quantile.
  bool deterministic_target = false;
  LossBounds loss_bounds;  // quality objective only
};

struct Provenance {
  TrainingSetting setting = TrainingSetting::all;
  std::string dataset_digest;  // SHA-256 of the canonical run log
  std::uint64_t seed = 0;
  std::size_t records = 0;
  std::size_t crashed_removed = 0;
  std::size_t training_rows = 0;
  std::size_t censored_rows = 0;
  std::size_t imputation_iterations = 0;
  double imputation_change = 0.0;
};

struct RunResult {
  RunStatus status = RunStatus::success;  // success or timeout
  double cost = 0.0;
  double raw_prediction = 0.0;  // response space (log10 seconds for runtime)
  double quantile = 0.5;

  bool operator==(const RunResult&) const = default;
};

class SurrogateBenchmark {
 public:
  /// filter_crashed -> subsample -> build_matrix -> impute_censored -> fit.
  static SurrogateBenchmark build(const Dataset& ds, const BuildOptions& opts, std::uint64_t seed);

  RunResult predict_run(const Configuration& config, std::string_view instance, std::int64_t seed) const;
  /// Quantile used for a request: 0.5 for deterministic targets, else a hash of (config, instance, seed).
  double quantile_for(const Configuration& config, std::string_view instance, std::int64_t seed) const;
  std::vector<double> model_input(const Configuration& config, std::string_view instance) const;
  /// Median prediction in response space.
  double predict_median(const Configuration& config, std::string_view instance) const;

  std::string serialize() const;
  static SurrogateBenchmark deserialize(std::string_view bytes);
  void save(const std::string& path) const;
  static SurrogateBenchmark load(const std::string& path);

  /// Metadata for the protocol's info op: space text, instances, cutoff, objective, provenance.
  nlohmann::json info() const;

  const ConfigurationSpace& space() const { return *space_; }
  std::shared_ptr<const ConfigurationSpace> space_ptr() const { return space_; }
  const InstanceSet& instances() const { return *instances_; }
  std::shared_ptr<const InstanceSet> instances_ptr() const { return instances_; }
  double cutoff() const { return cutoff_; }
  Objective objective() const { return objective_; }
  bool deterministic_target() const { return deterministic_; }
  const LossBounds& loss_bounds() const { return bounds_; }
  const QuantileForest& forest() const { return forest_; }
  const Provenance& provenance() const { return provenance_; }

 private:
  std::shared_ptr<const ConfigurationSpace> space_;
  std::shared_ptr<const InstanceSet> instances_;
  double cutoff_ = 0.0;
  Objective objective_ = Objective::runtime;
  bool deterministic_ = false;
  LossBounds bounds_;
  QuantileForest forest_;
  Provenance provenance_;
};

/// Maps a log10 runtime prediction to a run result: 10^y at or above the cutoff is a
/// timeout scored at the penalty factor times the cutoff. The quantile field is left at 0.
RunResult runtime_result(double y, double cutoff);

/// Hash-derived quantile in [0, 1) for a (config, instance, seed) triple.
double seeded_quantile(const Configuration& config, std::string_view instance, std::int64_t seed);

/// Digest of the canonical run log of a dataset.
std::string dataset_digest(const Dataset& ds);

}  // namespace surrobench
