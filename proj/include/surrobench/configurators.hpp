#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "surrobench/config_space.hpp"
#include "surrobench/run_data.hpp"
#include "surrobench/surrogate.hpp"

namespace surrobench {

class Client;

/// Outcome of one (possibly capped) target run.
struct Evaluation {
  RunStatus status = RunStatus::success;  // success, timeout or censored
  double cost = 0.0;      // score: runtime, 10 * cutoff on timeout, the cap when censored, or the loss
  double consumed = 0.0;  // seconds charged to a time budget

  bool operator==(const Evaluation&) const = default;
};

/// Applies a per-run cap to an uncapped runtime. A cap at or above the cutoff means no capping.
Evaluation capped_runtime(double runtime, double cutoff, double cap);

class BenchmarkBackend {
 public:
  virtual ~BenchmarkBackend() = default;
  virtual const ConfigurationSpace& space() const = 0;
  virtual std::shared_ptr<const ConfigurationSpace> space_ptr() const = 0;
  virtual const InstanceSet& instances() const = 0;
  virtual std::shared_ptr<const InstanceSet> instances_ptr() const = 0;
  virtual double cutoff() const = 0;
  virtual Objective objective() const = 0;
  /// Deterministic in (config, instance, seed, cap).
  virtual Evaluation evaluate(const Configuration& config, const std::string& instance, std::int64_t seed,
                              double cap) const = 0;
};

/// Answers evaluations from a fitted surrogate model.
class SurrogateBackend : public BenchmarkBackend {
 public:
  explicit SurrogateBackend(std::shared_ptr<const SurrogateBenchmark> model) : model_(std::move(model)) {}
  const ConfigurationSpace& space() const override { return model_->space(); }
  std::shared_ptr<const ConfigurationSpace> space_ptr() const override { return model_->space_ptr(); }
  const InstanceSet& instances() const override { return model_->instances(); }
  std::shared_ptr<const InstanceSet> instances_ptr() const override { return model_->instances_ptr(); }
  double cutoff() const override { return model_->cutoff(); }
  Objective objective() const override { return model_->objective(); }
  Evaluation evaluate(const Configuration& config, const std::string& instance, std::int64_t seed,
                      double cap) const override;
  const SurrogateBenchmark& model() const { return *model_; }

 private:
  std::shared_ptr<const SurrogateBenchmark> model_;
};

/// Client side of the wire protocol, usable wherever a local backend is.
class RemoteBackend : public BenchmarkBackend {
 public:
  RemoteBackend(const std::string& host, std::uint16_t port);
  ~RemoteBackend() override;
  const ConfigurationSpace& space() const override { return *space_; }
  std::shared_ptr<const ConfigurationSpace> space_ptr() const override { return space_; }
  const InstanceSet& instances() const override { return *instances_; }
  std::shared_ptr<const InstanceSet> instances_ptr() const override { return instances_; }
  double cutoff() const override { return cutoff_; }
  Objective objective() const override { return objective_; }
  Evaluation evaluate(const Configuration& config, const std::string& instance, std::int64_t seed,
                      double cap) const override;

 private:
  std::unique_ptr<Client> client_;
  mutable std::mutex mutex_;
  mutable std::int64_t next_id_ = 1;
  std::shared_ptr<const ConfigurationSpace> space_;
  std::shared_ptr<const InstanceSet> instances_;
  double cutoff_ = 0.0;
  Objective objective_ = Objective::runtime;
};

// ---------------------------------------------------------------------------
// Configurator runs

struct Budget {
  enum class Kind { time, evaluations };
  Kind kind = Kind::evaluations;
  double limit = 0.0;

  static Budget seconds(double s) { return {Kind::time, s}; }
  static Budget evaluations(double n) { return {Kind::evaluations, n}; }
};

struct TrajectoryEntry {
  double budget = 0.0;  // consumed when this incumbent/estimate took effect
  Configuration incumbent;
  double estimate = 0.0;  // mean cost over the incumbent's runs

  bool operator==(const TrajectoryEntry&) const = default;
};

struct Trajectory {
  std::vector<TrajectoryEntry> entries;

  /// Lowest incumbent estimate recorded at or before `budget` (+inf before the first entry).
  double best_at(double budget) const;
  const TrajectoryEntry& final_entry() const { return entries.back(); }
  bool operator==(const Trajectory&) const = default;
};

struct RunLogEntry {
  Configuration config;
  std::string instance;
  std::int64_t seed = 0;
  double cap = 0.0;
  Evaluation result;

  bool operator==(const RunLogEntry&) const = default;
};

struct AcceptedMove {
  Configuration from;
  Configuration to;
};

struct ConfiguratorResult {
  std::string configurator;
  Trajectory trajectory;
  std::vector<RunLogEntry> log;
  std::vector<AcceptedMove> moves;  // local-search moves (ils only)
  double consumed = 0.0;

  const Configuration& incumbent() const { return trajectory.final_entry().incumbent; }
};

struct ConfiguratorOptions {
  Budget budget;
  /// Adaptive capping bound multiplier.
  double slack = 1.3;
  bool adaptive_capping = true;
  /// Random search: runs per sampled configuration.
  std::size_t runs_per_config = 1;
  /// Upper bound on runs collected for one incumbent.
  std::size_t max_incumbent_runs = 2000;
  /// ils.
  double restart_prob = 0.01;
  std::size_t perturb_strength = 3;
  std::size_t initial_random = 10;
  /// smac_lite: share of pure random challengers.
  double random_fraction = 0.5;
  std::size_t random_candidates = 100;
  NeighborOptions neighborhood;
};

ConfiguratorResult random_search(const BenchmarkBackend& backend, const ConfiguratorOptions& opts,
                                 std::uint64_t seed);
ConfiguratorResult roar(const BenchmarkBackend& backend, const ConfiguratorOptions& opts, std::uint64_t seed);
ConfiguratorResult ils(const BenchmarkBackend& backend, const ConfiguratorOptions& opts, std::uint64_t seed);
ConfiguratorResult smac_lite(const BenchmarkBackend& backend, const ConfiguratorOptions& opts, std::uint64_t seed);

/// Dispatch by name: "random", "roar", "ils", "smac".
ConfiguratorResult run_configurator(const std::string& name, const BenchmarkBackend& backend,
                                    const ConfiguratorOptions& opts, std::uint64_t seed);

/// Closed-form expected improvement below `best` for a N(mu, sigma^2) prediction.
double expected_improvement(double mu, double sigma, double best);

// ---------------------------------------------------------------------------
// Export

struct LabeledRun {
  RunLabel label;
  const ConfiguratorResult* result = nullptr;
};

/// Runs the `max_incumbents` most recent distinct incumbents of a trajectory on every
/// test instance (one seed each); the returned records are flagged as validations.
std::vector<RunRecord> validate_incumbents(const BenchmarkBackend& backend, const ConfiguratorResult& result,
                                           const RunLabel& label, std::uint64_t seed, std::size_t max_incumbents = 10);

/// Run logs in run_data form, labelled by configurator and repetition. Capped runs become CENSORED.
Dataset export_dataset(const BenchmarkBackend& backend, const std::vector<LabeledRun>& runs,
                       const std::vector<RunRecord>& validations = {});

}  // namespace surrobench
