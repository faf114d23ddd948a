#pragma once

#include <compare>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "surrobench/config_space.hpp"

namespace surrobench {

enum class RunStatus { success, timeout, censored, crashed };
enum class Objective { runtime, quality };
enum class Split { train, test };

/// Which rows enter a training matrix.
enum class TrainingSetting {
  train_only,                  // runs on training instances
  train_plus_test_incumbents,  // plus incumbent validations on test instances
  all,
};

std::string_view to_string(RunStatus s);
std::string_view to_string(Objective o);
std::string_view to_string(Split s);
std::string_view to_string(TrainingSetting s);
RunStatus parse_status(std::string_view s);
Objective parse_objective(std::string_view s);
Split parse_split(std::string_view s);
/// Accepts "I"/"train_only", "II"/"train_plus_test_incumbents", "all".
TrainingSetting parse_setting(std::string_view s);

/// Runtimes below this floor are lifted to it before the log transform.
inline constexpr double kRuntimeFloor = 0.005;
/// Timeouts are scored as this multiple of the cutoff.
inline constexpr double kPenaltyFactor = 10.0;

/// Identifies one configurator run: (configurator name, repetition index).
struct RunLabel {
  std::string configurator;
  int repetition = 0;

  auto operator<=>(const RunLabel&) const = default;
  bool operator==(const RunLabel&) const = default;
  std::string str() const { return configurator + "#" + std::to_string(repetition); }
};

struct RunRecord {
  Configuration config;
  std::string instance;
  std::int64_t seed = 0;
  RunStatus status = RunStatus::success;
  double measured_cost = 0.0;
  double cutoff = 0.0;
  RunLabel source;
  bool is_validation = false;
};

class InstanceSet {
 public:
  InstanceSet(std::vector<std::string> ids, std::vector<std::vector<double>> features, std::vector<Split> splits);

  std::size_t size() const { return ids_.size(); }
  std::size_t feature_dim() const { return feature_dim_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  std::optional<std::size_t> find(std::string_view id) const;
  std::span<const double> features(std::size_t i) const { return features_[i]; }
  Split split(std::size_t i) const { return splits_[i]; }
  /// Ids of the instances with the given split, in declaration order.
  std::vector<std::string> ids_in(Split s) const;

  bool operator==(const InstanceSet& other) const {
    return ids_ == other.ids_ && features_ == other.features_ && splits_ == other.splits_;
  }

 private:
  std::vector<std::string> ids_;
  std::vector<std::vector<double>> features_;
  std::vector<Split> splits_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::size_t feature_dim_ = 0;
};

struct Dataset {
  std::shared_ptr<const ConfigurationSpace> space;
  std::shared_ptr<const InstanceSet> instances;
  Objective objective = Objective::runtime;
  std::vector<RunRecord> records;

  /// Largest cutoff among the records (0 when empty).
  double cutoff() const;
  Dataset with_records(std::vector<RunRecord> r) const { return Dataset{space, instances, objective, std::move(r)}; }
};

struct TrainingMatrix {
  std::size_t cols = 0;
  std::vector<double> x;  // row-major
  std::vector<double> y;
  std::vector<std::uint8_t> censored;
  std::vector<std::uint32_t> cardinalities;  // per column; 0 = numeric
  std::vector<std::size_t> record_index;     // source record of each row
  /// log10(10 * cutoff) for runtime data; +inf for quality data.
  double response_cap = 0.0;

  std::size_t rows() const { return y.size(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * cols, cols}; }
};

// ---------------------------------------------------------------------------
// Ingestion

InstanceSet read_instances(std::istream& in);
InstanceSet read_instances_file(const std::string& path);
void write_instances(std::ostream& out, const InstanceSet& instances);

/// Parses a run log; every row is validated against the space and instance set.
Dataset ingest_runs(std::istream& runs, std::shared_ptr<const ConfigurationSpace> space,
                    std::shared_ptr<const InstanceSet> instances, Objective objective = Objective::runtime);
Dataset ingest_runs_file(const std::string& runs_path, const std::string& features_path,
                         std::shared_ptr<const ConfigurationSpace> space, Objective objective = Objective::runtime);
void write_runs(std::ostream& out, const Dataset& ds);

/// Checks the status/cost/cutoff invariants of one record; throws DataError.
void validate_record(const RunRecord& r, Objective objective);

// ---------------------------------------------------------------------------
// Transformations

struct CrashFilterResult {
  Dataset dataset;
  std::size_t removed = 0;
  std::optional<std::string> warning;
};

CrashFilterResult filter_crashed(const Dataset& ds);

/// Uniform sample without replacement of at most `cap` records; record order is kept.
Dataset subsample(const Dataset& ds, std::size_t cap, Random& rand);

/// Response of one record: log10 PAR10 runtime, or the raw loss.
double response_value(const RunRecord& r, Objective objective);

TrainingMatrix build_matrix(const Dataset& ds, TrainingSetting setting);

/// Whether the record is selected by the training setting.
bool setting_includes(const Dataset& ds, const RunRecord& r, TrainingSetting setting);

}  // namespace surrobench
