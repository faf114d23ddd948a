#include "surrobench/run_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace surrobench {

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::success:
      return "SUCCESS";
    case RunStatus::timeout:
      return "TIMEOUT";
    case RunStatus::censored:
      return "CENSORED";
    case RunStatus::crashed:
      return "CRASHED";
  }
  return "?";
}

std::string_view to_string(Objective o) { return o == Objective::runtime ? "runtime" : "quality"; }

std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

std::string_view to_string(TrainingSetting s) {
  switch (s) {
    case TrainingSetting::train_only:
      return "train_only";
    case TrainingSetting::train_plus_test_incumbents:
      return "train_plus_test_incumbents";
    case TrainingSetting::all:
      return "all";
  }
  return "?";
}

RunStatus parse_status(std::string_view s) {
  s = trim(s);
  if (s == "SUCCESS") return RunStatus::success;
  if (s == "TIMEOUT") return RunStatus::timeout;
  if (s == "CENSORED") return RunStatus::censored;
  if (s == "CRASHED") return RunStatus::crashed;
  throw DataError("unknown run status '" + std::string(s) + "'");
}

Objective parse_objective(std::string_view s) {
  if (s == "runtime") return Objective::runtime;
  if (s == "quality") return Objective::quality;
  throw DataError("unknown objective '" + std::string(s) + "'");
}

Split parse_split(std::string_view s) {
  s = trim(s);
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw DataError("unknown split '" + std::string(s) + "'");
}

TrainingSetting parse_setting(std::string_view s) {
  if (s == "I" || s == "train_only") return TrainingSetting::train_only;
  if (s == "II" || s == "train_plus_test_incumbents") return TrainingSetting::train_plus_test_incumbents;
  if (s == "all") return TrainingSetting::all;
  throw DataError("unknown training setting '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------

InstanceSet::InstanceSet(std::vector<std::string> ids, std::vector<std::vector<double>> features,
                         std::vector<Split> splits)
    : ids_(std::move(ids)), features_(std::move(features)), splits_(std::move(splits)) {
  if (features_.size() != ids_.size() || splits_.size() != ids_.size()) {
    throw DataError("instance ids, features and splits differ in length");
  }
  feature_dim_ = features_.empty() ? 0 : features_.front().size();
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i].empty()) throw DataError("empty instance id");
    if (!index_.emplace(ids_[i], i).second) throw DataError("duplicate instance id '" + ids_[i] + "'");
    if (features_[i].size() != feature_dim_) {
      throw DataError("instance '" + ids_[i] + "' has " + std::to_string(features_[i].size()) +
                      " features, expected " + std::to_string(feature_dim_));
    }
  }
}

std::optional<std::size_t> InstanceSet::find(std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> InstanceSet::ids_in(Split s) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (splits_[i] == s) out.push_back(ids_[i]);
  }
  return out;
}

double Dataset::cutoff() const {
  double c = 0.0;
  for (const auto& r : records) c = std::max(c, r.cutoff);
  return c;
}

// ---------------------------------------------------------------------------
// Ingestion

namespace {

std::map<std::string, std::size_t> header_index(const std::vector<std::string>& header,
                                                std::span<const std::string_view> required) {
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < header.size(); ++i) idx[std::string(trim(header[i]))] = i;
  for (auto name : required) {
    if (!idx.count(std::string(name))) throw DataError("missing column '" + std::string(name) + "' in header");
  }
  return idx;
}

[[noreturn]] void row_error(std::size_t row, const std::string& message) {
  throw DataError("row " + std::to_string(row) + ": " + message);
}

bool parse_bool(std::string_view s, std::size_t row) {
  s = trim(s);
  if (s == "true" || s == "1" || s == "True" || s == "TRUE") return true;
  if (s == "false" || s == "0" || s == "False" || s == "FALSE" || s.empty()) return false;
  row_error(row, "bad boolean '" + std::string(s) + "'");
}

}  // namespace

InstanceSet read_instances(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("features file is empty");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || trim(header[0]) != "instance_id" || trim(header[1]) != "split") {
    throw DataError("features header must start with instance_id,split");
  }
  const std::size_t d = header.size() - 2;
  for (std::size_t k = 0; k < d; ++k) {
    if (trim(header[k + 2]) != "f_" + std::to_string(k)) {
      throw DataError("features header column " + std::to_string(k + 3) + " must be f_" + std::to_string(k));
    }
  }
  std::vector<std::string> ids;
  std::vector<std::vector<double>> features;
  std::vector<Split> splits;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      row_error(row, "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    ids.emplace_back(trim(fields[0]));
    try {
      splits.push_back(parse_split(fields[1]));
    } catch (const DataError& e) {
      row_error(row, e.what());
    }
    std::vector<double> f;
    for (std::size_t k = 0; k < d; ++k) {
      auto v = parse_double(fields[k + 2]);
      if (!v || !std::isfinite(*v)) row_error(row, "bad feature value '" + fields[k + 2] + "'");
      f.push_back(*v);
    }
    features.push_back(std::move(f));
  }
  InstanceSet set(std::move(ids), std::move(features), std::move(splits));
  return set;
}

InstanceSet read_instances_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open features file '" + path + "'");
  return read_instances(in);
}

void write_instances(std::ostream& out, const InstanceSet& instances) {
  out << "instance_id,split";
  for (std::size_t k = 0; k < instances.feature_dim(); ++k) out << ",f_" << k;
  out << '\n';
  for (std::size_t i = 0; i < instances.size(); ++i) {
    out << csv_field(instances.id(i)) << ',' << to_string(instances.split(i));
    for (double f : instances.features(i)) out << ',' << format_double(f);
    out << '\n';
  }
}

void validate_record(const RunRecord& r, Objective objective) {
  if (!std::isfinite(r.measured_cost) || r.measured_cost < 0) throw DataError("measured_cost must be non-negative");
  if (!std::isfinite(r.cutoff) || r.cutoff <= 0) throw DataError("cutoff must be positive");
  if (objective == Objective::quality) {
    if (r.status == RunStatus::censored) throw DataError("CENSORED runs are not allowed for quality objectives");
    return;
  }
  switch (r.status) {
    case RunStatus::censored:
      if (!(r.measured_cost < r.cutoff)) throw DataError("CENSORED cost must be strictly below the cutoff");
      break;
    case RunStatus::timeout:
      if (r.measured_cost != r.cutoff) throw DataError("TIMEOUT cost must equal the cutoff");
      break;
    case RunStatus::success:
      if (r.measured_cost > r.cutoff) throw DataError("SUCCESS cost exceeds the cutoff");
      break;
    case RunStatus::crashed:
      break;
  }
}

Dataset ingest_runs(std::istream& runs, std::shared_ptr<const ConfigurationSpace> space,
                    std::shared_ptr<const InstanceSet> instances, Objective objective) {
  static constexpr std::string_view kColumns[] = {"run_source", "repetition", "instance_id", "seed",  "status",
                                                  "measured_cost", "cutoff", "is_validation", "config"};
  std::string line;
  if (!std::getline(runs, line)) throw DataError("runs file is empty (header required)");
  const auto col = header_index(split_csv_line(line), kColumns);

  Dataset ds{space, instances, objective, {}};
  std::size_t row = 1;
  std::optional<double> cutoff;
  while (std::getline(runs, line)) {
    ++row;
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    try {
      f = split_csv_line(line);
    } catch (const DataError& e) {
      row_error(row, e.what());
    }
    if (f.size() < col.size()) row_error(row, "expected " + std::to_string(col.size()) + " fields");
    auto field = [&](std::string_view name) -> const std::string& { return f[col.at(std::string(name))]; };

    RunRecord r;
    r.source.configurator = std::string(trim(field("run_source")));
    auto rep = parse_int(field("repetition"));
    if (!rep) row_error(row, "bad repetition '" + field("repetition") + "'");
    r.source.repetition = static_cast<int>(*rep);
    r.instance = std::string(trim(field("instance_id")));
    if (!instances->find(r.instance)) row_error(row, "unknown instance id '" + r.instance + "'");
    auto seed = parse_int(field("seed"));
    if (!seed) row_error(row, "bad seed '" + field("seed") + "'");
    r.seed = *seed;
    auto cost = parse_double(field("measured_cost"));
    auto cut = parse_double(field("cutoff"));
    if (!cost) row_error(row, "bad measured_cost '" + field("measured_cost") + "'");
    if (!cut) row_error(row, "bad cutoff '" + field("cutoff") + "'");
    r.measured_cost = *cost;
    r.cutoff = *cut;
    r.is_validation = parse_bool(field("is_validation"), row);
    try {
      r.status = parse_status(field("status"));
      r.config = space->from_json(nlohmann::json::parse(field("config")));
      validate_record(r, objective);
    } catch (const nlohmann::json::exception& e) {
      row_error(row, std::string("bad config JSON: ") + e.what());
    } catch (const DataError& e) {
      row_error(row, e.what());
    }
    if (objective == Objective::runtime) {
      if (cutoff && *cutoff != r.cutoff) row_error(row, "cutoff differs from earlier rows");
      cutoff = r.cutoff;
    }
    ds.records.push_back(std::move(r));
  }
  return ds;
}

Dataset ingest_runs_file(const std::string& runs_path, const std::string& features_path,
                         std::shared_ptr<const ConfigurationSpace> space, Objective objective) {
  auto instances = std::make_shared<const InstanceSet>(read_instances_file(features_path));
  std::ifstream in(runs_path);
  if (!in) throw Error("cannot open runs file '" + runs_path + "'");
  return ingest_runs(in, std::move(space), std::move(instances), objective);
}

void write_runs(std::ostream& out, const Dataset& ds) {
  out << "run_source,repetition,instance_id,seed,status,measured_cost,cutoff,is_validation,config\n";
  for (const auto& r : ds.records) {
    out << csv_field(r.source.configurator) << ',' << r.source.repetition << ',' << csv_field(r.instance) << ','
        << r.seed << ',' << to_string(r.status) << ',' << format_double(r.measured_cost) << ','
        << format_double(r.cutoff) << ',' << (r.is_validation ? "true" : "false") << ','
        << csv_field(r.config.canonical()) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Transformations

CrashFilterResult filter_crashed(const Dataset& ds) {
  CrashFilterResult out{ds.with_records({}), 0, std::nullopt};
  for (const auto& r : ds.records) {
    if (r.status == RunStatus::crashed) {
      ++out.removed;
    } else {
      out.dataset.records.push_back(r);
    }
  }
  if (!ds.records.empty() && out.dataset.records.empty()) {
    out.warning = "all " + std::to_string(out.removed) + " runs crashed; dataset is empty";
  }
  return out;
}

Dataset subsample(const Dataset& ds, std::size_t cap, Random& rand) {
  if (cap < 1) throw DataError("subsample cap must be at least 1");
  if (ds.records.size() <= cap) return ds;
  std::vector<std::size_t> idx(ds.records.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < cap; ++i) std::swap(idx[i], idx[i + rand.index(idx.size() - i)]);
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  std::vector<RunRecord> records;
  records.reserve(cap);
  for (std::size_t i : idx) records.push_back(ds.records[i]);
  return ds.with_records(std::move(records));
}

double response_value(const RunRecord& r, Objective objective) {
  if (objective == Objective::quality) return r.measured_cost;
  switch (r.status) {
    case RunStatus::timeout:
      return std::log10(kPenaltyFactor * r.cutoff);
    case RunStatus::success:
    case RunStatus::censored:
      return std::log10(std::max(r.measured_cost, kRuntimeFloor));
    case RunStatus::crashed:
      break;
  }
  throw DataError("crashed runs have no response value");
}

bool setting_includes(const Dataset& ds, const RunRecord& r, TrainingSetting setting) {
  if (setting == TrainingSetting::all) return true;
  const auto idx = ds.instances->find(r.instance);
  const bool train = idx && ds.instances->split(*idx) == Split::train;
  if (train) return true;
  return setting == TrainingSetting::train_plus_test_incumbents && r.is_validation;
}

TrainingMatrix build_matrix(const Dataset& ds, TrainingSetting setting) {
  if (ds.records.empty()) throw DataError("cannot build a training matrix from an empty dataset");
  const std::size_t d = ds.instances->feature_dim();

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    if (r.status == RunStatus::crashed) continue;
    if (ds.objective == Objective::quality && r.status == RunStatus::censored) {
      throw DataError("quality dataset contains CENSORED runs");
    }
    if (setting_includes(ds, r, setting)) order.push_back(i);
  }
  if (order.empty()) throw DataError("no rows left after applying the training setting");
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ds.records[a].source < ds.records[b].source;
  });

  TrainingMatrix m;
  m.cols = ds.space->size() + d;
  m.cardinalities = column_cardinalities(*ds.space, d);
  m.response_cap = ds.objective == Objective::runtime ? std::log10(kPenaltyFactor * ds.cutoff())
                                                      : std::numeric_limits<double>::infinity();
  m.x.reserve(order.size() * m.cols);
  for (std::size_t i : order) {
    const auto& r = ds.records[i];
    const auto inst = *ds.instances->find(r.instance);
    auto row = encode(*ds.space, impute_inactive(*ds.space, r.config), ds.instances->features(inst), d);
    m.x.insert(m.x.end(), row.begin(), row.end());
    m.y.push_back(response_value(r, ds.objective));
    m.censored.push_back(r.status == RunStatus::censored ? 1 : 0);
    m.record_index.push_back(i);
  }
  return m;
}

}  // namespace surrobench
