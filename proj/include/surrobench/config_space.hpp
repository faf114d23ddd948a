#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "surrobench/util.hpp"

namespace surrobench {

enum class ParamKind { categorical, integer, real };

std::string_view to_string(ParamKind kind);

/// Integer parameters hold int64, reals hold double, categoricals hold the
/// category label.
using ParamValue = std::variant<std::int64_t, double, std::string>;

std::string format_value(const ParamValue& v);

struct ParameterSpec {
  std::string name;
  ParamKind kind = ParamKind::real;
  std::vector<std::string> choices;  // categorical only
  double lower = 0.0;                // numeric only, inclusive
  double upper = 0.0;
  bool log_scale = false;
  std::optional<ParamValue> default_value;

  bool is_numeric() const { return kind != ParamKind::categorical; }
  bool contains(const ParamValue& v) const;
  /// Index of a category label, if present.
  std::optional<std::size_t> choice_index(std::string_view label) const;

  /// Position of a numeric value in [0, 1] (log-space when log_scale).
  double to_unit(const ParamValue& v) const;
  /// Inverse of to_unit; integers round half up and are clamped to bounds.
  ParamValue from_unit(double u) const;
  /// Default, or the domain midpoint (first category for categoricals).
  ParamValue fallback_value() const;

  bool operator==(const ParameterSpec&) const = default;
};

struct Condition {
  std::string child;
  std::string parent;
  std::vector<ParamValue> activating_values;

  bool operator==(const Condition&) const = default;
};

/// Raised by ConfigurationSpace validation; carries the offending declaration so
/// the text parser can map it back to a line.
class SpaceError : public Error {
 public:
  enum class Item { parameter, condition };
  SpaceError(Item item, std::size_t index, const std::string& what)
      : Error(what), item_(item), index_(index) {}
  Item item() const { return item_; }
  std::size_t index() const { return index_; }

 private:
  Item item_;
  std::size_t index_;
};

/// Parse failure with a 1-based source position.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& message)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class Configuration {
 public:
  using Map = std::map<std::string, ParamValue, std::less<>>;

  Configuration() = default;
  explicit Configuration(Map values) : values_(std::move(values)) {}

  bool contains(std::string_view name) const { return values_.find(name) != values_.end(); }
  const ParamValue* find(std::string_view name) const;
  const ParamValue& at(std::string_view name) const;
  void set(const std::string& name, ParamValue v) { values_[name] = std::move(v); }
  void erase(std::string_view name);
  std::size_t size() const { return values_.size(); }
  const Map& values() const { return values_; }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  /// Sorted-key JSON object.
  nlohmann::json to_json() const;
  /// Compact canonical text of to_json(); stable across processes.
  std::string canonical() const { return to_json().dump(); }

  bool operator==(const Configuration&) const = default;

 private:
  Map values_;
};

/// Immutable parameter space with single-parent conditions.
class ConfigurationSpace {
 public:
  ConfigurationSpace(std::vector<ParameterSpec> params, std::vector<Condition> conditions);

  std::size_t size() const { return params_.size(); }
  const std::vector<ParameterSpec>& parameters() const { return params_; }
  const ParameterSpec& parameter(std::size_t i) const { return params_[i]; }
  const std::vector<Condition>& conditions() const { return conditions_; }
  std::optional<std::size_t> index_of(std::string_view name) const;
  /// Parents before children.
  const std::vector<std::size_t>& topological_order() const { return topo_; }
  /// Condition governing parameter i, if any.
  const Condition* condition_for(std::size_t i) const;

  /// Whether parameter i is active given the (partial) assignment.
  bool is_active(std::size_t i, const Configuration& config) const;
  /// Throws DataError describing the first violation.
  void validate(const Configuration& config) const;
  bool is_valid(const Configuration& config) const;

  /// Active parameters at their fallback values.
  Configuration default_configuration() const;
  /// Drops inactive parameters and fills newly active ones with fallback values.
  Configuration normalize_activity(Configuration config) const;

  std::size_t categorical_count() const;

  /// Builds a configuration from a JSON object of active values.
  Configuration from_json(const nlohmann::json& j) const;

  bool operator==(const ConfigurationSpace& other) const {
    return params_ == other.params_ && conditions_ == other.conditions_;
  }

 private:
  std::vector<ParameterSpec> params_;
  std::vector<Condition> conditions_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<std::optional<std::size_t>> condition_of_;
  std::vector<std::size_t> topo_;
};

ConfigurationSpace parse_space(std::string_view text);
std::string render_space(const ConfigurationSpace& space);

Configuration sample_uniform(const ConfigurationSpace& space, Random& rand);

/// Total assignment: inactive parameters take their default, else the domain midpoint.
Configuration impute_inactive(const ConfigurationSpace& space, const Configuration& config);

/// Model input: numeric parameters scaled to [0, 1], categoricals as category
/// index, then the instance features. `config` must be total.
std::vector<double> encode(const ConfigurationSpace& space, const Configuration& config,
                           std::span<const double> features, std::size_t feature_dim);

/// Alternative encoding with one binary column per category.
std::vector<double> encode_one_hot(const ConfigurationSpace& space, const Configuration& config,
                                   std::span<const double> features, std::size_t feature_dim);

/// Per-column category counts matching encode(); 0 marks a numeric column.
std::vector<std::uint32_t> column_cardinalities(const ConfigurationSpace& space, std::size_t feature_dim);

struct NeighborOptions {
  std::size_t numeric_samples = 4;
  double step_scale = 0.2;
};

/// One-exchange neighbourhood of a valid configuration.
std::vector<Configuration> neighbors(const ConfigurationSpace& space, const Configuration& config,
                                     Random& rand, const NeighborOptions& opts = {});

}  // namespace surrobench
