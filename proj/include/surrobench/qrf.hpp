#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"
#include "surrobench/run_data.hpp"
#include "surrobench/util.hpp"

namespace surrobench {

/// Random forest hyperparameters. Defaults are the tuned values used for
/// performance modelling (48 unbootstrapped trees on 80% row subsamples).
struct ForestConfig {
  bool bootstrapping = false;
  double frac_points = 0.8;
  std::size_t max_nodes = 50000;
  std::size_t max_depth = 26;
  std::size_t min_samples_in_leaf = 1;
  std::size_t min_samples_to_split = 5;
  double frac_feats = 0.28;
  std::size_t num_trees = 48;

  /// Structural sanity; throws Error.
  void validate() const;
  /// Whether every value lies inside the hyperparameter ranges the defaults were tuned over.
  bool within_tuned_ranges() const;

  nlohmann::json to_json() const;
  static ForestConfig from_json(const nlohmann::json& j);
  bool operator==(const ForestConfig&) const = default;
};

/// Non-owning view of a training sample.
struct MatrixView {
  std::span<const double> x;  // row-major, rows() * cols
  std::size_t cols = 0;
  std::span<const double> y;
  std::span<const std::uint32_t> cardinalities;  // per column; 0 = numeric

  std::size_t rows() const { return y.size(); }
  static MatrixView of(const TrainingMatrix& m) { return {m.x, m.cols, m.y, m.cardinalities}; }
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  std::uint8_t categorical = 0;
  double threshold = 0.0;            // numeric: x <= threshold goes left
  std::uint64_t left_categories = 0;  // categorical: bit c set goes left
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  std::uint32_t values_begin = 0;  // leaf label range
  std::uint32_t values_count = 0;
  double mean = 0.0;
  double variance = 0.0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

class RegressionTree {
 public:
  static RegressionTree grow(const MatrixView& data, const ForestConfig& cfg, Random& rand);

  const TreeNode& leaf_for(std::span<const double> x) const;
  /// Sorted training labels stored in a leaf.
  std::span<const double> leaf_values(const TreeNode& leaf) const {
    return {values_.data() + leaf.values_begin, leaf.values_count};
  }

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t depth() const { return depth_; }
  std::size_t leaf_count() const;
  /// Total labels stored in leaves (= rows used to grow the tree).
  std::size_t stored_labels() const { return values_.size(); }

  void write(BinaryWriter& w) const;
  static RegressionTree read(BinaryReader& r);
  bool operator==(const RegressionTree&) const = default;

 private:
  std::vector<TreeNode> nodes_;
  std::vector<double> values_;
  std::size_t depth_ = 0;
};

struct MeanVar {
  double mean = 0.0;
  double variance = 0.0;
};

/// Quantile regression forest: the conditional label distribution at x is the
/// pool of labels in the leaves x reaches, each weighted 1 / (trees * leaf size).
class QuantileForest {
 public:
  static QuantileForest fit(const MatrixView& data, const ForestConfig& cfg, std::uint64_t seed);
  /// Fits on all rows; the censored mask is ignored.
  static QuantileForest fit(const TrainingMatrix& m, const ForestConfig& cfg, std::uint64_t seed) {
    return fit(MatrixView::of(m), cfg, seed);
  }

  /// Smallest pooled label whose weighted CDF reaches alpha.
  double predict_quantile(std::span<const double> x, double alpha) const;
  /// Mean of the per-tree leaf means; variance by the law of total variance over trees.
  MeanVar predict_mean_var(std::span<const double> x) const;
  /// Pooled (label, weight) pairs sorted by label; weights sum to one.
  std::vector<std::pair<double, double>> pooled_distribution(std::span<const double> x) const;

  const ForestConfig& config() const { return config_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }
  std::size_t width() const { return width_; }
  const std::vector<std::uint32_t>& cardinalities() const { return cardinalities_; }
  double response_min() const { return y_min_; }
  double response_max() const { return y_max_; }

  void write(BinaryWriter& w) const;
  static QuantileForest read(BinaryReader& r);
  bool operator==(const QuantileForest&) const = default;

 private:
  void check_width(std::span<const double> x) const;

  ForestConfig config_;
  std::vector<RegressionTree> trees_;
  std::vector<std::uint32_t> cardinalities_;
  std::size_t width_ = 0;
  double y_min_ = 0.0;
  double y_max_ = 0.0;
};

}  // namespace surrobench
