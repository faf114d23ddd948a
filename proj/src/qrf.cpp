#include "surrobench/qrf.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace surrobench {

void ForestConfig::validate() const {
  if (!(frac_points > 0.0 && frac_points <= 1.0)) throw Error("frac_points must lie in (0, 1]");
  if (!(frac_feats > 0.0 && frac_feats <= 1.0)) throw Error("frac_feats must lie in (0, 1]");
  if (num_trees < 1) throw Error("num_trees must be at least 1");
  if (max_nodes < 1) throw Error("max_nodes must be at least 1");
  if (min_samples_in_leaf < 1) throw Error("min_samples_in_leaf must be at least 1");
  if (min_samples_to_split < 2) throw Error("min_samples_to_split must be at least 2");
}

bool ForestConfig::within_tuned_ranges() const {
  return frac_points >= 0.001 && frac_points <= 1.0 && max_nodes >= 10 && max_nodes <= 100000 &&
         max_depth >= 20 && max_depth <= 100 && min_samples_in_leaf >= 1 && min_samples_in_leaf <= 20 &&
         min_samples_to_split >= 2 && min_samples_to_split <= 20 && frac_feats >= 0.001 && frac_feats <= 1.0 &&
         num_trees >= 10 && num_trees <= 50;
}

nlohmann::json ForestConfig::to_json() const {
  return {{"bootstrapping", bootstrapping},       {"frac_points", frac_points},
          {"max_nodes", max_nodes},               {"max_depth", max_depth},
          {"min_samples_in_leaf", min_samples_in_leaf}, {"min_samples_to_split", min_samples_to_split},
          {"frac_feats", frac_feats},             {"num_trees", num_trees}};
}

ForestConfig ForestConfig::from_json(const nlohmann::json& j) {
  ForestConfig c;
  c.bootstrapping = j.at("bootstrapping").get<bool>();
  c.frac_points = j.at("frac_points").get<double>();
  c.max_nodes = j.at("max_nodes").get<std::size_t>();
  c.max_depth = j.at("max_depth").get<std::size_t>();
  c.min_samples_in_leaf = j.at("min_samples_in_leaf").get<std::size_t>();
  c.min_samples_to_split = j.at("min_samples_to_split").get<std::size_t>();
  c.frac_feats = j.at("frac_feats").get<double>();
  c.num_trees = j.at("num_trees").get<std::size_t>();
  return c;
}

// ---------------------------------------------------------------------------
// Tree growth

namespace {

struct Pending {
  std::uint32_t node;
  std::size_t begin;
  std::size_t end;
  std::size_t depth;
};

struct SplitChoice {
  bool found = false;
  double score = -std::numeric_limits<double>::infinity();
  std::size_t feature = 0;
  bool categorical = false;
  double threshold = 0.0;
  std::uint64_t mask = 0;
};

double midpoint(double a, double b) {
  const double m = a + (b - a) / 2.0;
  return m < b ? m : a;
}

class TreeGrower {
 public:
  TreeGrower(const MatrixView& data, const ForestConfig& cfg, Random& rand)
      : data_(data), cfg_(cfg), rand_(rand) {}

  void run(std::vector<TreeNode>& nodes, std::vector<double>& values, std::size_t& depth_out);

 private:
  double x(std::uint32_t row, std::size_t f) const { return data_.x[row * data_.cols + f]; }
  void best_numeric(std::size_t f, std::size_t begin, std::size_t end, double centre, SplitChoice& best);
  void best_categorical(std::size_t f, std::size_t begin, std::size_t end, double centre, SplitChoice& best);
  bool goes_left(const SplitChoice& s, std::uint32_t row) const {
    const double v = x(row, s.feature);
    if (s.categorical) {
      const auto c = static_cast<std::uint64_t>(v);
      return c < 64 && ((s.mask >> c) & 1u);
    }
    return v <= s.threshold;
  }

  const MatrixView& data_;
  const ForestConfig& cfg_;
  Random& rand_;
  std::vector<std::uint32_t> rows_;
  std::vector<std::pair<double, double>> scratch_;
};

void TreeGrower::best_numeric(std::size_t f, std::size_t begin, std::size_t end, double centre, SplitChoice& best) {
  scratch_.clear();
  for (std::size_t i = begin; i < end; ++i) scratch_.emplace_back(x(rows_[i], f), data_.y[rows_[i]] - centre);
  std::sort(scratch_.begin(), scratch_.end());
  if (scratch_.front().first == scratch_.back().first) return;
  const std::size_t n = scratch_.size();
  double total = 0.0;
  for (const auto& p : scratch_) total += p.second;
  double left = 0.0;
  const std::size_t min_leaf = cfg_.min_samples_in_leaf;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    left += scratch_[i].second;
    if (scratch_[i].first == scratch_[i + 1].first) continue;
    const std::size_t nl = i + 1;
    const std::size_t nr = n - nl;
    if (nl < min_leaf || nr < min_leaf) continue;
    const double right = total - left;
    const double score = left * left / static_cast<double>(nl) + right * right / static_cast<double>(nr);
    if (score > best.score) {
      best = {true, score, f, false, midpoint(scratch_[i].first, scratch_[i + 1].first), 0};
    }
  }
}

void TreeGrower::best_categorical(std::size_t f, std::size_t begin, std::size_t end, double centre,
                                  SplitChoice& best) {
  const std::uint32_t card = data_.cardinalities[f];
  std::vector<std::size_t> count(card, 0);
  std::vector<double> sum(card, 0.0);
  for (std::size_t i = begin; i < end; ++i) {
    const auto c = static_cast<std::size_t>(x(rows_[i], f));
    ++count[c];
    sum[c] += data_.y[rows_[i]] - centre;
  }
  std::vector<std::size_t> present;
  for (std::size_t c = 0; c < card; ++c) {
    if (count[c] > 0) present.push_back(c);
  }
  if (present.size() < 2) return;
  // Ordering categories by mean response makes prefix partitions optimal for SSE.
  std::stable_sort(present.begin(), present.end(), [&](std::size_t a, std::size_t b) {
    return sum[a] / static_cast<double>(count[a]) < sum[b] / static_cast<double>(count[b]);
  });
  const std::size_t n = end - begin;
  double total = 0.0;
  for (std::size_t c : present) total += sum[c];
  double left = 0.0;
  std::size_t nl = 0;
  std::uint64_t mask = 0;
  for (std::size_t j = 0; j + 1 < present.size(); ++j) {
    left += sum[present[j]];
    nl += count[present[j]];
    mask |= std::uint64_t{1} << present[j];
    const std::size_t nr = n - nl;
    if (nl < cfg_.min_samples_in_leaf || nr < cfg_.min_samples_in_leaf) continue;
    const double right = total - left;
    const double score = left * left / static_cast<double>(nl) + right * right / static_cast<double>(nr);
    if (score > best.score) best = {true, score, f, true, 0.0, mask};
  }
}

void TreeGrower::run(std::vector<TreeNode>& nodes, std::vector<double>& values, std::size_t& depth_out) {
  const std::size_t n = data_.rows();
  const auto m = static_cast<std::size_t>(std::ceil(cfg_.frac_points * static_cast<double>(n)));
  if (m < 1) throw Error("frac_points selects no rows");
  if (cfg_.bootstrapping) {
    rows_.resize(m);
    for (auto& r : rows_) r = static_cast<std::uint32_t>(rand_.index(n));
  } else {
    rows_.resize(n);
    std::iota(rows_.begin(), rows_.end(), 0u);
    const std::size_t take = std::min(m, n);
    for (std::size_t i = 0; i < take; ++i) std::swap(rows_[i], rows_[i + rand_.index(n - i)]);
    rows_.resize(take);
  }
  std::sort(rows_.begin(), rows_.end());

  const std::size_t p = data_.cols;
  const std::size_t k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(cfg_.frac_feats * static_cast<double>(p))), 1, std::max<std::size_t>(p, 1));
  std::vector<std::size_t> features(p);

  nodes.assign(1, TreeNode{});
  values.clear();
  depth_out = 0;
  std::deque<Pending> queue{{0, 0, rows_.size(), 0}};
  while (!queue.empty()) {
    const Pending cur = queue.front();
    queue.pop_front();
    const std::size_t count = cur.end - cur.begin;
    depth_out = std::max(depth_out, cur.depth);

    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = cur.begin; i < cur.end; ++i) {
      const double v = data_.y[rows_[i]];
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double mean = sum / static_cast<double>(count);

    SplitChoice best;
    const bool splittable = count >= cfg_.min_samples_to_split && cur.depth < cfg_.max_depth &&
                            nodes.size() + 2 <= cfg_.max_nodes && lo < hi &&
                            count >= 2 * cfg_.min_samples_in_leaf;
    if (splittable) {
      std::iota(features.begin(), features.end(), 0u);
      for (std::size_t i = 0; i < k; ++i) std::swap(features[i], features[i + rand_.index(p - i)]);
      std::sort(features.begin(), features.begin() + static_cast<std::ptrdiff_t>(k));
      for (std::size_t i = 0; i < k; ++i) {
        const std::size_t f = features[i];
        if (data_.cardinalities[f] > 0) {
          best_categorical(f, cur.begin, cur.end, mean, best);
        } else {
          best_numeric(f, cur.begin, cur.end, mean, best);
        }
      }
    }

    if (best.found) {
      auto first = rows_.begin() + static_cast<std::ptrdiff_t>(cur.begin);
      auto last = rows_.begin() + static_cast<std::ptrdiff_t>(cur.end);
      auto mid = std::stable_partition(first, last, [&](std::uint32_t row) { return goes_left(best, row); });
      const std::size_t split_at = static_cast<std::size_t>(mid - rows_.begin());
      const auto left = static_cast<std::uint32_t>(nodes.size());
      nodes.emplace_back();
      nodes.emplace_back();
      TreeNode& node = nodes[cur.node];
      node.feature = static_cast<std::int32_t>(best.feature);
      node.categorical = best.categorical ? 1 : 0;
      node.threshold = best.threshold;
      node.left_categories = best.mask;
      node.left = left;
      node.right = left + 1;
      queue.push_back({left, cur.begin, split_at, cur.depth + 1});
      queue.push_back({left + 1, split_at, cur.end, cur.depth + 1});
      continue;
    }

    TreeNode& leaf = nodes[cur.node];
    leaf.values_begin = static_cast<std::uint32_t>(values.size());
    leaf.values_count = static_cast<std::uint32_t>(count);
    for (std::size_t i = cur.begin; i < cur.end; ++i) values.push_back(data_.y[rows_[i]]);
    std::sort(values.begin() + leaf.values_begin, values.end());
    double ss = 0.0;
    for (std::size_t i = cur.begin; i < cur.end; ++i) {
      const double d = data_.y[rows_[i]] - mean;
      ss += d * d;
    }
    leaf.mean = lo == hi ? lo : mean;
    leaf.variance = lo == hi ? 0.0 : ss / static_cast<double>(count);
  }
}

}  // namespace

RegressionTree RegressionTree::grow(const MatrixView& data, const ForestConfig& cfg, Random& rand) {
  RegressionTree tree;
  TreeGrower(data, cfg, rand).run(tree.nodes_, tree.values_, tree.depth_);
  return tree;
}

const TreeNode& RegressionTree::leaf_for(std::span<const double> x) const {
  const TreeNode* node = &nodes_[0];
  while (!node->is_leaf()) {
    const double v = x[static_cast<std::size_t>(node->feature)];
    bool left;
    if (node->categorical) {
      const auto c = static_cast<std::uint64_t>(v);
      left = c < 64 && ((node->left_categories >> c) & 1u);
    } else {
      left = v <= node->threshold;
    }
    node = &nodes_[left ? node->left : node->right];
  }
  return *node;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

void RegressionTree::write(BinaryWriter& w) const {
  w.u64(depth_);
  w.u64(nodes_.size());
  for (const auto& n : nodes_) {
    w.u32(static_cast<std::uint32_t>(n.feature));
    w.u8(n.categorical);
    w.f64(n.threshold);
    w.u64(n.left_categories);
    w.u32(n.left);
    w.u32(n.right);
    w.u32(n.values_begin);
    w.u32(n.values_count);
    w.f64(n.mean);
    w.f64(n.variance);
  }
  w.u64(values_.size());
  for (double v : values_) w.f64(v);
}

RegressionTree RegressionTree::read(BinaryReader& r) {
  RegressionTree t;
  t.depth_ = r.u64();
  const std::uint64_t count = r.u64();
  if (count == 0 || count > r.remaining()) throw Error("corrupt tree: bad node count");
  t.nodes_.resize(count);
  for (auto& n : t.nodes_) {
    n.feature = static_cast<std::int32_t>(r.u32());
    n.categorical = r.u8();
    n.threshold = r.f64();
    n.left_categories = r.u64();
    n.left = r.u32();
    n.right = r.u32();
    n.values_begin = r.u32();
    n.values_count = r.u32();
    n.mean = r.f64();
    n.variance = r.f64();
  }
  const std::uint64_t nv = r.u64();
  if (nv > r.remaining() / 8) throw Error("corrupt tree: bad label count");
  t.values_.resize(nv);
  for (auto& v : t.values_) v = r.f64();
  for (const auto& n : t.nodes_) {
    if (n.is_leaf()) {
      if (static_cast<std::uint64_t>(n.values_begin) + n.values_count > nv || n.values_count == 0) {
        throw Error("corrupt tree: leaf range out of bounds");
      }
    } else if (n.left >= count || n.right >= count) {
      throw Error("corrupt tree: child index out of bounds");
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Forest

QuantileForest QuantileForest::fit(const MatrixView& data, const ForestConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (data.rows() < 1) throw Error("cannot fit a forest on an empty matrix");
  if (data.x.size() != data.rows() * data.cols) throw Error("matrix shape mismatch");
  if (data.cardinalities.size() != data.cols) throw Error("cardinality metadata does not match the column count");
  for (std::uint32_t c : data.cardinalities) {
    if (c > 64) throw Error("categorical columns support at most 64 categories");
  }
  if (cfg.frac_points * static_cast<double>(data.rows()) < 1.0) {
    throw Error("frac_points * rows < 1: no rows to grow a tree on");
  }

  QuantileForest forest;
  forest.config_ = cfg;
  forest.width_ = data.cols;
  forest.cardinalities_.assign(data.cardinalities.begin(), data.cardinalities.end());
  auto [lo, hi] = std::minmax_element(data.y.begin(), data.y.end());
  forest.y_min_ = *lo;
  forest.y_max_ = *hi;
  forest.trees_.resize(cfg.num_trees);
  parallel_for(cfg.num_trees, [&](std::size_t t) {
    Random rand(derive_seed(seed, t));
    forest.trees_[t] = RegressionTree::grow(data, cfg, rand);
  });
  return forest;
}

void QuantileForest::check_width(std::span<const double> x) const {
  if (x.size() != width_) {
    throw DataError("input has " + std::to_string(x.size()) + " columns, forest expects " + std::to_string(width_));
  }
}

std::vector<std::pair<double, double>> QuantileForest::pooled_distribution(std::span<const double> x) const {
  check_width(x);
  std::vector<std::pair<double, double>> pool;
  const double per_tree = 1.0 / static_cast<double>(trees_.size());
  for (const auto& tree : trees_) {
    const TreeNode& leaf = tree.leaf_for(x);
    const double w = per_tree / static_cast<double>(leaf.values_count);
    for (double v : tree.leaf_values(leaf)) pool.emplace_back(v, w);
  }
  std::sort(pool.begin(), pool.end());
  return pool;
}

double QuantileForest::predict_quantile(std::span<const double> x, double alpha) const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("quantile must lie in [0, 1]");
  const auto pool = pooled_distribution(x);
  double cdf = 0.0;
  for (const auto& [value, weight] : pool) {
    cdf += weight;
    if (cdf >= alpha - 1e-12) return value;
  }
  return pool.back().first;
}

MeanVar QuantileForest::predict_mean_var(std::span<const double> x) const {
  check_width(x);
  double sum = 0.0;
  double sum_sq = 0.0;
  double within = 0.0;
  for (const auto& tree : trees_) {
    const TreeNode& leaf = tree.leaf_for(x);
    sum += leaf.mean;
    sum_sq += leaf.mean * leaf.mean;
    within += leaf.variance;
  }
  const auto t = static_cast<double>(trees_.size());
  const double mean = sum / t;
  const double between = std::max(0.0, sum_sq / t - mean * mean);
  return {mean, between + within / t};
}

void QuantileForest::write(BinaryWriter& w) const {
  w.str(config_.to_json().dump());
  w.u64(width_);
  for (std::uint32_t c : cardinalities_) w.u32(c);
  w.f64(y_min_);
  w.f64(y_max_);
  w.u64(trees_.size());
  for (const auto& t : trees_) t.write(w);
}

QuantileForest QuantileForest::read(BinaryReader& r) {
  QuantileForest f;
  f.config_ = ForestConfig::from_json(nlohmann::json::parse(r.str()));
  f.width_ = r.u64();
  if (f.width_ > r.remaining() / 4) throw Error("corrupt forest: bad width");
  f.cardinalities_.resize(f.width_);
  for (auto& c : f.cardinalities_) c = r.u32();
  f.y_min_ = r.f64();
  f.y_max_ = r.f64();
  const std::uint64_t count = r.u64();
  if (count == 0 || count > r.remaining()) throw Error("corrupt forest: bad tree count");
  f.trees_.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    f.trees_.push_back(RegressionTree::read(r));
    for (const auto& n : f.trees_.back().nodes()) {
      if (!n.is_leaf() && static_cast<std::size_t>(n.feature) >= f.width_) {
        throw Error("corrupt forest: split feature out of range");
      }
    }
  }
  return f;
}

}  // namespace surrobench
