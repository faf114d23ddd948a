#include "surrobench/synthetic.hpp"

#include <algorithm>
#include <cmath>

namespace surrobench {

const char* synthetic_space_text() {
  return "algo categorical {ls,cdcl,hybrid} [cdcl]\n"
         "restart categorical {none,luby,geometric} [luby]\n"
         "heuristic categorical {vsids,berkmin} [vsids]\n"
         "restart_base integer [10, 1000] [100] (log)\n"
         "noise real [0, 1] [0.5]\n"
         "decay real [0.5, 1] [0.95]\n"
         "alpha real [0.001, 10] [1] (log)\n"
         "beta real [0, 1] [0.5]\n"
         "level integer [0, 20] [5]\n"
         "gamma real [-1, 1] [0]\n"
         "restart_base | restart in {luby,geometric}\n"
         "noise | algo in {ls,hybrid}\n";
}

SyntheticBenchmark::SyntheticBenchmark(const SyntheticSpec& spec) : spec_(spec) {
  if (spec.num_instances < 2) throw Error("synthetic benchmark needs at least two instances");
  if (spec.num_basins < 1) throw Error("synthetic benchmark needs at least one basin");
  if (!(spec.cutoff > 0)) throw Error("cutoff must be positive");
  if (!(spec.timeout_fraction > 0 && spec.timeout_fraction < 1)) throw Error("timeout_fraction must lie in (0, 1)");
  if (spec.noise_scale < 0 || spec.hardness_spread < 0) throw Error("noise and hardness spread must be non-negative");
  space_ = std::make_shared<const ConfigurationSpace>(parse_space(synthetic_space_text()));
  Random rand(derive_seed(spec.seed, 0));

  for (std::size_t i = 0; i < space_->size(); ++i) {
    (space_->parameter(i).is_numeric() ? numeric_ : categorical_).push_back(i);
  }
  weights_.assign(numeric_.size(), 0.3);
  std::vector<std::size_t> order(numeric_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rand.shuffle(order);
  for (std::size_t k = 0; k < 3 && k < order.size(); ++k) weights_[order[k]] = 3.0;
  for (std::size_t b = 0; b < spec.num_basins; ++b) {
    std::vector<double> c(numeric_.size());
    for (auto& v : c) v = rand.uniform(0.1, 0.9);
    centres_.push_back(std::move(c));
    depths_.push_back(b == 0 ? 0.0 : rand.uniform(0.3, 1.2));
  }
  for (std::size_t p : categorical_) {
    std::vector<double> off(space_->parameter(p).choices.size());
    for (auto& v : off) v = rand.uniform(0.0, 1.2);
    off[rand.index(off.size())] = 0.0;
    offsets_.push_back(std::move(off));
  }

  std::vector<std::string> ids;
  std::vector<std::vector<double>> feats;
  std::vector<Split> splits;
  for (std::size_t i = 0; i < spec.num_instances; ++i) {
    const double h = spec.hardness_spread * rand.normal();
    hardness_.push_back(h);
    char id[32];
    std::snprintf(id, sizeof id, "inst%03zu", i);
    ids.emplace_back(id);
    feats.push_back({h, rand.uniform()});
    splits.push_back(i % 2 == 0 ? Split::train : Split::test);
  }
  instances_ = std::make_shared<const InstanceSet>(std::move(ids), std::move(feats), std::move(splits));

  // Place the cutoff at the requested upper quantile of uniformly drawn runs.
  Random mc(derive_seed(spec.seed, 1));
  std::vector<double> draws;
  const std::size_t n = 20000;
  for (std::size_t k = 0; k < n; ++k) {
    const auto cfg = sample_uniform(*space_, mc);
    const double h = hardness_[mc.index(hardness_.size())];
    draws.push_back(config_term(cfg) + h + spec.noise_scale * mc.normal());
  }
  std::sort(draws.begin(), draws.end());
  const auto q = static_cast<std::size_t>(std::floor((1.0 - spec.timeout_fraction) * static_cast<double>(n)));
  base_ = std::log(spec.cutoff) - draws[std::min(q, n - 1)];
}

double SyntheticBenchmark::config_term(const Configuration& config) const {
  const Configuration full = impute_inactive(*space_, config);
  std::vector<double> u(numeric_.size());
  for (std::size_t j = 0; j < numeric_.size(); ++j) {
    const auto& p = space_->parameter(numeric_[j]);
    u[j] = p.to_unit(full.at(p.name));
  }
  double g = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < centres_.size(); ++b) {
    double v = depths_[b];
    for (std::size_t j = 0; j < u.size(); ++j) v += weights_[j] * (u[j] - centres_[b][j]) * (u[j] - centres_[b][j]);
    g = std::min(g, v);
  }
  for (std::size_t k = 0; k < categorical_.size(); ++k) {
    const auto& p = space_->parameter(categorical_[k]);
    g += offsets_[k][*p.choice_index(std::get<std::string>(full.at(p.name)))];
  }
  return g;
}

double SyntheticBenchmark::log_median(const Configuration& config, const std::string& instance) const {
  const auto idx = instances_->find(instance);
  if (!idx) throw DataError("unknown instance '" + instance + "'");
  return base_ + config_term(config) + hardness_[*idx];
}

double SyntheticBenchmark::runtime(const Configuration& config, const std::string& instance,
                                   std::int64_t seed) const {
  space_->validate(config);
  double z = 0.0;
  if (spec_.noise_scale > 0) {
    std::string key = config.canonical() + '\0' + instance + '\0' + std::to_string(seed);
    Random r(derive_seed(spec_.seed, hash_bytes(key)));
    z = r.normal();
  }
  return std::exp(log_median(config, instance) + spec_.noise_scale * z);
}

Evaluation SyntheticBenchmark::evaluate(const Configuration& config, const std::string& instance, std::int64_t seed,
                                        double cap) const {
  return capped_runtime(runtime(config, instance, seed), spec_.cutoff, cap);
}

double SyntheticBenchmark::true_cost(const Configuration& config, Split split) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < instances_->size(); ++i) {
    if (instances_->split(i) != split) continue;
    const double t = std::exp(base_ + config_term(config) + hardness_[i]);
    sum += t >= spec_.cutoff ? kPenaltyFactor * spec_.cutoff : t;
    ++n;
  }
  return sum / static_cast<double>(n);
}

}  // namespace surrobench
