#pragma once

// Small shared benchmark, dataset and model reused across test files.

#include <memory>

#include "surrobench/eval_harness.hpp"
#include "surrobench/synthetic.hpp"

namespace fixtures {

using namespace surrobench;

inline SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.seed = 7;
  s.num_instances = 6;
  return s;
}

inline const SyntheticBenchmark& small_bench() {
  static const SyntheticBenchmark bench(small_spec());
  return bench;
}

/// random and roar, two repetitions each, 150 evaluations per run, with validations.
inline const Dataset& small_dataset() {
  static const Dataset ds = [] {
    CollectOptions co;
    co.repetitions = 2;
    co.configurator.budget = Budget::evaluations(150);
    co.seed = 3;
    return collect_runs(small_bench(), co);
  }();
  return ds;
}

inline ForestConfig small_forest() {
  ForestConfig f;
  f.num_trees = 8;
  return f;
}

inline BuildOptions small_build() {
  BuildOptions o;
  o.forest = small_forest();
  return o;
}

inline std::shared_ptr<const SurrogateBenchmark> small_model() {
  static const auto sb =
      std::make_shared<const SurrogateBenchmark>(SurrogateBenchmark::build(small_dataset(), small_build(), 11));
  return sb;
}

/// Random valid (config, train-or-test instance, seed) requests.
struct Request {
  Configuration config;
  std::string instance;
  std::int64_t seed;
};

inline std::vector<Request> random_requests(const SurrogateBenchmark& sb, std::size_t n, std::uint64_t seed) {
  Random r(seed);
  std::vector<Request> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto cfg = sample_uniform(sb.space(), r);
    out.push_back({std::move(cfg), sb.instances().id(r.index(sb.instances().size())), r.run_seed()});
  }
  return out;
}

}  // namespace fixtures
