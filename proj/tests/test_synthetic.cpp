#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "surrobench/synthetic.hpp"

using namespace surrobench;

TEST_CASE("synthetic space shape") {
  SyntheticBenchmark b(SyntheticSpec{});
  const auto& space = b.space();
  CHECK(space.size() == 10);
  std::size_t categorical = 0;
  for (std::size_t i = 0; i < space.size(); ++i) categorical += space.parameter(i).kind == ParamKind::categorical;
  CHECK(categorical == 3);
  CHECK(space.conditions().size() == 2);
  CHECK(b.instances().size() == 20);
  CHECK(b.instances().ids_in(Split::train).size() == 10);
}

TEST_CASE("noise scale zero makes the seed irrelevant") {
  SyntheticSpec spec;
  spec.noise_scale = 0.0;
  SyntheticBenchmark b(spec);
  Random r(1);
  for (int k = 0; k < 100; ++k) {
    const auto cfg = sample_uniform(b.space(), r);
    const auto& inst = b.instances().id(r.index(b.instances().size()));
    CHECK(b.runtime(cfg, inst, 1) == b.runtime(cfg, inst, 987654));
    CHECK(b.evaluate(cfg, inst, 1, 300) == b.evaluate(cfg, inst, 2, 300));
  }
}

TEST_CASE("harder instances have higher median cost at a fixed configuration") {
  SyntheticBenchmark b(SyntheticSpec{});
  std::vector<std::size_t> order(b.instances().size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return b.hardness(x) < b.hardness(y); });
  Random r(2);
  for (int k = 0; k < 20; ++k) {
    const auto cfg = sample_uniform(b.space(), r);
    for (std::size_t i = 1; i < order.size(); ++i) {
      CHECK(b.log_median(cfg, b.instances().id(order[i - 1])) < b.log_median(cfg, b.instances().id(order[i])));
    }
  }
}

TEST_CASE("timeout share of uniform runs matches the requested fraction") {
  for (double frac : {0.1, 0.3}) {
    SyntheticSpec spec;
    spec.timeout_fraction = frac;
    SyntheticBenchmark b(spec);
    // Fresh draws, independent of the calibration sample.
    Random r(12345);
    std::size_t timeouts = 0;
    const std::size_t n = 10000;
    for (std::size_t k = 0; k < n; ++k) {
      const auto cfg = sample_uniform(b.space(), r);
      const auto& inst = b.instances().id(r.index(b.instances().size()));
      timeouts += b.evaluate(cfg, inst, r.run_seed(), spec.cutoff).status == RunStatus::timeout;
    }
    CHECK(std::abs(static_cast<double>(timeouts) / n - frac) <= 0.05);
  }
}

TEST_CASE("fully reproducible from the seed") {
  SyntheticSpec spec;
  SyntheticBenchmark a(spec), b(spec);
  spec.seed = 2;
  SyntheticBenchmark c(spec);
  Random r(3);
  bool differs = false;
  for (int k = 0; k < 50; ++k) {
    const auto cfg = sample_uniform(a.space(), r);
    CHECK(a.runtime(cfg, "inst003", k) == b.runtime(cfg, "inst003", k));
    differs |= a.runtime(cfg, "inst003", k) != c.runtime(cfg, "inst003", k);
  }
  CHECK(differs);
}

TEST_CASE("ground truth: runtime decomposes into base, configuration and instance terms") {
  SyntheticSpec spec;
  spec.noise_scale = 0.0;
  SyntheticBenchmark b(spec);
  Random r(4);
  for (int k = 0; k < 50; ++k) {
    const auto cfg = sample_uniform(b.space(), r);
    const std::size_t i = r.index(b.instances().size());
    const double expect = std::exp(b.base() + b.config_term(cfg) + b.hardness(i));
    CHECK(b.runtime(cfg, b.instances().id(i), 5) == doctest::Approx(expect).epsilon(1e-12));
  }
  // true_cost: PAR10 mean over the split, recomputed by hand
  const auto cfg = b.space().default_configuration();
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < b.instances().size(); ++i) {
    if (b.instances().split(i) != Split::test) continue;
    const double t = b.runtime(cfg, b.instances().id(i), 0);
    sum += t >= 300 ? 3000 : t;
    ++n;
  }
  CHECK(b.true_cost(cfg, Split::test) == doctest::Approx(sum / n).epsilon(1e-12));
}

TEST_CASE("invalid specs are rejected") {
  SyntheticSpec s;
  s.num_instances = 1;
  CHECK_THROWS_AS(SyntheticBenchmark{s}, Error);
  s = {};
  s.timeout_fraction = 0;
  CHECK_THROWS_AS(SyntheticBenchmark{s}, Error);
  s = {};
  s.cutoff = -1;
  CHECK_THROWS_AS(SyntheticBenchmark{s}, Error);
}
