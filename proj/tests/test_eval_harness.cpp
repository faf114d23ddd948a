#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"

using namespace surrobench;

namespace {

/// One record per label; enough for split planning.
Dataset labelled(const std::vector<RunLabel>& labels) {
  const Dataset& base = fixtures::small_dataset();
  std::vector<RunRecord> recs;
  for (const auto& l : labels) {
    RunRecord r = base.records.front();
    r.source = l;
    recs.push_back(r);
  }
  return base.with_records(recs);
}

std::vector<RunLabel> grid_labels(const std::vector<std::string>& names, int reps) {
  std::vector<RunLabel> out;
  for (const auto& n : names) {
    for (int r = 0; r < reps; ++r) out.push_back({n, r});
  }
  return out;
}

void check_plan(const SplitPlan& plan, const std::vector<RunLabel>& labels) {
  std::set<RunLabel> covered;
  for (const auto& s : plan) {
    std::set<RunLabel> train(s.train.begin(), s.train.end());
    for (const auto& h : s.held_out) {
      CHECK_FALSE(train.count(h));
      covered.insert(h);
    }
    CHECK(s.train.size() + s.held_out.size() == labels.size());
  }
  CHECK(covered == std::set<RunLabel>(labels.begin(), labels.end()));
}

}  // namespace

TEST_CASE("leave-one-run-out splits") {
  const auto labels = grid_labels({"roar", "ils", "random"}, 10);
  const auto plan = loro_splits(labelled(labels));
  REQUIRE(plan.size() == 10);
  for (const auto& s : plan) {
    CHECK(s.train.size() == 27);
    CHECK(s.held_out.size() == 3);
  }
  check_plan(plan, labels);
  CHECK(loro_splits(labelled(grid_labels({"roar"}, 2))).size() == 2);
  CHECK_THROWS_AS(loro_splits(labelled(grid_labels({"roar"}, 1))), DataError);
  CHECK_THROWS_AS(loro_splits(labelled({{"", 0}, {"", 1}})), DataError);
  CHECK_THROWS_AS(loro_splits(fixtures::small_dataset().with_records({})), DataError);
}

TEST_CASE("leave-one-configurator-out splits") {
  const auto labels = grid_labels({"roar", "ils", "random"}, 4);
  const auto plan = loco_splits(labelled(labels));
  REQUIRE(plan.size() == 3);
  for (const auto& s : plan) {
    for (const auto& l : s.train) CHECK(l.configurator != s.name);
    for (const auto& l : s.held_out) CHECK(l.configurator == s.name);
  }
  check_plan(plan, labels);
  CHECK_THROWS_AS(loco_splits(labelled(grid_labels({"roar"}, 4))), DataError);
}

TEST_CASE("split plans are disjoint and covering for random label sets") {
  Random r(21);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RunLabel> labels;
    const std::size_t k = 2 + r.index(4);
    for (std::size_t c = 0; c < k; ++c) {
      const int reps = 2 + static_cast<int>(r.index(5));
      for (int rep = 0; rep < reps; ++rep) {
        if (rep < 2 || r.bernoulli(0.8)) labels.push_back({"c" + std::to_string(c), rep});
      }
    }
    const Dataset ds = labelled(labels);
    check_plan(loro_splits(ds), labels);
    check_plan(loco_splits(ds), labels);
  }
}

TEST_CASE("select_runs keeps only the chosen labels in order") {
  const auto& ds = fixtures::small_dataset();
  const auto picked = select_runs(ds, {{"roar", 1}});
  REQUIRE_FALSE(picked.records.empty());
  for (const auto& r : picked.records) CHECK(r.source == RunLabel{"roar", 1});
  CHECK(run_labels(ds).size() == 4);
}

TEST_CASE("a memorising forest evaluated on its own training runs scores RMSE 0 and CC 1") {
  // Repeated (config, instance) inputs with different noisy costs cannot be memorised, so keep one of each.
  std::vector<RunRecord> clean;
  std::set<std::string> seen;
  for (const auto& r : fixtures::small_dataset().records) {
    if (r.status == RunStatus::censored) continue;
    if (seen.insert(r.config.canonical() + '\0' + r.instance).second) clean.push_back(r);
  }
  const Dataset ds = fixtures::small_dataset().with_records(clean);
  BuildOptions opts;
  opts.forest.num_trees = 1;
  opts.forest.frac_points = 1.0;
  opts.forest.frac_feats = 1.0;
  opts.forest.min_samples_to_split = 2;
  opts.forest.max_depth = 64;
  const auto labels = run_labels(ds);
  const auto rep = model_quality(ds, {{"self", labels, labels}}, opts, 1);
  for (const auto& row : rep.rows) {
    CHECK(row.rmse == 0.0);
    REQUIRE(row.cc.has_value());
    CHECK(*row.cc == doctest::Approx(1.0).epsilon(1e-12));
  }
  REQUIRE(rep.find("configuration") != nullptr);
  CHECK(rep.find("validation") != nullptr);
  CHECK(rep.find("validation/roar") != nullptr);
}

TEST_CASE("held-out rows with constant truth report CC as missing") {
  std::vector<RunRecord> recs;
  for (const auto& r : fixtures::small_dataset().records) {
    if (r.status == RunStatus::censored) continue;
    RunRecord c = r;
    if (c.source.repetition == 1) {
      c.status = RunStatus::timeout;
      c.measured_cost = c.cutoff;
    }
    recs.push_back(c);
  }
  const Dataset ds = fixtures::small_dataset().with_records(recs);
  const auto labels = run_labels(ds);
  std::vector<RunLabel> train, held;
  for (const auto& l : labels) (l.repetition == 1 ? held : train).push_back(l);
  const auto rep = model_quality(ds, {{"s", train, held}}, fixtures::small_build(), 1);
  for (const auto& row : rep.rows) CHECK_FALSE(row.cc.has_value());
  CHECK_FALSE(rep.find("configuration")->mean_cc.has_value());
  std::ostringstream csv;
  rep.write_csv(csv);
  CHECK(csv.str().find("NA") != std::string::npos);
  CHECK(rep.to_json()["summary"][0]["mean_cc"].is_null());
}

TEST_CASE("censored held-out rows are not scored") {
  const auto& ds = fixtures::small_dataset();
  const auto plan = loro_splits(ds);
  const auto rep = model_quality(ds, plan, fixtures::small_build(), 2);
  for (const auto& s : plan) {
    std::size_t scorable = 0;
    const std::set<RunLabel> held(s.held_out.begin(), s.held_out.end());
    for (const auto& r : ds.records) {
      scorable += held.count(r.source) && !r.is_validation && r.status != RunStatus::censored;
    }
    for (const auto& row : rep.rows) {
      if (row.split == s.name && row.scope == "configuration") CHECK(row.rows == scorable);
    }
  }
}

TEST_CASE("budget grid: 20 log-spaced points from the cutoff, or from 2 for evaluation budgets") {
  const auto g = default_budget_grid(Budget::seconds(90000), 300);
  REQUIRE(g.size() == 20);
  CHECK(g.front() == 300);
  CHECK(g.back() == 90000);
  for (std::size_t i = 1; i + 1 < g.size(); ++i) {
    CHECK(std::log(g[i + 1] / g[i]) == doctest::Approx(std::log(g[i] / g[i - 1])).epsilon(1e-9));
  }
  const auto e = default_budget_grid(Budget::evaluations(1000), 300);
  CHECK(e.front() == 2);
  CHECK(e.back() == 1000);
  CHECK(default_budget_grid(Budget::seconds(100), 300) == std::vector<double>{100});
}

namespace {

CompareOptions small_compare() {
  CompareOptions o;
  o.n_runs = 5;
  o.configurator.budget = Budget::seconds(6000);
  o.timing_requests = 50;
  return o;
}

}  // namespace

TEST_CASE("compare against itself has error exactly zero") {
  const auto& bench = fixtures::small_bench();
  const auto rep = compare(bench, bench, small_compare());
  CHECK(rep.error == 0.0);
  CHECK(rep.original_performance == rep.surrogate_performance);
  CHECK(rep.pairs.size() == 3);
  CHECK(rep.grid.size() == 20);
  REQUIRE(rep.timing.has_value());
  CHECK(rep.timing->speedup > 0);
  CHECK(rep.timing->speedup == doctest::Approx(rep.timing->mean_original_cost / rep.timing->mean_latency));
}

TEST_CASE("compare is reproducible and its reports serialize") {
  const auto& bench = fixtures::small_bench();
  const SurrogateBackend surrogate(fixtures::small_model());
  auto opts = small_compare();
  opts.configurators = {"roar", "random"};
  const auto a = compare(bench, surrogate, opts);
  const auto b = compare(bench, surrogate, opts);
  CHECK(a.to_json().dump() == b.to_json().dump());
  CHECK(a.error >= 0.0);
  CHECK(a.error <= 1.0);
  CHECK_FALSE(a.to_json().contains("timing"));
  CHECK(a.to_json(true).contains("timing"));

  std::ostringstream traj, outc;
  a.write_trajectories_csv(traj);
  a.write_outcomes_csv(outc);
  const std::string traj_text = traj.str(), outc_text = outc.str();
  auto lines = std::count(traj_text.begin(), traj_text.end(), '\n');
  CHECK(lines == 1 + 2 * 2 * 5 * 20);
  CHECK(traj_text.rfind("budget,run,configurator,backend,cost\n", 0) == 0);
  lines = std::count(outc_text.begin(), outc_text.end(), '\n');
  CHECK(lines == 1 + 20 * 1);  // one pair
  // performance curves are non-increasing
  for (const auto& per_cfg : a.original_performance) {
    for (const auto& curve : per_cfg) {
      for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i] <= curve[i - 1]);
    }
  }
}

TEST_CASE("one disagreeing cell among P pairs and B budgets costs 1/(P*B)") {
  FidelityReport rep;
  const std::size_t pairs = 3, budgets = 20;
  rep.original_outcomes.assign(budgets, std::vector<Outcome>(pairs, Outcome::equal));
  rep.surrogate_outcomes = rep.original_outcomes;
  rep.original_outcomes[7][1] = Outcome::better;
  rep.surrogate_outcomes[7][1] = Outcome::worse;
  CHECK(surrogate_error(rep.original_outcomes, rep.surrogate_outcomes) ==
        doctest::Approx(1.0 / (pairs * budgets)).epsilon(1e-15));
}

TEST_CASE("collect_runs labels every cell and validates incumbents on test instances") {
  const auto& ds = fixtures::small_dataset();
  CHECK(run_labels(ds) == std::vector<RunLabel>{{"random", 0}, {"random", 1}, {"roar", 0}, {"roar", 1}});
  std::size_t config_rows = 0;
  for (const auto& r : ds.records) {
    config_rows += !r.is_validation;
    const auto split = ds.instances->split(*ds.instances->find(r.instance));
    CHECK(split == (r.is_validation ? Split::test : Split::train));
  }
  CHECK(config_rows == 4 * 150);
}

namespace {

struct SettingComparison {
  QualityReport setting_one, setting_two;
};

SettingComparison compare_settings(std::uint64_t bench_seed) {
  SyntheticSpec spec;
  spec.seed = bench_seed;
  const SyntheticBenchmark bench(spec);
  CollectOptions co;
  co.repetitions = 3;
  co.configurator.budget = Budget::evaluations(500);
  co.seed = 8;
  const Dataset ds = collect_runs(bench, co);
  BuildOptions bo;
  bo.forest.num_trees = 16;
  SettingComparison out;
  bo.setting = TrainingSetting::train_only;
  out.setting_one = model_quality(ds, loro_splits(ds), bo, 4);
  bo.setting = TrainingSetting::train_plus_test_incumbents;
  out.setting_two = model_quality(ds, loro_splits(ds), bo, 4);
  return out;
}

const std::vector<SettingComparison>& setting_comparisons() {
  static const std::vector<SettingComparison> all = [] {
    std::vector<SettingComparison> out;
    for (std::uint64_t s = 1; s <= 5; ++s) out.push_back(compare_settings(s));
    return out;
  }();
  return all;
}

}  // namespace

TEST_CASE("with validation runs in training, held-out validation CC is at least configuration CC in the median") {
  const auto& rep = setting_comparisons().back().setting_two;
  const auto* conf = rep.find("configuration");
  const auto* val = rep.find("validation");
  REQUIRE(conf != nullptr);
  REQUIRE(val != nullptr);
  REQUIRE(conf->median_cc.has_value());
  REQUIRE(val->median_cc.has_value());
  MESSAGE("median CC configuration " << *conf->median_cc << " validation " << *val->median_cc);
  CHECK(*val->median_cc >= *conf->median_cc);
}

TEST_CASE("adding validation runs to training improves held-out validation predictions across benchmarks") {
  double cc_one = 0, cc_two = 0, rmse_one = 0, rmse_two = 0;
  for (const auto& c : setting_comparisons()) {
    const auto* one = c.setting_one.find("validation");
    const auto* two = c.setting_two.find("validation");
    REQUIRE(one != nullptr);
    REQUIRE(two != nullptr);
    cc_one += *one->mean_cc;
    cc_two += *two->mean_cc;
    rmse_one += one->mean_rmse;
    rmse_two += two->mean_rmse;
  }
  const double n = static_cast<double>(setting_comparisons().size());
  MESSAGE("validation CC " << cc_one / n << " -> " << cc_two / n << ", RMSE " << rmse_one / n << " -> " << rmse_two / n);
  CHECK(cc_two >= cc_one);
  CHECK(rmse_two <= rmse_one);
}
