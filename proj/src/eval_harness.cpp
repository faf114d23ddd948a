#include "surrobench/eval_harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>

namespace surrobench {

std::uint64_t repetition_seed(std::uint64_t master, std::size_t index, std::size_t rep) {
  return derive_seed(master, 1000 * static_cast<std::uint64_t>(index) + rep);
}

Dataset collect_runs(const BenchmarkBackend& backend, const CollectOptions& opts) {
  if (opts.configurators.empty() || opts.repetitions == 0) throw Error("nothing to collect");
  const std::size_t cells = opts.configurators.size() * opts.repetitions;
  std::vector<ConfiguratorResult> results(cells);
  std::vector<std::vector<RunRecord>> validations(cells);
  parallel_for(cells, [&](std::size_t k) {
    const std::size_t ci = k / opts.repetitions, rep = k % opts.repetitions;
    const std::uint64_t seed = repetition_seed(opts.seed, ci, rep);
    results[k] = run_configurator(opts.configurators[ci], backend, opts.configurator, seed);
    if (opts.validate) {
      const RunLabel label{opts.configurators[ci], static_cast<int>(rep)};
      validations[k] = validate_incumbents(backend, results[k], label, derive_seed(seed, 1), opts.max_incumbents);
    }
  });
  std::vector<LabeledRun> runs;
  std::vector<RunRecord> all_validations;
  for (std::size_t k = 0; k < cells; ++k) {
    runs.push_back({{opts.configurators[k / opts.repetitions], static_cast<int>(k % opts.repetitions)}, &results[k]});
    all_validations.insert(all_validations.end(), validations[k].begin(), validations[k].end());
  }
  return export_dataset(backend, runs, all_validations);
}

// ---------------------------------------------------------------------------

std::vector<RunLabel> run_labels(const Dataset& ds) {
  std::set<RunLabel> labels;
  for (const auto& r : ds.records) labels.insert(r.source);
  return {labels.begin(), labels.end()};
}

Dataset select_runs(const Dataset& ds, const std::vector<RunLabel>& labels) {
  const std::set<RunLabel> keep(labels.begin(), labels.end());
  std::vector<RunRecord> out;
  for (const auto& r : ds.records) {
    if (keep.count(r.source)) out.push_back(r);
  }
  return ds.with_records(std::move(out));
}

namespace {

std::map<std::string, std::vector<int>> repetitions_by_configurator(const Dataset& ds) {
  if (ds.records.empty()) throw DataError("dataset has no records");
  std::map<std::string, std::vector<int>> reps;
  for (const auto& l : run_labels(ds)) {
    if (l.configurator.empty()) throw DataError("dataset has records without a run label");
    reps[l.configurator].push_back(l.repetition);
  }
  return reps;
}

}  // namespace

SplitPlan loro_splits(const Dataset& ds) {
  const auto reps = repetitions_by_configurator(ds);
  std::set<int> indices;
  for (const auto& [name, rs] : reps) {
    if (rs.size() < 2) throw DataError("configurator '" + name + "' has fewer than two runs");
    indices.insert(rs.begin(), rs.end());
  }
  const auto labels = run_labels(ds);
  SplitPlan plan;
  for (int r : indices) {
    DataSplit s;
    s.name = "run" + std::to_string(r);
    for (const auto& l : labels) (l.repetition == r ? s.held_out : s.train).push_back(l);
    plan.push_back(std::move(s));
  }
  return plan;
}

SplitPlan loco_splits(const Dataset& ds) {
  const auto reps = repetitions_by_configurator(ds);
  if (reps.size() < 2) throw DataError("leave-one-configurator-out needs at least two configurators");
  const auto labels = run_labels(ds);
  SplitPlan plan;
  for (const auto& [name, rs] : reps) {
    DataSplit s;
    s.name = name;
    for (const auto& l : labels) (l.configurator == name ? s.held_out : s.train).push_back(l);
    plan.push_back(std::move(s));
  }
  return plan;
}

// ---------------------------------------------------------------------------

const QualityReport::Summary* QualityReport::find(const std::string& scope) const {
  for (const auto& s : summary) {
    if (s.scope == scope) return &s;
  }
  return nullptr;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }
std::string optional_csv(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

bool scope_before(const std::string& a, const std::string& b) {
  // Aggregate scopes first, then per-configurator ones.
  const bool sa = a.find('/') != std::string::npos, sb = b.find('/') != std::string::npos;
  if (sa != sb) return !sa;
  return a < b;
}

}  // namespace

nlohmann::json QualityReport::to_json() const {
  nlohmann::json out{{"splits", nlohmann::json::array()}, {"summary", nlohmann::json::array()}};
  for (const auto& r : rows) {
    out["splits"].push_back(
        {{"split", r.split}, {"scope", r.scope}, {"rows", r.rows}, {"rmse", r.rmse}, {"cc", optional_json(r.cc)}});
  }
  for (const auto& s : summary) {
    out["summary"].push_back({{"scope", s.scope},
                              {"splits", s.splits},
                              {"mean_rmse", s.mean_rmse},
                              {"mean_cc", optional_json(s.mean_cc)},
                              {"median_cc", optional_json(s.median_cc)}});
  }
  return out;
}

void QualityReport::write_csv(std::ostream& out) const {
  out << "split,scope,rows,rmse,cc\n";
  for (const auto& r : rows) {
    out << r.split << ',' << r.scope << ',' << r.rows << ',' << format_double(r.rmse) << ',' << optional_csv(r.cc)
        << '\n';
  }
  for (const auto& s : summary) {
    out << "mean," << s.scope << ',' << s.splits << ',' << format_double(s.mean_rmse) << ','
        << optional_csv(s.mean_cc) << '\n';
  }
}

QualityReport model_quality(const Dataset& ds, const SplitPlan& plan, const BuildOptions& opts, std::uint64_t seed) {
  if (plan.empty()) throw Error("empty split plan");
  QualityReport report;
  for (std::size_t k = 0; k < plan.size(); ++k) {
    const DataSplit& split = plan[k];
    const auto sb = SurrogateBenchmark::build(select_runs(ds, split.train), opts, derive_seed(seed, k));

    const std::set<RunLabel> held(split.held_out.begin(), split.held_out.end());
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>, bool (*)(const std::string&,
                                                                                          const std::string&)>
        buckets(scope_before);
    for (const auto& r : ds.records) {
      if (!held.count(r.source)) continue;
      if (r.status == RunStatus::censored || r.status == RunStatus::crashed) continue;
      const double truth = response_value(r, ds.objective);
      const double pred = sb.predict_median(r.config, r.instance);
      const std::string scope = r.is_validation ? "validation" : "configuration";
      for (const auto& key : {scope, scope + "/" + r.source.configurator}) {
        buckets[key].first.push_back(truth);
        buckets[key].second.push_back(pred);
      }
    }
    for (const auto& [scope, tp] : buckets) {
      QualityRow row{split.name, scope, tp.first.size(), rmse(tp.first, tp.second), std::nullopt};
      try {
        row.cc = spearman(tp.first, tp.second);
      } catch (const Error&) {
        // constant truth or prediction: correlation is undefined
      }
      report.rows.push_back(std::move(row));
    }
  }

  std::vector<std::string> scopes;
  for (const auto& r : report.rows) {
    if (std::find(scopes.begin(), scopes.end(), r.scope) == scopes.end()) scopes.push_back(r.scope);
  }
  std::sort(scopes.begin(), scopes.end(), scope_before);
  for (const auto& scope : scopes) {
    QualityReport::Summary s;
    s.scope = scope;
    std::vector<double> ccs;
    for (const auto& r : report.rows) {
      if (r.scope != scope) continue;
      ++s.splits;
      s.mean_rmse += r.rmse;
      if (r.cc) ccs.push_back(*r.cc);
    }
    s.mean_rmse /= static_cast<double>(s.splits);
    if (!ccs.empty()) {
      double sum = 0.0;
      for (double c : ccs) sum += c;
      s.mean_cc = sum / static_cast<double>(ccs.size());
      s.median_cc = median(ccs);
    }
    report.summary.push_back(std::move(s));
  }
  return report;
}

// ---------------------------------------------------------------------------

std::vector<double> default_budget_grid(const Budget& total, double cutoff, std::size_t points) {
  if (points == 0) throw Error("budget grid needs at least one point");
  const double lo = total.kind == Budget::Kind::time ? cutoff : 2.0;
  const double hi = total.limit;
  if (!(hi > lo)) return {hi};
  std::vector<double> grid;
  if (points == 1) return {hi};
  for (std::size_t i = 0; i < points; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(points - 1);
    grid.push_back(i + 1 == points ? hi : lo * std::pow(hi / lo, t));
  }
  return grid;
}

double training_cost(const BenchmarkBackend& backend, const Configuration& config, std::size_t seeds_per_instance,
                     std::uint64_t seed) {
  auto ids = backend.instances().ids_in(Split::train);
  if (ids.empty()) ids = backend.instances().ids();
  Random rand(seed);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < std::max<std::size_t>(1, seeds_per_instance); ++k) {
    for (const auto& inst : ids) {
      sum += backend.evaluate(config, inst, rand.run_seed(), backend.cutoff()).cost;
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

namespace {

/// Best training cost at each grid budget of one run's trajectory.
std::vector<double> performance_curve(const BenchmarkBackend& backend, const Trajectory& trajectory,
                                      const std::vector<double>& grid, const CompareOptions& opts,
                                      std::map<std::string, double>& cache) {
  std::vector<double> costs;
  for (const auto& e : trajectory.entries) {
    const std::string key = e.incumbent.canonical();
    auto it = cache.find(key);
    if (it == cache.end()) {
      it = cache.emplace(key, training_cost(backend, e.incumbent, opts.seeds_per_instance, derive_seed(opts.seed, 77)))
               .first;
    }
    costs.push_back(it->second);
  }
  std::vector<double> curve;
  for (double b : grid) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < trajectory.entries.size() && trajectory.entries[i].budget <= b; ++i) {
      best = std::min(best, costs[i]);
    }
    curve.push_back(best);
  }
  return curve;
}

std::vector<std::vector<Outcome>> outcomes(const std::vector<std::vector<std::vector<double>>>& perf,
                                           const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                           std::size_t budgets, double alpha) {
  std::vector<std::vector<Outcome>> out(budgets);
  for (std::size_t b = 0; b < budgets; ++b) {
    std::vector<std::vector<double>> groups;
    for (const auto& runs : perf) {
      std::vector<double> g;
      for (const auto& curve : runs) g.push_back(curve[b]);
      groups.push_back(std::move(g));
    }
    for (const auto& [i, j] : pairs) out[b].push_back(pairwise_outcome(groups[i], groups[j], groups, alpha));
  }
  return out;
}

}  // namespace

FidelityReport compare(const BenchmarkBackend& original, const BenchmarkBackend& surrogate,
                       const CompareOptions& opts) {
  if (opts.configurators.size() < 2) throw Error("compare needs at least two configurators");
  if (opts.n_runs == 0) throw Error("compare needs at least one run per configurator");
  FidelityReport rep;
  rep.configurators = opts.configurators;
  rep.grid = opts.grid.empty() ? default_budget_grid(opts.configurator.budget, original.cutoff()) : opts.grid;
  for (std::size_t i = 0; i < opts.configurators.size(); ++i) {
    for (std::size_t j = i + 1; j < opts.configurators.size(); ++j) rep.pairs.emplace_back(i, j);
  }

  const std::size_t k = opts.configurators.size();
  const std::size_t cells = k * opts.n_runs;
  std::vector<Trajectory> trajectories(2 * cells);
  parallel_for(2 * cells, [&](std::size_t c) {
    const std::size_t cell = c % cells;
    const BenchmarkBackend& backend = c < cells ? original : surrogate;
    const std::size_t ci = cell / opts.n_runs, run = cell % opts.n_runs;
    trajectories[c] =
        run_configurator(opts.configurators[ci], backend, opts.configurator, repetition_seed(opts.seed, ci, run))
            .trajectory;
  });

  // Training costs are computed sequentially with one cache per backend.
  for (int side = 0; side < 2; ++side) {
    const BenchmarkBackend& backend = side == 0 ? original : surrogate;
    auto& perf = side == 0 ? rep.original_performance : rep.surrogate_performance;
    std::map<std::string, double> cache;
    perf.assign(k, {});
    for (std::size_t cell = 0; cell < cells; ++cell) {
      perf[cell / opts.n_runs].push_back(
          performance_curve(backend, trajectories[side * cells + cell], rep.grid, opts, cache));
    }
  }
  rep.original_outcomes = outcomes(rep.original_performance, rep.pairs, rep.grid.size(), opts.alpha);
  rep.surrogate_outcomes = outcomes(rep.surrogate_performance, rep.pairs, rep.grid.size(), opts.alpha);
  rep.error = surrogate_error(rep.original_outcomes, rep.surrogate_outcomes);

  if (opts.timing_requests > 0) {
    Random rand(derive_seed(opts.seed, 99));
    auto ids = original.instances().ids_in(Split::train);
    if (ids.empty()) ids = original.instances().ids();
    std::vector<std::tuple<Configuration, std::string, std::int64_t>> requests;
    for (std::size_t i = 0; i < opts.timing_requests; ++i) {
      auto cfg = sample_uniform(original.space(), rand);
      requests.emplace_back(std::move(cfg), ids[rand.index(ids.size())], rand.run_seed());
    }
    Timing t;
    t.requests = requests.size();
    for (const auto& [cfg, inst, s] : requests) t.mean_original_cost += original.evaluate(cfg, inst, s, original.cutoff()).consumed;
    t.mean_original_cost /= static_cast<double>(t.requests);
    const auto start = std::chrono::steady_clock::now();
    for (const auto& [cfg, inst, s] : requests) surrogate.evaluate(cfg, inst, s, surrogate.cutoff());
    t.mean_latency = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() /
                     static_cast<double>(t.requests);
    t.speedup = t.mean_latency > 0 ? t.mean_original_cost / t.mean_latency : std::numeric_limits<double>::infinity();
    rep.timing = t;
  }
  return rep;
}

std::vector<TrajectoryPoint> FidelityReport::trajectory_points() const {
  std::vector<TrajectoryPoint> out;
  for (int side = 0; side < 2; ++side) {
    const auto& perf = side == 0 ? original_performance : surrogate_performance;
    for (std::size_t ci = 0; ci < perf.size(); ++ci) {
      for (std::size_t run = 0; run < perf[ci].size(); ++run) {
        for (std::size_t b = 0; b < grid.size(); ++b) {
          out.push_back({grid[b], run, configurators[ci], side == 0 ? "original" : "surrogate", perf[ci][run][b]});
        }
      }
    }
  }
  return out;
}

nlohmann::json FidelityReport::to_json(bool with_timing) const {
  nlohmann::json j;
  j["configurators"] = configurators;
  j["grid"] = grid;
  j["error"] = error;
  auto outcome_json = [&](const std::vector<std::vector<Outcome>>& o) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t b = 0; b < o.size(); ++b) {
      nlohmann::json row = nlohmann::json::object();
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        row[configurators[pairs[p].first] + " vs " + configurators[pairs[p].second]] = std::string(to_string(o[b][p]));
      }
      arr.push_back(row);
    }
    return arr;
  };
  j["original_outcomes"] = outcome_json(original_outcomes);
  j["surrogate_outcomes"] = outcome_json(surrogate_outcomes);
  auto perf_json = [&](const std::vector<std::vector<std::vector<double>>>& perf) {
    nlohmann::json obj = nlohmann::json::object();
    for (std::size_t ci = 0; ci < perf.size(); ++ci) {
      nlohmann::json runs = nlohmann::json::array();
      for (const auto& curve : perf[ci]) {
        nlohmann::json c = nlohmann::json::array();
        for (double v : curve) c.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json());
        runs.push_back(std::move(c));
      }
      obj[configurators[ci]] = std::move(runs);
    }
    return obj;
  };
  j["original_performance"] = perf_json(original_performance);
  j["surrogate_performance"] = perf_json(surrogate_performance);
  if (with_timing && timing) {
    j["timing"] = {{"requests", timing->requests},
                   {"mean_original_cost", timing->mean_original_cost},
                   {"mean_latency", timing->mean_latency},
                   {"speedup", timing->speedup}};
  }
  return j;
}

void FidelityReport::write_outcomes_csv(std::ostream& out) const {
  out << "budget,first,second,original,surrogate,penalty\n";
  for (std::size_t b = 0; b < grid.size(); ++b) {
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      out << format_double(grid[b]) << ',' << configurators[pairs[p].first] << ',' << configurators[pairs[p].second]
          << ',' << to_string(original_outcomes[b][p]) << ',' << to_string(surrogate_outcomes[b][p]) << ','
          << format_double(outcome_penalty(original_outcomes[b][p], surrogate_outcomes[b][p])) << '\n';
    }
  }
}

void FidelityReport::write_trajectories_csv(std::ostream& out) const {
  out << "budget,run,configurator,backend,cost\n";
  for (const auto& p : trajectory_points()) {
    out << format_double(p.budget) << ',' << p.run << ',' << p.configurator << ',' << p.backend << ','
        << format_double(p.cost) << '\n';
  }
}

}  // namespace surrobench
