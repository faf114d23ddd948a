#include "surrobench/configurators.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>

#include "surrobench/qrf.hpp"
#include "surrobench/serve.hpp"

namespace surrobench {

Evaluation capped_runtime(double runtime, double cutoff, double cap) {
  if (!(cap > 0)) throw Error("run cap must be positive");
  if (cap < cutoff && runtime >= cap) return {RunStatus::censored, cap, cap};
  if (runtime >= cutoff) return {RunStatus::timeout, kPenaltyFactor * cutoff, cutoff};
  return {RunStatus::success, runtime, runtime};
}

Evaluation SurrogateBackend::evaluate(const Configuration& config, const std::string& instance, std::int64_t seed,
                                      double cap) const {
  const RunResult r = model_->predict_run(config, instance, seed);
  if (model_->objective() == Objective::quality) return {RunStatus::success, r.cost, 0.0};
  if (r.status == RunStatus::timeout) return capped_runtime(model_->cutoff(), model_->cutoff(), cap);
  return capped_runtime(r.cost, model_->cutoff(), cap);
}

RemoteBackend::RemoteBackend(const std::string& host, std::uint16_t port)
    : client_(std::make_unique<Client>(host, port)) {
  const auto reply = client_->call({{"id", 0}, {"op", "info"}});
  if (!reply.contains("info")) throw Error("server did not answer the info request");
  const auto& info = reply["info"];
  space_ = std::make_shared<const ConfigurationSpace>(parse_space(info.at("space").get<std::string>()));
  std::vector<std::string> ids;
  std::vector<std::vector<double>> feats;
  std::vector<Split> splits;
  for (const auto& i : info.at("instances")) {
    ids.push_back(i.at("id").get<std::string>());
    splits.push_back(parse_split(i.at("split").get<std::string>()));
    feats.push_back(i.at("features").get<std::vector<double>>());
  }
  instances_ = std::make_shared<const InstanceSet>(std::move(ids), std::move(feats), std::move(splits));
  cutoff_ = info.at("cutoff").get<double>();
  objective_ = parse_objective(info.at("objective").get<std::string>());
}

RemoteBackend::~RemoteBackend() = default;

Evaluation RemoteBackend::evaluate(const Configuration& config, const std::string& instance, std::int64_t seed,
                                   double cap) const {
  nlohmann::json reply;
  {
    std::lock_guard lock(mutex_);
    reply = client_->call(
        {{"id", next_id_++}, {"op", "run"}, {"config", config.to_json()}, {"instance", instance}, {"seed", seed}});
  }
  if (reply.contains("error")) throw Error("remote evaluation failed: " + reply["error"].dump());
  const double cost = reply.at("cost").get<double>();
  if (objective_ == Objective::quality) return {RunStatus::success, cost, 0.0};
  if (reply.at("status").get<std::string>() == "TIMEOUT") return capped_runtime(cutoff_, cutoff_, cap);
  return capped_runtime(cost, cutoff_, cap);
}

double Trajectory::best_at(double budget) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : entries) {
    if (e.budget > budget) break;
    best = std::min(best, e.estimate);
  }
  return best;
}

double expected_improvement(double mu, double sigma, double best) {
  if (!(sigma > 0)) return std::max(best - mu, 0.0);
  const double z = (best - mu) / sigma;
  const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  return std::max(0.0, (best - mu) * cdf + sigma * pdf);
}

// ---------------------------------------------------------------------------
// Shared machinery: budget, run history on a common (instance, seed) sequence,
// intensification with adaptive capping, trajectory bookkeeping.

namespace {

struct BudgetExhausted {};

/// Search iterations in a row that may pass without spending budget before a
/// run is declared finished (tiny or fully explored spaces).
constexpr std::size_t kMaxIdleIterations = 1000;

struct History {
  Configuration config;
  std::vector<double> costs;  // completed runs on pairs 0..n-1
  double sum = 0.0;
  double capped_at = 0.0;  // last cap that stopped a run, 0 if none

  std::size_t n() const { return costs.size(); }
  double prefix_sum(std::size_t k) const {
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += costs[i];
    return s;
  }
};

class Session {
 public:
  Session(const BenchmarkBackend& backend, const ConfiguratorOptions& opts, std::uint64_t seed, std::string name)
      : rand(derive_seed(seed, 10)), backend_(backend), opts_(opts), pair_rand_(derive_seed(seed, 11)) {
    if (!(opts.budget.limit > 0)) throw Error("configurator budget must be positive");
    result_.configurator = std::move(name);
    train_ = backend.instances().ids_in(Split::train);
    if (train_.empty()) train_ = backend.instances().ids();
    capping_ = opts.adaptive_capping && backend.objective() == Objective::runtime;
  }

  Random rand;

  const BenchmarkBackend& backend() const { return backend_; }
  const ConfiguratorOptions& opts() const { return opts_; }
  const std::vector<std::string>& train_instances() const { return train_; }

  Evaluation run(const Configuration& c, const std::string& instance, std::int64_t seed, double cap) {
    if (result_.consumed >= opts_.budget.limit) throw BudgetExhausted{};
    const Evaluation e = backend_.evaluate(c, instance, seed, cap);
    result_.consumed += opts_.budget.kind == Budget::Kind::time ? e.consumed : 1.0;
    result_.log.push_back({c, instance, seed, cap, e});
    return e;
  }

  const std::pair<std::string, std::int64_t>& pair(std::size_t k) {
    while (pairs_.size() <= k) {
      std::vector<std::string> block = train_;
      pair_rand_.shuffle(block);
      for (auto& inst : block) pairs_.emplace_back(std::move(inst), pair_rand_.run_seed());
    }
    return pairs_[k];
  }

  History& history(const Configuration& c) {
    auto [it, fresh] = history_.try_emplace(c.canonical());
    if (fresh) {
      it->second.config = c;
      order_.push_back(it->first);
    }
    return it->second;
  }
  const std::map<std::string, History>& histories() const { return history_; }
  const std::vector<std::string>& history_order() const { return order_; }

  void ensure_runs(const Configuration& c, std::size_t n) {
    History& h = history(c);
    while (h.n() < n) {
      const auto& [inst, seed] = pair(h.n());
      const Evaluation e = run(c, inst, seed, backend_.cutoff());
      h.costs.push_back(e.cost);
      h.sum += e.cost;
    }
  }

  double estimate(const Configuration& c) {
    const History& h = history(c);
    return h.sum / static_cast<double>(h.n());
  }

  /// Intensification of `chal` against `ref`; `ref` gains one run per call.
  bool better(const Configuration& chal, const Configuration& ref) {
    if (chal == ref) return false;
    History& hr = history(ref);
    if (hr.n() < opts_.max_incumbent_runs) ensure_runs(ref, hr.n() + 1);
    if (ref == incumbent_) record();
    const std::size_t n_ref = hr.n();
    History& hc = history(chal);
    for (std::size_t n = 1;; n *= 2) {
      const std::size_t target = std::min(n, n_ref);
      const double ref_sum = hr.prefix_sum(target);
      while (hc.n() < target) {
        double cap = backend_.cutoff();
        if (capping_) {
          cap = std::min(cap, opts_.slack * (ref_sum - hc.sum));
          if (!(cap > 0)) return false;  // already behind, whatever the remaining runs cost
        }
        const auto& [inst, seed] = pair(hc.n());
        const Evaluation e = run(chal, inst, seed, cap);
        if (e.status == RunStatus::censored) {
          hc.capped_at = cap;
          return false;
        }
        hc.costs.push_back(e.cost);
        hc.sum += e.cost;
      }
      const double chal_sum = hc.prefix_sum(target);
      if (chal_sum > ref_sum) return false;
      if (target == n_ref) return chal_sum < ref_sum;
    }
  }

  void set_incumbent(const Configuration& c) {
    incumbent_ = c;
    record();
  }
  const Configuration& incumbent() const { return incumbent_; }

  void record() {
    const double est = estimate(incumbent_);
    auto& entries = result_.trajectory.entries;
    if (!entries.empty() && entries.back().incumbent == incumbent_ && entries.back().estimate == est) return;
    if (!entries.empty() && entries.back().budget == result_.consumed) {
      entries.back() = {result_.consumed, incumbent_, est};
    } else {
      entries.push_back({result_.consumed, incumbent_, est});
    }
  }

  /// Records a trajectory point directly (random search keeps its own estimates).
  void record_direct(const Configuration& c, double est) {
    incumbent_ = c;
    auto& entries = result_.trajectory.entries;
    if (!entries.empty() && entries.back().budget == result_.consumed) {
      entries.back() = {result_.consumed, c, est};
    } else {
      entries.push_back({result_.consumed, c, est});
    }
  }

  /// Called once per search iteration; ends the run when nothing is being evaluated any more.
  void tick() {
    if (result_.consumed == last_tick_) {
      if (++idle_ >= kMaxIdleIterations) throw BudgetExhausted{};
    } else {
      idle_ = 0;
      last_tick_ = result_.consumed;
    }
  }

  ConfiguratorResult& result() { return result_; }

 private:
  double last_tick_ = -1.0;
  std::size_t idle_ = 0;
  const BenchmarkBackend& backend_;
  const ConfiguratorOptions& opts_;
  Random pair_rand_;
  std::vector<std::string> train_;
  std::vector<std::pair<std::string, std::int64_t>> pairs_;
  std::map<std::string, History> history_;
  std::vector<std::string> order_;
  Configuration incumbent_;
  bool capping_ = true;
  ConfiguratorResult result_;
};

template <class Body>
ConfiguratorResult drive(Session& s, Body&& body) {
  try {
    body();
  } catch (const BudgetExhausted&) {
  }
  if (s.result().trajectory.entries.empty()) throw Error("budget too small for a single evaluation");
  return std::move(s.result());
}

void start_from_default(Session& s) {
  const Configuration def = s.backend().space().default_configuration();
  s.ensure_runs(def, 1);
  s.set_incumbent(def);
}

}  // namespace

ConfiguratorResult random_search(const BenchmarkBackend& backend, const ConfiguratorOptions& opts,
                                 std::uint64_t seed) {
  Session s(backend, opts, seed, "random_search");
  return drive(s, [&] {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t runs = std::max<std::size_t>(1, opts.runs_per_config);
    while (true) {
      const Configuration c = sample_uniform(backend.space(), s.rand);
      double sum = 0.0;
      for (std::size_t k = 0; k < runs; ++k) {
        const auto& inst = s.train_instances()[s.rand.index(s.train_instances().size())];
        sum += s.run(c, inst, s.rand.run_seed(), backend.cutoff()).cost;
      }
      const double mean = sum / static_cast<double>(runs);
      if (mean < best) {
        best = mean;
        s.record_direct(c, mean);
      }
    }
  });
}

ConfiguratorResult roar(const BenchmarkBackend& backend, const ConfiguratorOptions& opts, std::uint64_t seed) {
  Session s(backend, opts, seed, "roar");
  return drive(s, [&] {
    start_from_default(s);
    while (true) {
      s.tick();
      const Configuration chal = sample_uniform(backend.space(), s.rand);
      if (s.better(chal, s.incumbent())) s.set_incumbent(chal);
    }
  });
}

ConfiguratorResult ils(const BenchmarkBackend& backend, const ConfiguratorOptions& opts, std::uint64_t seed) {
  Session s(backend, opts, seed, "ils");
  const auto& space = backend.space();
  return drive(s, [&] {
    start_from_default(s);
    Configuration current = s.incumbent();
    auto promote = [&] {
      if (current != s.incumbent() && s.better(current, s.incumbent())) s.set_incumbent(current);
    };
    auto local_search = [&] {
      for (bool improved = true; improved;) {
        improved = false;
        auto nbrs = neighbors(space, current, s.rand, opts.neighborhood);
        s.rand.shuffle(nbrs);
        for (auto& n : nbrs) {
          if (s.better(n, current)) {
            s.result().moves.push_back({current, n});
            current = std::move(n);
            promote();
            improved = true;
            break;
          }
        }
      }
    };

    for (std::size_t r = 0; r < opts.initial_random; ++r) {
      Configuration c = sample_uniform(space, s.rand);
      if (s.better(c, current)) current = std::move(c);
    }
    promote();
    local_search();
    while (true) {
      s.tick();
      if (s.rand.bernoulli(opts.restart_prob)) {
        current = sample_uniform(space, s.rand);
        s.ensure_runs(current, 1);
        local_search();
        promote();
        continue;
      }
      const Configuration saved = current;
      for (std::size_t k = 0; k < opts.perturb_strength; ++k) {
        auto nbrs = neighbors(space, current, s.rand, opts.neighborhood);
        if (nbrs.empty()) break;
        current = std::move(nbrs[s.rand.index(nbrs.size())]);
      }
      if (current == saved) continue;  // nothing to perturb; only a restart can move
      s.ensure_runs(current, 1);
      local_search();
      if (!s.better(current, saved)) current = saved;
      promote();
    }
  });
}

ConfiguratorResult smac_lite(const BenchmarkBackend& backend, const ConfiguratorOptions& opts, std::uint64_t seed) {
  Session s(backend, opts, seed, "smac_lite");
  const auto& space = backend.space();
  ForestConfig model_cfg;
  model_cfg.num_trees = 10;
  model_cfg.bootstrapping = true;
  model_cfg.frac_points = 1.0;
  model_cfg.frac_feats = 0.5;
  model_cfg.min_samples_to_split = 3;
  const auto cards = column_cardinalities(space, 0);

  return drive(s, [&] {
    start_from_default(s);
    std::set<std::string> tried{s.incumbent().canonical()};
    // The model is refitted whenever the observation count has grown by a tenth
    // (at least one new observation) since the last fit.
    std::optional<QuantileForest> model;
    std::size_t fitted_on = 0;
    for (std::uint64_t iter = 0;; ++iter) {
      s.tick();
      std::size_t observed = 0;
      for (const auto& key : s.history_order()) {
        const History& h = s.histories().at(key);
        observed += h.n() > 0 || h.capped_at > 0;
      }
      if (observed >= 2 && observed > fitted_on && (observed >= fitted_on + fitted_on / 10 || !model)) {
        std::vector<double> x, y;
        for (const auto& key : s.history_order()) {
          const History& h = s.histories().at(key);
          double v;
          if (h.n() > 0) {
            v = h.sum / static_cast<double>(h.n());
          } else if (h.capped_at > 0) {
            v = h.capped_at;  // lower bound from the capped run
          } else {
            continue;
          }
          const auto row = encode(space, impute_inactive(space, h.config), {}, 0);
          x.insert(x.end(), row.begin(), row.end());
          y.push_back(std::log10(std::max(v, kRuntimeFloor)));
        }
        model = QuantileForest::fit(MatrixView{x, space.size(), y, cards}, model_cfg, derive_seed(seed, 100 + iter));
        fitted_on = observed;
      }

      Configuration chal;
      if (!model || s.rand.bernoulli(opts.random_fraction)) {
        chal = sample_uniform(space, s.rand);
      } else {
        const double best = std::log10(std::max(s.estimate(s.incumbent()), kRuntimeFloor));
        std::vector<Configuration> pool = neighbors(space, s.incumbent(), s.rand, opts.neighborhood);
        for (std::size_t k = 0; k < opts.random_candidates; ++k) pool.push_back(sample_uniform(space, s.rand));
        double best_ei = -1.0;
        for (auto& cand : pool) {
          if (tried.count(cand.canonical())) continue;
          const auto mv = model->predict_mean_var(encode(space, impute_inactive(space, cand), {}, 0));
          const double ei = expected_improvement(mv.mean, std::sqrt(mv.variance), best);
          if (ei > best_ei) {
            best_ei = ei;
            chal = cand;
          }
        }
        if (best_ei < 0) chal = sample_uniform(space, s.rand);
      }
      tried.insert(chal.canonical());
      if (s.better(chal, s.incumbent())) s.set_incumbent(chal);
    }
  });
}

ConfiguratorResult run_configurator(const std::string& name, const BenchmarkBackend& backend,
                                    const ConfiguratorOptions& opts, std::uint64_t seed) {
  if (name == "random" || name == "random_search") return random_search(backend, opts, seed);
  if (name == "roar") return roar(backend, opts, seed);
  if (name == "ils") return ils(backend, opts, seed);
  if (name == "smac" || name == "smac_lite") return smac_lite(backend, opts, seed);
  throw Error("unknown configurator '" + name + "'");
}

// ---------------------------------------------------------------------------
// Export

namespace {

RunRecord to_record(const BenchmarkBackend& backend, const RunLabel& label, const Configuration& config,
                    const std::string& instance, std::int64_t seed, const Evaluation& e, bool validation) {
  RunRecord r;
  r.config = config;
  r.instance = instance;
  r.seed = seed;
  r.status = e.status;
  r.measured_cost = backend.objective() == Objective::runtime ? e.consumed : e.cost;
  r.cutoff = backend.cutoff();
  r.source = label;
  r.is_validation = validation;
  return r;
}

}  // namespace

std::vector<RunRecord> validate_incumbents(const BenchmarkBackend& backend, const ConfiguratorResult& result,
                                           const RunLabel& label, std::uint64_t seed, std::size_t max_incumbents) {
  std::vector<Configuration> distinct;
  for (const auto& e : result.trajectory.entries) {
    if (distinct.empty() || distinct.back() != e.incumbent) {
      distinct.erase(std::remove(distinct.begin(), distinct.end(), e.incumbent), distinct.end());
      distinct.push_back(e.incumbent);
    }
  }
  if (distinct.size() > max_incumbents) distinct.erase(distinct.begin(), distinct.end() - static_cast<std::ptrdiff_t>(max_incumbents));
  const auto tests = backend.instances().ids_in(Split::test);
  Random rand(seed);
  std::vector<RunRecord> out;
  for (const auto& c : distinct) {
    for (const auto& inst : tests) {
      const std::int64_t s = rand.run_seed();
      out.push_back(to_record(backend, label, c, inst, s, backend.evaluate(c, inst, s, backend.cutoff()), true));
    }
  }
  return out;
}

Dataset export_dataset(const BenchmarkBackend& backend, const std::vector<LabeledRun>& runs,
                       const std::vector<RunRecord>& validations) {
  Dataset ds{backend.space_ptr(), backend.instances_ptr(), backend.objective(), {}};
  for (const auto& run : runs) {
    for (const auto& e : run.result->log) {
      ds.records.push_back(to_record(backend, run.label, e.config, e.instance, e.seed, e.result, false));
    }
  }
  ds.records.insert(ds.records.end(), validations.begin(), validations.end());
  return ds;
}

}  // namespace surrobench
