#include "surrobench/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "surrobench/eval_harness.hpp"
#include "surrobench/serve.hpp"
#include "surrobench/synthetic.hpp"

namespace surrobench::cli {

namespace {

using nlohmann::json;

struct UsageError : Error {
  using Error::Error;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!trim(item).empty()) out.emplace_back(trim(item));
  }
  return out;
}

void add_forest_flags(CLI::App* app, ForestConfig& f) {
  app->add_option("--num-trees", f.num_trees, "Trees in the forest");
  app->add_option("--frac-points", f.frac_points, "Share of rows per tree");
  app->add_option("--frac-feats", f.frac_feats, "Share of features tried per split");
  app->add_option("--max-depth", f.max_depth, "Maximum tree depth");
  app->add_option("--max-nodes", f.max_nodes, "Maximum nodes per tree");
  app->add_option("--min-samples-split", f.min_samples_to_split, "Minimum rows to split a node");
  app->add_option("--min-samples-leaf", f.min_samples_in_leaf, "Minimum rows per leaf");
  app->add_flag("--bootstrap", f.bootstrapping, "Sample rows with replacement (default off)");
}

void add_synthetic_flags(CLI::App* app, SyntheticSpec& s) {
  app->add_option("--bench-seed", s.seed, "Synthetic benchmark seed");
  app->add_option("--instances", s.num_instances, "Synthetic instances (half train, half test)");
  app->add_option("--hardness", s.hardness_spread, "Spread of instance hardness offsets");
  app->add_option("--noise", s.noise_scale, "Log-normal run noise scale");
  app->add_option("--timeout-fraction", s.timeout_fraction, "Share of uniform runs that time out");
  app->add_option("--cutoff", s.cutoff, "Runtime cutoff in seconds");
}

struct ModelFlags {
  std::string space, runs, features, objective = "runtime";
};

void add_data_flags(CLI::App* app, ModelFlags& m) {
  app->add_option("--space", m.space, "Parameter space file")->required();
  app->add_option("--runs", m.runs, "Run log CSV")->required();
  app->add_option("--features", m.features, "Instance features CSV")->required();
  app->add_option("--objective", m.objective, "runtime or quality")->check(CLI::IsMember({"runtime", "quality"}));
}

Dataset load_dataset(const ModelFlags& m) {
  auto space = std::make_shared<const ConfigurationSpace>(parse_space(read_text(m.space)));
  return ingest_runs_file(m.runs, m.features, std::move(space), parse_objective(m.objective));
}

void print(const json& j) { std::cout << j.dump() << '\n' << std::flush; }

// ---------------------------------------------------------------------------
// Subcommands

struct GenerateCmd {
  SyntheticSpec spec;
  std::string configurators = "roar,ils,random";
  std::size_t repetitions = 5;
  double evaluations = 2000;
  std::uint64_t seed = 1;
  std::string out_dir;

  void run() const {
    SyntheticBenchmark bench(spec);
    CollectOptions co;
    co.configurators = split_list(configurators);
    co.repetitions = repetitions;
    co.configurator.budget = Budget::evaluations(evaluations);
    co.seed = seed;
    const Dataset ds = collect_runs(bench, co);
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    write_text(dir / "space.pcs", render_space(bench.space()));
    std::ostringstream feats, runs;
    write_instances(feats, bench.instances());
    write_runs(runs, ds);
    write_text(dir / "features.csv", feats.str());
    write_text(dir / "runs.csv", runs.str());
    print({{"records", ds.records.size()}, {"dataset_digest", dataset_digest(ds)}, {"out_dir", out_dir}});
  }
};

struct TrainCmd {
  ModelFlags data;
  std::string out;
  std::uint64_t seed = 1;
  std::string setting = "all";
  std::size_t subsample_cap = kDefaultSubsampleCap;
  bool deterministic = false;
  ForestConfig forest;

  void run() const {
    const Dataset ds = load_dataset(data);
    BuildOptions opts;
    opts.setting = parse_setting(setting);
    opts.forest = forest;
    opts.subsample_cap = subsample_cap;
    opts.deterministic_target = deterministic;
    const auto sb = SurrogateBenchmark::build(ds, opts, seed);
    const std::string bytes = sb.serialize();
    write_text(out, bytes);
    const auto& p = sb.provenance();
    print({{"model", out},
           {"sha256", sha256_hex(bytes)},
           {"records", p.records},
           {"crashed_removed", p.crashed_removed},
           {"imputation",
            {{"censored_rows", p.censored_rows},
             {"iterations", p.imputation_iterations},
             {"max_change", p.imputation_change}}},
           {"fit",
            {{"training_rows", p.training_rows},
             {"trees", sb.forest().trees().size()},
             {"features", sb.forest().width()},
             {"forest", sb.forest().config().to_json()}}}});
  }
};

struct PredictCmd {
  std::string model, config = "{}", instance;
  std::int64_t seed = 1;

  void run() const {
    const auto sb = SurrogateBenchmark::load(model);
    json cfg_json;
    try {
      cfg_json = json::parse(config);
    } catch (const json::parse_error& e) {
      throw UsageError(std::string("--config is not valid JSON: ") + e.what());
    }
    const auto cfg = sb.space().from_json(cfg_json);
    const RunResult r = sb.predict_run(cfg, instance, seed);
    print({{"status", r.status == RunStatus::timeout ? "TIMEOUT" : "SUCCESS"},
           {"cost", r.cost},
           {"raw_prediction", r.raw_prediction},
           {"quantile", r.quantile}});
  }
};

struct ServeCmd {
  std::string model, listen = "127.0.0.1:0";
  bool stdio = false;

  void run() const {
    auto sb = std::make_shared<const SurrogateBenchmark>(SurrogateBenchmark::load(model));
    Server server(sb);
    if (stdio) {
      server.serve_stream(std::cin, std::cout);
      return;
    }
    const auto [host, port] = parse_endpoint(listen);
    server.serve_tcp(host, port, [&](std::uint16_t bound) { print({{"listening", host + ":" + std::to_string(bound)}}); });
    const auto lat = server.latency();
    std::cerr << json{{"served", lat.count}, {"mean_latency", lat.mean_seconds}}.dump() << '\n';
  }
};

struct EvaluateCmd {
  ModelFlags data;
  std::string scheme = "loro", setting = "II", out, csv;
  std::uint64_t seed = 1;
  ForestConfig forest;

  void run() const {
    const Dataset ds = load_dataset(data);
    BuildOptions opts;
    opts.setting = parse_setting(setting);
    opts.forest = forest;
    const SplitPlan plan = scheme == "loco" ? loco_splits(ds) : loro_splits(ds);
    const QualityReport rep = model_quality(ds, plan, opts, seed);
    if (!out.empty()) write_text(out, rep.to_json().dump(2) + "\n");
    if (!csv.empty()) {
      std::ostringstream ss;
      rep.write_csv(ss);
      write_text(csv, ss.str());
    }
    print(rep.to_json());
  }
};

struct CompareFlags {
  std::string configurators = "roar,ils,random";
  std::size_t runs = 10;
  double budget = 90000;
  std::uint64_t seed = 1;
  std::size_t timing_requests = 1000;
  std::string out_dir;
};

void add_compare_flags(CLI::App* app, CompareFlags& c) {
  app->add_option("--configurators", c.configurators, "Comma-separated configurators (random, roar, ils, smac)");
  app->add_option("--runs", c.runs, "Runs per configurator and backend")->check(CLI::PositiveNumber);
  app->add_option("--budget", c.budget, "Target-time budget per run in seconds")->check(CLI::PositiveNumber);
  app->add_option("--seed", c.seed, "Master seed of the configurator runs");
  app->add_option("--timing-requests", c.timing_requests, "Requests timed for the speedup estimate (0 = skip)");
  app->add_option("--out-dir", c.out_dir, "Directory for report.json, outcomes.csv, trajectories.csv, timing.json");
}

CompareOptions compare_options(const CompareFlags& c) {
  CompareOptions o;
  o.configurators = split_list(c.configurators);
  o.n_runs = c.runs;
  o.configurator.budget = Budget::seconds(c.budget);
  o.seed = c.seed;
  o.timing_requests = c.timing_requests;
  return o;
}

/// Prints the reproducible report; timing goes to stderr and timing.json.
void emit_report(const FidelityReport& rep, const CompareFlags& c, json summary) {
  if (!c.out_dir.empty()) {
    const std::filesystem::path dir(c.out_dir);
    std::filesystem::create_directories(dir);
    write_text(dir / "report.json", rep.to_json().dump(2) + "\n");
    std::ostringstream outcomes, traj;
    rep.write_outcomes_csv(outcomes);
    rep.write_trajectories_csv(traj);
    write_text(dir / "outcomes.csv", outcomes.str());
    write_text(dir / "trajectories.csv", traj.str());
    if (rep.timing) write_text(dir / "timing.json", rep.to_json(true)["timing"].dump(2) + "\n");
  }
  if (rep.timing) std::cerr << json{{"timing", rep.to_json(true)["timing"]}}.dump() << '\n';
  summary["error"] = rep.error;
  summary["configurators"] = rep.configurators;
  summary["budgets"] = rep.grid.size();
  print(summary);
}

struct CompareCmd {
  std::string model;
  SyntheticSpec spec;
  CompareFlags flags;

  void run() const {
    SyntheticBenchmark original(spec);
    SurrogateBackend surrogate(std::make_shared<const SurrogateBenchmark>(SurrogateBenchmark::load(model)));
    if (surrogate.instances().ids() != original.instances().ids()) {
      throw DataError("model instances do not match the synthetic benchmark; check the --bench-* flags");
    }
    emit_report(compare(original, surrogate, compare_options(flags)), flags, json::object());
  }
};

struct DemoCmd {
  SyntheticSpec spec;
  std::size_t repetitions = 5;
  double evaluations = 2000;
  CompareFlags flags;

  void run() const {
    SyntheticSpec s = spec;
    s.seed = flags.seed;
    SyntheticBenchmark original(s);
    CollectOptions co;
    co.configurators = split_list(flags.configurators);
    co.repetitions = repetitions;
    co.configurator.budget = Budget::evaluations(evaluations);
    co.seed = derive_seed(flags.seed, 1);
    const Dataset ds = collect_runs(original, co);
    BuildOptions opts;
    opts.setting = TrainingSetting::train_plus_test_incumbents;
    auto sb = std::make_shared<const SurrogateBenchmark>(SurrogateBenchmark::build(ds, opts, derive_seed(flags.seed, 2)));
    if (!flags.out_dir.empty()) {
      std::filesystem::create_directories(flags.out_dir);
      write_text(std::filesystem::path(flags.out_dir) / "demo.model", sb->serialize());
    }
    SurrogateBackend surrogate(sb);
    CompareOptions o = compare_options(flags);
    o.seed = derive_seed(flags.seed, 3);
    const auto& p = sb->provenance();
    emit_report(compare(original, surrogate, o), flags,
                {{"records", ds.records.size()},
                 {"training_rows", p.training_rows},
                 {"censored_rows", p.censored_rows},
                 {"dataset_digest", p.dataset_digest}});
  }
};

void report_error(const char* kind, const std::string& message) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
}

}  // namespace

int dispatch(int argc, char** argv) {
  CLI::App app{"Surrogate benchmarks for algorithm configuration"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)");

  GenerateCmd gen;
  auto* g = app.add_subcommand("generate", "Collect configurator runs on a synthetic benchmark");
  add_synthetic_flags(g, gen.spec);
  g->add_option("--configurators", gen.configurators, "Comma-separated configurators");
  g->add_option("--repetitions", gen.repetitions, "Runs per configurator")->check(CLI::PositiveNumber);
  g->add_option("--evaluations", gen.evaluations, "Evaluation budget per run")->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed, "Master seed of the configurator runs");
  g->add_option("--out-dir", gen.out_dir, "Output directory for space.pcs, features.csv, runs.csv")->required();

  TrainCmd train;
  auto* t = app.add_subcommand("train", "Build a surrogate model from run data");
  add_data_flags(t, train.data);
  t->add_option("--out", train.out, "Model file to write")->required();
  t->add_option("--seed", train.seed, "Model seed");
  t->add_option("--setting", train.setting, "Training rows: I, II or all")->check(CLI::IsMember({"I", "II", "all"}));
  t->add_option("--subsample-cap", train.subsample_cap, "Maximum records used for training");
  t->add_flag("--deterministic", train.deterministic, "Answer requests with the median prediction (default off)");
  add_forest_flags(t, train.forest);

  PredictCmd predict;
  auto* p = app.add_subcommand("predict", "Predict one run");
  p->add_option("--model", predict.model, "Model file")->required();
  p->add_option("--config", predict.config, "Configuration as a JSON object");
  p->add_option("--instance", predict.instance, "Instance id")->required();
  p->add_option("--seed", predict.seed, "Run seed");

  ServeCmd serve;
  auto* s = app.add_subcommand("serve", "Answer newline-delimited JSON requests");
  s->add_option("--model", serve.model, "Model file")->required();
  auto* listen = s->add_option("--listen", serve.listen, "TCP endpoint host:port (port 0 picks a free port)");
  s->add_flag("--stdio", serve.stdio, "Serve standard input/output instead of TCP (default off)")->excludes(listen);

  EvaluateCmd evaluate;
  auto* e = app.add_subcommand("evaluate", "Held-out model quality over run-wise or configurator-wise splits");
  add_data_flags(e, evaluate.data);
  e->add_option("--scheme", evaluate.scheme, "loro or loco")->check(CLI::IsMember({"loro", "loco"}));
  e->add_option("--setting", evaluate.setting, "Training rows: I, II or all")->check(CLI::IsMember({"I", "II", "all"}));
  e->add_option("--seed", evaluate.seed, "Model seed");
  e->add_option("--out", evaluate.out, "Write the JSON report here");
  e->add_option("--csv", evaluate.csv, "Write the CSV table here");
  add_forest_flags(e, evaluate.forest);

  CompareCmd cmp;
  auto* c = app.add_subcommand("compare", "Fidelity report of a model against its synthetic benchmark");
  c->add_option("--model", cmp.model, "Model file")->required();
  add_synthetic_flags(c, cmp.spec);
  add_compare_flags(c, cmp.flags);

  DemoCmd demo;
  auto* d = app.add_subcommand("demo", "Generate, train and compare end to end on a synthetic benchmark");
  add_compare_flags(d, demo.flags);
  d->add_option("--repetitions", demo.repetitions, "Data-collection runs per configurator")->check(CLI::PositiveNumber);
  d->add_option("--evaluations", demo.evaluations, "Evaluation budget per data-collection run")
      ->check(CLI::PositiveNumber);
  d->add_option("--instances", demo.spec.num_instances, "Synthetic instances (half train, half test)");
  d->add_option("--noise", demo.spec.noise_scale, "Log-normal run noise scale");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    report_error("usage", ex.what());
    return 2;
  }

  try {
    set_thread_limit(threads);
    if (*g) gen.run();
    if (*t) train.run();
    if (*p) predict.run();
    if (*s) serve.run();
    if (*e) evaluate.run();
    if (*c) cmp.run();
    if (*d) demo.run();
  } catch (const UsageError& ex) {
    report_error("usage", ex.what());
    return 2;
  } catch (const std::exception& ex) {
    report_error("runtime", ex.what());
    return 1;
  }
  return 0;
}

}  // namespace surrobench::cli
