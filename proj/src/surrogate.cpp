#include "surrobench/surrogate.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace surrobench {

namespace {

constexpr char kMagic[8] = {'S', 'U', 'R', 'R', 'B', 'N', 'C', 'H'};
constexpr std::size_t kHeaderSize = 8 + 4 + 8 + 32;

}  // namespace

RunResult runtime_result(double y, double cutoff) {
  const double runtime = std::pow(10.0, y);
  if (runtime >= cutoff) return {RunStatus::timeout, kPenaltyFactor * cutoff, y, 0.0};
  return {RunStatus::success, runtime, y, 0.0};
}

double seeded_quantile(const Configuration& config, std::string_view instance, std::int64_t seed) {
  std::string key = config.canonical();
  key.push_back('\0');
  key.append(instance);
  key.push_back('\0');
  key.append(std::to_string(seed));
  return unit_from_bits(mix64(hash_bytes(key)));
}

std::string dataset_digest(const Dataset& ds) {
  std::ostringstream out;
  out << to_string(ds.objective) << '\n';
  write_runs(out, ds);
  return sha256_hex(out.str());
}

SurrogateBenchmark SurrogateBenchmark::build(const Dataset& ds, const BuildOptions& opts, std::uint64_t seed) {
  if (!ds.space || !ds.instances) throw DataError("dataset lacks a space or instance set");
  SurrogateBenchmark sb;
  sb.space_ = ds.space;
  sb.instances_ = ds.instances;
  sb.objective_ = ds.objective;
  sb.deterministic_ = opts.deterministic_target;
  sb.bounds_ = opts.loss_bounds;

  auto& prov = sb.provenance_;
  prov.setting = opts.setting;
  prov.dataset_digest = dataset_digest(ds);
  prov.seed = seed;
  prov.records = ds.records.size();

  auto filtered = filter_crashed(ds);
  prov.crashed_removed = filtered.removed;
  if (filtered.dataset.records.empty()) throw DataError("no runs left after removing crashed runs");
  Random sub_rand(derive_seed(seed, 1));
  const Dataset sampled = subsample(filtered.dataset, opts.subsample_cap, sub_rand);
  sb.cutoff_ = sampled.cutoff();
  if (sb.objective_ == Objective::runtime && !(sb.cutoff_ > 0)) throw DataError("runtime dataset needs a cutoff");

  TrainingMatrix m = build_matrix(sampled, opts.setting);
  prov.training_rows = m.rows();
  for (auto c : m.censored) prov.censored_rows += c;
  const auto report = impute_matrix(m, opts.forest, derive_seed(seed, 2));
  prov.imputation_iterations = report.iterations;
  prov.imputation_change = report.max_change;
  sb.forest_ = QuantileForest::fit(m, opts.forest, seed);
  return sb;
}

std::vector<double> SurrogateBenchmark::model_input(const Configuration& config, std::string_view instance) const {
  const auto idx = instances_->find(instance);
  if (!idx) throw DataError("unknown instance '" + std::string(instance) + "'");
  space_->validate(config);
  return encode(*space_, impute_inactive(*space_, config), instances_->features(*idx), instances_->feature_dim());
}

double SurrogateBenchmark::quantile_for(const Configuration& config, std::string_view instance,
                                        std::int64_t seed) const {
  return deterministic_ ? 0.5 : seeded_quantile(config, instance, seed);
}

double SurrogateBenchmark::predict_median(const Configuration& config, std::string_view instance) const {
  return forest_.predict_quantile(model_input(config, instance), 0.5);
}

RunResult SurrogateBenchmark::predict_run(const Configuration& config, std::string_view instance,
                                          std::int64_t seed) const {
  const auto x = model_input(config, instance);
  const double alpha = quantile_for(config, instance, seed);
  const double y = forest_.predict_quantile(x, alpha);
  RunResult r;
  if (objective_ == Objective::runtime) {
    r = runtime_result(y, cutoff_);
  } else {
    r = {RunStatus::success, std::clamp(y, bounds_.lower, bounds_.upper), y, 0.0};
  }
  r.quantile = alpha;
  return r;
}

// ---------------------------------------------------------------------------
// Persistence

nlohmann::json SurrogateBenchmark::info() const {
  nlohmann::json inst = nlohmann::json::array();
  for (std::size_t i = 0; i < instances_->size(); ++i) {
    const auto f = instances_->features(i);
    inst.push_back({{"id", instances_->id(i)},
                    {"split", to_string(instances_->split(i))},
                    {"features", std::vector<double>(f.begin(), f.end())}});
  }
  nlohmann::json j = {
      {"format_version", kModelFormatVersion},
      {"space", render_space(*space_)},
      {"instances", inst},
      {"cutoff", cutoff_},
      {"objective", to_string(objective_)},
      {"deterministic_target", deterministic_},
      {"forest", forest_.config().to_json()},
      {"provenance",
       {{"setting", to_string(provenance_.setting)},
        {"dataset_digest", provenance_.dataset_digest},
        {"seed", provenance_.seed},
        {"records", provenance_.records},
        {"crashed_removed", provenance_.crashed_removed},
        {"training_rows", provenance_.training_rows},
        {"censored_rows", provenance_.censored_rows},
        {"imputation_iterations", provenance_.imputation_iterations},
        {"imputation_change", provenance_.imputation_change}}},
  };
  if (objective_ == Objective::quality) {
    // Infinite bounds are not representable in JSON.
    j["loss_bounds"] = {{"lower", std::isfinite(bounds_.lower) ? nlohmann::json(bounds_.lower) : nlohmann::json()},
                        {"upper", std::isfinite(bounds_.upper) ? nlohmann::json(bounds_.upper) : nlohmann::json()}};
  }
  return j;
}

std::string SurrogateBenchmark::serialize() const {
  BinaryWriter payload;
  nlohmann::json meta = info();
  meta.erase("instances");
  meta.erase("cutoff");
  meta.erase("loss_bounds");
  payload.str(meta.dump());
  // Numeric state goes in binary so the round-trip is bit-exact.
  payload.f64(cutoff_);
  payload.f64(bounds_.lower);
  payload.f64(bounds_.upper);
  payload.u64(instances_->size());
  payload.u64(instances_->feature_dim());
  for (std::size_t i = 0; i < instances_->size(); ++i) {
    payload.str(instances_->id(i));
    payload.u8(instances_->split(i) == Split::train ? 0 : 1);
    for (double f : instances_->features(i)) payload.f64(f);
  }
  forest_.write(payload);

  const std::string& body = payload.data();
  BinaryWriter out;
  out.bytes(std::string_view(kMagic, sizeof kMagic));
  out.u32(kModelFormatVersion);
  out.u64(body.size());
  out.bytes(sha256_raw(body));
  out.bytes(body);
  return out.take();
}

SurrogateBenchmark SurrogateBenchmark::deserialize(std::string_view bytes) {
  using K = ModelFileError::Kind;
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw ModelFileError(K::bad_magic, "not a surrogate model file");
  }
  if (bytes.size() < kHeaderSize) throw ModelFileError(K::truncated, "model file truncated in header");
  BinaryReader header(bytes.substr(8, kHeaderSize - 8));
  const std::uint32_t version = header.u32();
  if (version != kModelFormatVersion) {
    throw ModelFileError(K::version, "model format version " + std::to_string(version) + " is not supported (expected " +
                                         std::to_string(kModelFormatVersion) + ")");
  }
  const std::uint64_t size = header.u64();
  const std::string_view digest = header.bytes(32);
  const std::string_view body = bytes.substr(kHeaderSize);
  if (body.size() < size) throw ModelFileError(K::truncated, "model file truncated: payload shorter than declared");
  if (body.size() > size) throw ModelFileError(K::corrupt, "trailing bytes after model payload");
  if (sha256_raw(body) != digest) throw ModelFileError(K::digest, "model payload digest mismatch");

  try {
    BinaryReader r(body);
    const auto meta = nlohmann::json::parse(r.str());
    SurrogateBenchmark sb;
    sb.space_ = std::make_shared<const ConfigurationSpace>(parse_space(meta.at("space").get<std::string>()));
    sb.objective_ = parse_objective(meta.at("objective").get<std::string>());
    sb.deterministic_ = meta.at("deterministic_target").get<bool>();
    const auto& p = meta.at("provenance");
    sb.provenance_.setting = parse_setting(p.at("setting").get<std::string>());
    sb.provenance_.dataset_digest = p.at("dataset_digest").get<std::string>();
    sb.provenance_.seed = p.at("seed").get<std::uint64_t>();
    sb.provenance_.records = p.at("records").get<std::size_t>();
    sb.provenance_.crashed_removed = p.at("crashed_removed").get<std::size_t>();
    sb.provenance_.training_rows = p.at("training_rows").get<std::size_t>();
    sb.provenance_.censored_rows = p.at("censored_rows").get<std::size_t>();
    sb.provenance_.imputation_iterations = p.at("imputation_iterations").get<std::size_t>();
    sb.provenance_.imputation_change = p.at("imputation_change").get<double>();

    sb.cutoff_ = r.f64();
    sb.bounds_.lower = r.f64();
    sb.bounds_.upper = r.f64();
    const std::uint64_t n = r.u64();
    const std::uint64_t d = r.u64();
    if (n > r.remaining() || d > r.remaining()) throw Error("bad instance table size");
    std::vector<std::string> ids;
    std::vector<std::vector<double>> feats;
    std::vector<Split> splits;
    for (std::uint64_t i = 0; i < n; ++i) {
      ids.push_back(r.str());
      splits.push_back(r.u8() == 0 ? Split::train : Split::test);
      std::vector<double> f(d);
      for (auto& v : f) v = r.f64();
      feats.push_back(std::move(f));
    }
    sb.instances_ = std::make_shared<const InstanceSet>(std::move(ids), std::move(feats), std::move(splits));
    sb.forest_ = QuantileForest::read(r);
    if (!r.at_end()) throw Error("unexpected bytes after forest");
    if (sb.forest_.width() != sb.space_->size() + sb.instances_->feature_dim()) {
      throw Error("forest width does not match space and features");
    }
    return sb;
  } catch (const ModelFileError&) {
    throw;
  } catch (const std::exception& e) {
    throw ModelFileError(K::corrupt, std::string("corrupt model payload: ") + e.what());
  }
}

void SurrogateBenchmark::save(const std::string& path) const {
  const std::string bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing '" + path + "'");
}

SurrogateBenchmark SurrogateBenchmark::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

}  // namespace surrobench
