#pragma once

#include <cstdint>
#include <memory>

#include "surrobench/configurators.hpp"

namespace surrobench {

struct SyntheticSpec {
  std::uint64_t seed = 1;
  std::size_t num_instances = 20;
  /// Standard deviation of the per-instance log-hardness offsets.
  double hardness_spread = 1.0;
  /// Standard deviation of the multiplicative log-normal run noise.
  double noise_scale = 0.3;
  /// Share of uniformly drawn (config, instance, seed) runs that time out.
  double timeout_fraction = 0.1;
  double cutoff = 300.0;
  std::size_t num_basins = 3;
};

/// Ground-truth target algorithm: runtime = exp(base + g(config) + h(instance) + noise * z)
/// with g a minimum over quadratic basins plus categorical offsets.
class SyntheticBenchmark : public BenchmarkBackend {
 public:
  explicit SyntheticBenchmark(const SyntheticSpec& spec);

  const ConfigurationSpace& space() const override { return *space_; }
  std::shared_ptr<const ConfigurationSpace> space_ptr() const override { return space_; }
  const InstanceSet& instances() const override { return *instances_; }
  std::shared_ptr<const InstanceSet> instances_ptr() const override { return instances_; }
  double cutoff() const override { return spec_.cutoff; }
  Objective objective() const override { return Objective::runtime; }
  Evaluation evaluate(const Configuration& config, const std::string& instance, std::int64_t seed,
                      double cap) const override;

  /// Uncapped runtime of one run.
  double runtime(const Configuration& config, const std::string& instance, std::int64_t seed) const;
  /// Noise-free log runtime (natural log): base + g + h.
  double log_median(const Configuration& config, const std::string& instance) const;
  /// Configuration term g.
  double config_term(const Configuration& config) const;
  double hardness(std::size_t instance_index) const { return hardness_[instance_index]; }
  double base() const { return base_; }
  /// Mean PAR10 of the noise-free runtime over the instances of one split.
  double true_cost(const Configuration& config, Split split = Split::train) const;
  const SyntheticSpec& spec() const { return spec_; }

 private:
  SyntheticSpec spec_;
  std::shared_ptr<const ConfigurationSpace> space_;
  std::shared_ptr<const InstanceSet> instances_;
  std::vector<double> hardness_;
  std::vector<std::size_t> numeric_;      // indices of numeric parameters
  std::vector<std::size_t> categorical_;  // indices of categorical parameters
  std::vector<std::vector<double>> centres_;
  std::vector<double> depths_;
  std::vector<double> weights_;
  std::vector<std::vector<double>> offsets_;  // per categorical parameter, per choice
  double base_ = 0.0;
};

/// Text of the synthetic benchmark's parameter space.
const char* synthetic_space_text();

}  // namespace surrobench
