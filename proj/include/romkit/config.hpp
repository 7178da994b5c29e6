#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "romkit/excitation.hpp"
#include "romkit/mlp.hpp"
#include "romkit/plant.hpp"

namespace romkit {

/// Named seed streams. Each stream seed is Rng::derive(base, stream).
enum class SeedStream : std::uint64_t {
  snapshots = 1,
  validation = 2,
  training_data = 3,
  training = 4,
  rollout = 5,
  estimation = 6,
  estimation_noise = 7,
};

struct SeedConfig {
  std::uint64_t base = 20240601;

  std::uint64_t stream(SeedStream s) const;
};

struct PodSettings {
  std::int64_t snapshot_horizon = 12000;
  std::int64_t validation_horizon = 600;
  std::vector<int> sweep_orders{20, 30, 40, 50, 60, 70, 80, 90};
  int order = 30;
};

struct SurrogateSettings {
  std::vector<int> hidden{128, 128, 128};
  std::int64_t training_pairs = 100000;
  std::int64_t trajectory_length = 100;
  /// Standard deviation, per reduced coordinate, of the offset applied to each
  /// training run's starting snapshot in normalized coordinates.
  double initial_perturbation = 0.2;
  mlp::OutputMode output_mode = mlp::OutputMode::increment;
  std::int64_t rollout_horizon = 600;
  mlp::TrainConfig train;
};

struct EstimatorSettings {
  std::int64_t horizon = 600;
  std::int64_t burn_in = 50;
  double noise_fraction = 0.01;
  double initial_variance = 0.1;
  double initial_guess = 0.5;
  std::vector<int> measurements;  // one-based; empty means all temperatures
  std::string filter = "pod-mlp-ekf";

  plant::MeasurementSelection selection() const;
};

struct FastProfile {
  std::int64_t snapshot_horizon = 2000;
  std::int64_t training_pairs = 10000;
};

struct ExperimentConfig {
  plant::PlantConfig plant = plant::PlantConfig::defaults();
  excitation::PrmsConfig prms;  // bounds, horizon and seed are filled per use
  PodSettings pod;
  SurrogateSettings surrogate;
  EstimatorSettings estimator;
  SeedConfig seeds;
  FastProfile fast_profile;
  std::filesystem::path output_dir = "out";
  bool fast = false;

  static ExperimentConfig defaults();

  /// Applies the fast profile overrides once.
  void apply_fast_profile();
  void validate() const;

  /// PRMS settings over the plant input bounds for one horizon and seed.
  excitation::PrmsConfig prms_for(std::int64_t horizon, std::uint64_t seed) const;

  /// Canonical key = value listing of every resolved setting.
  std::string canonical() const;
};

/// Reads an INI file. Unknown sections or keys are configuration errors.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text);

}  // namespace romkit
