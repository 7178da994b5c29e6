#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "romkit/config.hpp"
#include "romkit/estimator.hpp"
#include "romkit/excitation.hpp"
#include "romkit/mlp.hpp"
#include "romkit/plant.hpp"
#include "romkit/pod.hpp"

namespace romkit::harness {

/// Basis plus the normalization it was fitted under ("ROMPOD1" file).
struct PodModel {
  pod::NormalizationParams normalization;
  pod::ReducedBasis basis;
};

std::string serialize_pod(const PodModel& model);
PodModel deserialize_pod(const std::string& bytes);

/// Noise-free response from x0, one column per sample (T + 1 columns).
Eigen::MatrixXd simulate(const plant::PlantConfig& plant, const plant::StateVector& x0,
                         const excitation::InputSequence& inputs);

/// Noisy plant run used by estimation and benchmarking.
struct NoisyRun {
  excitation::InputSequence inputs;  // T x 3
  Eigen::MatrixXd states;            // n x (T + 1), starts at the steady state
  Eigen::MatrixXd measurements;      // p x T, column k is y(k + 1)
};

NoisyRun noisy_run(const ExperimentConfig& config, const plant::StateVector& steady,
                   const estimator::NoiseModel& noise);

/// Transition pairs ([u(k); xi(k)], target) from short seeded PRMS runs. Each
/// run starts from a random snapshot column offset along the retained modes.
/// The target is xi(k+1), or xi(k+1) - xi(k) in increment mode.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> training_pairs(const ExperimentConfig& config,
                                                           const Eigen::MatrixXd& snapshots,
                                                           const PodModel& model);

/// pod::rmse of the normalized trajectories over columns first..end.
double normalized_rmse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate,
                       const pod::NormalizationParams& normalization, Eigen::Index first = 0);

/// The steady state at the nominal input, computed once per command.
plant::StateVector nominal_steady_state(const ExperimentConfig& config);

/// Names of the supported commands in pipeline order.
const std::vector<std::string>& command_names();

/// Runs one command and refreshes the manifest in the output directory.
void run_command(const std::string& name, const ExperimentConfig& config);

void cmd_simulate(const ExperimentConfig& config);
void cmd_reduce(const ExperimentConfig& config);
void cmd_train(const ExperimentConfig& config);
void cmd_estimate(const ExperimentConfig& config);
void cmd_benchmark(const ExperimentConfig& config);
void cmd_report(const ExperimentConfig& config);

/// Files whose contents carry wall-clock measurements.
bool is_timing_artifact(const std::filesystem::path& relative);

/// Reads a two-column "metric,value" summary file into pairs.
std::vector<std::pair<std::string, double>> read_summary(const std::filesystem::path& path);
double summary_value(const std::filesystem::path& path, const std::string& metric);

}  // namespace romkit::harness
