#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "romkit/mlp.hpp"
#include "romkit/plant.hpp"
#include "romkit/pod.hpp"

namespace romkit::estimator {

/// Diagonal process and measurement variances, (fraction * steady value)^2.
struct NoiseModel {
  Eigen::VectorXd process_variance;      // n, raw plant units
  Eigen::VectorXd measurement_variance;  // p, raw measurement units

  static NoiseModel from_steady_state(const plant::StateVector& steady,
                                      const plant::MeasurementSelection& selection,
                                      double fraction = 0.01);
  Eigen::VectorXd process_std() const { return process_variance.cwiseSqrt(); }
  Eigen::VectorXd measurement_std() const { return measurement_variance.cwiseSqrt(); }
};

struct Belief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// y = offset + matrix * state. For reduced filters matrix = S D U_r, where S
/// selects the measured states and D is the denormalization scale.
struct LinearObservation {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd offset;
};

LinearObservation reduced_observation(const pod::ReducedBasis& basis,
                                      const pod::NormalizationParams& normalization,
                                      const plant::MeasurementSelection& selection);
LinearObservation full_observation(const plant::MeasurementSelection& selection);

/// U_r^T Q_norm U_r with Q expressed in normalized coordinates.
Eigen::MatrixXd reduced_process_covariance(const NoiseModel& noise, const pod::ReducedBasis& basis,
                                           const pod::NormalizationParams& normalization);

/// Measurement covariance in measurement space (p x p).
Eigen::MatrixXd measurement_covariance(const NoiseModel& noise);

struct UpdateDiagnostics {
  double gain_residual = 0.0;  // ||K S - P C^T||_F with S = C P C^T + R
  double gain_residual_relative = 0.0;  // the same divided by ||P C^T||_F
};

/// Prior from the surrogate: mean f(xi, u), covariance A P A^T + Q_r.
Belief predict(const Belief& belief, const Eigen::VectorXd& u, const mlp::MlpParams& model,
               const Eigen::MatrixXd& process_covariance);

/// Kalman correction with a symmetric positive-definite solve; the
/// posterior covariance (I - K C) P is re-symmetrized.
Belief update(const Belief& prior, const Eigen::VectorXd& y, const LinearObservation& observation,
              const Eigen::MatrixXd& measurement_cov, UpdateDiagnostics* diagnostics = nullptr);

Belief update(const Belief& prior, const Eigen::VectorXd& y, const pod::ReducedBasis& basis,
              const pod::NormalizationParams& normalization, const Eigen::MatrixXd& measurement_cov,
              const plant::MeasurementSelection& selection);

/// Full-state estimate denormalize(U_r xi).
plant::StateVector lift(const Eigen::VectorXd& xi, const pod::ReducedBasis& basis,
                        const pod::NormalizationParams& normalization);

/// Inputs u(0..T-1) as rows and measurements y(1..T) as columns.
struct Trajectory {
  Eigen::MatrixXd inputs;        // T x 3
  Eigen::MatrixXd measurements;  // p x T, column k is y(k+1)

  Eigen::Index steps() const { return inputs.rows(); }
};

enum class Phase { model_prediction, discretization, other };

struct PhaseTiming {
  double model_prediction_s = 0.0;
  double discretization_s = 0.0;
  double other_s = 0.0;
  Eigen::Index steps = 0;

  double total_s() const { return model_prediction_s + discretization_s + other_s; }
  void add(Phase phase, double seconds);
};

struct StepDiagnostics {
  double symmetry_error = 0.0;  // max |P - P^T| after the update
  double min_eigenvalue = 0.0;  // of the posterior covariance
  double gain_residual = 0.0;
  double gain_residual_relative = 0.0;
};

struct FilterRun {
  Eigen::MatrixXd states;     // filter coordinates, one column per sample 0..T
  Eigen::MatrixXd estimates;  // full plant states, one column per sample 0..T
  PhaseTiming timing;
  std::vector<StepDiagnostics> diagnostics;  // filled when requested
  int predictions = 0;
  int updates = 0;
};

/// State propagation plus its Jacobian. The Jacobian receives the already
/// propagated state so finite differences can reuse it.
struct Dynamics {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> propagate;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&)>
      jacobian;
  Phase jacobian_phase = Phase::model_prediction;
};

struct RunOptions {
  bool collect_diagnostics = false;
};

/// Two-step EKF recursion shared by all filters.
FilterRun run_ekf(const Trajectory& trajectory, const Dynamics& dynamics,
                  const LinearObservation& observation, const Eigen::MatrixXd& process_cov,
                  const Eigen::MatrixXd& measurement_cov, const Belief& initial,
                  const std::function<plant::StateVector(const Eigen::VectorXd&)>& to_full,
                  const RunOptions& options = {});

/// Forward differences of `propagate` with per-coordinate step
/// 1e-6 * max(1, |x_i|).
Eigen::MatrixXd finite_difference_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>& propagate,
    const Eigen::VectorXd& x, const Eigen::VectorXd& u, const Eigen::VectorXd& propagated);

struct EkfConfig {
  Eigen::MatrixXd process_cov;      // Q_r, r x r
  Eigen::MatrixXd measurement_cov;  // R_r, p x p
  Eigen::MatrixXd initial_cov;      // P0, r x r
  plant::MeasurementSelection selection;
  double initial_normalized_state = 0.5;

  /// Q_r from the noise model, R_r = R, P0 = 0.1 I.
  static EkfConfig standard(const NoiseModel& noise, const pod::ReducedBasis& basis,
                            const pod::NormalizationParams& normalization,
                            const plant::MeasurementSelection& selection, double initial_var = 0.1);
};

/// xi(0|0) = U_r^T (c * 1) for the configured normalized guess c.
Eigen::VectorXd initial_reduced_state(const pod::ReducedBasis& basis, double normalized_guess);

FilterRun run_pod_mlp_ekf(const Trajectory& trajectory, const mlp::MlpParams& model,
                          const pod::ReducedBasis& basis, const pod::NormalizationParams& normalization,
                          const EkfConfig& config, const RunOptions& options = {});

/// Baseline on the full 103-state plant. Starts from denormalize(c * 1) with
/// covariance D (P0_norm) D so it matches the reduced filters' prior.
FilterRun run_full_ekf(const Trajectory& trajectory, const plant::PlantConfig& plant_config,
                       const NoiseModel& noise, const pod::NormalizationParams& normalization,
                       const plant::MeasurementSelection& selection, double initial_var = 0.1,
                       double normalized_guess = 0.5, const RunOptions& options = {});

/// Baseline on the projected plant: xi+ = U_r^T normalize(F(denormalize(U_r xi))).
/// Its Jacobian is U_r^T D^-1 J_F D U_r with J_F the full finite-difference
/// Jacobian, so it pays the full-model discretization cost.
FilterRun run_pod_ekf(const Trajectory& trajectory, const plant::PlantConfig& plant_config,
                      const pod::ReducedBasis& basis, const pod::NormalizationParams& normalization,
                      const EkfConfig& config, const RunOptions& options = {});

}  // namespace romkit::estimator
