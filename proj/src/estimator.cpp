#include "romkit/estimator.hpp"

#include <chrono>
#include <string>

#include "romkit/error.hpp"

namespace romkit::estimator {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void symmetrize(Eigen::MatrixXd& m) { m = 0.5 * (m + m.transpose()).eval(); }

Eigen::MatrixXd propagate_covariance(const Eigen::MatrixXd& jac, const Eigen::MatrixXd& cov,
                                     const Eigen::MatrixXd& process_cov) {
  Eigen::MatrixXd prior = jac * cov * jac.transpose() + process_cov;
  symmetrize(prior);
  return prior;
}

Eigen::VectorXd inverse_span(const pod::NormalizationParams& p) {
  Eigen::VectorXd inv(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i)
    inv(i) = p.is_degenerate(i) ? 0.0 : 1.0 / (p.max(i) - p.min(i));
  return inv;
}

void check_belief(const Belief& b) {
  require(b.covariance.rows() == b.mean.size() && b.covariance.cols() == b.mean.size(),
          "belief covariance must be square and match the mean");
}

}  // namespace

NoiseModel NoiseModel::from_steady_state(const plant::StateVector& steady,
                                         const plant::MeasurementSelection& selection,
                                         double fraction) {
  NoiseModel m;
  m.process_variance = (fraction * steady).cwiseAbs2();
  m.measurement_variance = (fraction * plant::measure(selection, steady)).cwiseAbs2();
  return m;
}

LinearObservation reduced_observation(const pod::ReducedBasis& basis,
                                      const pod::NormalizationParams& normalization,
                                      const plant::MeasurementSelection& selection) {
  require(basis.state_dim() == normalization.size(), "basis and normalization sizes differ");
  const auto idx = selection.zero_based();
  const Eigen::VectorXd scale = normalization.span();
  LinearObservation obs;
  obs.matrix.resize(static_cast<Eigen::Index>(idx.size()), basis.order());
  obs.offset.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    require(idx[i] < basis.state_dim(), "measurement index outside basis state dimension");
    obs.matrix.row(row) = scale(idx[i]) * basis.modes.row(idx[i]);
    obs.offset(row) = normalization.min(idx[i]);
  }
  return obs;
}

LinearObservation full_observation(const plant::MeasurementSelection& selection) {
  const auto idx = selection.zero_based();
  LinearObservation obs;
  obs.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(idx.size()), plant::kStateDim);
  obs.offset = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) obs.matrix(static_cast<Eigen::Index>(i), idx[i]) = 1.0;
  return obs;
}

Eigen::MatrixXd reduced_process_covariance(const NoiseModel& noise, const pod::ReducedBasis& basis,
                                           const pod::NormalizationParams& normalization) {
  require(noise.process_variance.size() == basis.state_dim(),
          "process variance length must equal the basis state dimension");
  const Eigen::VectorXd q_norm =
      noise.process_variance.cwiseProduct(inverse_span(normalization).cwiseAbs2());
  Eigen::MatrixXd q = basis.modes.transpose() * q_norm.asDiagonal() * basis.modes;
  symmetrize(q);
  return q;
}

Eigen::MatrixXd measurement_covariance(const NoiseModel& noise) {
  return noise.measurement_variance.asDiagonal();
}

Belief predict(const Belief& belief, const Eigen::VectorXd& u, const mlp::MlpParams& model,
               const Eigen::MatrixXd& process_cov) {
  check_belief(belief);
  require(process_cov.rows() == belief.mean.size() && process_cov.cols() == belief.mean.size(),
          "predict: Q_r must be r x r");
  Belief prior;
  prior.mean = mlp::forward(model, belief.mean, u);
  if (!prior.mean.allFinite()) fail(ErrorCategory::filter_divergence, "predict: non-finite state");
  prior.covariance =
      propagate_covariance(mlp::jacobian_state(model, belief.mean, u), belief.covariance, process_cov);
  return prior;
}

Belief update(const Belief& prior, const Eigen::VectorXd& y, const LinearObservation& obs,
              const Eigen::MatrixXd& measurement_cov, UpdateDiagnostics* diagnostics) {
  check_belief(prior);
  const Eigen::Index p = obs.matrix.rows();
  require(obs.matrix.cols() == prior.mean.size(), "update: observation matrix columns != state size");
  require(y.size() == p && obs.offset.size() == p, "update: measurement length mismatch");
  require(measurement_cov.rows() == p && measurement_cov.cols() == p, "update: R_r must be p x p");
  if (p == 0) {
    if (diagnostics) *diagnostics = {};
    return prior;
  }
  const Eigen::MatrixXd& c = obs.matrix;
  const Eigen::MatrixXd pct = prior.covariance * c.transpose();
  Eigen::MatrixXd innovation_cov = c * pct + measurement_cov;
  symmetrize(innovation_cov);
  const Eigen::LLT<Eigen::MatrixXd> llt(innovation_cov);
  if (llt.info() != Eigen::Success) {
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(innovation_cov, Eigen::EigenvaluesOnly)
                               .eigenvalues()
                               .minCoeff();
    fail(ErrorCategory::singular_update,
         "innovation covariance not positive definite, min eigenvalue " + std::to_string(min_eig));
  }
  // K S = P C^T  <=>  S K^T = C P
  const Eigen::MatrixXd gain = llt.solve(pct.transpose()).transpose();

  Belief post;
  post.mean = prior.mean + gain * (y - obs.offset - c * prior.mean);
  const Eigen::Index n = prior.mean.size();
  post.covariance = (Eigen::MatrixXd::Identity(n, n) - gain * c) * prior.covariance;
  symmetrize(post.covariance);
  if (diagnostics) {
    diagnostics->gain_residual = (gain * innovation_cov - pct).norm();
    diagnostics->gain_residual_relative = diagnostics->gain_residual / std::max(pct.norm(), 1e-300);
  }
  return post;
}

Belief update(const Belief& prior, const Eigen::VectorXd& y, const pod::ReducedBasis& basis,
              const pod::NormalizationParams& normalization, const Eigen::MatrixXd& measurement_cov,
              const plant::MeasurementSelection& selection) {
  return update(prior, y, reduced_observation(basis, normalization, selection), measurement_cov);
}

plant::StateVector lift(const Eigen::VectorXd& xi, const pod::ReducedBasis& basis,
                        const pod::NormalizationParams& normalization) {
  return pod::reconstruct(xi, basis, normalization);
}

void PhaseTiming::add(Phase phase, double seconds) {
  switch (phase) {
    case Phase::model_prediction: model_prediction_s += seconds; break;
    case Phase::discretization: discretization_s += seconds; break;
    case Phase::other: other_s += seconds; break;
  }
}

FilterRun run_ekf(const Trajectory& trajectory, const Dynamics& dynamics, const LinearObservation& observation,
                  const Eigen::MatrixXd& process_cov, const Eigen::MatrixXd& measurement_cov,
                  const Belief& initial, const std::function<plant::StateVector(const Eigen::VectorXd&)>& to_full,
                  const RunOptions& options) {
  check_belief(initial);
  const Eigen::Index steps = trajectory.steps();
  require(steps > 0, "filter run needs a nonempty trajectory");
  require(trajectory.measurements.cols() == steps, "trajectory needs one measurement per input");
  require(trajectory.measurements.rows() == observation.matrix.rows(),
          "measurement rows must match the observation model");

  FilterRun run;
  const auto n = initial.mean.size();
  run.states.resize(n, steps + 1);
  run.states.col(0) = initial.mean;
  const plant::StateVector first = to_full(initial.mean);
  run.estimates.resize(first.size(), steps + 1);
  run.estimates.col(0) = first;

  Belief belief = initial;
  for (Eigen::Index k = 0; k < steps; ++k) {
    const Eigen::VectorXd u = trajectory.inputs.row(k).transpose();
    try {
      auto t0 = Clock::now();
      Belief prior;
      prior.mean = dynamics.propagate(belief.mean, u);
      run.timing.add(Phase::model_prediction, seconds_since(t0));
      if (!prior.mean.allFinite()) fail(ErrorCategory::filter_divergence, "non-finite predicted state");

      t0 = Clock::now();
      const Eigen::MatrixXd jac = dynamics.jacobian(belief.mean, u, prior.mean);
      run.timing.add(dynamics.jacobian_phase, seconds_since(t0));

      t0 = Clock::now();
      prior.covariance = propagate_covariance(jac, belief.covariance, process_cov);
      ++run.predictions;
      UpdateDiagnostics upd;
      belief = update(prior, trajectory.measurements.col(k), observation, measurement_cov, &upd);
      ++run.updates;
      run.timing.add(Phase::other, seconds_since(t0));
      if (!belief.mean.allFinite() || !belief.covariance.allFinite())
        fail(ErrorCategory::filter_divergence, "non-finite posterior");

      if (options.collect_diagnostics) {
        StepDiagnostics d;
        d.symmetry_error = (belief.covariance - belief.covariance.transpose()).cwiseAbs().maxCoeff();
        d.min_eigenvalue = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(belief.covariance, Eigen::EigenvaluesOnly)
                               .eigenvalues()
                               .minCoeff();
        d.gain_residual = upd.gain_residual;
        d.gain_residual_relative = upd.gain_residual_relative;
        run.diagnostics.push_back(d);
      }
    } catch (const Error& e) {
      fail(e.category(), "filter step " + std::to_string(k) + ": " + e.what());
    }
    run.states.col(k + 1) = belief.mean;
    run.estimates.col(k + 1) = to_full(belief.mean);
  }
  run.timing.steps = steps;
  return run;
}

Eigen::MatrixXd finite_difference_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>& propagate,
    const Eigen::VectorXd& x, const Eigen::VectorXd& u, const Eigen::VectorXd& propagated) {
  Eigen::MatrixXd jac(propagated.size(), x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x(i)));
    xp(i) = x(i) + h;
    // Use the realized step so the difference quotient is exact in floating point.
    const double realized = xp(i) - x(i);
    jac.col(i) = (propagate(xp, u) - propagated) / realized;
    xp(i) = x(i);
  }
  return jac;
}

EkfConfig EkfConfig::standard(const NoiseModel& noise, const pod::ReducedBasis& basis,
                              const pod::NormalizationParams& normalization,
                              const plant::MeasurementSelection& selection, double initial_var) {
  EkfConfig c;
  c.process_cov = reduced_process_covariance(noise, basis, normalization);
  c.measurement_cov = measurement_covariance(noise);
  c.initial_cov = initial_var * Eigen::MatrixXd::Identity(basis.order(), basis.order());
  c.selection = selection;
  require(static_cast<Eigen::Index>(selection.size()) == noise.measurement_variance.size(),
          "measurement variance length must equal the selection size");
  return c;
}

Eigen::VectorXd initial_reduced_state(const pod::ReducedBasis& basis, double normalized_guess) {
  return basis.modes.transpose() * Eigen::VectorXd::Constant(basis.state_dim(), normalized_guess);
}

FilterRun run_pod_mlp_ekf(const Trajectory& trajectory, const mlp::MlpParams& model,
                          const pod::ReducedBasis& basis, const pod::NormalizationParams& normalization,
                          const EkfConfig& config, const RunOptions& options) {
  model.validate();
  require(model.output_dim() == basis.order(), "surrogate order does not match the basis order");
  Dynamics dyn;
  dyn.propagate = [&](const Eigen::VectorXd& xi, const Eigen::VectorXd& u) { return mlp::forward(model, xi, u); };
  dyn.jacobian = [&](const Eigen::VectorXd& xi, const Eigen::VectorXd& u, const Eigen::VectorXd&) {
    return mlp::jacobian_state(model, xi, u);
  };
  dyn.jacobian_phase = Phase::model_prediction;
  const Belief initial{initial_reduced_state(basis, config.initial_normalized_state), config.initial_cov};
  return run_ekf(trajectory, dyn, reduced_observation(basis, normalization, config.selection), config.process_cov,
                 config.measurement_cov, initial,
                 [&](const Eigen::VectorXd& xi) { return lift(xi, basis, normalization); }, options);
}

FilterRun run_full_ekf(const Trajectory& trajectory, const plant::PlantConfig& plant_config, const NoiseModel& noise,
                       const pod::NormalizationParams& normalization, const plant::MeasurementSelection& selection,
                       double initial_var, double normalized_guess, const RunOptions& options) {
  require(normalization.size() == plant::kStateDim, "full EKF needs a 103-state normalization");
  const auto step = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    return plant::step(plant_config, x, u);
  };
  Dynamics dyn;
  dyn.propagate = step;
  dyn.jacobian = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& u, const Eigen::VectorXd& fx) {
    return finite_difference_jacobian(step, x, u, fx);
  };
  dyn.jacobian_phase = Phase::discretization;
  const Eigen::VectorXd scale = normalization.span();
  Belief initial;
  initial.mean = pod::denormalize(Eigen::VectorXd(Eigen::VectorXd::Constant(plant::kStateDim, normalized_guess)), normalization);
  initial.covariance = (initial_var * scale.cwiseAbs2()).asDiagonal();
  return run_ekf(trajectory, dyn, full_observation(selection), noise.process_variance.asDiagonal(),
                 measurement_covariance(noise), initial, [](const Eigen::VectorXd& x) { return x; }, options);
}

FilterRun run_pod_ekf(const Trajectory& trajectory, const plant::PlantConfig& plant_config,
                      const pod::ReducedBasis& basis, const pod::NormalizationParams& normalization,
                      const EkfConfig& config, const RunOptions& options) {
  require(basis.state_dim() == plant::kStateDim, "POD-EKF needs a 103-state basis");
  const Eigen::VectorXd scale = normalization.span();
  const Eigen::VectorXd inv_scale = inverse_span(normalization);
  const auto full_step = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    return plant::step(plant_config, x, u);
  };
  Dynamics dyn;
  dyn.propagate = [&](const Eigen::VectorXd& xi, const Eigen::VectorXd& u) {
    return pod::reduce(full_step(lift(xi, basis, normalization), u), basis, normalization);
  };
  dyn.jacobian = [&](const Eigen::VectorXd& xi, const Eigen::VectorXd& u, const Eigen::VectorXd&) {
    const Eigen::VectorXd x = lift(xi, basis, normalization);
    const Eigen::MatrixXd jf = finite_difference_jacobian(full_step, x, u, full_step(x, u));
    const Eigen::MatrixXd left = basis.modes.transpose() * inv_scale.asDiagonal();
    const Eigen::MatrixXd right = scale.asDiagonal() * basis.modes;
    return Eigen::MatrixXd(left * jf * right);
  };
  dyn.jacobian_phase = Phase::discretization;
  const Belief initial{initial_reduced_state(basis, config.initial_normalized_state), config.initial_cov};
  return run_ekf(trajectory, dyn, reduced_observation(basis, normalization, config.selection), config.process_cov,
                 config.measurement_cov, initial,
                 [&](const Eigen::VectorXd& xi) { return lift(xi, basis, normalization); }, options);
}

}  // namespace romkit::estimator
