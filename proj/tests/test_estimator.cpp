#include <cmath>

#include "doctest.h"
#include "romkit/error.hpp"
#include "romkit/estimator.hpp"
#include "romkit/excitation.hpp"
#include "romkit/harness.hpp"
#include "romkit/rng.hpp"

using namespace romkit;
using namespace romkit::estimator;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

Eigen::MatrixXd random_spd(Eigen::Index n, Rng& rng) {
  const Eigen::MatrixXd a = random_matrix(n, n, rng);
  return a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
}

pod::ReducedBasis random_basis(Eigen::Index n, int r, Rng& rng) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(n, r, rng));
  pod::ReducedBasis b;
  b.modes = qr.householderQ() * Eigen::MatrixXd::Identity(n, r);
  b.singular_values = Eigen::VectorXd::LinSpaced(r, double(r), 1.0);
  b.total_energy = b.singular_values.squaredNorm();
  return b;
}

pod::NormalizationParams random_normalization(Eigen::Index n, Rng& rng) {
  pod::NormalizationParams p;
  p.min.resize(n);
  p.max.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    p.min(i) = 10.0 * rng.normal();
    p.max(i) = p.min(i) + 1.0 + 5.0 * rng.uniform();
  }
  return p;
}

mlp::MlpParams random_network(const std::vector<int>& dims, std::uint64_t seed) {
  mlp::MlpParams p = mlp::initialize(dims, seed);
  Rng rng(seed + 7);
  for (auto& b : p.biases)
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.1 * rng.normal();
  return p;
}

// Textbook form with an explicit inverse, written independently of update().
Belief textbook_update(const Belief& prior, const Eigen::VectorXd& y, const LinearObservation& obs,
                       const Eigen::MatrixXd& r) {
  const Eigen::MatrixXd& c = obs.matrix;
  const Eigen::MatrixXd s = c * prior.covariance * c.transpose() + r;
  const Eigen::MatrixXd k = prior.covariance * c.transpose() * s.fullPivLu().inverse();
  Belief post;
  post.mean = prior.mean + k * (y - (obs.offset + c * prior.mean));
  post.covariance = prior.covariance - k * c * prior.covariance;
  return post;
}

// A linear network in raw coordinates: identity activations and unit scaling.
mlp::MlpParams linear_network(int r, Rng& rng) {
  mlp::MlpParams p = mlp::MlpParams::zeros({3 + r, r + 2, r});
  p.hidden = mlp::Activation::identity;
  p.weights[0] = 0.3 * random_matrix(r + 2, 3 + r, rng);
  p.weights[1] = 0.3 * random_matrix(r, r + 2, rng);
  p.biases[0] = 0.1 * random_matrix(r + 2, 1, rng);
  p.biases[1] = 0.1 * random_matrix(r, 1, rng);
  // Scale the map so it is contractive.
  const Eigen::MatrixXd a = p.weights[1] * p.weights[0].rightCols(r);
  const double radius = a.eigenvalues().cwiseAbs().maxCoeff();
  p.weights[1] *= 0.9 / radius;
  p.biases[1] *= 0.9 / radius;
  return p;
}

}  // namespace

TEST_CASE("noise model scales with the steady state") {
  plant::StateVector xs = plant::StateVector::LinSpaced(plant::kStateDim, 1.0, 103.0);
  const auto sel = plant::MeasurementSelection::temperatures();
  const NoiseModel m = NoiseModel::from_steady_state(xs, sel);
  CHECK(m.process_variance(9) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(m.measurement_variance(0) == doctest::Approx(std::pow(0.01 * 21.0, 2)).epsilon(1e-12));
  CHECK(m.measurement_variance.size() == static_cast<Eigen::Index>(sel.size()));
}

TEST_CASE("predict") {
  Rng rng(1);
  const int r = 6;
  SUBCASE("zero network with zero Q") {
    mlp::MlpParams p = mlp::MlpParams::zeros(mlp::default_dims(r));
    p.biases.back().setConstant(0.25);
    const Belief b{random_matrix(r, 1, rng).col(0), random_spd(r, rng)};
    const Belief prior = predict(b, Eigen::Vector3d(0.1, 0.2, 0.3), p, Eigen::MatrixXd::Zero(r, r));
    CHECK(prior.covariance.isZero(0.0));
    CHECK((prior.mean - Eigen::VectorXd::Constant(r, 0.25)).norm() == 0.0);
  }
  SUBCASE("identity dynamics add Q") {
    mlp::MlpParams p = mlp::MlpParams::zeros({3 + r, r});
    p.weights[0].rightCols(r).setIdentity();
    const Belief b{random_matrix(r, 1, rng).col(0), random_spd(r, rng)};
    const Eigen::MatrixXd q = random_spd(r, rng);
    const Belief prior = predict(b, Eigen::Vector3d(0, 0, 0), p, q);
    CHECK((prior.covariance - (b.covariance + q)).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("loop oracle for A P A^T + Q") {
    const mlp::MlpParams p = random_network(mlp::default_dims(r), 5);
    const Belief b{random_matrix(r, 1, rng).col(0), random_spd(r, rng)};
    const Eigen::MatrixXd q = random_spd(r, rng);
    const Eigen::Vector3d u(0.4, 0.5, 0.6);
    const Belief prior = predict(b, u, p, q);
    const Eigen::MatrixXd a = mlp::jacobian_state(p, b.mean, u);
    double worst = 0.0;
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) {
        double acc = q(i, j);
        for (int k = 0; k < r; ++k)
          for (int l = 0; l < r; ++l) acc += a(i, k) * b.covariance(k, l) * a(j, l);
        worst = std::max(worst, std::abs(acc - prior.covariance(i, j)));
      }
    CHECK(worst < 1e-12);
    CHECK((prior.mean - mlp::forward(p, b.mean, u)).norm() == 0.0);
  }
}

TEST_CASE("update") {
  Rng rng(2);
  const int r = 5, p = 3;
  const Belief prior{random_matrix(r, 1, rng).col(0), random_spd(r, rng)};
  LinearObservation obs{random_matrix(p, r, rng), random_matrix(p, 1, rng).col(0)};
  const Eigen::VectorXd y = random_matrix(p, 1, rng).col(0);

  SUBCASE("matches the textbook update") {
    const Eigen::MatrixXd rr = random_spd(p, rng);
    UpdateDiagnostics diag;
    const Belief post = update(prior, y, obs, rr, &diag);
    const Belief ref = textbook_update(prior, y, obs, rr);
    CHECK((post.mean - ref.mean).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((post.covariance - ref.covariance).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((post.covariance - post.covariance.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(diag.gain_residual < 1e-10);
  }
  SUBCASE("uninformative measurement leaves the prior") {
    const Belief post = update(prior, y, obs, 1e12 * Eigen::MatrixXd::Identity(p, p));
    CHECK((post.mean - prior.mean).norm() <= 1e-6 * prior.mean.norm());
    CHECK((post.covariance - prior.covariance).norm() <= 1e-6 * prior.covariance.norm());
  }
  SUBCASE("perfect full measurement") {
    const LinearObservation id{Eigen::MatrixXd::Identity(r, r), Eigen::VectorXd::Zero(r)};
    const Eigen::VectorXd target = random_matrix(r, 1, rng).col(0);
    const Belief post = update(prior, target, id, Eigen::MatrixXd::Zero(r, r));
    CHECK((post.mean - target).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(post.covariance.cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("singular innovation covariance") {
    const Belief flat{prior.mean, Eigen::MatrixXd::Zero(r, r)};
    try {
      update(flat, y, obs, -Eigen::MatrixXd::Identity(p, p));
      FAIL("expected a singular update");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::singular_update);
      CHECK(std::string(e.what()).find("min eigenvalue -1") != std::string::npos);
    }
  }
}

TEST_CASE("reduced observation is selection times denormalization times modes") {
  Rng rng(3);
  const auto basis = random_basis(plant::kStateDim, 4, rng);
  const auto norm = random_normalization(plant::kStateDim, rng);
  const std::vector<int> idx{3, 50, 101};
  const auto sel = plant::MeasurementSelection::from_one_based(idx);
  const LinearObservation obs = reduced_observation(basis, norm, sel);
  const Eigen::VectorXd xi = random_matrix(4, 1, rng).col(0);
  const Eigen::VectorXd expected = plant::measure(sel, lift(xi, basis, norm));
  CHECK((obs.offset + obs.matrix * xi - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("filter runs") {
  Rng rng(4);
  const int r = 4;
  const auto basis = random_basis(plant::kStateDim, r, rng);
  const auto norm = random_normalization(plant::kStateDim, rng);
  const std::vector<int> idx{1, 21, 60, 103};
  const auto sel = plant::MeasurementSelection::from_one_based(idx);
  const LinearObservation obs = reduced_observation(basis, norm, sel);

  SUBCASE("one step means one predict and one update") {
    const mlp::MlpParams p = random_network(mlp::default_dims(r), 9);
    EkfConfig cfg;
    cfg.process_cov = 1e-4 * Eigen::MatrixXd::Identity(r, r);
    cfg.measurement_cov = 1e-2 * Eigen::MatrixXd::Identity(4, 4);
    cfg.initial_cov = 0.1 * Eigen::MatrixXd::Identity(r, r);
    cfg.selection = sel;
    Trajectory t{Eigen::MatrixXd::Constant(1, 3, 0.5), Eigen::MatrixXd::Zero(4, 1)};
    const FilterRun run = run_pod_mlp_ekf(t, p, basis, norm, cfg);
    CHECK(run.predictions == 1);
    CHECK(run.updates == 1);
    CHECK(run.estimates.rows() == plant::kStateDim);
    CHECK(run.estimates.cols() == 2);
    CHECK(run.timing.discretization_s == 0.0);
  }

  SUBCASE("filter beats open loop on noise-free surrogate data") {
    const mlp::MlpParams p = linear_network(r, rng);
    mlp::MlpParams net = p;
    const int steps = 100;
    Eigen::MatrixXd inputs(steps, 3);
    for (int k = 0; k < steps; ++k) inputs.row(k) = random_matrix(1, 3, rng);
    const Eigen::VectorXd truth0 = random_matrix(r, 1, rng).col(0);
    const Eigen::MatrixXd truth = mlp::rollout(net, truth0, inputs);
    Trajectory t{inputs, Eigen::MatrixXd(4, steps)};
    for (int k = 0; k < steps; ++k) t.measurements.col(k) = obs.offset + obs.matrix * truth.col(k + 1);
    EkfConfig cfg;
    cfg.process_cov = 1e-6 * Eigen::MatrixXd::Identity(r, r);
    cfg.measurement_cov = 1e-4 * Eigen::MatrixXd::Identity(4, 4);
    cfg.initial_cov = 0.1 * Eigen::MatrixXd::Identity(r, r);
    cfg.selection = sel;
    const FilterRun run = run_pod_mlp_ekf(t, net, basis, norm, cfg);
    const Eigen::MatrixXd open = mlp::rollout(net, initial_reduced_state(basis, 0.5), inputs);
    const Eigen::MatrixXd truth_full = pod::reconstruct(truth, basis, norm);
    const double filter_rmse = harness::normalized_rmse(truth_full, run.estimates, norm);
    const double open_rmse = harness::normalized_rmse(truth_full, pod::reconstruct(open, basis, norm), norm);
    MESSAGE("filter " << filter_rmse << " open loop " << open_rmse);
    CHECK(filter_rmse < open_rmse);
  }
}

TEST_CASE("linear surrogate reproduces a hand-rolled Kalman filter") {
  Rng rng(5);
  const int r = 5;
  const auto basis = random_basis(plant::kStateDim, r, rng);
  const auto norm = random_normalization(plant::kStateDim, rng);
  const std::vector<int> idx{2, 30, 77};
  const auto sel = plant::MeasurementSelection::from_one_based(idx);
  const mlp::MlpParams net = linear_network(r, rng);

  // x+ = A x + B u + c for the linear network.
  const Eigen::MatrixXd w = net.weights[1] * net.weights[0];
  const Eigen::MatrixXd a = w.rightCols(r);
  const Eigen::MatrixXd b = w.leftCols(3);
  const Eigen::VectorXd c = net.weights[1] * net.biases[0] + net.biases[1];
  const LinearObservation obs = reduced_observation(basis, norm, sel);

  const int steps = 100;
  Trajectory t{Eigen::MatrixXd(steps, 3), Eigen::MatrixXd(3, steps)};
  for (int k = 0; k < steps; ++k) {
    t.inputs.row(k) = random_matrix(1, 3, rng);
    t.measurements.col(k) = random_matrix(3, 1, rng).col(0) * 2.0 + obs.offset;
  }
  EkfConfig cfg;
  cfg.process_cov = 0.01 * random_spd(r, rng);
  cfg.measurement_cov = random_spd(3, rng);
  cfg.initial_cov = 0.1 * Eigen::MatrixXd::Identity(r, r);
  cfg.selection = sel;
  const FilterRun run = run_pod_mlp_ekf(t, net, basis, norm, cfg);

  Eigen::VectorXd x = initial_reduced_state(basis, 0.5);
  Eigen::MatrixXd p = cfg.initial_cov;
  double worst = 0.0;
  for (int k = 0; k < steps; ++k) {
    x = a * x + b * t.inputs.row(k).transpose() + c;
    p = a * p * a.transpose() + cfg.process_cov;
    const Eigen::MatrixXd s = obs.matrix * p * obs.matrix.transpose() + cfg.measurement_cov;
    const Eigen::MatrixXd k_gain = p * obs.matrix.transpose() * s.inverse();
    x = x + k_gain * (t.measurements.col(k) - obs.offset - obs.matrix * x);
    p = (Eigen::MatrixXd::Identity(r, r) - k_gain * obs.matrix) * p;
    worst = std::max(worst, (run.states.col(k + 1) - x).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("POD-EKF with a square basis matches the full EKF") {
  const plant::PlantConfig plant_cfg = plant::PlantConfig::defaults();
  const plant::StateVector xs = plant::steady_state(plant_cfg, plant_cfg.nominal_input());
  excitation::PrmsConfig prms;
  prms.bounds.assign(plant_cfg.input_bounds.begin(), plant_cfg.input_bounds.end());
  prms.horizon_samples = 400;
  prms.seed = 99;
  const auto inputs = excitation::generate_prms(prms);
  const Eigen::MatrixXd snaps = harness::simulate(plant_cfg, xs, inputs);
  const auto fitted = pod::fit_normalization(snaps);
  REQUIRE(fitted.degenerate_rows().empty());

  const auto sel = plant::MeasurementSelection::temperatures();
  const NoiseModel noise = NoiseModel::from_steady_state(xs, sel);
  const int steps = 20;
  Trajectory t{inputs.topRows(steps), Eigen::MatrixXd(sel.size(), steps)};
  Rng rng(6);
  for (int k = 0; k < steps; ++k) {
    Eigen::VectorXd v(sel.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = noise.measurement_std()(i) * rng.normal();
    t.measurements.col(k) = plant::measure(sel, snaps.col(k + 1), &v);
  }
  const auto affine_difference = [&](const pod::NormalizationParams& norm) {
    const auto basis = pod::compute_basis(pod::normalize(snaps, norm), plant::kStateDim, pod::SvdMethod::direct);
    const EkfConfig cfg = EkfConfig::standard(noise, basis, norm, sel);
    const Eigen::VectorXd u0 = inputs.row(0).transpose();
    const auto step = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& u) { return plant::step(plant_cfg, x, u); };
    const Eigen::VectorXd fx0 = step(xs, u0);
    const Eigen::MatrixXd a = finite_difference_jacobian(step, xs, u0, fx0);
    const auto affine = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return fx0 + a * (x - xs); };
    const Eigen::VectorXd span = norm.span();

    Dynamics full_dyn;
    full_dyn.propagate = [&](const Eigen::VectorXd& x, const Eigen::VectorXd&) { return affine(x); };
    full_dyn.jacobian = [&](const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&) {
      return Eigen::MatrixXd(a);
    };
    Belief full0;
    full0.mean = pod::denormalize(Eigen::VectorXd(Eigen::VectorXd::Constant(plant::kStateDim, 0.5)), norm);
    full0.covariance = (0.1 * span.cwiseAbs2()).asDiagonal();
    const FilterRun full = run_ekf(t, full_dyn, full_observation(sel), noise.process_variance.asDiagonal(),
                                   measurement_covariance(noise), full0, [](const Eigen::VectorXd& x) { return x; });

    Dynamics red_dyn;
    red_dyn.propagate = [&](const Eigen::VectorXd& xi, const Eigen::VectorXd&) {
      return pod::reduce(affine(lift(xi, basis, norm)), basis, norm);
    };
    const Eigen::MatrixXd a_r = basis.modes.transpose() * span.cwiseInverse().asDiagonal() * a *
                                span.asDiagonal() * basis.modes;
    red_dyn.jacobian = [&](const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&) {
      return Eigen::MatrixXd(a_r);
    };
    const Belief red0{initial_reduced_state(basis, 0.5), cfg.initial_cov};
    const FilterRun reduced =
        run_ekf(t, red_dyn, reduced_observation(basis, norm, sel), cfg.process_cov, cfg.measurement_cov, red0,
                [&](const Eigen::VectorXd& xi) { return lift(xi, basis, norm); });
    return (full.estimates - reduced.estimates).cwiseAbs().maxCoeff();
  };

  SUBCASE("shared affine model with unit spans") {
    pod::NormalizationParams unit = fitted;
    unit.max = unit.min.array() + 1.0;
    const double diff = affine_difference(unit);
    MESSAGE("affine model, unit spans: max absolute difference " << diff);
    CHECK(diff < 1e-6);
  }
  SUBCASE("shared affine model with snapshot spans") {
    // Normalized process variances here run from 1e-3 to 1e9, and rotating
    // them into the modes leaves rounding of about 1e-7 of the largest entry.
    const double diff = affine_difference(fitted);
    MESSAGE("affine model, snapshot spans: max absolute difference " << diff);
    CHECK(diff < 1e-4);
  }
  SUBCASE("plant with finite-difference Jacobians") {
    const auto basis = pod::compute_basis(pod::normalize(snaps, fitted), plant::kStateDim, pod::SvdMethod::direct);
    const FilterRun full = run_full_ekf(t, plant_cfg, noise, fitted, sel);
    const FilterRun reduced = run_pod_ekf(t, plant_cfg, basis, fitted, EkfConfig::standard(noise, basis, fitted, sel));
    CHECK(full.states.rows() == plant::kStateDim);
    CHECK(full.timing.discretization_s > 0.0);
    // Forward differences amplify rounding; a 1e-14 nudge of the initial guess
    // sets the reproducibility floor of the full filter itself.
    const FilterRun nudged = run_full_ekf(t, plant_cfg, noise, fitted, sel, 0.1, 0.5 + 1e-14);
    const double floor = (full.estimates - nudged.estimates).cwiseAbs().maxCoeff();
    const double diff = (full.estimates - reduced.estimates).cwiseAbs().maxCoeff();
    MESSAGE("plant: max absolute difference " << diff << ", full filter floor " << floor);
    CHECK(diff < 10.0 * floor);
    CHECK(diff < 1e-4);
  }
}
