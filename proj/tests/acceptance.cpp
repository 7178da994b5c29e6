// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "romkit/config.hpp"
#include "romkit/error.hpp"
#include "romkit/estimator.hpp"
#include "romkit/excitation.hpp"
#include "romkit/harness.hpp"
#include "romkit/io.hpp"
#include "romkit/mlp.hpp"
#include "romkit/pod.hpp"
#include "romkit/rng.hpp"

using namespace romkit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

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

double relative_gap(double analytic, double fd) {
  return std::abs(analytic - fd) / std::max(1e-3, std::abs(fd));
}

class Workspace {
 public:
  explicit Workspace(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

  ExperimentConfig config(const std::string& name, bool fast) const {
    ExperimentConfig c = load_config(fs::path(ROMKIT_SOURCE_DIR) / "config" / "default.ini");
    if (fast) c.apply_fast_profile();
    c.output_dir = root_ / name;
    return c;
  }

  // Runs the listed commands once per directory and remembers which ran.
  void ensure(const std::string& name, bool fast, const std::vector<std::string>& commands) {
    const ExperimentConfig c = config(name, fast);
    if (started_.insert(name).second) fs::remove_all(c.output_dir);
    for (const auto& cmd : commands) {
      if (done_.count(name + "/" + cmd)) continue;
      const auto t0 = std::chrono::steady_clock::now();
      harness::run_command(cmd, c);
      seconds_[name + "/" + cmd] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      done_.insert(name + "/" + cmd);
    }
  }

  double seconds(const std::string& name, const std::string& cmd) const {
    const auto it = seconds_.find(name + "/" + cmd);
    return it == seconds_.end() ? 0.0 : it->second;
  }

  fs::path dir(const std::string& name) const { return root_ / name; }

 private:
  fs::path root_;
  std::set<std::string> done_;
  std::set<std::string> started_;
  std::map<std::string, double> seconds_;
};

// 1. Basis fidelity on normalized plant snapshots.
Outcome svd_fidelity() {
  const auto plant_cfg = plant::PlantConfig::defaults();
  const auto xs = plant::steady_state(plant_cfg, plant_cfg.nominal_input());
  const auto inputs = excitation::generate_prms(ExperimentConfig::defaults().prms_for(1200, 11));
  const Eigen::MatrixXd raw = harness::simulate(plant_cfg, xs, inputs);
  const Eigen::MatrixXd x = pod::normalize(raw, pod::fit_normalization(raw));
  double recon = 0.0, ortho = 0.0, eckart = 0.0;
  for (const auto method : {pod::SvdMethod::gram, pod::SvdMethod::direct}) {
    const pod::ReducedBasis full = pod::compute_basis(x, plant::kStateDim, method);
    const Eigen::Index n = full.state_dim();
    recon = std::max(recon, (x - full.modes * (full.modes.transpose() * x)).norm());
    ortho = std::max(ortho, (full.modes.transpose() * full.modes - Eigen::MatrixXd::Identity(n, n))
                                .cwiseAbs()
                                .maxCoeff());
    const Eigen::VectorXd sv = Eigen::BDCSVD<Eigen::MatrixXd>(x).singularValues();
    for (int r : {5, 10, 20, 40, 80}) {
      const pod::ReducedBasis b = pod::truncate(full, r);
      const double residual = (x - b.modes * (b.modes.transpose() * x)).squaredNorm();
      const double tail = sv.tail(sv.size() - r).squaredNorm();
      eckart = std::max(eckart, std::abs(residual - tail) / tail);
    }
  }
  return {recon < 1e-10 && ortho < 1e-10 && eckart < 1e-8,
          "reconstruction " + fmt(recon) + ", orthonormality " + fmt(ortho) + ", Eckart-Young relative " +
              fmt(eckart)};
}

// 2. Order sweep on the default 12000-snapshot dataset.
Outcome order_sweep(Workspace& ws) {
  ws.ensure("default", false, {"simulate", "reduce"});
  const auto t = io::read_csv(ws.dir("default") / "rmse_vs_order.csv");
  bool monotone = true, normalized_wins = true;
  std::ostringstream os;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const double norm = t.number(i, 1), raw = t.number(i, 2);
    if (i > 0 && norm > t.number(i - 1, 1) + 1e-9) monotone = false;
    if (norm > raw) normalized_wins = false;
    os << (i ? " " : "") << t.rows[i][0] << ":" << fmt(norm) << "/" << fmt(raw);
  }
  const double secs = ws.seconds("default", "simulate") + ws.seconds("default", "reduce");
  return {monotone && normalized_wins && t.rows.size() == 8,
          std::string(monotone ? "" : "not monotone, ") + (normalized_wins ? "" : "raw beats normalized, ") +
              "log rmse norm/raw " + os.str() + ", " + fmt(secs) + " s"};
}

// 3. Gradients and state Jacobians against central differences.
Outcome derivative_checks() {
  Rng rng(303);
  double worst_grad = 0.0, worst_jac = 0.0;
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    const int r = 1 + static_cast<int>(rng.uniform() * 6);
    std::vector<int> dims{3 + r};
    const int layers = 1 + static_cast<int>(rng.uniform() * 3);
    for (int l = 0; l < layers; ++l) dims.push_back(2 + static_cast<int>(rng.uniform() * 9));
    dims.push_back(r);
    mlp::MlpParams p = mlp::initialize(dims, 1000 + trial);
    for (auto& b : p.biases) b = 0.3 * random_matrix(b.size(), 1, rng);
    p.output = trial % 2 ? mlp::OutputMode::increment : mlp::OutputMode::absolute;
    p.input_min = random_matrix(dims.front(), 1, rng);
    p.input_max = p.input_min.array() + 0.5 + rng.uniform();
    p.output_min = random_matrix(r, 1, rng);
    p.output_max = p.output_min.array() + 0.5 + rng.uniform();

    const int m = 1 + static_cast<int>(rng.uniform() * 8);
    const Eigen::MatrixXd in = random_matrix(dims.front(), m, rng);
    const Eigen::MatrixXd target = random_matrix(r, m, rng);
    const mlp::Gradient g = mlp::gradient(p, in, target);
    for (int l = 0; l < p.layer_count(); ++l) {
      for (Eigen::Index i = 0; i < p.weights[l].size(); ++i) {
        mlp::MlpParams hi = p, lo = p;
        hi.weights[l].data()[i] += h;
        lo.weights[l].data()[i] -= h;
        const double fd = (mlp::loss(hi, in, target) - mlp::loss(lo, in, target)) / (2 * h);
        worst_grad = std::max(worst_grad, relative_gap(g.weights[l].data()[i], fd));
      }
      for (Eigen::Index i = 0; i < p.biases[l].size(); ++i) {
        mlp::MlpParams hi = p, lo = p;
        hi.biases[l](i) += h;
        lo.biases[l](i) -= h;
        const double fd = (mlp::loss(hi, in, target) - mlp::loss(lo, in, target)) / (2 * h);
        worst_grad = std::max(worst_grad, relative_gap(g.biases[l](i), fd));
      }
    }

    const Eigen::VectorXd xi = random_matrix(r, 1, rng);
    const Eigen::VectorXd u = random_matrix(3, 1, rng);
    const Eigen::MatrixXd a = mlp::jacobian_state(p, xi, u);
    for (int j = 0; j < r; ++j) {
      Eigen::VectorXd up = xi, dn = xi;
      up(j) += h;
      dn(j) -= h;
      const Eigen::VectorXd fd = (mlp::forward(p, up, u) - mlp::forward(p, dn, u)) / (2 * h);
      for (int i = 0; i < r; ++i) worst_jac = std::max(worst_jac, relative_gap(a(i, j), fd(i)));
    }
  }
  return {worst_grad < 1e-4 && worst_jac < 1e-4,
          "100 networks, gradient " + fmt(worst_grad) + ", state Jacobian " + fmt(worst_jac)};
}

// 4. A wider student fits data from a frozen random teacher.
Outcome teacher_student() {
  const int r = 2;
  mlp::MlpParams teacher = mlp::initialize({3 + r, 16, r}, 4040);
  Rng rng(4041);
  for (auto& b : teacher.biases) b = 0.2 * random_matrix(b.size(), 1, rng);
  const Eigen::Index m = 40000;
  Eigen::MatrixXd in(3 + r, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (int i = 0; i < 3 + r; ++i) in(i, j) = rng.uniform();
  const mlp::Dataset data = mlp::make_dataset(in, mlp::evaluate(teacher, in), 4042);
  mlp::MlpParams student = mlp::initialize({3 + r, 32, 32, r}, 4043);
  mlp::attach_scaling(student, data);
  mlp::TrainConfig tc = ExperimentConfig::defaults().surrogate.train;
  tc.seed = 4044;
  const auto t0 = std::chrono::steady_clock::now();
  const mlp::TrainResult res = mlp::train(student, data, tc);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto& best = res.history[static_cast<std::size_t>(res.best_epoch)];
  return {best.train_mse < 1e-6 && secs < 300.0,
          "training mse " + fmt(best.train_mse) + " at epoch " + std::to_string(res.best_epoch) + " of " +
              std::to_string(tc.max_epochs) + ", " + fmt(secs) + " s"};
}

// 5. Open-loop rollout of the trained surrogate.
Outcome rollout(Workspace& ws) {
  ws.ensure("fast_a", true, {"simulate", "reduce", "train"});
  const fs::path s = ws.dir("fast_a") / "train_summary.csv";
  const double e = harness::summary_value(s, "rollout_rmse_normalized");
  const double proj = harness::summary_value(s, "rollout_projection_rmse_normalized");
  const double secs =
      ws.seconds("fast_a", "simulate") + ws.seconds("fast_a", "reduce") + ws.seconds("fast_a", "train");
  return {e < 0.1 && secs < 600.0, "rollout rmse " + fmt(e) + " (projection floor " + fmt(proj) + "), " +
                                       fmt(secs) + " s including training"};
}

// 6. Filter accuracy against the open-loop rollout.
Outcome estimation(Workspace& ws) {
  ws.ensure("fast_a", true, {"simulate", "reduce", "train", "estimate"});
  const fs::path s = ws.dir("fast_a") / "estimate_summary.csv";
  const double e = harness::summary_value(s, "pod-mlp-ekf.rmse_normalized");
  const double open = harness::summary_value(s, "open_loop.rmse_normalized");
  const double floor = harness::summary_value(s, "noise_floor_rmse_normalized");
  return {e < 0.05 && e < open, "filter rmse " + fmt(e) + ", open loop " + fmt(open) + ", process noise floor " +
                                    fmt(floor) + ", " + fmt(ws.seconds("fast_a", "estimate")) + " s"};
}

// 7. Covariance health over the same run.
Outcome covariance_health(Workspace& ws) {
  ws.ensure("fast_a", true, {"simulate", "reduce", "train", "estimate"});
  const fs::path s = ws.dir("fast_a") / "estimate_summary.csv";
  const double sym = harness::summary_value(s, "pod-mlp-ekf.max_symmetry_error");
  const double eig = harness::summary_value(s, "pod-mlp-ekf.min_covariance_eigenvalue");
  const double gain = harness::summary_value(s, "pod-mlp-ekf.max_gain_residual");
  const double gain_rel = harness::summary_value(s, "pod-mlp-ekf.max_gain_residual_relative");
  const double steps = harness::summary_value(s, "pod-mlp-ekf.updates");
  return {sym == 0.0 && eig >= -1e-10 && gain < 1e-10 && steps > 0,
          "symmetry " + fmt(sym) + ", min eigenvalue " + fmt(eig) + ", gain residual " + fmt(gain) + " (relative " + fmt(gain_rel) + ") over " +
              fmt(steps) + " updates"};
}

// 8. Runtime ordering on shared inputs.
Outcome timing(Workspace& ws) {
  ws.ensure("fast_a", true, {"simulate", "reduce", "train", "estimate", "benchmark"});
  const auto t = io::read_csv(ws.dir("fast_a") / "timing.csv");
  std::map<std::string, double> total;
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    if (t.rows[i][1] == "total") total[t.rows[i][0]] = t.number(i, 3);
  const double ekf = total["EKF"], pod = total["POD-EKF"], surrogate = total["POD-MLP-EKF"];
  const double ratio = pod / ekf, speedup = ekf / surrogate;
  return {surrogate < ekf && ratio <= 2.0 && ratio >= 0.5 && speedup >= 5.0,
          "EKF " + fmt(ekf) + " s, POD-EKF " + fmt(pod) + " s, POD-MLP-EKF " + fmt(surrogate) +
              " s, speedup " + fmt(speedup) + "x"};
}

// 9. Linear surrogate against a hand-written Kalman filter.
Outcome linear_oracle() {
  Rng rng(909);
  const int r = 6;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(plant::kStateDim, r, rng));
  pod::ReducedBasis basis;
  basis.modes = qr.householderQ() * Eigen::MatrixXd::Identity(plant::kStateDim, r);
  basis.singular_values = Eigen::VectorXd::LinSpaced(r, double(r), 1.0);
  basis.total_energy = basis.singular_values.squaredNorm();
  pod::NormalizationParams norm;
  norm.min = 10.0 * random_matrix(plant::kStateDim, 1, rng);
  norm.max = norm.min.array() + 1.0 + 4.0 * random_matrix(plant::kStateDim, 1, rng).array().abs();

  mlp::MlpParams net = mlp::MlpParams::zeros({3 + r, r + 3, r});
  net.hidden = mlp::Activation::identity;
  net.weights[0] = 0.3 * random_matrix(r + 3, 3 + r, rng);
  net.weights[1] = 0.3 * random_matrix(r, r + 3, rng);
  net.biases[0] = 0.1 * random_matrix(r + 3, 1, rng);
  net.biases[1] = 0.1 * random_matrix(r, 1, rng);
  const double radius = (net.weights[1] * net.weights[0].rightCols(r)).eigenvalues().cwiseAbs().maxCoeff();
  net.weights[1] *= 0.95 / radius;
  net.biases[1] *= 0.95 / radius;
  const Eigen::MatrixXd w = net.weights[1] * net.weights[0];
  const Eigen::MatrixXd a = w.rightCols(r), b = w.leftCols(3);
  const Eigen::VectorXd c = net.weights[1] * net.biases[0] + net.biases[1];

  const auto sel = plant::MeasurementSelection::temperatures();
  const auto obs = estimator::reduced_observation(basis, norm, sel);
  const Eigen::Index p = static_cast<Eigen::Index>(sel.size());
  const int steps = 100;
  estimator::Trajectory t{Eigen::MatrixXd(steps, 3), Eigen::MatrixXd(p, steps)};
  for (int k = 0; k < steps; ++k) {
    t.inputs.row(k) = random_matrix(1, 3, rng);
    t.measurements.col(k) = obs.offset + random_matrix(p, 1, rng);
  }
  estimator::EkfConfig cfg;
  cfg.process_cov = 0.01 * random_spd(r, rng);
  cfg.measurement_cov = random_spd(p, rng);
  cfg.initial_cov = 0.1 * Eigen::MatrixXd::Identity(r, r);
  cfg.selection = sel;
  const auto run = estimator::run_pod_mlp_ekf(t, net, basis, norm, cfg);

  Eigen::VectorXd x = estimator::initial_reduced_state(basis, 0.5);
  Eigen::MatrixXd cov = cfg.initial_cov;
  double worst = 0.0;
  for (int k = 0; k < steps; ++k) {
    x = a * x + b * t.inputs.row(k).transpose() + c;
    cov = a * cov * a.transpose() + cfg.process_cov;
    const Eigen::MatrixXd s = obs.matrix * cov * obs.matrix.transpose() + cfg.measurement_cov;
    const Eigen::MatrixXd gain = cov * obs.matrix.transpose() * s.inverse();
    x += gain * (t.measurements.col(k) - obs.offset - obs.matrix * x);
    cov = (Eigen::MatrixXd::Identity(r, r) - gain * obs.matrix) * cov;
    worst = std::max(worst, (run.states.col(k + 1) - x).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-10, "max state difference " + fmt(worst) + " over " + std::to_string(steps) + " steps"};
}

// 10. Two independent pipeline runs give identical artifacts.
Outcome determinism(Workspace& ws) {
  const auto& all = harness::command_names();
  ws.ensure("fast_a", true, all);
  ws.ensure("fast_b", true, all);
  const auto digests = [&](const std::string& name) {
    const auto m = nlohmann::json::parse(io::read_file(ws.dir(name) / "manifest.json"));
    std::map<std::string, std::string> out;
    for (const auto& f : m.at("files")) out[f.at("path")] = f.at("git_blob_sha1");
    return out;
  };
  const auto a = digests("fast_a"), b = digests("fast_b");
  int compared = 0, differing = 0;
  std::string first;
  for (const auto& [path, digest] : a) {
    if (harness::is_timing_artifact(path)) continue;
    ++compared;
    const auto it = b.find(path);
    if (it == b.end() || it->second != digest) {
      ++differing;
      if (first.empty()) first = path;
    }
  }
  return {differing == 0 && a.size() == b.size() && compared > 0,
          std::to_string(compared) + " artifacts compared, " + std::to_string(differing) + " differ" +
              (first.empty() ? "" : " (first: " + first + ")")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"romkit acceptance checks"};
  std::string work = (fs::temp_directory_path() / "romkit_acceptance").string();
  std::vector<int> only;
  std::vector<int> expected_failures;
  app.add_option("--work", work, "Scratch directory for pipeline runs");
  app.add_option("--only", only, "Run just these criteria");
  app.add_option("--expect-fail", expected_failures,
                 "Criteria whose failure is known and should not fail the exit status");
  CLI11_PARSE(app, argc, argv);

  Workspace ws{fs::path(work)};
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"svd-fidelity", svd_fidelity},
      {"order-sweep", [&] { return order_sweep(ws); }},
      {"derivatives", derivative_checks},
      {"teacher-student", teacher_student},
      {"rollout", [&] { return rollout(ws); }},
      {"estimation", [&] { return estimation(ws); }},
      {"covariance-health", [&] { return covariance_health(ws); }},
      {"timing", [&] { return timing(ws); }},
      {"linear-oracle", linear_oracle},
      {"determinism", [&] { return determinism(ws); }},
  };

  int unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const bool expected =
        std::find(expected_failures.begin(), expected_failures.end(), id) != expected_failures.end();
    if (!o.pass && !expected) ++unexpected;
    std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << " " << criteria[i].first << ": "
              << o.detail << (!o.pass && expected ? " [known failure]" : "") << std::endl;
  }
  return unexpected == 0 ? 0 : 1;
}
