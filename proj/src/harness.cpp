#include "romkit/harness.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <iomanip>
#include <map>
#include <sstream>

#include "json.hpp"
#include "romkit/error.hpp"
#include "romkit/io.hpp"
#include "romkit/rng.hpp"

namespace romkit::harness {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::string_view kPodMagic = "ROMPOD1";
constexpr const char* kManifest = "manifest.json";

// Plant states highlighted in the plot bundle (one-based): absorber liquid CO2
// at the top stage, absorber liquid temperature mid-column, desorber liquid
// CO2 at the bottom stage, reboiler temperature.
const std::vector<int> kHighlightStates{6, 23, 60, 103};

fs::path artifact(const ExperimentConfig& c, const std::string& name) { return c.output_dir / name; }

void require_artifact(const fs::path& path, const std::string& command) {
  if (!fs::exists(path))
    fail(ErrorCategory::missing_artifact,
         "missing " + path.string() + "; run `romkit " + command + "` with the same --out first");
}

std::vector<std::string> numbered(const std::string& prefix, Eigen::Index count, int first = 1) {
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < count; ++i) names.push_back(prefix + std::to_string(i + first));
  return names;
}

// Rows are states, one column per sample.
void write_state_columns(const fs::path& path, const Eigen::MatrixXd& states) {
  io::CsvWriter csv(numbered("sample_", states.cols(), 0));
  for (Eigen::Index i = 0; i < states.rows(); ++i) {
    for (Eigen::Index k = 0; k < states.cols(); ++k) csv.cell(states(i, k));
    csv.end_row();
  }
  csv.save(path);
}

Eigen::MatrixXd read_state_columns(const fs::path& path) { return io::read_csv(path).numeric(); }

// One row per sample: sample_index followed by the column of `series`.
void write_series(const fs::path& path, const Eigen::MatrixXd& series, std::vector<std::string> names,
                  Eigen::Index first_index) {
  names.insert(names.begin(), "sample_index");
  io::CsvWriter csv(std::move(names));
  for (Eigen::Index k = 0; k < series.cols(); ++k) {
    csv.cell(static_cast<std::int64_t>(first_index + k));
    for (Eigen::Index i = 0; i < series.rows(); ++i) csv.cell(series(i, k));
    csv.end_row();
  }
  csv.save(path);
}

// Inverse of write_series: channels x samples, sample_index dropped.
Eigen::MatrixXd read_series(const fs::path& path) {
  const Eigen::MatrixXd m = io::read_csv(path).numeric();
  return m.rightCols(m.cols() - 1).transpose();
}

std::vector<std::string> input_names() { return {"F_L", "Q_reb", "F_G"}; }

class Summary {
 public:
  void add(const std::string& metric, double value) { rows_.emplace_back(metric, value); }
  void save(const fs::path& path) const {
    io::CsvWriter csv({"metric", "value"});
    for (const auto& [k, v] : rows_) {
      csv.cell(k).cell(v);
      csv.end_row();
    }
    csv.save(path);
  }

 private:
  std::vector<std::pair<std::string, double>> rows_;
};

PodModel load_pod(const ExperimentConfig& c) {
  const fs::path path = artifact(c, "basis.bin");
  require_artifact(path, "reduce");
  return deserialize_pod(io::read_file(path));
}

mlp::MlpParams load_model(const ExperimentConfig& c) {
  const fs::path path = artifact(c, "model.bin");
  require_artifact(path, "train");
  return mlp::load(path);
}

PodModel truncated(const PodModel& full, int order) {
  require(order <= full.basis.order(), "basis file holds fewer modes than the configured order");
  return {full.normalization, pod::truncate(full.basis, order)};
}

estimator::NoiseModel noise_model(const ExperimentConfig& c, const plant::StateVector& steady) {
  return estimator::NoiseModel::from_steady_state(steady, c.estimator.selection(), c.estimator.noise_fraction);
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

void write_manifest(const ExperimentConfig& c, const std::string& command, double wall_s) {
  using nlohmann::json;
  const fs::path path = artifact(c, kManifest);
  json manifest = json::object();
  if (fs::exists(path)) {
    try {
      manifest = json::parse(io::read_file(path));
    } catch (const json::exception&) {
      manifest = json::object();
    }
  }
  const std::string canonical = c.canonical();
  manifest["config_sha256"] = io::sha256_hex(canonical);
  manifest["config"] = canonical;
  json seeds = json::object();
  seeds["base"] = c.seeds.base;
  const std::vector<std::pair<const char*, SeedStream>> streams{
      {"snapshots", SeedStream::snapshots},         {"validation", SeedStream::validation},
      {"training_data", SeedStream::training_data}, {"training", SeedStream::training},
      {"rollout", SeedStream::rollout},             {"estimation", SeedStream::estimation},
      {"estimation_noise", SeedStream::estimation_noise}};
  for (const auto& [name, s] : streams) seeds[name] = c.seeds.stream(s);
  manifest["seeds"] = seeds;
  manifest["commands"][command] = {{"finished_utc", utc_now()}, {"wall_s", wall_s}};

  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(c.output_dir))
    if (entry.is_regular_file() && entry.path().filename() != kManifest)
      files.push_back(fs::relative(entry.path(), c.output_dir));
  std::sort(files.begin(), files.end());
  json list = json::array();
  for (const auto& rel : files) {
    const std::string contents = io::read_file(c.output_dir / rel);
    list.push_back({{"path", rel.generic_string()},
                    {"git_blob_sha1", io::git_blob_digest(contents)},
                    {"bytes", contents.size()},
                    {"timing", is_timing_artifact(rel)}});
  }
  manifest["files"] = list;
  io::write_file(path, manifest.dump(2) + "\n");
}

std::vector<Eigen::Index> highlight_rows() {
  std::vector<Eigen::Index> rows;
  for (int one_based : kHighlightStates) rows.push_back(one_based - 1);
  return rows;
}

}  // namespace

std::string serialize_pod(const PodModel& model) {
  const auto n = model.basis.state_dim();
  const int r = model.basis.order();
  require(model.normalization.size() == n, "basis and normalization sizes differ");
  io::BinaryWriter w;
  w.raw(kPodMagic);
  w.u32(static_cast<std::uint32_t>(n));
  w.u32(static_cast<std::uint32_t>(r));
  w.matrix_row_major(model.basis.modes);
  w.vector(model.basis.singular_values);
  w.f64(model.basis.total_energy);
  w.vector(model.normalization.min);
  w.vector(model.normalization.max);
  return w.bytes();
}

PodModel deserialize_pod(const std::string& bytes) {
  io::BinaryReader rd(bytes);
  rd.expect(kPodMagic);
  const auto n = static_cast<Eigen::Index>(rd.u32());
  const auto r = static_cast<Eigen::Index>(rd.u32());
  if (n < 1 || r < 1 || r > n) fail(ErrorCategory::io, "basis file has invalid dimensions");
  PodModel m;
  m.basis.modes = rd.matrix_row_major(n, r);
  m.basis.singular_values = rd.vector(r);
  m.basis.total_energy = rd.f64();
  m.normalization.min = rd.vector(n);
  m.normalization.max = rd.vector(n);
  if (!rd.at_end()) fail(ErrorCategory::io, "basis file has trailing bytes");
  return m;
}

Eigen::MatrixXd simulate(const plant::PlantConfig& plant, const plant::StateVector& x0,
                         const excitation::InputSequence& inputs) {
  Eigen::MatrixXd states(x0.size(), inputs.rows() + 1);
  states.col(0) = x0;
  for (Eigen::Index k = 0; k < inputs.rows(); ++k)
    states.col(k + 1) = plant::step(plant, states.col(k), inputs.row(k).transpose());
  return states;
}

NoisyRun noisy_run(const ExperimentConfig& c, const plant::StateVector& steady,
                   const estimator::NoiseModel& noise) {
  const auto selection = c.estimator.selection();
  NoisyRun run;
  run.inputs = excitation::generate_prms(c.prms_for(c.estimator.horizon, c.seeds.stream(SeedStream::estimation)));
  const Eigen::Index steps = run.inputs.rows();
  run.states.resize(steady.size(), steps + 1);
  run.measurements.resize(static_cast<Eigen::Index>(selection.size()), steps);
  run.states.col(0) = steady;
  Rng rng(c.seeds.stream(SeedStream::estimation_noise));
  const Eigen::VectorXd w_std = noise.process_std();
  const Eigen::VectorXd v_std = noise.measurement_std();
  Eigen::VectorXd w(w_std.size());
  Eigen::VectorXd v(v_std.size());
  for (Eigen::Index k = 0; k < steps; ++k) {
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = w_std(i) * rng.normal();
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = v_std(i) * rng.normal();
    run.states.col(k + 1) = plant::step(c.plant, run.states.col(k), run.inputs.row(k).transpose(), &w);
    run.measurements.col(k) = plant::measure(selection, run.states.col(k + 1), &v);
  }
  return run;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> training_pairs(const ExperimentConfig& c,
                                                           const Eigen::MatrixXd& snapshots,
                                                           const PodModel& model) {
  require(snapshots.rows() == model.basis.state_dim() && snapshots.cols() > 0,
          "training_pairs: snapshot matrix does not match the basis");
  const Eigen::Index pairs = c.surrogate.training_pairs;
  const Eigen::Index r = model.basis.order();
  const bool increment = c.surrogate.output_mode == mlp::OutputMode::increment;
  Eigen::MatrixXd inputs(plant::kInputDim + r, pairs);
  Eigen::MatrixXd targets(r, pairs);
  Eigen::Index filled = 0;
  for (std::uint64_t run = 0; filled < pairs; ++run) {
    const auto length = std::min<Eigen::Index>(c.surrogate.trajectory_length, pairs - filled);
    const std::uint64_t run_seed = Rng::derive(c.seeds.stream(SeedStream::training_data), run);
    Rng rng(Rng::derive(run_seed, 0));
    const auto column = rng.uniform_int(0, snapshots.cols() - 1);
    Eigen::VectorXd offset(r);
    for (Eigen::Index i = 0; i < r; ++i) offset(i) = c.surrogate.initial_perturbation * rng.normal();
    const Eigen::VectorXd start_norm =
        pod::normalize(Eigen::VectorXd(snapshots.col(column)), model.normalization) + model.basis.modes * offset;
    const plant::StateVector x0 = pod::denormalize(start_norm, model.normalization);
    const auto u = excitation::generate_prms(c.prms_for(length, Rng::derive(run_seed, 1)));
    const Eigen::MatrixXd xi = pod::reduce(simulate(c.plant, x0, u), model.basis, model.normalization);
    inputs.block(0, filled, plant::kInputDim, length) = u.transpose();
    inputs.block(plant::kInputDim, filled, r, length) = xi.leftCols(length);
    targets.middleCols(filled, length) = xi.rightCols(length);
    if (increment) targets.middleCols(filled, length) -= xi.leftCols(length);
    filled += length;
  }
  return {inputs, targets};
}

double normalized_rmse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate,
                       const pod::NormalizationParams& normalization, Eigen::Index first) {
  require(truth.rows() == estimate.rows() && truth.cols() == estimate.cols(),
          "normalized_rmse: trajectories differ in shape");
  require(first >= 0 && truth.cols() - first >= 2, "normalized_rmse: window needs at least two samples");
  const Eigen::Index cols = truth.cols() - first;
  return pod::rmse(pod::normalize(Eigen::MatrixXd(truth.rightCols(cols)), normalization),
                   pod::normalize(Eigen::MatrixXd(estimate.rightCols(cols)), normalization));
}

plant::StateVector nominal_steady_state(const ExperimentConfig& c) {
  return plant::steady_state(c.plant, c.plant.nominal_input());
}

bool is_timing_artifact(const fs::path& relative) {
  static const std::vector<std::string> names{"timing.csv", "speedup.csv", "report.md", "timing_table.csv"};
  return std::find(names.begin(), names.end(), relative.filename().string()) != names.end();
}

std::vector<std::pair<std::string, double>> read_summary(const fs::path& path) {
  const auto table = io::read_csv(path);
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) out.emplace_back(table.rows[i].at(0), table.number(i, 1));
  return out;
}

double summary_value(const fs::path& path, const std::string& metric) {
  for (const auto& [k, v] : read_summary(path))
    if (k == metric) return v;
  fail(ErrorCategory::missing_artifact, "metric " + metric + " not found in " + path.string());
}

void cmd_simulate(const ExperimentConfig& c) {
  const plant::StateVector steady = nominal_steady_state(c);
  const auto u = excitation::generate_prms(c.prms_for(c.pod.snapshot_horizon, c.seeds.stream(SeedStream::snapshots)));
  const Eigen::MatrixXd states = simulate(c.plant, steady, u);
  if (!plant::is_physical(states.col(states.cols() - 1)))
    fail(ErrorCategory::numerical_domain, "snapshot trajectory left the physical region");
  write_state_columns(artifact(c, "snapshots.csv"), states);
  write_series(artifact(c, "inputs.csv"), u.transpose(), input_names(), 0);
  write_series(artifact(c, "steady_state.csv"), Eigen::MatrixXd(steady), numbered("x", steady.size()), 0);
}

void cmd_reduce(const ExperimentConfig& c) {
  const fs::path snap = artifact(c, "snapshots.csv");
  require_artifact(snap, "simulate");
  const Eigen::MatrixXd states = read_state_columns(snap);
  require(states.rows() == plant::kStateDim, "snapshot file must have 103 rows");
  (void)pod::check_snapshot_shape(states.rows(), states.cols());

  const plant::StateVector steady = nominal_steady_state(c);
  const auto u_val =
      excitation::generate_prms(c.prms_for(c.pod.validation_horizon, c.seeds.stream(SeedStream::validation)));
  const Eigen::MatrixXd validation = simulate(c.plant, steady, u_val);

  PodModel model;
  model.normalization = pod::fit_normalization(states);
  const int max_order = std::max(c.pod.order, *std::max_element(c.pod.sweep_orders.begin(), c.pod.sweep_orders.end()));
  model.basis = pod::compute_basis(pod::normalize(states, model.normalization), max_order);
  const pod::ReducedBasis raw_basis = pod::compute_basis(states, max_order);
  pod::NormalizationParams identity;
  identity.min = Eigen::VectorXd::Zero(states.rows());
  identity.max = Eigen::VectorXd::Ones(states.rows());

  io::CsvWriter sweep({"r", "log_rmse_norm", "log_rmse_raw"});
  for (int r : c.pod.sweep_orders) {
    const pod::ReducedBasis b_norm = pod::truncate(model.basis, r);
    const pod::ReducedBasis b_raw = pod::truncate(raw_basis, r);
    const Eigen::MatrixXd rec_norm = pod::reconstruct(pod::reduce(validation, b_norm, model.normalization),
                                                      b_norm, model.normalization);
    const Eigen::MatrixXd rec_raw = pod::reconstruct(pod::reduce(validation, b_raw, identity), b_raw, identity);
    sweep.cell(r)
        .cell(std::log10(normalized_rmse(validation, rec_norm, model.normalization)))
        .cell(std::log10(normalized_rmse(validation, rec_raw, model.normalization)));
    sweep.end_row();
  }
  sweep.save(artifact(c, "rmse_vs_order.csv"));

  io::CsvWriter sv({"mode", "singular_value", "energy_fraction"});
  for (int i = 0; i < model.basis.order(); ++i) {
    sv.cell(i + 1).cell(model.basis.singular_values(i)).cell(pod::energy_fraction(model.basis, i + 1));
    sv.end_row();
  }
  sv.save(artifact(c, "singular_values.csv"));

  io::CsvWriter norm({"state_index", "x_min", "x_max", "degenerate"});
  for (Eigen::Index i = 0; i < model.normalization.size(); ++i) {
    norm.cell(static_cast<std::int64_t>(i + 1))
        .cell(model.normalization.min(i))
        .cell(model.normalization.max(i))
        .cell(model.normalization.is_degenerate(i) ? 1 : 0);
    norm.end_row();
  }
  norm.save(artifact(c, "normalization.csv"));
  io::write_file(artifact(c, "basis.bin"), serialize_pod(model));
}

void cmd_train(const ExperimentConfig& c) {
  const PodModel model = truncated(load_pod(c), c.pod.order);
  const fs::path snap = artifact(c, "snapshots.csv");
  require_artifact(snap, "simulate");
  const plant::StateVector steady = nominal_steady_state(c);
  const auto [raw_in, raw_tgt] = training_pairs(c, read_state_columns(snap), model);
  const mlp::Dataset data = mlp::make_dataset(raw_in, raw_tgt, c.seeds.stream(SeedStream::training));

  std::vector<int> dims{plant::kInputDim + c.pod.order};
  dims.insert(dims.end(), c.surrogate.hidden.begin(), c.surrogate.hidden.end());
  dims.push_back(c.pod.order);
  mlp::MlpParams init = mlp::initialize(dims, c.seeds.stream(SeedStream::training));
  init.output = c.surrogate.output_mode;
  mlp::attach_scaling(init, data);
  mlp::TrainConfig tc = c.surrogate.train;
  tc.seed = c.seeds.stream(SeedStream::training);
  mlp::TrainResult result = mlp::train(init, data, tc);
  mlp::attach_scaling(result.params, data);
  mlp::save(result.params, artifact(c, "model.bin"));

  io::CsvWriter hist({"epoch", "train_mse", "validation_mse"});
  for (const auto& e : result.history) {
    hist.cell(e.epoch).cell(e.train_mse).cell(e.validation_mse);
    hist.end_row();
  }
  hist.save(artifact(c, "loss_history.csv"));

  // Open-loop prediction on a held-out PRMS run.
  const auto u = excitation::generate_prms(c.prms_for(c.surrogate.rollout_horizon, c.seeds.stream(SeedStream::rollout)));
  const Eigen::MatrixXd truth = simulate(c.plant, steady, u);
  const Eigen::MatrixXd xi = mlp::rollout(result.params, pod::reduce(Eigen::VectorXd(truth.col(0)), model.basis,
                                                                     model.normalization),
                                          Eigen::MatrixXd(u));
  const Eigen::MatrixXd predicted = pod::reconstruct(xi, model.basis, model.normalization);
  const Eigen::MatrixXd projected =
      pod::reconstruct(pod::reduce(truth, model.basis, model.normalization), model.basis, model.normalization);
  write_series(artifact(c, "rollout_truth.csv"), truth, numbered("x", truth.rows()), 0);
  write_series(artifact(c, "rollout_prediction.csv"), predicted, numbered("x", predicted.rows()), 0);

  Summary s;
  s.add("order", c.pod.order);
  s.add("train_pairs", static_cast<double>(data.train.size()));
  s.add("validation_pairs", static_cast<double>(data.validation.size()));
  s.add("test_pairs", static_cast<double>(data.test.size()));
  s.add("best_epoch", result.best_epoch);
  s.add("epochs_run", static_cast<double>(result.history.size() - 1));
  s.add("initial_validation_mse", result.history.front().validation_mse);
  s.add("best_validation_mse", result.history[static_cast<std::size_t>(result.best_epoch)].validation_mse);
  s.add("test_mse", result.test_mse);
  s.add("rollout_rmse_normalized", normalized_rmse(truth, predicted, model.normalization));
  s.add("rollout_projection_rmse_normalized", normalized_rmse(truth, projected, model.normalization));
  s.save(artifact(c, "train_summary.csv"));
}

namespace {

estimator::Trajectory read_trajectory(const ExperimentConfig& c) {
  const fs::path u_path = artifact(c, "estimate_inputs.csv");
  const fs::path y_path = artifact(c, "measurements.csv");
  require_artifact(u_path, "estimate");
  require_artifact(y_path, "estimate");
  estimator::Trajectory traj;
  traj.inputs = read_series(u_path).transpose();
  traj.measurements = read_series(y_path);
  return traj;
}

struct FilterOutcome {
  std::string name;
  estimator::FilterRun run;
};

FilterOutcome run_filter(const std::string& name, const ExperimentConfig& c, const estimator::Trajectory& traj,
                         const plant::StateVector& steady, const PodModel& full_pod, bool diagnostics) {
  const auto selection = c.estimator.selection();
  const auto noise = noise_model(c, steady);
  const estimator::RunOptions opts{diagnostics};
  if (name == "ekf")
    return {name, estimator::run_full_ekf(traj, c.plant, noise, full_pod.normalization, selection,
                                          c.estimator.initial_variance, c.estimator.initial_guess, opts)};
  const PodModel pm = truncated(full_pod, c.pod.order);
  auto cfg = estimator::EkfConfig::standard(noise, pm.basis, pm.normalization, selection, c.estimator.initial_variance);
  cfg.initial_normalized_state = c.estimator.initial_guess;
  if (name == "pod-ekf") return {name, estimator::run_pod_ekf(traj, c.plant, pm.basis, pm.normalization, cfg, opts)};
  return {name, estimator::run_pod_mlp_ekf(traj, load_model(c), pm.basis, pm.normalization, cfg, opts)};
}

std::vector<std::string> requested_filters(const ExperimentConfig& c) {
  if (c.estimator.filter == "all") return {"pod-mlp-ekf", "ekf", "pod-ekf"};
  return {c.estimator.filter};
}

}  // namespace

void cmd_estimate(const ExperimentConfig& c) {
  const PodModel full_pod = load_pod(c);
  const PodModel pm = truncated(full_pod, c.pod.order);
  const plant::StateVector steady = nominal_steady_state(c);
  const auto noise = noise_model(c, steady);
  const NoisyRun truth = noisy_run(c, steady, noise);
  write_series(artifact(c, "estimate_inputs.csv"), truth.inputs.transpose(), input_names(), 0);
  write_series(artifact(c, "measurements.csv"), truth.measurements,
               numbered("y", truth.measurements.rows()), 1);
  write_series(artifact(c, "truth.csv"), truth.states, numbered("x", truth.states.rows()), 0);
  const estimator::Trajectory traj = read_trajectory(c);
  const Eigen::Index burn = c.estimator.burn_in;

  Summary s;
  s.add("horizon", static_cast<double>(traj.steps()));
  s.add("burn_in", static_cast<double>(burn));

  // One-step prediction of the noise-free plant from the true previous state;
  // no filter can beat the process noise it leaves unexplained.
  Eigen::MatrixXd one_step = truth.states;
  for (Eigen::Index k = 0; k < traj.steps(); ++k)
    one_step.col(k + 1) = plant::step(c.plant, truth.states.col(k), truth.inputs.row(k).transpose());
  s.add("noise_floor_rmse_normalized", normalized_rmse(truth.states, one_step, pm.normalization, burn));

  for (const auto& name : requested_filters(c)) {
    const bool is_surrogate = name == "pod-mlp-ekf";
    const FilterOutcome out = run_filter(name, c, traj, steady, full_pod, is_surrogate);
    write_series(artifact(c, "estimates_" + name + ".csv"), out.run.estimates,
                 numbered("x", out.run.estimates.rows()), 0);
    s.add(name + ".rmse_normalized", normalized_rmse(truth.states, out.run.estimates, pm.normalization, burn));
    s.add(name + ".rmse_normalized_all", normalized_rmse(truth.states, out.run.estimates, pm.normalization));

    io::CsvWriter per_state({"state_index", "rmse_normalized", "rmse"});
    const Eigen::Index cols = truth.states.cols() - burn;
    const Eigen::MatrixXd diff_raw = truth.states.rightCols(cols) - out.run.estimates.rightCols(cols);
    const Eigen::MatrixXd diff_norm =
        pod::normalize(Eigen::MatrixXd(truth.states.rightCols(cols)), pm.normalization) -
        pod::normalize(Eigen::MatrixXd(out.run.estimates.rightCols(cols)), pm.normalization);
    for (Eigen::Index i = 0; i < diff_raw.rows(); ++i) {
      per_state.cell(static_cast<std::int64_t>(i + 1))
          .cell(std::sqrt(diff_norm.row(i).squaredNorm() / static_cast<double>(cols)))
          .cell(std::sqrt(diff_raw.row(i).squaredNorm() / static_cast<double>(cols)));
      per_state.end_row();
    }
    per_state.save(artifact(c, "state_rmse_" + name + ".csv"));

    if (is_surrogate) {
      const mlp::MlpParams model = load_model(c);
      const Eigen::MatrixXd open_loop = pod::reconstruct(
          mlp::rollout(model, estimator::initial_reduced_state(pm.basis, c.estimator.initial_guess),
                       traj.inputs),
          pm.basis, pm.normalization);
      s.add("open_loop.rmse_normalized", normalized_rmse(truth.states, open_loop, pm.normalization, burn));
      double sym = 0.0, min_eig = std::numeric_limits<double>::infinity(), gain = 0.0, gain_rel = 0.0;
      for (const auto& d : out.run.diagnostics) {
        sym = std::max(sym, d.symmetry_error);
        min_eig = std::min(min_eig, d.min_eigenvalue);
        gain = std::max(gain, d.gain_residual);
        gain_rel = std::max(gain_rel, d.gain_residual_relative);
      }
      s.add(name + ".max_symmetry_error", sym);
      s.add(name + ".min_covariance_eigenvalue", min_eig);
      s.add(name + ".max_gain_residual", gain);
      s.add(name + ".max_gain_residual_relative", gain_rel);
      s.add(name + ".predictions", out.run.predictions);
      s.add(name + ".updates", out.run.updates);
    }
  }
  s.save(artifact(c, "estimate_summary.csv"));
}

void cmd_benchmark(const ExperimentConfig& c) {
  const PodModel full_pod = load_pod(c);
  (void)load_model(c);
  const plant::StateVector steady = nominal_steady_state(c);
  const estimator::Trajectory traj = read_trajectory(c);
  const std::string digest = io::git_blob_digest(io::read_file(artifact(c, "measurements.csv")));

  io::CsvWriter timing({"filter_name", "phase", "mean_ms", "total_s"});
  std::map<std::string, double> totals;
  const std::vector<std::pair<std::string, std::string>> rows{
      {"ekf", "EKF"}, {"pod-ekf", "POD-EKF"}, {"pod-mlp-ekf", "POD-MLP-EKF"}};
  for (const auto& [name, label] : rows) {
    const FilterOutcome out = run_filter(name, c, traj, steady, full_pod, false);
    const auto& t = out.run.timing;
    const double steps = static_cast<double>(t.steps);
    const std::vector<std::pair<std::string, double>> phases{{"model_prediction", t.model_prediction_s},
                                                             {"discretization", t.discretization_s},
                                                             {"other", t.other_s},
                                                             {"total", t.total_s()}};
    for (const auto& [phase, secs] : phases) {
      timing.cell(label).cell(phase).cell(1e3 * secs / steps).cell(secs);
      timing.end_row();
    }
    totals[name] = t.total_s();
  }
  timing.save(artifact(c, "timing.csv"));

  io::CsvWriter speed({"filter_name", "total_s", "speedup_vs_ekf"});
  for (const auto& [name, label] : rows) {
    speed.cell(label).cell(totals[name]).cell(totals["ekf"] / totals[name]);
    speed.end_row();
  }
  speed.save(artifact(c, "speedup.csv"));

  io::CsvWriter fair({"filter_name", "measurement_file", "git_blob_sha1"});
  for (const auto& [name, label] : rows) {
    fair.cell(label).cell("measurements.csv").cell(digest);
    fair.end_row();
  }
  fair.save(artifact(c, "benchmark_inputs.csv"));
}

void cmd_report(const ExperimentConfig& c) {
  const std::vector<std::pair<std::string, std::string>> needed{
      {"rmse_vs_order.csv", "reduce"},     {"train_summary.csv", "train"},
      {"loss_history.csv", "train"},       {"rollout_truth.csv", "train"},
      {"rollout_prediction.csv", "train"}, {"estimate_summary.csv", "estimate"},
      {"truth.csv", "estimate"},           {"estimates_pod-mlp-ekf.csv", "estimate"},
      {"timing.csv", "benchmark"},         {"speedup.csv", "benchmark"},
      {kManifest, "simulate"}};
  for (const auto& [file, command] : needed) require_artifact(artifact(c, file), command);

  const fs::path bundle = artifact(c, "report");
  fs::create_directories(bundle);
  fs::copy_file(artifact(c, "rmse_vs_order.csv"), bundle / "order_sweep.csv",
                fs::copy_options::overwrite_existing);
  fs::copy_file(artifact(c, "timing.csv"), bundle / "timing_table.csv", fs::copy_options::overwrite_existing);
  fs::copy_file(artifact(c, "loss_history.csv"), bundle / "loss_history.csv", fs::copy_options::overwrite_existing);

  const auto pick = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const std::string& a_name,
                        const std::string& b_name, const fs::path& path) {
    std::vector<std::string> header{"sample_index"};
    for (int s : kHighlightStates) {
      header.push_back("x" + std::to_string(s) + "_" + a_name);
      header.push_back("x" + std::to_string(s) + "_" + b_name);
    }
    io::CsvWriter csv(header);
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      csv.cell(static_cast<std::int64_t>(k));
      for (auto row : highlight_rows()) csv.cell(a(row, k)).cell(b(row, k));
      csv.end_row();
    }
    csv.save(path);
  };
  pick(read_series(artifact(c, "rollout_truth.csv")), read_series(artifact(c, "rollout_prediction.csv")), "true",
       "predicted", bundle / "rollout_comparison.csv");
  pick(read_series(artifact(c, "truth.csv")), read_series(artifact(c, "estimates_pod-mlp-ekf.csv")), "true",
       "estimated", bundle / "estimate_comparison.csv");

  const auto manifest = nlohmann::json::parse(io::read_file(artifact(c, kManifest)));
  std::ostringstream md;
  md << "# romkit report\n\n";
  md << "Config sha256: `" << manifest.value("config_sha256", std::string("?")) << "`\n\n";
  md << "## Reconstruction error versus order\n\n| r | log10 RMSE (normalized POD) | log10 RMSE (raw POD) |\n|---|---|---|\n";
  const auto sweep = io::read_csv(artifact(c, "rmse_vs_order.csv"));
  for (const auto& row : sweep.rows) md << "| " << row[0] << " | " << row[1] << " | " << row[2] << " |\n";
  const auto section = [&](const std::string& title, const fs::path& path) {
    md << "\n## " << title << "\n\n| metric | value |\n|---|---|\n";
    for (const auto& [k, v] : read_summary(path)) md << "| " << k << " | " << io::format_double(v) << " |\n";
  };
  section("Surrogate training and open-loop prediction", artifact(c, "train_summary.csv"));
  section("State estimation", artifact(c, "estimate_summary.csv"));
  md << "\n## Computation time\n\n| filter | phase | mean ms/step | total s |\n|---|---|---|---|\n";
  for (const auto& row : io::read_csv(artifact(c, "timing.csv")).rows)
    md << "| " << row[0] << " | " << row[1] << " | " << row[2] << " | " << row[3] << " |\n";
  md << "\n| filter | total s | speedup vs EKF |\n|---|---|---|\n";
  for (const auto& row : io::read_csv(artifact(c, "speedup.csv")).rows)
    md << "| " << row[0] << " | " << row[1] << " | " << row[2] << " |\n";
  md << "\n## Source artifacts\n\n| file | git blob sha1 |\n|---|---|\n";
  for (const auto& f : manifest.at("files")) {
    const std::string path = f.at("path");
    if (path.rfind("report", 0) == 0) continue;
    md << "| " << path << " | `" << f.at("git_blob_sha1").get<std::string>() << "` |\n";
  }
  io::write_file(bundle / "report.md", md.str());
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"simulate", "reduce", "train", "estimate", "benchmark", "report"};
  return names;
}

void run_command(const std::string& name, const ExperimentConfig& config) {
  config.validate();
  fs::create_directories(config.output_dir);
  const auto start = Clock::now();
  if (name == "simulate") cmd_simulate(config);
  else if (name == "reduce") cmd_reduce(config);
  else if (name == "train") cmd_train(config);
  else if (name == "estimate") cmd_estimate(config);
  else if (name == "benchmark") cmd_benchmark(config);
  else if (name == "report") cmd_report(config);
  else fail(ErrorCategory::configuration, "unknown command '" + name + "'");
  write_manifest(config, name, std::chrono::duration<double>(Clock::now() - start).count());
}

}  // namespace romkit::harness
