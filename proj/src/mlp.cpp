#include "romkit/mlp.hpp"

#include <cmath>
#include <numeric>
#include <span>
#include <sstream>

#include "romkit/error.hpp"
#include "romkit/io.hpp"
#include "romkit/rng.hpp"

namespace romkit::mlp {

namespace {

constexpr std::string_view kMagic = "ROMMLP1";

Eigen::VectorXd inverse_span(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  Eigen::VectorXd inv(lo.size());
  for (Eigen::Index i = 0; i < lo.size(); ++i) inv(i) = hi(i) > lo(i) ? 1.0 / (hi(i) - lo(i)) : 0.0;
  return inv;
}

Eigen::VectorXd span(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  Eigen::VectorXd s(lo.size());
  for (Eigen::Index i = 0; i < lo.size(); ++i) s(i) = hi(i) > lo(i) ? hi(i) - lo(i) : 0.0;
  return s;
}

// Degenerate features map to 0.5, matching the snapshot normalization.
Eigen::VectorXd scale_input(const MlpParams& p, const Eigen::VectorXd& raw) {
  Eigen::VectorXd z(raw.size());
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    const double s = p.input_max(i) - p.input_min(i);
    z(i) = s > 0.0 ? (raw(i) - p.input_min(i)) / s : 0.5;
  }
  return z;
}

void apply_hidden(Activation act, Eigen::MatrixXd& z) {
  if (act == Activation::tanh) z = z.array().tanh().matrix();
}

// Derivative of the hidden activation expressed through its output.
Eigen::ArrayXXd hidden_slope(Activation act, const Eigen::MatrixXd& activated) {
  if (act == Activation::identity) return Eigen::ArrayXXd::Ones(activated.rows(), activated.cols());
  return 1.0 - activated.array().square();
}

// Layer outputs z[0] = input, z[L] = network output.
std::vector<Eigen::MatrixXd> forward_trace(const MlpParams& p, const Eigen::MatrixXd& inputs) {
  std::vector<Eigen::MatrixXd> z;
  z.reserve(p.weights.size() + 1);
  z.push_back(inputs);
  for (int l = 0; l < p.layer_count(); ++l) {
    Eigen::MatrixXd next = p.weights[l] * z.back();
    next.colwise() += p.biases[l];
    if (l + 1 < p.layer_count()) apply_hidden(p.hidden, next);
    z.push_back(std::move(next));
  }
  return z;
}

void check_batch(const MlpParams& p, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
  require(inputs.rows() == p.input_dim(), "batch input rows must equal network input size");
  require(targets.rows() == p.output_dim(), "batch target rows must equal network output size");
  require(inputs.cols() == targets.cols() && inputs.cols() > 0,
          "batch inputs and targets must have the same positive sample count");
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& m, std::span<const Eigen::Index> cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(cols[j]);
  return out;
}

}  // namespace

MlpParams MlpParams::zeros(const std::vector<int>& dims) {
  require(dims.size() >= 2, "MLP needs at least input and output sizes");
  MlpParams p;
  p.dims = dims;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    require(dims[l] > 0 && dims[l + 1] > 0, "MLP layer sizes must be positive");
    p.weights.push_back(Eigen::MatrixXd::Zero(dims[l + 1], dims[l]));
    p.biases.push_back(Eigen::VectorXd::Zero(dims[l + 1]));
  }
  p.input_min = Eigen::VectorXd::Zero(dims.front());
  p.input_max = Eigen::VectorXd::Ones(dims.front());
  p.output_min = Eigen::VectorXd::Zero(dims.back());
  p.output_max = Eigen::VectorXd::Ones(dims.back());
  return p;
}

void MlpParams::validate() const {
  require(dims.size() >= 2 && weights.size() + 1 == dims.size() && biases.size() == weights.size(),
          "MLP layer count inconsistent with dims");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    require(weights[l].rows() == dims[l + 1] && weights[l].cols() == dims[l],
            "MLP weight " + std::to_string(l) + " has wrong shape");
    require(biases[l].size() == dims[l + 1], "MLP bias " + std::to_string(l) + " has wrong length");
  }
  require(input_min.size() == input_dim() && input_max.size() == input_dim(),
          "MLP input scaling has wrong length");
  require(output_min.size() == output_dim() && output_max.size() == output_dim(),
          "MLP output scaling has wrong length");
}

std::vector<int> default_dims(int order, int controls) {
  return {controls + order, 128, 128, 128, order};
}

MlpParams initialize(const std::vector<int>& dims, std::uint64_t seed) {
  MlpParams p = MlpParams::zeros(dims);
  Rng rng(seed);
  for (auto& w : p.weights) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    // Column-major fill order is part of the reproducibility contract.
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = limit * (2.0 * rng.uniform() - 1.0);
  }
  return p;
}

Eigen::MatrixXd evaluate(const MlpParams& params, const Eigen::MatrixXd& inputs) {
  require(inputs.rows() == params.input_dim(), "evaluate: input rows must equal network input size");
  return forward_trace(params, inputs).back();
}

Eigen::MatrixXd input_jacobian(const MlpParams& params, const Eigen::VectorXd& input) {
  require(input.size() == params.input_dim(), "input_jacobian: input size mismatch");
  const auto z = forward_trace(params, input);
  Eigen::MatrixXd jac = params.weights[0];
  for (int l = 1; l < params.layer_count(); ++l) {
    jac = hidden_slope(params.hidden, z[l]).matrix().asDiagonal() * jac;
    jac = params.weights[l] * jac;
  }
  return jac;
}

Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& xi, const Eigen::VectorXd& u) {
  require(xi.size() == params.output_dim() && u.size() == params.control_dim(),
          "forward: xi/u sizes do not match layer dims");
  Eigen::VectorXd raw(params.input_dim());
  raw << u, xi;
  const Eigen::MatrixXd y = forward_trace(params, scale_input(params, raw)).back();
  Eigen::VectorXd out =
      params.output_min + span(params.output_min, params.output_max).cwiseProduct(Eigen::VectorXd(y.col(0)));
  if (params.output == OutputMode::increment) out += xi;
  return out;
}

Eigen::MatrixXd jacobian_state(const MlpParams& params, const Eigen::VectorXd& xi,
                               const Eigen::VectorXd& u) {
  require(xi.size() == params.output_dim() && u.size() == params.control_dim(),
          "jacobian_state: xi/u sizes do not match layer dims");
  Eigen::VectorXd raw(params.input_dim());
  raw << u, xi;
  const auto z = forward_trace(params, scale_input(params, raw));
  const Eigen::VectorXd in_scale = inverse_span(params.input_min, params.input_max).tail(xi.size());
  // Right-to-left product restricted to the xi columns of the first layer.
  Eigen::MatrixXd jac = params.weights[0].rightCols(xi.size()) * in_scale.asDiagonal();
  for (int l = 1; l < params.layer_count(); ++l) {
    jac = hidden_slope(params.hidden, z[l]).matrix().asDiagonal() * jac;
    jac = params.weights[l] * jac;
  }
  Eigen::MatrixXd out = span(params.output_min, params.output_max).asDiagonal() * jac;
  if (params.output == OutputMode::increment) out.diagonal().array() += 1.0;
  return out;
}

double loss(const MlpParams& params, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
  check_batch(params, inputs, targets);
  const Eigen::MatrixXd y = forward_trace(params, inputs).back();
  return (y - targets).squaredNorm() / static_cast<double>(targets.size());
}

Gradient gradient(const MlpParams& params, const Eigen::MatrixXd& inputs,
                  const Eigen::MatrixXd& targets) {
  check_batch(params, inputs, targets);
  const auto z = forward_trace(params, inputs);
  const int layers = params.layer_count();
  Gradient g;
  g.weights.resize(layers);
  g.biases.resize(layers);
  const Eigen::MatrixXd err = z.back() - targets;
  g.loss = err.squaredNorm() / static_cast<double>(targets.size());
  Eigen::MatrixXd delta = (2.0 / static_cast<double>(targets.size())) * err;
  for (int l = layers - 1; l >= 0; --l) {
    g.weights[l].noalias() = delta * z[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = params.weights[l].transpose() * delta;
      delta = (back.array() * hidden_slope(params.hidden, z[l])).matrix();
    }
  }
  return g;
}

Dataset make_dataset(const Eigen::MatrixXd& raw_inputs, const Eigen::MatrixXd& raw_targets,
                     std::uint64_t seed, SplitFractions fractions) {
  const Eigen::Index m = raw_inputs.cols();
  require(m > 0 && raw_targets.cols() == m, "make_dataset: need matching, nonempty input/target columns");
  require(raw_inputs.rows() > raw_targets.rows(), "make_dataset: inputs must hold controls ahead of state");
  require(fractions.train_percent > 0 && fractions.validation_percent >= 0 &&
              fractions.train_percent + fractions.validation_percent <= 100,
          "make_dataset: invalid split percentages");
  Dataset d;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(seed);
  for (Eigen::Index i = m - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);
  const Eigen::Index n_train = m * fractions.train_percent / 100;
  const Eigen::Index n_val = m * fractions.validation_percent / 100;
  d.train.assign(order.begin(), order.begin() + n_train);
  d.validation.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  d.test.assign(order.begin() + n_train + n_val, order.end());
  require(!d.train.empty(), "make_dataset: training split is empty");

  const Eigen::MatrixXd train_inputs = gather(raw_inputs, d.train);
  d.input_min = train_inputs.rowwise().minCoeff();
  d.input_max = train_inputs.rowwise().maxCoeff();
  const Eigen::MatrixXd train_targets = gather(raw_targets, d.train);
  d.output_min = train_targets.rowwise().minCoeff();
  d.output_max = train_targets.rowwise().maxCoeff();

  const auto scale = [](const Eigen::MatrixXd& raw, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    Eigen::MatrixXd out(raw.rows(), raw.cols());
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
      const double s = hi(i) - lo(i);
      if (s > 0.0)
        out.row(i) = (raw.row(i).array() - lo(i)) / s;
      else
        out.row(i).setConstant(0.5);
    }
    return out;
  };
  d.inputs = scale(raw_inputs, d.input_min, d.input_max);
  d.targets = scale(raw_targets, d.output_min, d.output_max);
  return d;
}

void attach_scaling(MlpParams& params, const Dataset& data) {
  require(data.input_min.size() == params.input_dim() && data.output_min.size() == params.output_dim(),
          "attach_scaling: dataset dimensions do not match the network");
  params.input_min = data.input_min;
  params.input_max = data.input_max;
  params.output_min = data.output_min;
  params.output_max = data.output_max;
}

void TrainConfig::validate() const {
  if (batch_size < 1 || max_epochs < 0 || early_stop_patience < 1 || learning_rate < 0.0)
    fail(ErrorCategory::configuration, "train config: batch_size, max_epochs, patience must be positive");
  if (!(final_learning_rate_fraction > 0.0 && final_learning_rate_fraction <= 1.0))
    fail(ErrorCategory::configuration, "train config: final_learning_rate_fraction must lie in (0, 1]");
}

TrainResult train(const MlpParams& initial, const Dataset& data, const TrainConfig& config) {
  config.validate();
  initial.validate();
  require(data.size() > 0 && !data.train.empty(), "train: dataset is empty");
  require(data.inputs.rows() == initial.input_dim() && data.targets.rows() == initial.output_dim(),
          "train: dataset dimensions do not match the network (input must be 3 + r)");

  const Eigen::MatrixXd train_x = gather(data.inputs, data.train);
  const Eigen::MatrixXd train_y = gather(data.targets, data.train);
  const bool has_val = !data.validation.empty();
  const Eigen::MatrixXd val_x = has_val ? gather(data.inputs, data.validation) : train_x;
  const Eigen::MatrixXd val_y = has_val ? gather(data.targets, data.validation) : train_y;

  MlpParams params = initial;
  const int layers = params.layer_count();
  std::vector<Eigen::MatrixXd> mw(layers), vw(layers);
  std::vector<Eigen::VectorXd> mb(layers), vb(layers);
  for (int l = 0; l < layers; ++l) {
    mw[l] = Eigen::MatrixXd::Zero(params.weights[l].rows(), params.weights[l].cols());
    vw[l] = mw[l];
    mb[l] = Eigen::VectorXd::Zero(params.biases[l].size());
    vb[l] = mb[l];
  }

  TrainResult result;
  const auto record = [&](int epoch) {
    EpochRecord rec{epoch, loss(params, train_x, train_y), loss(params, val_x, val_y)};
    if (!std::isfinite(rec.train_mse) || !std::isfinite(rec.validation_mse)) {
      std::ostringstream msg;
      msg << "training diverged at epoch " << epoch << " (learning rate " << config.learning_rate << ")";
      fail(ErrorCategory::divergence, msg.str());
    }
    result.history.push_back(rec);
    return rec.validation_mse;
  };

  double best = record(0);
  result.params = params;
  result.best_epoch = 0;
  int since_best = 0;

  Rng rng(config.seed);
  const auto n = train_x.cols();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  long step_count = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const double progress =
        config.max_epochs > 1 ? static_cast<double>(epoch - 1) / (config.max_epochs - 1) : 0.0;
    const double lr = config.learning_rate * std::pow(config.final_learning_rate_fraction, progress);
    for (Eigen::Index i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const auto count = std::min<Eigen::Index>(config.batch_size, n - start);
      const std::span<const Eigen::Index> idx(order.data() + start, static_cast<std::size_t>(count));
      const Gradient g = gradient(params, gather(train_x, idx), gather(train_y, idx));
      ++step_count;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step_count));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step_count));
      for (int l = 0; l < layers; ++l) {
        mw[l] = config.beta1 * mw[l] + (1.0 - config.beta1) * g.weights[l];
        vw[l] = config.beta2 * vw[l] + (1.0 - config.beta2) * g.weights[l].cwiseAbs2();
        mb[l] = config.beta1 * mb[l] + (1.0 - config.beta1) * g.biases[l];
        vb[l] = config.beta2 * vb[l] + (1.0 - config.beta2) * g.biases[l].cwiseAbs2();
        params.weights[l].array() -=
            lr * (mw[l].array() / c1) / ((vw[l].array() / c2).sqrt() + config.epsilon);
        params.biases[l].array() -=
            lr * (mb[l].array() / c1) / ((vb[l].array() / c2).sqrt() + config.epsilon);
      }
    }
    const double val = record(epoch);
    if (val < best) {
      best = val;
      result.params = params;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.early_stop_patience) {
      break;
    }
  }
  result.test_mse = data.test.empty()
                        ? 0.0
                        : loss(result.params, gather(data.inputs, data.test), gather(data.targets, data.test));
  return result;
}

Eigen::MatrixXd rollout(const MlpParams& params, const Eigen::VectorXd& xi0, const Eigen::MatrixXd& inputs) {
  require(xi0.size() == params.output_dim(), "rollout: initial state length != network output size");
  require(inputs.rows() == 0 || inputs.cols() == params.control_dim(),
          "rollout: inputs must have one column per control channel");
  Eigen::MatrixXd traj(xi0.size(), inputs.rows() + 1);
  traj.col(0) = xi0;
  for (Eigen::Index k = 0; k < inputs.rows(); ++k)
    traj.col(k + 1) = forward(params, traj.col(k), inputs.row(k).transpose());
  return traj;
}

std::string serialize(const MlpParams& params) {
  params.validate();
  require(params.hidden == Activation::tanh, "only tanh networks can be serialized");
  io::BinaryWriter w;
  w.raw(kMagic);
  w.u32(static_cast<std::uint32_t>(params.layer_count()));
  for (int d : params.dims) w.u32(static_cast<std::uint32_t>(d));
  for (int l = 0; l < params.layer_count(); ++l) {
    w.matrix_row_major(params.weights[l]);
    w.vector(params.biases[l]);
  }
  w.vector(params.input_min);
  w.vector(params.input_max);
  w.vector(params.output_min);
  w.vector(params.output_max);
  w.u32(static_cast<std::uint32_t>(params.output));
  return w.bytes();
}

MlpParams deserialize(const std::string& bytes) {
  io::BinaryReader r(bytes);
  r.expect(kMagic);
  const auto layers = r.u32();
  if (layers < 1 || layers > 1024) fail(ErrorCategory::io, "model file: implausible layer count");
  std::vector<int> dims;
  for (std::uint32_t i = 0; i <= layers; ++i) {
    const auto d = r.u32();
    if (d < 1 || d > (1u << 20)) fail(ErrorCategory::io, "model file: implausible layer size");
    dims.push_back(static_cast<int>(d));
  }
  MlpParams p = MlpParams::zeros(dims);
  for (std::uint32_t l = 0; l < layers; ++l) {
    p.weights[l] = r.matrix_row_major(dims[l + 1], dims[l]);
    p.biases[l] = r.vector(dims[l + 1]);
  }
  p.input_min = r.vector(dims.front());
  p.input_max = r.vector(dims.front());
  p.output_min = r.vector(dims.back());
  p.output_max = r.vector(dims.back());
  const auto mode = r.u32();
  if (mode > 1) fail(ErrorCategory::io, "model file: unknown output mode");
  p.output = static_cast<OutputMode>(mode);
  if (!r.at_end()) fail(ErrorCategory::io, "model file: trailing bytes");
  return p;
}

void save(const MlpParams& params, const std::filesystem::path& path) {
  io::write_file(path, serialize(params));
}

MlpParams load(const std::filesystem::path& path) { return deserialize(io::read_file(path)); }

}  // namespace romkit::mlp
