#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace romkit::mlp {

enum class Activation { tanh, identity };

/// What the denormalized network output represents.
enum class OutputMode {
  absolute,   // xi(k+1) itself
  increment,  // xi(k+1) - xi(k), added back onto xi(k)
};

/// Feedforward surrogate of the reduced one-step map
///   xi(k+1) = f(xi(k), u(k)).
///
/// The network sees the min-max normalized input [u; xi] and emits a
/// normalized output; the stored scaling converts to and from raw reduced
/// coordinates. Hidden layers apply `hidden`, the output is linear.
struct MlpParams {
  std::vector<int> dims;  // [3 + r, h_1, ..., h_L, r]
  std::vector<Eigen::MatrixXd> weights;  // weights[l]: dims[l+1] x dims[l]
  std::vector<Eigen::VectorXd> biases;   // biases[l]: dims[l+1]
  Activation hidden = Activation::tanh;
  OutputMode output = OutputMode::absolute;
  Eigen::VectorXd input_min;   // length dims.front()
  Eigen::VectorXd input_max;
  Eigen::VectorXd output_min;  // length dims.back()
  Eigen::VectorXd output_max;

  int input_dim() const { return dims.front(); }
  int output_dim() const { return dims.back(); }
  int layer_count() const { return static_cast<int>(weights.size()); }
  /// Exogenous input channels ahead of the state in the network input.
  int control_dim() const { return input_dim() - output_dim(); }

  /// Zero weights and biases, identity scaling ([0, 1] ranges).
  static MlpParams zeros(const std::vector<int>& dims);

  void validate() const;
};

/// Default architecture [3 + r, 128, 128, 128, r].
std::vector<int> default_dims(int order, int controls = 3);

/// Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases.
MlpParams initialize(const std::vector<int>& dims, std::uint64_t seed);

/// Network on normalized inputs; columns are samples.
Eigen::MatrixXd evaluate(const MlpParams& params, const Eigen::MatrixXd& inputs);

/// d(network output)/d(network input) on normalized coordinates.
Eigen::MatrixXd input_jacobian(const MlpParams& params, const Eigen::VectorXd& input);

Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& xi,
                        const Eigen::VectorXd& u);

/// A = df/dxi in raw reduced coordinates.
Eigen::MatrixXd jacobian_state(const MlpParams& params, const Eigen::VectorXd& xi,
                               const Eigen::VectorXd& u);

/// Mean over samples and output coordinates of the squared error.
double loss(const MlpParams& params, const Eigen::MatrixXd& inputs,
            const Eigen::MatrixXd& targets);

struct Gradient {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  double loss = 0.0;
};

Gradient gradient(const MlpParams& params, const Eigen::MatrixXd& inputs,
                  const Eigen::MatrixXd& targets);

/// Normalized transition pairs with a seeded train/validation/test split.
struct Dataset {
  Eigen::MatrixXd inputs;   // (3 + r) x m, normalized [u; xi(k)]
  Eigen::MatrixXd targets;  // r x m, normalized xi(k+1)
  std::vector<Eigen::Index> train, validation, test;
  Eigen::VectorXd input_min, input_max;    // statistics of the training split
  Eigen::VectorXd output_min, output_max;  // statistics of the training targets

  Eigen::Index size() const { return inputs.cols(); }
};

struct SplitFractions {
  int train_percent = 70;
  int validation_percent = 20;
};

/// Splits raw pairs, fits min-max scaling on the training split only and
/// normalizes everything with it. Inputs and targets get separate statistics.
Dataset make_dataset(const Eigen::MatrixXd& raw_inputs, const Eigen::MatrixXd& raw_targets,
                     std::uint64_t seed, SplitFractions fractions = {});

/// Copies the dataset scaling into the model so forward() works on raw values.
void attach_scaling(MlpParams& params, const Dataset& data);

struct TrainConfig {
  int batch_size = 256;
  double learning_rate = 1e-3;
  int max_epochs = 300;
  int early_stop_patience = 20;
  /// The step size decays exponentially to this fraction of learning_rate
  /// over max_epochs; 1 keeps it constant.
  double final_learning_rate_fraction = 1.0;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 0 is the untrained network
  double train_mse = 0.0;
  double validation_mse = 0.0;
};

struct TrainResult {
  MlpParams params;  // best validation loss
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double test_mse = 0.0;
};

TrainResult train(const MlpParams& initial, const Dataset& data, const TrainConfig& config);

/// Open-loop iteration; column k is the state after k inputs (k = 0..K).
Eigen::MatrixXd rollout(const MlpParams& params, const Eigen::VectorXd& xi0,
                        const Eigen::MatrixXd& inputs);

/// "ROMMLP1" binary format; tanh hidden activation is implied. After the
/// input statistics come the output statistics and the output mode (u32).
std::string serialize(const MlpParams& params);
MlpParams deserialize(const std::string& bytes);
void save(const MlpParams& params, const std::filesystem::path& path);
MlpParams load(const std::filesystem::path& path);

}  // namespace romkit::mlp
