#pragma once

// Reference plant: two 5-stage packed columns (absorber, desorber), a
// lean/rich heat exchanger and a reboiler, 103 states in total.
//
// The column model is a structurally faithful simplification of a solvent
// capture process. Each stage is well mixed; transport is first-order upwind
// (liquid enters at stage 1 and flows down, gas enters at stage 5 and flows
// up); interphase terms are bilinear mass-transfer/reaction rates with
// Arrhenius temperature factors. Algebraic property relations are folded into
// closed-form expressions, so the model is a plain ODE with no DAE solve.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace romkit::plant {

inline constexpr int kStages = 5;
inline constexpr int kSpecies = 4;
inline constexpr int kBlocksPerColumn = 2 * (kSpecies + 1);
inline constexpr int kColumnStates = kStages * kBlocksPerColumn;
inline constexpr int kStateDim = 2 * kColumnStates + 3;
inline constexpr int kInputDim = 3;

enum Species : int { kN2 = 0, kCO2 = 1, kMEA = 2, kH2O = 3 };
enum class Column : int { absorber = 0, desorber = 1 };

/// Column blocks in state order. Liquid species, liquid temperature, gas
/// species, gas temperature.
inline constexpr int kLiquidTemperatureBlock = kSpecies;
inline constexpr int kGasSpeciesBlock = kSpecies + 1;
inline constexpr int kGasTemperatureBlock = 2 * kSpecies + 1;

inline constexpr int kExchangerTube = 2 * kColumnStates;       // T_h1
inline constexpr int kExchangerShell = 2 * kColumnStates + 1;  // T_h2
inline constexpr int kReboiler = 2 * kColumnStates + 2;        // T_reb

/// Zero-based state index for (column, block, stage); stage 0 is the top.
constexpr int state_index(Column column, int block, int stage) {
  return static_cast<int>(column) * kColumnStates + block * kStages + stage;
}

bool is_temperature_index(int zero_based_index);

using StateVector = Eigen::VectorXd;
/// [F_L (L/s), Q_reb (kJ/s), F_G (m^3/s)]
using Input = Eigen::Vector3d;

struct Bounds {
  double lo = 0.0;
  double hi = 0.0;
};

struct ColumnParams {
  double liquid_flow_gain = 0.0;  // 1/s per L/s of F_L
  double gas_flow_gain = 0.0;     // 1/s per unit of gas driver (F_G or Q_reb)
  double holdup_ratio = 0.0;      // liquid / gas volume of one stage
  // Interphase rate gains per species (N2, CO2, MEA, H2O), 1/s.
  std::array<double, kSpecies> transfer_gains{};
  double reverse_rate = 0.0;        // CO2 release constant at reference T
  double reverse_activation = 0.0;  // K
  double n2_partition = 0.0;        // liquid/gas N2 equilibrium ratio
  double mea_volatility = 0.0;      // gas/liquid MEA equilibrium ratio
  double vapor_ratio = 0.0;         // gas/liquid H2O ratio at reference T
  double vapor_activation = 0.0;    // K
  double interphase_heat = 0.0;     // kJ/(m^3 s K)
  double reaction_heat = 0.0;       // kJ/mol CO2 absorbed
  double vaporization_heat = 0.0;   // kJ/mol H2O evaporated
};

struct UnitParams {
  double exchanger_flow_gain = 0.0;  // 1/s per L/s
  double exchanger_transfer = 0.0;   // 1/s
  double reboiler_flow_gain = 0.0;   // 1/s per L/s
  double reboiler_duty_gain = 0.0;   // K/s per kJ/s
  double reboiler_loss = 0.0;        // 1/s
  double ambient_temperature = 0.0;  // K
  double cooler_fraction = 0.0;      // fraction of lean-solvent excess heat removed
  double coolant_temperature = 0.0;  // K
};

struct PlantConfig {
  int stages_per_column = kStages;
  std::array<ColumnParams, 2> columns{};
  UnitParams units{};
  std::array<double, kSpecies> liquid_heat_capacity{};  // kJ/(mol K)
  std::array<double, kSpecies> gas_heat_capacity{};
  double reference_temperature = 350.0;
  double mea_reference = 5000.0;  // mol/m^3
  std::array<double, kSpecies> flue_gas{};       // absorber gas inlet, mol/m^3
  double flue_gas_temperature = 320.0;
  std::array<double, kSpecies> stripping_gas{};  // desorber gas inlet (at T_reb)
  std::array<double, kSpecies> makeup_solvent{};
  double makeup_fraction = 0.0;  // share of lean feed replaced by makeup
  std::array<Bounds, kInputDim> input_bounds{};
  double sample_interval_s = 30.0;
  int integrator_substeps = 10;

  static PlantConfig defaults();

  /// Throws configuration error on violated invariants.
  void validate() const;

  Input nominal_input() const;
  bool input_in_bounds(const Input& u) const;
};

/// Time derivative dx/dt.
StateVector derivative(const PlantConfig& config, const StateVector& x, const Input& u);

/// One sample interval by fixed-step RK4, then optional additive noise.
StateVector step(const PlantConfig& config, const StateVector& x, const Input& u,
                 const StateVector* process_noise = nullptr);

/// Concentrations nonnegative and temperatures positive.
bool is_physical(const StateVector& x);

/// Linear state selection, indices given one-based as in the state table.
class MeasurementSelection {
 public:
  MeasurementSelection() = default;
  static MeasurementSelection from_one_based(std::span<const int> indices);
  /// All 23 temperature states in index order.
  static MeasurementSelection temperatures();

  std::size_t size() const { return indices_.size(); }
  std::span<const int> zero_based() const { return indices_; }
  std::vector<int> one_based() const;

 private:
  std::vector<int> indices_;
};

Eigen::VectorXd measure(const MeasurementSelection& selection, const StateVector& x,
                        const Eigen::VectorXd* noise = nullptr);

struct SteadyStateOptions {
  int settle_samples = 400;
  int newton_iterations = 50;
  double tolerance = 1e-10;         // target max-abs derivative
  double accept_tolerance = 1e-8;   // failure threshold after the iteration cap
};

/// Typical operating profile used as the default steady-state guess.
StateVector initial_guess(const PlantConfig& config);

StateVector steady_state(const PlantConfig& config, const Input& u_nominal,
                         const StateVector* guess = nullptr,
                         const SteadyStateOptions& options = {});

}  // namespace romkit::plant
