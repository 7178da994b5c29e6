#include "romkit/plant.hpp"

#include <cmath>
#include <string>

#include "romkit/error.hpp"

namespace romkit::plant {

namespace {

using Stage = Eigen::Array<double, kStages, 1>;
using ColumnView = Eigen::Map<const Eigen::Matrix<double, kStages, kBlocksPerColumn>>;
using ColumnOut = Eigen::Map<Eigen::Matrix<double, kStages, kBlocksPerColumn>>;

// Upwind neighbour profiles: liquid comes from the stage above, gas from below.
Stage from_above(const Stage& profile, double inlet) {
  Stage up;
  up(0) = inlet;
  up.tail<kStages - 1>() = profile.head<kStages - 1>();
  return up;
}

Stage from_below(const Stage& profile, double inlet) {
  Stage up;
  up.head<kStages - 1>() = profile.tail<kStages - 1>();
  up(kStages - 1) = inlet;
  return up;
}

struct ColumnFeed {
  std::array<double, kSpecies> liquid{};
  double liquid_temperature = 0.0;
  std::array<double, kSpecies> gas{};
  double gas_temperature = 0.0;
};

void column_derivative(const PlantConfig& cfg, const ColumnParams& p, const double* x,
                       double liquid_rate, double gas_rate, const ColumnFeed& feed,
                       double* dx) {
  const ColumnView col(x);
  ColumnOut out(dx);

  const Stage cl_n2 = col.col(kN2).array();
  const Stage cl_co2 = col.col(kCO2).array();
  const Stage cl_mea = col.col(kMEA).array();
  const Stage cl_h2o = col.col(kH2O).array();
  const Stage t_liq = col.col(kLiquidTemperatureBlock).array();
  const Stage cg_n2 = col.col(kGasSpeciesBlock + kN2).array();
  const Stage cg_co2 = col.col(kGasSpeciesBlock + kCO2).array();
  const Stage cg_mea = col.col(kGasSpeciesBlock + kMEA).array();
  const Stage cg_h2o = col.col(kGasSpeciesBlock + kH2O).array();
  const Stage t_gas = col.col(kGasTemperatureBlock).array();

  const double t_ref = cfg.reference_temperature;
  const Stage inv_t_shift = 1.0 / t_ref - t_liq.inverse();
  const Stage reverse = p.reverse_rate * (p.reverse_activation * inv_t_shift).exp();
  const Stage vapor = p.vapor_ratio * (p.vapor_activation * inv_t_shift).exp();

  const auto& k = p.transfer_gains;
  // Positive rates move material from gas into liquid, except evaporation.
  const Stage absorb = k[kCO2] * (cg_co2 * cl_mea / cfg.mea_reference - reverse * cl_co2);
  const Stage dissolve = k[kN2] * (p.n2_partition * cg_n2 - cl_n2);
  const Stage volatilize = k[kMEA] * (p.mea_volatility * cl_mea - cg_mea);
  const Stage evaporate = k[kH2O] * (vapor * cl_h2o - cg_h2o);

  const double phi = p.holdup_ratio;
  const auto liquid_transport = [&](int block, double inlet) -> Stage {
    const Stage profile = col.col(block).array();
    return liquid_rate * (from_above(profile, inlet) - profile);
  };
  const auto gas_transport = [&](int block, double inlet) -> Stage {
    const Stage profile = col.col(block).array();
    return gas_rate * (from_below(profile, inlet) - profile);
  };

  out.col(kN2) = (liquid_transport(kN2, feed.liquid[kN2]) + dissolve).matrix();
  out.col(kCO2) = (liquid_transport(kCO2, feed.liquid[kCO2]) + absorb).matrix();
  out.col(kMEA) =
      (liquid_transport(kMEA, feed.liquid[kMEA]) - 2.0 * absorb - volatilize).matrix();
  out.col(kH2O) = (liquid_transport(kH2O, feed.liquid[kH2O]) - evaporate).matrix();

  const int g = kGasSpeciesBlock;
  out.col(g + kN2) = (gas_transport(g + kN2, feed.gas[kN2]) - phi * dissolve).matrix();
  out.col(g + kCO2) = (gas_transport(g + kCO2, feed.gas[kCO2]) - phi * absorb).matrix();
  out.col(g + kMEA) = (gas_transport(g + kMEA, feed.gas[kMEA]) + phi * volatilize).matrix();
  out.col(g + kH2O) = (gas_transport(g + kH2O, feed.gas[kH2O]) + phi * evaporate).matrix();

  const auto& cpl = cfg.liquid_heat_capacity;
  const auto& cpg = cfg.gas_heat_capacity;
  const Stage liquid_capacity =
      cpl[kN2] * cl_n2 + cpl[kCO2] * cl_co2 + cpl[kMEA] * cl_mea + cpl[kH2O] * cl_h2o;
  const Stage gas_capacity =
      cpg[kN2] * cg_n2 + cpg[kCO2] * cg_co2 + cpg[kMEA] * cg_mea + cpg[kH2O] * cg_h2o;
  const Stage exchange = p.interphase_heat * (t_gas - t_liq);

  out.col(kLiquidTemperatureBlock) =
      (liquid_transport(kLiquidTemperatureBlock, feed.liquid_temperature) +
       (exchange + p.reaction_heat * absorb - p.vaporization_heat * evaporate) /
           liquid_capacity)
          .matrix();
  out.col(kGasTemperatureBlock) =
      (gas_transport(kGasTemperatureBlock, feed.gas_temperature) -
       phi * exchange / gas_capacity)
          .matrix();
}

void check_state_size(const StateVector& x) {
  require(x.size() == kStateDim, "plant state must have length " + std::to_string(kStateDim) +
                                     ", got " + std::to_string(x.size()));
}

}  // namespace

bool is_temperature_index(int i) {
  if (i >= 2 * kColumnStates) return i < kStateDim;
  const int block = (i % kColumnStates) / kStages;
  return block == kLiquidTemperatureBlock || block == kGasTemperatureBlock;
}

PlantConfig PlantConfig::defaults() {
  PlantConfig c;
  ColumnParams absorber;
  absorber.liquid_flow_gain = 1.0 / (0.57 * 60.0);
  absorber.gas_flow_gain = 1.0 / 30.0;
  absorber.holdup_ratio = 0.004;
  absorber.transfer_gains = {0.02, 2.0, 0.02, 0.05};
  absorber.reverse_rate = 2e-4;
  absorber.reverse_activation = 6000.0;
  absorber.n2_partition = 0.02;
  absorber.mea_volatility = 1e-5;
  absorber.vapor_ratio = 5e-5;
  absorber.vapor_activation = 5000.0;
  absorber.interphase_heat = 4.0;
  absorber.reaction_heat = 85.0;
  absorber.vaporization_heat = 40.0;

  ColumnParams desorber = absorber;
  desorber.gas_flow_gain = 1.0 / (0.17 * 40.0);

  c.columns = {absorber, desorber};
  c.units.exchanger_flow_gain = 1.0 / (0.57 * 120.0);
  c.units.exchanger_transfer = 0.02;
  c.units.reboiler_flow_gain = 1.0 / (0.57 * 300.0);
  c.units.reboiler_duty_gain = 0.6;
  c.units.reboiler_loss = 0.0005;
  c.units.ambient_temperature = 300.0;
  c.units.cooler_fraction = 0.5;
  c.units.coolant_temperature = 305.0;

  c.liquid_heat_capacity = {0.029, 0.037, 0.17, 0.075};
  c.gas_heat_capacity = {0.029, 0.037, 0.17, 0.034};
  c.flue_gas = {34.0, 5.0, 0.0, 1.5};
  c.flue_gas_temperature = 320.0;
  c.stripping_gas = {0.5, 0.5, 0.0, 30.0};
  c.makeup_solvent = {0.5, 200.0, 5000.0, 40000.0};
  c.makeup_fraction = 0.8;
  c.input_bounds = {Bounds{0.48, 0.66}, Bounds{0.14, 0.20}, Bounds{0.8, 1.2}};
  return c;
}

void PlantConfig::validate() const {
  const auto bad = [](const std::string& what) { fail(ErrorCategory::configuration, what); };
  if (stages_per_column != kStages)
    bad("stages_per_column must be 5 (103-state layout), got " +
        std::to_string(stages_per_column));
  if (!(sample_interval_s > 0.0)) bad("sample_interval_s must be positive");
  if (integrator_substeps < 1) bad("integrator_substeps must be >= 1");
  for (int i = 0; i < kInputDim; ++i)
    if (!(input_bounds[i].lo <= input_bounds[i].hi))
      bad("input_bounds[" + std::to_string(i) + "] has lo > hi");
  if (!(mea_reference > 0.0) || !(reference_temperature > 0.0))
    bad("mea_reference and reference_temperature must be positive");
  if (makeup_fraction < 0.0 || makeup_fraction > 1.0) bad("makeup_fraction must lie in [0, 1]");
}

Input PlantConfig::nominal_input() const {
  Input u;
  for (int i = 0; i < kInputDim; ++i) u(i) = 0.5 * (input_bounds[i].lo + input_bounds[i].hi);
  return u;
}

bool PlantConfig::input_in_bounds(const Input& u) const {
  for (int i = 0; i < kInputDim; ++i)
    if (!(u(i) >= input_bounds[i].lo && u(i) <= input_bounds[i].hi)) return false;
  return true;
}

StateVector derivative(const PlantConfig& cfg, const StateVector& x, const Input& u) {
  check_state_size(x);
  const double liquid_flow = u(0);
  const double duty = u(1);
  const double gas_flow = u(2);

  const auto abs_idx = [](int block, int stage) {
    return state_index(Column::absorber, block, stage);
  };
  const auto des_idx = [](int block, int stage) {
    return state_index(Column::desorber, block, stage);
  };
  const int bottom = kStages - 1;
  const double t_tube = x(kExchangerTube);
  const double t_shell = x(kExchangerShell);
  const double t_reb = x(kReboiler);

  // Absorber: lean solvent from the desorber bottom blended with makeup, cooled.
  ColumnFeed absorber_feed;
  for (int s = 0; s < kSpecies; ++s) {
    absorber_feed.liquid[s] = (1.0 - cfg.makeup_fraction) * x(des_idx(s, bottom)) +
                              cfg.makeup_fraction * cfg.makeup_solvent[s];
    absorber_feed.gas[s] = cfg.flue_gas[s];
  }
  const double coolant = cfg.units.coolant_temperature;
  absorber_feed.liquid_temperature = coolant + (1.0 - cfg.units.cooler_fraction) * (t_shell - coolant);
  absorber_feed.gas_temperature = cfg.flue_gas_temperature;

  // Desorber: rich solvent from the absorber bottom after the exchanger tube side.
  ColumnFeed desorber_feed;
  for (int s = 0; s < kSpecies; ++s) {
    desorber_feed.liquid[s] = x(abs_idx(s, bottom));
    desorber_feed.gas[s] = cfg.stripping_gas[s];
  }
  desorber_feed.liquid_temperature = t_tube;
  desorber_feed.gas_temperature = t_reb;

  StateVector dx(kStateDim);
  const auto& ca = cfg.columns[0];
  const auto& cd = cfg.columns[1];
  column_derivative(cfg, ca, x.data(), ca.liquid_flow_gain * liquid_flow,
                    ca.gas_flow_gain * gas_flow, absorber_feed, dx.data());
  column_derivative(cfg, cd, x.data() + kColumnStates, cd.liquid_flow_gain * liquid_flow,
                    cd.gas_flow_gain * duty, desorber_feed, dx.data() + kColumnStates);

  const auto& units = cfg.units;
  const double hx_rate = units.exchanger_flow_gain * liquid_flow;
  dx(kExchangerTube) = hx_rate * (x(abs_idx(kLiquidTemperatureBlock, bottom)) - t_tube) +
                       units.exchanger_transfer * (t_shell - t_tube);
  dx(kExchangerShell) = hx_rate * (t_reb - t_shell) + units.exchanger_transfer * (t_tube - t_shell);
  dx(kReboiler) = units.reboiler_flow_gain * liquid_flow *
                      (x(des_idx(kLiquidTemperatureBlock, bottom)) - t_reb) +
                  units.reboiler_duty_gain * duty -
                  units.reboiler_loss * (t_reb - units.ambient_temperature);

  for (int i = 0; i < kStateDim; ++i)
    if (!std::isfinite(dx(i)))
      fail(ErrorCategory::numerical_domain,
           "non-finite derivative at state index " + std::to_string(i + 1));
  return dx;
}

StateVector step(const PlantConfig& cfg, const StateVector& x, const Input& u,
                 const StateVector* process_noise) {
  check_state_size(x);
  const double h = cfg.sample_interval_s / cfg.integrator_substeps;
  StateVector state = x;
  for (int sub = 0; sub < cfg.integrator_substeps; ++sub) {
    try {
      const StateVector k1 = derivative(cfg, state, u);
      const StateVector k2 = derivative(cfg, state + 0.5 * h * k1, u);
      const StateVector k3 = derivative(cfg, state + 0.5 * h * k2, u);
      const StateVector k4 = derivative(cfg, state + h * k3, u);
      state += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::numerical_domain) throw;
      fail(ErrorCategory::integration_blowup,
           "integration blew up in substep " + std::to_string(sub) + ": " + e.what());
    }
    if (!state.allFinite())
      fail(ErrorCategory::integration_blowup,
           "non-finite state after substep " + std::to_string(sub));
  }
  if (process_noise != nullptr) {
    require(process_noise->size() == kStateDim, "process noise must have length 103");
    state += *process_noise;
  }
  return state;
}

bool is_physical(const StateVector& x) {
  if (x.size() != kStateDim || !x.allFinite()) return false;
  for (int i = 0; i < kStateDim; ++i) {
    if (is_temperature_index(i) ? !(x(i) > 0.0) : !(x(i) >= 0.0)) return false;
  }
  return true;
}

MeasurementSelection MeasurementSelection::from_one_based(std::span<const int> indices) {
  MeasurementSelection sel;
  std::vector<bool> seen(kStateDim, false);
  for (int idx : indices) {
    if (idx < 1 || idx > kStateDim)
      fail(ErrorCategory::configuration,
           "measurement index " + std::to_string(idx) + " outside [1, 103]");
    if (seen[idx - 1])
      fail(ErrorCategory::configuration, "duplicate measurement index " + std::to_string(idx));
    seen[idx - 1] = true;
    sel.indices_.push_back(idx - 1);
  }
  return sel;
}

MeasurementSelection MeasurementSelection::temperatures() {
  std::vector<int> idx;
  for (int i = 0; i < kStateDim; ++i)
    if (is_temperature_index(i)) idx.push_back(i + 1);
  return from_one_based(idx);
}

std::vector<int> MeasurementSelection::one_based() const {
  std::vector<int> out(indices_.size());
  for (std::size_t i = 0; i < indices_.size(); ++i) out[i] = indices_[i] + 1;
  return out;
}

Eigen::VectorXd measure(const MeasurementSelection& selection, const StateVector& x,
                        const Eigen::VectorXd* noise) {
  check_state_size(x);
  const auto idx = selection.zero_based();
  Eigen::VectorXd y(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) y(static_cast<Eigen::Index>(i)) = x(idx[i]);
  if (noise != nullptr) {
    require(noise->size() == y.size(), "measurement noise length must equal selection size");
    y += *noise;
  }
  return y;
}

StateVector initial_guess(const PlantConfig& cfg) {
  StateVector x(kStateDim);
  const std::array<double, 2> temperature = {320.0, 370.0};
  for (int c = 0; c < 2; ++c) {
    const auto column = static_cast<Column>(c);
    const std::array<double, kBlocksPerColumn> profile = {
        cfg.makeup_solvent[kN2], 1500.0, cfg.makeup_solvent[kMEA] * 0.5,
        cfg.makeup_solvent[kH2O], temperature[c], cfg.flue_gas[kN2] * (1 - c) + 0.5 * c,
        2.0, 1e-3, 10.0, temperature[c]};
    for (int b = 0; b < kBlocksPerColumn; ++b)
      for (int s = 0; s < kStages; ++s) x(state_index(column, b, s)) = profile[b];
  }
  x(kExchangerTube) = 350.0;
  x(kExchangerShell) = 340.0;
  x(kReboiler) = 380.0;
  return x;
}

namespace {

Eigen::MatrixXd derivative_jacobian(const PlantConfig& cfg, const StateVector& x,
                                    const Input& u, const StateVector& f0) {
  Eigen::MatrixXd jac(kStateDim, kStateDim);
  StateVector xp = x;
  for (int i = 0; i < kStateDim; ++i) {
    const double h = 1e-7 * std::max(1.0, std::abs(x(i)));
    xp(i) = x(i) + h;
    jac.col(i) = (derivative(cfg, xp, u) - f0) / h;
    xp(i) = x(i);
  }
  return jac;
}

}  // namespace

StateVector steady_state(const PlantConfig& cfg, const Input& u, const StateVector* guess,
                         const SteadyStateOptions& options) {
  cfg.validate();
  require(cfg.input_in_bounds(u), "steady_state: nominal input outside input_bounds");
  StateVector x = guess != nullptr ? *guess : initial_guess(cfg);
  check_state_size(x);
  for (int k = 0; k < options.settle_samples; ++k) x = step(cfg, x, u);

  StateVector f = derivative(cfg, x, u);
  double residual = f.cwiseAbs().maxCoeff();
  for (int it = 0; it < options.newton_iterations && residual > options.tolerance; ++it) {
    const Eigen::MatrixXd jac = derivative_jacobian(cfg, x, u, f);
    const StateVector dx = jac.partialPivLu().solve(-f);
    // Backtrack until the residual decreases.
    double alpha = 1.0;
    for (int ls = 0; ls < 30; ++ls, alpha *= 0.5) {
      const StateVector trial = x + alpha * dx;
      if (!trial.allFinite()) continue;
      StateVector ft;
      try {
        ft = derivative(cfg, trial, u);
      } catch (const Error&) {
        continue;
      }
      const double r = ft.cwiseAbs().maxCoeff();
      if (r < residual) {
        x = trial;
        f = ft;
        residual = r;
        break;
      }
    }
    if (alpha < 1e-8) break;
  }
  if (!(residual < options.accept_tolerance))
    fail(ErrorCategory::steady_state_failure,
         "steady state not found, residual max-abs derivative " + std::to_string(residual));
  return x;
}

}  // namespace romkit::plant
