#include "romkit/config.hpp"

#include <charconv>
#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "romkit/error.hpp"
#include "romkit/io.hpp"
#include "romkit/rng.hpp"

namespace romkit {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& what) {
  fail(ErrorCategory::configuration, key + " = '" + value + "': " + what);
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string text = trim(raw);
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) bad_value(key, raw, "not a valid number");
  return value;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& raw) {
  std::vector<int> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(parse_number<int>(key, item));
  }
  return out;
}

plant::Bounds parse_bounds(const std::string& key, const std::string& raw) {
  const auto pos = raw.find(',');
  if (pos == std::string::npos) bad_value(key, raw, "expected 'lo, hi'");
  return {parse_number<double>(key, raw.substr(0, pos)), parse_number<double>(key, raw.substr(pos + 1))};
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, raw, "expected true or false");
}

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
  return out;
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
std::string to_text(T value) {
  if constexpr (std::is_floating_point_v<T>) return io::format_double(value);
  else return std::to_string(value);
}

#define ROMKIT_NUMBER(section, key, expr, type)                                                         \
  Field {                                                                                               \
    section, key,                                                                                       \
        [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.expr = parse_number<type>(k, v); }, \
        [](const ExperimentConfig& c) { return to_text<type>(c.expr); }                                 \
  }

#define ROMKIT_BOUNDS(section, key, index)                                                       \
  Field {                                                                                        \
    section, key,                                                                                \
        [](ExperimentConfig& c, const std::string& k, const std::string& v) {                    \
          c.plant.input_bounds[index] = parse_bounds(k, v);                                      \
        },                                                                                       \
        [](const ExperimentConfig& c) {                                                          \
          return io::format_double(c.plant.input_bounds[index].lo) + ", " +                          \
                 io::format_double(c.plant.input_bounds[index].hi);                                  \
        }                                                                                        \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      ROMKIT_NUMBER("plant", "sample_interval_s", plant.sample_interval_s, double),
      ROMKIT_NUMBER("plant", "integrator_substeps", plant.integrator_substeps, int),
      ROMKIT_NUMBER("plant", "makeup_fraction", plant.makeup_fraction, double),
      ROMKIT_BOUNDS("plant", "liquid_flow_bounds", 0),
      ROMKIT_BOUNDS("plant", "reboiler_duty_bounds", 1),
      ROMKIT_BOUNDS("plant", "gas_flow_bounds", 2),
      ROMKIT_NUMBER("excitation", "levels", prms.levels, int),
      ROMKIT_NUMBER("excitation", "hold_min", prms.hold_min, int),
      ROMKIT_NUMBER("excitation", "hold_max", prms.hold_max, int),
      ROMKIT_NUMBER("pod", "snapshot_horizon", pod.snapshot_horizon, std::int64_t),
      ROMKIT_NUMBER("pod", "validation_horizon", pod.validation_horizon, std::int64_t),
      Field{"pod", "sweep_orders",
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.pod.sweep_orders = parse_int_list(k, v);
            },
            [](const ExperimentConfig& c) { return join(c.pod.sweep_orders); }},
      ROMKIT_NUMBER("pod", "order", pod.order, int),
      Field{"surrogate", "hidden_layers",
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.surrogate.hidden = parse_int_list(k, v);
            },
            [](const ExperimentConfig& c) { return join(c.surrogate.hidden); }},
      ROMKIT_NUMBER("surrogate", "training_pairs", surrogate.training_pairs, std::int64_t),
      ROMKIT_NUMBER("surrogate", "trajectory_length", surrogate.trajectory_length, std::int64_t),
      ROMKIT_NUMBER("surrogate", "initial_perturbation", surrogate.initial_perturbation, double),
      Field{"surrogate", "output_mode",
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              const std::string mode = trim(v);
              if (mode == "increment") c.surrogate.output_mode = mlp::OutputMode::increment;
              else if (mode == "absolute") c.surrogate.output_mode = mlp::OutputMode::absolute;
              else bad_value(k, v, "expected increment or absolute");
            },
            [](const ExperimentConfig& c) {
              return std::string(c.surrogate.output_mode == mlp::OutputMode::increment ? "increment" : "absolute");
            }},
      ROMKIT_NUMBER("surrogate", "rollout_horizon", surrogate.rollout_horizon, std::int64_t),
      ROMKIT_NUMBER("surrogate", "batch_size", surrogate.train.batch_size, int),
      ROMKIT_NUMBER("surrogate", "learning_rate", surrogate.train.learning_rate, double),
      ROMKIT_NUMBER("surrogate", "final_learning_rate_fraction", surrogate.train.final_learning_rate_fraction,
                    double),
      ROMKIT_NUMBER("surrogate", "max_epochs", surrogate.train.max_epochs, int),
      ROMKIT_NUMBER("surrogate", "patience", surrogate.train.early_stop_patience, int),
      ROMKIT_NUMBER("estimator", "horizon", estimator.horizon, std::int64_t),
      ROMKIT_NUMBER("estimator", "burn_in", estimator.burn_in, std::int64_t),
      ROMKIT_NUMBER("estimator", "noise_fraction", estimator.noise_fraction, double),
      ROMKIT_NUMBER("estimator", "initial_variance", estimator.initial_variance, double),
      ROMKIT_NUMBER("estimator", "initial_guess", estimator.initial_guess, double),
      Field{"estimator", "measurements",
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.estimator.measurements = trim(v) == "temperatures" ? std::vector<int>{} : parse_int_list(k, v);
            },
            [](const ExperimentConfig& c) {
              return c.estimator.measurements.empty() ? std::string("temperatures") : join(c.estimator.measurements);
            }},
      Field{"estimator", "filter",
            [](ExperimentConfig& c, const std::string&, const std::string& v) { c.estimator.filter = trim(v); },
            [](const ExperimentConfig& c) { return c.estimator.filter; }},
      ROMKIT_NUMBER("seeds", "base", seeds.base, std::uint64_t),
      ROMKIT_NUMBER("fast", "snapshot_horizon", fast_profile.snapshot_horizon, std::int64_t),
      ROMKIT_NUMBER("fast", "training_pairs", fast_profile.training_pairs, std::int64_t),
      Field{"fast", "enabled",
            [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.fast = parse_bool(k, v); },
            [](const ExperimentConfig& c) { return std::string(c.fast ? "true" : "false"); }},
      Field{"output", "dir",
            [](ExperimentConfig& c, const std::string&, const std::string& v) { c.output_dir = trim(v); },
            [](const ExperimentConfig& c) { return c.output_dir.string(); }},
  };
  return table;
}

#undef ROMKIT_NUMBER
#undef ROMKIT_BOUNDS

}  // namespace

std::uint64_t SeedConfig::stream(SeedStream s) const {
  return Rng::derive(base, static_cast<std::uint64_t>(s));
}

plant::MeasurementSelection EstimatorSettings::selection() const {
  if (measurements.empty()) return plant::MeasurementSelection::temperatures();
  return plant::MeasurementSelection::from_one_based(measurements);
}

ExperimentConfig ExperimentConfig::defaults() { return {}; }

void ExperimentConfig::apply_fast_profile() {
  pod.snapshot_horizon = fast_profile.snapshot_horizon;
  surrogate.training_pairs = fast_profile.training_pairs;
  fast = true;
}

void ExperimentConfig::validate() const {
  plant.validate();
  prms_for(1, 0).validate();
  const auto bad = [](const std::string& msg) { fail(ErrorCategory::configuration, msg); };
  if (pod.snapshot_horizon < 1) bad("pod.snapshot_horizon must be >= 1");
  if (pod.validation_horizon < 1) bad("pod.validation_horizon must be >= 1");
  if (pod.sweep_orders.empty()) bad("pod.sweep_orders must not be empty");
  for (int r : pod.sweep_orders)
    if (r < 1 || r > plant::kStateDim) bad("pod.sweep_orders entries must lie in [1, 103]");
  if (pod.order < 1 || pod.order > plant::kStateDim) bad("pod.order must lie in [1, 103]");
  if (surrogate.hidden.empty()) bad("surrogate.hidden_layers must not be empty");
  for (int h : surrogate.hidden)
    if (h < 1) bad("surrogate.hidden_layers entries must be positive");
  if (surrogate.training_pairs < 10) bad("surrogate.training_pairs must be >= 10");
  if (surrogate.trajectory_length < 1) bad("surrogate.trajectory_length must be >= 1");
  if (!(surrogate.initial_perturbation >= 0.0)) bad("surrogate.initial_perturbation must be >= 0");
  if (surrogate.rollout_horizon < 1) bad("surrogate.rollout_horizon must be >= 1");
  surrogate.train.validate();
  if (estimator.horizon < 1) bad("estimator.horizon must be >= 1");
  if (estimator.burn_in < 0 || estimator.burn_in >= estimator.horizon)
    bad("estimator.burn_in must lie in [0, horizon)");
  if (!(estimator.noise_fraction >= 0.0)) bad("estimator.noise_fraction must be >= 0");
  if (!(estimator.initial_variance > 0.0)) bad("estimator.initial_variance must be > 0");
  static const std::set<std::string> filters{"pod-mlp-ekf", "ekf", "pod-ekf", "all"};
  if (!filters.contains(estimator.filter))
    bad("estimator.filter must be one of pod-mlp-ekf, ekf, pod-ekf, all");
  (void)estimator.selection();
  if (output_dir.empty()) bad("output.dir must not be empty");
}

excitation::PrmsConfig ExperimentConfig::prms_for(std::int64_t horizon, std::uint64_t seed) const {
  excitation::PrmsConfig p = prms;
  p.bounds.assign(plant.input_bounds.begin(), plant.input_bounds.end());
  p.horizon_samples = horizon;
  p.seed = seed;
  return p;
}

std::string ExperimentConfig::canonical() const {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get(*this) + "\n";
  }
  return out;
}

ExperimentConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorCategory::configuration, std::string("malformed config: ") + e.what());
  }
  ExperimentConfig config = ExperimentConfig::defaults();
  for (const auto& [section, entries] : tree) {
    if (entries.empty() && !entries.data().empty())
      fail(ErrorCategory::configuration, "key '" + section + "' must sit inside a section");
    for (const auto& [key, value] : entries) {
      const auto& table = fields();
      const auto it = std::find_if(table.begin(), table.end(),
                                   [&](const Field& f) { return f.section == section && f.key == key; });
      if (it == table.end()) fail(ErrorCategory::configuration, "unknown setting " + section + "." + key);
      it->set(config, section + "." + key, value.data());
    }
  }
  if (config.fast) config.apply_fast_profile();
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    fail(ErrorCategory::configuration, "config file not found: " + path.string());
  return parse_config(io::read_file(path));
}

}  // namespace romkit
