// romkit command-line front end. Links only the C API.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "romkit/romkit.h"

namespace {

std::string one_line(std::string text) {
  for (char& ch : text)
    if (ch == '\n' || ch == '\r') ch = ' ';
  return text;
}

int report_failure(romkit_status status) {
  std::cerr << "error=" << romkit_status_name(status) << " message=\"" << one_line(romkit_last_error())
            << "\"\n";
  return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reduced-order surrogate modeling and state estimation toolkit", "romkit"};
  app.set_version_flag("--version", romkit_version());
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> filter;
  bool fast = false;

  const char* descriptions[][2] = {
      {"simulate", "Excite the plant from steady state and write the snapshot matrix"},
      {"reduce", "Fit normalization and POD bases, sweep reconstruction error over orders"},
      {"train", "Train the reduced-order surrogate and test open-loop prediction"},
      {"estimate", "Run state estimation on a noisy plant trajectory"},
      {"benchmark", "Time all three filters on identical measurements"},
      {"report", "Collate earlier outputs into a plot-ready bundle and summary"},
  };
  for (const auto& [name, help] : descriptions) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "INI configuration file")->required();
    sub->add_option("--seed", seed, "Base seed for every random stream");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--filter", filter, "pod-mlp-ekf, ekf, pod-ekf or all");
    sub->add_flag("--fast", fast, "Use the reduced fast profile");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error=usage message=\"" << one_line(e.what()) << "\"\n";
    return ROMKIT_CONFIGURATION;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  romkit_config* config = nullptr;
  romkit_status status = romkit_config_load(config_path.c_str(), &config);
  if (status == ROMKIT_OK && seed) status = romkit_config_set_seed(config, *seed);
  if (status == ROMKIT_OK && out_dir) status = romkit_config_set_output_dir(config, out_dir->c_str());
  if (status == ROMKIT_OK && filter) status = romkit_config_set_filter(config, filter->c_str());
  if (status == ROMKIT_OK && fast) status = romkit_config_use_fast_profile(config);
  if (status == ROMKIT_OK) status = romkit_run(config, command.c_str());
  romkit_config_free(config);
  if (status != ROMKIT_OK) return report_failure(status);
  return 0;
}
