#include "romkit/excitation.hpp"

#include <string>

#include "romkit/error.hpp"
#include "romkit/rng.hpp"

namespace romkit::excitation {

void PrmsConfig::validate() const {
  if (levels < 2) fail(ErrorCategory::configuration, "PRMS needs at least 2 levels");
  if (hold_min < 1 || hold_max < hold_min)
    fail(ErrorCategory::configuration, "PRMS hold range must satisfy 1 <= min <= max");
  if (horizon_samples < 0) fail(ErrorCategory::configuration, "PRMS horizon must be >= 0");
  if (bounds.empty()) fail(ErrorCategory::configuration, "PRMS needs at least one channel");
  for (const auto& b : bounds)
    if (!(b.lo <= b.hi)) fail(ErrorCategory::configuration, "PRMS channel bounds have lo > hi");
}

std::vector<double> level_grid(const plant::Bounds& bounds, int levels) {
  std::vector<double> grid(static_cast<std::size_t>(levels));
  for (int i = 0; i < levels; ++i) {
    // Endpoints are reproduced exactly.
    grid[i] = i == levels - 1 ? bounds.hi
                              : bounds.lo + (bounds.hi - bounds.lo) * i / (levels - 1);
  }
  return grid;
}

InputSequence generate_prms(const PrmsConfig& config) {
  config.validate();
  const auto channels = static_cast<Eigen::Index>(config.bounds.size());
  InputSequence out(config.horizon_samples, channels);
  for (Eigen::Index c = 0; c < channels; ++c) {
    const auto grid = level_grid(config.bounds[c], config.levels);
    Rng rng(Rng::derive(config.seed, static_cast<std::uint64_t>(c)));
    std::int64_t k = 0;
    std::int64_t level = -1;
    while (k < config.horizon_samples) {
      const auto hold = rng.uniform_int(config.hold_min, config.hold_max);
      // Every switch moves to a different level, so each hold is a visible run.
      if (level < 0) {
        level = rng.uniform_int(0, config.levels - 1);
      } else {
        const auto next = rng.uniform_int(0, config.levels - 2);
        level = next >= level ? next + 1 : next;
      }
      const double value = grid[static_cast<std::size_t>(level)];
      const auto end = std::min(k + hold, config.horizon_samples);
      for (; k < end; ++k) out(k, c) = value;
    }
  }
  return out;
}

std::vector<int> hold_lengths(const InputSequence& sequence, int channel) {
  std::vector<int> runs;
  const auto n = sequence.rows();
  Eigen::Index start = 0;
  for (Eigen::Index k = 1; k <= n; ++k) {
    if (k == n || sequence(k, channel) != sequence(start, channel)) {
      runs.push_back(static_cast<int>(k - start));
      start = k;
    }
  }
  return runs;
}

}  // namespace romkit::excitation
