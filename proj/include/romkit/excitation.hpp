#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "romkit/plant.hpp"

namespace romkit::excitation {

/// Pseudo-random multi-level signal settings. Defaults: ten equispaced levels
/// and holds of 30-100 samples (900-3000 s at a 30 s sample interval).
struct PrmsConfig {
  int levels = 10;
  std::vector<plant::Bounds> bounds;
  int hold_min = 30;
  int hold_max = 100;
  std::int64_t horizon_samples = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Row k is the input applied over sample k; one column per channel.
using InputSequence = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Each channel switches independently among `levels` values spanning its
/// bounds, holding each for a uniform number of samples in [hold_min,
/// hold_max]. Each switch picks a level different from the current one, so
/// consecutive holds never merge. Channel c draws from Rng(Rng::derive(seed, c)).
InputSequence generate_prms(const PrmsConfig& config);

/// The equispaced level grid for one channel, endpoints included.
std::vector<double> level_grid(const plant::Bounds& bounds, int levels);

/// Lengths of consecutive constant runs in one channel.
std::vector<int> hold_lengths(const InputSequence& sequence, int channel);

}  // namespace romkit::excitation
