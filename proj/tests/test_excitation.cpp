#include <algorithm>
#include <cmath>
#include <set>

#include <boost/math/distributions/chi_squared.hpp>

#include "doctest.h"
#include "romkit/error.hpp"
#include "romkit/excitation.hpp"
#include "romkit/plant.hpp"

using namespace romkit;
using namespace romkit::excitation;

namespace {

PrmsConfig plant_prms(std::int64_t horizon, std::uint64_t seed) {
  PrmsConfig c;
  const auto bounds = plant::PlantConfig::defaults().input_bounds;
  c.bounds.assign(bounds.begin(), bounds.end());
  c.horizon_samples = horizon;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("liquid flow takes values on the 0.02 grid between 0.48 and 0.66") {
  const auto seq = generate_prms(plant_prms(12000, 42));
  std::set<double> seen;
  for (Eigen::Index k = 0; k < seq.rows(); ++k) {
    const double v = seq(k, 0);
    const double slot = (v - 0.48) / 0.02;
    CHECK(std::abs(slot - std::round(slot)) < 1e-9);
    CHECK(v >= 0.48);
    CHECK(v <= 0.66);
    seen.insert(std::round(slot));
  }
  CHECK(seen.size() == 10);
  const auto grid = level_grid({0.48, 0.66}, 10);
  CHECK(grid.front() == 0.48);
  CHECK(grid.back() == 0.66);
}

TEST_CASE("binary signal with unit holds") {
  PrmsConfig c;
  c.levels = 2;
  c.bounds = {plant::Bounds{0.0, 1.0}};
  c.hold_min = 1;
  c.hold_max = 1;
  c.horizon_samples = 50;
  c.seed = 1;
  const auto seq = generate_prms(c);
  for (Eigen::Index k = 0; k < seq.rows(); ++k) CHECK((seq(k, 0) == 0.0 || seq(k, 0) == 1.0));
  for (int len : hold_lengths(seq, 0)) CHECK(len == 1);
}

TEST_CASE("hold lengths are consistent with a uniform distribution on 30..100") {
  const auto seq = generate_prms(plant_prms(12000, 20240601));
  std::vector<int> counts(71, 0);
  int total = 0;
  for (int ch = 0; ch < 3; ++ch) {
    auto runs = hold_lengths(seq, ch);
    runs.pop_back();  // the last hold may be cut by the horizon
    for (int len : runs) {
      REQUIRE(len >= 30);
      REQUIRE(len <= 100);
      ++counts[len - 30];
      ++total;
    }
  }
  const double expected = static_cast<double>(total) / 71.0;
  double stat = 0.0;
  for (int c : counts) stat += (c - expected) * (c - expected) / expected;
  const boost::math::chi_squared dist(70);
  const double p = boost::math::cdf(boost::math::complement(dist, stat));
  MESSAGE("chi-square " << stat << " over " << total << " holds, p = " << p);
  CHECK(p > 0.01);
}

TEST_CASE("sequences are reproducible and channels differ") {
  const auto a = generate_prms(plant_prms(3000, 9));
  const auto b = generate_prms(plant_prms(3000, 9));
  CHECK(a == b);
  const auto c = generate_prms(plant_prms(3000, 10));
  CHECK(a != c);
  // Channels switch independently.
  CHECK(hold_lengths(a, 0) != hold_lengths(a, 1));
}

TEST_CASE("every sample stays within bounds") {
  const auto c = plant_prms(5000, 77);
  const auto seq = generate_prms(c);
  for (int ch = 0; ch < 3; ++ch) {
    CHECK(seq.col(ch).minCoeff() >= c.bounds[ch].lo);
    CHECK(seq.col(ch).maxCoeff() <= c.bounds[ch].hi);
  }
}

TEST_CASE("degenerate configurations") {
  auto c = plant_prms(0, 1);
  CHECK(generate_prms(c).rows() == 0);
  c.levels = 1;
  CHECK_THROWS_AS(generate_prms(c), Error);
  c = plant_prms(10, 1);
  c.hold_min = 0;
  CHECK_THROWS_AS(generate_prms(c), Error);
}
