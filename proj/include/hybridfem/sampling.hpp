#pragma once

#include <cstdint>
#include <vector>

#include "hybridfem/tensor.hpp"

namespace hybridfem {

// Hypercube training region in (F11, F22, F12) space centred at the
// reference configuration: half-width Delta_tr split into n_lay layers of
// spacing delta_tr = Delta_tr / n_lay.
struct TrainingRegion {
  double width = 0.25;  // Delta_tr
  int layers = 10;      // n_lay

  double layer_spacing() const { return width / layers; }
  int n_points() const { return 26 * layers + 1; }

  bool contains(const DefGradient& f, double tol = 1e-12) const {
    return std::abs(f.f11 - 1.0) <= width + tol && std::abs(f.f22 - 1.0) <= width + tol &&
           std::abs(f.f12) <= width + tol;
  }
};

// The 26 points of one cubic shell of half-width delta: 8 vertices, 12 edge
// midpoints, 6 face centres.
std::vector<DefGradient> cube_shell_samples(double half_width);

// Center point plus n_lay nested shells of widths l * delta_tr,
// l = 1..n_lay; 26 n_lay + 1 points in total. The first 26 k + 1 entries of
// a (k+1)-layer region with spacing delta_tr equal the k-layer region with
// the same spacing.
std::vector<DefGradient> layered_grid_samples(const TrainingRegion& region);

// Latin hypercube design over the region's cube, one sample per stratum on
// each axis; deterministic per seed.
std::vector<DefGradient> lhd_samples(const TrainingRegion& region, int n, std::uint64_t seed);

}  // namespace hybridfem
