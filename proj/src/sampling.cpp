#include "hybridfem/sampling.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace hybridfem {

std::vector<DefGradient> cube_shell_samples(double half_width) {
  if (!(half_width > 0.0)) throw Error("cube_shell_samples: half width must be positive");
  std::vector<DefGradient> out;
  out.reserve(26);
  for (int i = -1; i <= 1; ++i)
    for (int j = -1; j <= 1; ++j)
      for (int k = -1; k <= 1; ++k) {
        if (i == 0 && j == 0 && k == 0) continue;
        out.push_back(DefGradient::symmetric(1.0 + half_width * i, 1.0 + half_width * j,
                                             half_width * k));
      }
  return out;
}

std::vector<DefGradient> layered_grid_samples(const TrainingRegion& region) {
  if (region.layers < 1 || !(region.width > 0.0))
    throw Error("layered_grid_samples: invalid region");
  std::vector<DefGradient> out;
  out.reserve(static_cast<std::size_t>(region.n_points()));
  out.push_back(DefGradient::identity());
  for (int l = 1; l <= region.layers; ++l) {
    const auto shell = cube_shell_samples(l * region.layer_spacing());
    out.insert(out.end(), shell.begin(), shell.end());
  }
  return out;
}

std::vector<DefGradient> lhd_samples(const TrainingRegion& region, int n, std::uint64_t seed) {
  if (n < 1) throw Error("lhd_samples: n must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  std::array<std::vector<int>, 3> strata;
  for (auto& s : strata) {
    s.resize(static_cast<std::size_t>(n));
    std::iota(s.begin(), s.end(), 0);
    std::shuffle(s.begin(), s.end(), rng);
  }

  const double lo[3] = {1.0 - region.width, 1.0 - region.width, -region.width};
  std::vector<DefGradient> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double x[3];
    for (int k = 0; k < 3; ++k) {
      const double stratum = strata[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
      x[k] = lo[k] + 2.0 * region.width * (stratum + u01(rng)) / n;
    }
    out.push_back(DefGradient::symmetric(x[0], x[1], x[2]));
  }
  return out;
}

}  // namespace hybridfem
