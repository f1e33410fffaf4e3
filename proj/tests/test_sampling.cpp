#include <doctest.h>

#include <set>

#include "hybridfem/sampling.hpp"

using namespace hybridfem;

TEST_CASE("layered grid point counts follow 26 n_lay + 1") {
  const int layers[] = {2, 4, 6, 8, 10, 15, 20};
  const int expected[] = {53, 105, 157, 209, 261, 391, 521};
  for (int i = 0; i < 7; ++i) {
    const TrainingRegion region{0.25, layers[i]};
    CHECK(region.n_points() == expected[i]);
    CHECK(layered_grid_samples(region).size() == static_cast<std::size_t>(expected[i]));
  }
  CHECK(TrainingRegion{0.25, 10}.layer_spacing() == doctest::Approx(0.025));
}

TEST_CASE("layer geometry: shells of vertices, edge midpoints, face centres") {
  const TrainingRegion region{0.1, 2};
  const auto pts = layered_grid_samples(region);
  REQUIRE(pts.size() == 53);

  // Center first.
  CHECK(pts[0].f11 == 1.0);
  CHECK(pts[0].f22 == 1.0);
  CHECK(pts[0].f12 == 0.0);

  const double d = region.layer_spacing();
  // First-layer points take values 1 +- d (diagonal) and +- d (shear), with
  // 8 vertices, 12 edge midpoints, 6 face centres.
  int vertices = 0, edges = 0, faces = 0;
  for (int i = 1; i <= 26; ++i) {
    const auto& f = pts[static_cast<std::size_t>(i)];
    CHECK(f.f12 == f.f21);
    const int nonzero = (std::abs(f.f11 - 1.0) > 1e-15) + (std::abs(f.f22 - 1.0) > 1e-15) +
                        (std::abs(f.f12) > 1e-15);
    if (nonzero == 3) ++vertices;
    if (nonzero == 2) ++edges;
    if (nonzero == 1) ++faces;
    CHECK(std::abs(f.f11 - 1.0) <= d + 1e-15);
    CHECK(std::abs(f.f22 - 1.0) <= d + 1e-15);
    CHECK(std::abs(f.f12) <= d + 1e-15);
  }
  CHECK(vertices == 8);
  CHECK(edges == 12);
  CHECK(faces == 6);

  // All samples stay in the region and are pairwise distinct.
  std::set<std::array<double, 3>> unique;
  for (const auto& f : pts) {
    CHECK(region.contains(f));
    unique.insert({f.f11, f.f22, f.f12});
  }
  CHECK(unique.size() == pts.size());
}

TEST_CASE("layered grids are nested across layer counts") {
  // Layer points of (Delta, k) equal the first k layers of
  // (Delta (k+1)/k, k+1): identical spacing, one extra outer shell.
  const int k = 4;
  const double width = 0.2;
  const auto inner = layered_grid_samples({width, k});
  const auto outer = layered_grid_samples({width * (k + 1) / k, k + 1});
  REQUIRE(outer.size() == inner.size() + 26);
  for (std::size_t i = 0; i < inner.size(); ++i) {
    CHECK(outer[i].f11 == doctest::Approx(inner[i].f11).epsilon(1e-14));
    CHECK(outer[i].f22 == doctest::Approx(inner[i].f22).epsilon(1e-14));
    CHECK(outer[i].f12 == doctest::Approx(inner[i].f12).epsilon(1e-14).scale(1.0));
  }
}

TEST_CASE("generated stretches are admissible up to Delta_tr = 0.25") {
  for (const auto& f : layered_grid_samples({0.25, 20})) {
    CHECK(f.det() > 0.0);
    CHECK(f.is_symmetric());
  }
}

TEST_CASE("latin hypercube sampling") {
  const TrainingRegion region{0.25, 2};

  SUBCASE("single point lies inside the region") {
    const auto pts = lhd_samples(region, 1, 3);
    REQUIRE(pts.size() == 1);
    CHECK(region.contains(pts[0]));
  }

  SUBCASE("every axis stratum holds exactly one sample") {
    const int n = 40;
    const auto pts = lhd_samples(region, n, 11);
    const double lo[3] = {0.75, 0.75, -0.25};
    for (int axis = 0; axis < 3; ++axis) {
      std::vector<int> hits(n, 0);
      for (const auto& f : pts) {
        const double x = axis == 0 ? f.f11 : axis == 1 ? f.f22 : f.f12;
        const int stratum = static_cast<int>((x - lo[axis]) / (0.5 / n));
        REQUIRE(stratum >= 0);
        REQUIRE(stratum < n);
        hits[static_cast<std::size_t>(stratum)] += 1;
      }
      for (int h : hits) CHECK(h == 1);
    }
  }

  SUBCASE("deterministic per seed") {
    const auto a = lhd_samples(region, 100, 42);
    const auto b = lhd_samples(region, 100, 42);
    const auto c = lhd_samples(region, 100, 43);
    bool same = true, differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      same &= a[i].f11 == b[i].f11 && a[i].f22 == b[i].f22 && a[i].f12 == b[i].f12;
      differs |= a[i].f11 != c[i].f11;
    }
    CHECK(same);
    CHECK(differs);
  }
}
