#include <doctest.h>

#include <random>

#include "hybridfem/material.hpp"

using namespace hybridfem;

namespace {

// Random deformation gradient with |F_ij - delta_ij| < width.
DefGradient random_def_gradient(std::mt19937_64& rng, double width) {
  std::uniform_real_distribution<double> u(-width, width);
  while (true) {
    DefGradient f{1.0 + u(rng), 1.0 + u(rng), u(rng), u(rng)};
    if (f.det() > 0.05) return f;
  }
}

double rel_err(const TangentVoigt& a, const TangentVoigt& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("right Cauchy-Green") {
  CauchyGreen c = right_cauchy_green(DefGradient::identity());
  CHECK(c.c11 == doctest::Approx(1.0));
  CHECK(c.c22 == doctest::Approx(1.0));
  CHECK(c.c12 == doctest::Approx(0.0));

  c = right_cauchy_green(DefGradient::symmetric(1.1, 1.0, 0.0));
  CHECK(c.c11 == doctest::Approx(1.21));
  CHECK(c.c22 == doctest::Approx(1.0));
  CHECK(c.c12 == doctest::Approx(0.0));

  c = right_cauchy_green(DefGradient{1.0, 1.0, 0.1, 0.1});
  CHECK(c.c11 == doctest::Approx(1.01));
  CHECK(c.c22 == doctest::Approx(1.01));
  CHECK(c.c12 == doctest::Approx(0.2));

  CHECK_THROWS_AS(right_cauchy_green(DefGradient{1.0, -1.0, 0.0, 0.0}), Error);
}

TEST_CASE("right Cauchy-Green is positive definite for det F > 0") {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 500; ++i) {
    const DefGradient f = random_def_gradient(rng, 0.8);
    const CauchyGreen c = right_cauchy_green(f);
    CHECK(c.c11 > 0.0);
    CHECK(c.det2() > 0.0);
  }
}

TEST_CASE("Green-Lagrange strain") {
  GreenLagrange e = green_lagrange(CauchyGreen::identity());
  CHECK(e.e11 == 0.0);
  CHECK(e.e22 == 0.0);
  CHECK(e.e12 == 0.0);
  e = green_lagrange(CauchyGreen{1.21, 1.0, 0.0});
  CHECK(e.e11 == doctest::Approx(0.105));
  e = green_lagrange(CauchyGreen{1.0, 1.0, 0.2});
  CHECK(e.e12 == doctest::Approx(0.1));
  CHECK(e.voigt()[2] == doctest::Approx(0.2));
}

TEST_CASE("invariants include the unit out-of-plane stretch") {
  Invariants inv = invariants(CauchyGreen::identity());
  CHECK(inv.i1 == doctest::Approx(3.0));
  CHECK(inv.i2 == doctest::Approx(3.0));
  CHECK(inv.i3 == doctest::Approx(1.0));

  inv = invariants(CauchyGreen{1.21, 1.0, 0.0});
  CHECK(inv.i1 == doctest::Approx(3.21));
  CHECK(inv.i2 == doctest::Approx(3.42));  // 1.21 + 1.21 + 1
  CHECK(inv.i3 == doctest::Approx(1.21));
}

TEST_CASE("micro material: stress-free reference and energy value") {
  const auto p = MicroMaterialParams::with_derived_c5(1000.0, 100.0, 100.0, 100.0);
  CHECK(p.c5 == doctest::Approx(2600.0));
  CHECK(p.stress_free_reference());

  const MaterialEval at_ref = micro_material(CauchyGreen::identity(), p);
  CHECK(at_ref.psi == doctest::Approx(3400.0));  // 3 c1 + 3 c2 + c3
  CHECK(at_ref.s.norm() <= 1e-12 * p.c5);

  // Any admissible parameter set with derived c5 is stress-free at C = I.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.1, 1000.0);
  for (int i = 0; i < 50; ++i) {
    const auto q = MicroMaterialParams::with_derived_c5(u(rng), u(rng), u(rng), u(rng));
    const MaterialEval ev = micro_material(CauchyGreen::identity(), q);
    CHECK(ev.s.norm() <= 1e-12 * q.c5);
  }
}

TEST_CASE("micro material tangent matches finite differences") {
  const auto p = MicroMaterialParams::with_derived_c5(1000.0, 100.0, 100.0, 100.0);
  const StressFunction s_of_c = [&](const CauchyGreen& c) { return micro_material(c, p).s; };

  const CauchyGreen probe{1.1, 0.95, 0.05};
  CHECK(rel_err(micro_material(probe, p).d, fd_tangent(s_of_c, probe)) < 1e-5);

  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    const CauchyGreen c = right_cauchy_green(random_def_gradient(rng, 0.25));
    const MaterialEval ev = micro_material(c, p);
    CHECK(rel_err(ev.d, fd_tangent(s_of_c, c)) < 1e-5);
    // Major symmetry of the Voigt image.
    CHECK((ev.d - ev.d.transpose()).cwiseAbs().maxCoeff() <=
          1e-10 * ev.d.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("macro model: stress, tangent, data-driven mode") {
  const MacroModelParams p{1.0};
  MaterialEval ev = macro_model(CauchyGreen::identity(), p);
  CHECK(ev.psi == doctest::Approx(3.0));
  CHECK(ev.s.norm() == doctest::Approx(0.0));

  ev = macro_model(CauchyGreen{1.21, 1.0, 0.0}, p);
  CHECK(ev.s.s11 == doctest::Approx(2.0 * (1.0 - 1.0 / 1.21)));
  CHECK(ev.s.s22 == doctest::Approx(0.0));

  const StressFunction s_of_c = [&](const CauchyGreen& c) { return macro_model(c, p).s; };
  std::mt19937_64 rng(13);
  for (int i = 0; i < 100; ++i) {
    const CauchyGreen c = right_cauchy_green(random_def_gradient(rng, 0.25));
    CHECK(rel_err(macro_model(c, p).d, fd_tangent(s_of_c, c)) < 1e-5);
  }

  // C1 = 0 switches the modelling component off entirely.
  const MacroModelParams off{0.0};
  for (int i = 0; i < 10; ++i) {
    const CauchyGreen c = right_cauchy_green(random_def_gradient(rng, 0.2));
    const MaterialEval z = macro_model(c, off);
    CHECK(z.s.norm() == 0.0);
    CHECK(z.d.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("fd_tangent is exact for a quadratic energy") {
  // S = D0 e with constant D0: the central difference has no truncation error.
  TangentVoigt d0;
  d0 << 4.0, 1.2, 0.3, 1.2, 5.0, -0.7, 0.3, -0.7, 2.5;
  const StressFunction linear = [&](const CauchyGreen& c) {
    const auto e = green_lagrange(c).voigt();
    Eigen::Vector3d s = d0 * Eigen::Vector3d(e[0], e[1], e[2]);
    return Stress2PK{s(0), s(1), s(2)};
  };
  const TangentVoigt d = fd_tangent(linear, CauchyGreen{1.05, 0.93, 0.04});
  CHECK(rel_err(d, d0) < 1e-9);
}

TEST_CASE("fd_tangent self-consistency on the macro model") {
  const MacroModelParams p{1.0};
  const StressFunction s_of_c = [&](const CauchyGreen& c) { return macro_model(c, p).s; };
  const TangentVoigt d = fd_tangent(s_of_c, CauchyGreen::identity(), 1e-6);
  CHECK(rel_err(d, macro_model(CauchyGreen::identity(), p).d) < 1e-5);
  CHECK_THROWS_AS(fd_tangent(s_of_c, CauchyGreen{1e-7, 1e-7, 0.0}), Error);
}

TEST_CASE("stretch_from_cauchy_green inverts right_cauchy_green") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-0.25, 0.25);
  for (int i = 0; i < 200; ++i) {
    const DefGradient f = DefGradient::symmetric(1.0 + u(rng), 1.0 + u(rng), u(rng));
    const CauchyGreen c = right_cauchy_green(f);
    const DefGradient g = stretch_from_cauchy_green(c);
    CHECK(g.f11 == doctest::Approx(f.f11).epsilon(1e-12));
    CHECK(g.f22 == doctest::Approx(f.f22).epsilon(1e-12));
    CHECK(g.f12 == doctest::Approx(f.f12).epsilon(1e-10));
  }
}
