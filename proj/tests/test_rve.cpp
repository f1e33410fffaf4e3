#include <doctest.h>

#include <random>

#include "hybridfem/rve.hpp"

using namespace hybridfem;

namespace {

// Small, fast realization used by most solves in this file.
RveSpec small_spec() {
  RveSpec spec;
  spec.n_inclusions = 3;
  spec.volume_fraction = 0.15;
  spec.target_elements = 420;
  spec.seed = 7;
  return spec;
}

RveSpec homogeneous_spec() {
  RveSpec spec;
  spec.n_inclusions = 0;
  spec.volume_fraction = 0.0;
  spec.target_elements = 260;
  spec.matrix = MicroMaterialParams::with_derived_c5(3.0, 1.5, 0.8, 2.0);
  spec.inclusion = spec.matrix;
  return spec;
}

Eigen::Matrix2d analytic_piola(const MicroMaterialParams& p, const DefGradient& f) {
  const MaterialEval ev = micro_material(right_cauchy_green(f), p);
  Eigen::Matrix2d smat;
  smat << ev.s.s11, ev.s.s12, ev.s.s12, ev.s.s22;
  return f.matrix() * smat;
}

}  // namespace

TEST_CASE("generate_rve: geometry, counts, determinism") {
  RveSpec spec;  // Table-1-like defaults
  RveGeometry geo;
  const Mesh mesh = generate_rve(spec, &geo);

  CHECK(geo.radius == doctest::Approx(std::sqrt(0.2 / (20.0 * M_PI))));
  CHECK(geo.radius == doctest::Approx(0.05642).epsilon(1e-3));
  CHECK(std::abs(static_cast<int>(mesh.tris.size()) - 7800) <= 0.15 * 7800);
  CHECK(geo.centers.size() == 20);
  CHECK(std::abs(geo.achieved_fraction - 0.2) < 0.005);
  mesh.validate();

  // Interior placement and pairwise separation.
  for (const auto& c : geo.centers) {
    CHECK(c.x() >= geo.radius);
    CHECK(c.x() <= spec.side - geo.radius);
    CHECK(c.y() >= geo.radius);
    CHECK(c.y() <= spec.side - geo.radius);
  }
  for (std::size_t i = 0; i < geo.centers.size(); ++i)
    for (std::size_t j = i + 1; j < geo.centers.size(); ++j)
      CHECK((geo.centers[i] - geo.centers[j]).norm() >= 2.1 * geo.radius - 1e-12);

  // Same seed reproduces the mesh bit-for-bit; another seed differs.
  RveGeometry geo2;
  const Mesh mesh2 = generate_rve(spec, &geo2);
  CHECK(mesh2.tri_tags == mesh.tri_tags);
  CHECK(geo2.centers[0] == geo.centers[0]);
  RveSpec other = spec;
  other.seed = 1;
  RveGeometry geo3;
  generate_rve(other, &geo3);
  CHECK(geo3.centers[0] != geo.centers[0]);

  // Homogeneous case.
  const Mesh plain = generate_rve(homogeneous_spec());
  for (int t : plain.tri_tags) CHECK(t == 0);

  RveSpec bad = spec;
  bad.volume_fraction = 0.9;  // cannot pack 20 interior circles at 90%
  CHECK_THROWS_AS(generate_rve(bad), Error);
}

TEST_CASE("applied_deformation_bc values") {
  const Mesh mesh = tri_grid_mesh(1.0, 4);
  SUBCASE("identity gives zero boundary displacement") {
    const auto bc = applied_deformation_bc(DefGradient::identity(), mesh, 1.0);
    for (const auto& d : bc.dirichlet) CHECK(d.rate == 0.0);
    // 16 boundary nodes, 2 dofs each
    CHECK(bc.dirichlet.size() == 32);
  }
  SUBCASE("uniaxial stretch") {
    const auto bc = applied_deformation_bc(DefGradient::symmetric(1.1, 1.0, 0.0), mesh, 1.0);
    const int node = nearest_node(mesh, {1.0, 0.5});
    for (const auto& d : bc.dirichlet) {
      if (d.node == node && d.dof == 0) CHECK(d.rate == doctest::Approx(0.1));
      if (d.node == node && d.dof == 1) CHECK(d.rate == doctest::Approx(0.0));
    }
  }
  SUBCASE("shear") {
    const auto bc = applied_deformation_bc(DefGradient::symmetric(1.0, 1.0, 0.05), mesh, 1.0);
    const int node = nearest_node(mesh, {0.5, 1.0});
    for (const auto& d : bc.dirichlet) {
      if (d.node == node && d.dof == 0) CHECK(d.rate == doctest::Approx(0.05));
      if (d.node == node && d.dof == 1) CHECK(d.rate == doctest::Approx(0.025));
    }
  }
  SUBCASE("asymmetric applied deformation is rejected") {
    CHECK_THROWS_AS(applied_deformation_bc(DefGradient{1.0, 1.0, 0.05, 0.0}, mesh, 1.0), Error);
  }
}

TEST_CASE("average fields: F_avg = F_app and the single-phase oracle") {
  const Homogenizer homog(homogeneous_spec());
  const DefGradient f_app = DefGradient::symmetric(1.08, 0.95, 0.03);

  const HomogenizedPoint point = homog.homogenize(f_app);
  // Homogeneous material: the affine map is exact, so S_rve matches the
  // analytic phase law.
  const MaterialEval ev = micro_material(right_cauchy_green(f_app), homogeneous_spec().matrix);
  CHECK(point.s_rve.s11 == doctest::Approx(ev.s.s11).epsilon(1e-8));
  CHECK(point.s_rve.s22 == doctest::Approx(ev.s.s22).epsilon(1e-8));
  CHECK(point.s_rve.s12 == doctest::Approx(ev.s.s12).epsilon(1e-8).scale(1.0));
  CHECK((point.d_rve - ev.d).cwiseAbs().maxCoeff() <= 1e-6 * ev.d.cwiseAbs().maxCoeff());

  // Reference configuration: stress-free, no spurious averages.
  const HomogenizedPoint ref = homog.homogenize(DefGradient::identity());
  CHECK(ref.s_rve.norm() <= 1e-10);
}

TEST_CASE("sensitivity first elasticity matches finite differences") {
  const RveSpec spec = small_spec();
  const Homogenizer homog(spec);
  const std::vector<const ConstitutiveLaw*> laws_check{};
  (void)laws_check;

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-0.08, 0.08);
  const MicroMaterial matrix_law(spec.matrix);
  const MicroMaterial inclusion_law(spec.inclusion);
  const std::vector<const ConstitutiveLaw*> laws{&matrix_law, &inclusion_law};

  for (int trial = 0; trial < 2; ++trial) {
    const DefGradient f_app = DefGradient::symmetric(1.0 + u(rng), 1.0 + u(rng), 0.5 * u(rng));

    FeProblem problem(homog.mesh(), laws, applied_deformation_bc(f_app, homog.mesh(), spec.side));
    Eigen::VectorXd disp = Eigen::VectorXd::Zero(problem.n_dofs());
    for (int n = 0; n < homog.mesh().n_nodes(); ++n) {
      const Eigen::Vector2d x = homog.mesh().nodes[static_cast<std::size_t>(n)];
      disp(2 * n) = (f_app.f11 - 1.0) * x.x() + f_app.f12 * x.y();
      disp(2 * n + 1) = f_app.f12 * x.x() + (f_app.f22 - 1.0) * x.y();
    }
    REQUIRE(problem.newton_solve(1.0, disp).converged);
    const Eigen::Matrix<double, 4, 3> a_sens = sensitivity_first_elasticity(problem, disp);

    // Central differences of P_avg with respect to (F11, F22, F12).
    const double h = 1e-6;
    Eigen::Matrix<double, 4, 3> a_fd;
    for (int m = 0; m < 3; ++m) {
      DefGradient fp = f_app, fm = f_app;
      double* comps_p[3] = {&fp.f11, &fp.f22, &fp.f12};
      double* comps_m[3] = {&fm.f11, &fm.f22, &fm.f12};
      *comps_p[m] += h;
      *comps_m[m] -= h;
      if (m == 2) {
        fp.f21 = fp.f12;
        fm.f21 = fm.f12;
      }
      const auto solve_avg = [&](const DefGradient& f) {
        FeProblem prob(homog.mesh(), laws, applied_deformation_bc(f, homog.mesh(), spec.side));
        Eigen::VectorXd d = disp;
        REQUIRE(prob.newton_solve(1.0, d).converged);
        return average_fields(prob, d).p_avg;
      };
      const Eigen::Matrix2d dp = (solve_avg(fp) - solve_avg(fm)) / (2.0 * h);
      a_fd.col(m) = Eigen::Vector4d(dp(0, 0), dp(1, 1), dp(0, 1), dp(1, 0));
    }
    const double scale = a_fd.cwiseAbs().maxCoeff();
    CHECK((a_sens - a_fd).cwiseAbs().maxCoeff() <= 1e-4 * scale);
  }
}

TEST_CASE("homogeneous RVE: sensitivity tangent equals the analytic first elasticity") {
  const RveSpec spec = homogeneous_spec();
  const Homogenizer homog(spec);
  const MicroMaterial law(spec.matrix);
  const std::vector<const ConstitutiveLaw*> laws{&law};
  const DefGradient f_app = DefGradient::symmetric(1.05, 0.97, 0.02);

  FeProblem problem(homog.mesh(), laws, applied_deformation_bc(f_app, homog.mesh(), spec.side));
  Eigen::VectorXd disp = Eigen::VectorXd::Zero(problem.n_dofs());
  for (int n = 0; n < homog.mesh().n_nodes(); ++n) {
    const Eigen::Vector2d x = homog.mesh().nodes[static_cast<std::size_t>(n)];
    disp(2 * n) = (f_app.f11 - 1.0) * x.x() + f_app.f12 * x.y();
    disp(2 * n + 1) = f_app.f12 * x.x() + (f_app.f22 - 1.0) * x.y();
  }
  REQUIRE(problem.newton_solve(1.0, disp).converged);
  const Eigen::Matrix<double, 4, 3> a_sens = sensitivity_first_elasticity(problem, disp);

  // Analytic columns by tight central differences of the closed-form P(F).
  const double h = 1e-7;
  for (int m = 0; m < 3; ++m) {
    DefGradient fp = f_app, fm = f_app;
    double* cp[3] = {&fp.f11, &fp.f22, &fp.f12};
    double* cm[3] = {&fm.f11, &fm.f22, &fm.f12};
    *cp[m] += h;
    *cm[m] -= h;
    if (m == 2) {
      fp.f21 = fp.f12;
      fm.f21 = fm.f12;
    }
    const Eigen::Matrix2d dp =
        (analytic_piola(spec.matrix, fp) - analytic_piola(spec.matrix, fm)) / (2.0 * h);
    const Eigen::Vector4d expect(dp(0, 0), dp(1, 1), dp(0, 1), dp(1, 0));
    CHECK((a_sens.col(m) - expect).cwiseAbs().maxCoeff() <=
          1e-6 * std::max(1.0, expect.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("second_from_first") {
  SUBCASE("collapses to the first elasticity tensor at F = I, S = 0") {
    const MacroModelParams mp{2.5};
    const TangentVoigt d0 = macro_model(CauchyGreen::identity(), mp).d;
    Eigen::Matrix<double, 4, 3> a_sens;
    for (int m = 0; m < 3; ++m) {
      const Eigen::Vector3d de = m == 0   ? Eigen::Vector3d(1, 0, 0)
                                 : m == 1 ? Eigen::Vector3d(0, 1, 0)
                                          : Eigen::Vector3d(0, 0, 2);
      const Eigen::Vector3d ds = d0 * de;
      a_sens.col(m) = Eigen::Vector4d(ds(0), ds(1), ds(2), ds(2));
    }
    const TangentVoigt d = second_from_first(a_sens, DefGradient::identity(), Stress2PK{});
    CHECK((d - d0).cwiseAbs().maxCoeff() <= 1e-12 * d0.cwiseAbs().maxCoeff());
  }

  SUBCASE("pure stress contribution enters as -delta_ik S_JL") {
    const Stress2PK s{2.0, -1.0, 0.5};
    const Eigen::Matrix<double, 4, 3> a_sens = Eigen::Matrix<double, 4, 3>::Zero();
    const TangentVoigt d = second_from_first(a_sens, DefGradient::identity(), s);
    // Expected columns: dS_m = -sym(V_m S), strain increment e_m = (1,0,0),
    // (0,1,0), (0,0,2).
    Eigen::Matrix2d smat;
    smat << s.s11, s.s12, s.s12, s.s22;
    const Eigen::Matrix2d v[3] = {(Eigen::Matrix2d() << 1, 0, 0, 0).finished(),
                                  (Eigen::Matrix2d() << 0, 0, 0, 1).finished(),
                                  (Eigen::Matrix2d() << 0, 1, 1, 0).finished()};
    for (int m = 0; m < 3; ++m) {
      Eigen::Matrix2d ds = -v[m] * smat;
      ds = (0.5 * (ds + ds.transpose())).eval();
      const double scale = m == 2 ? 0.5 : 1.0;  // e_3 = 2 E_12
      CHECK(d(0, m) == doctest::Approx(scale * ds(0, 0)));
      CHECK(d(1, m) == doctest::Approx(scale * ds(1, 1)));
      CHECK(d(2, m) == doctest::Approx(scale * ds(0, 1)));
    }
  }

  SUBCASE("matches finite differences of S_rve w.r.t. C on a composite") {
    const RveSpec spec = small_spec();
    const Homogenizer homog(spec);
    const DefGradient f_app = DefGradient::symmetric(1.06, 0.96, 0.025);
    const HomogenizedPoint point = homog.homogenize(f_app);

    const double h = 2e-5;
    TangentVoigt d_fd;
    for (int j = 0; j < 3; ++j) {
      CauchyGreen cp = point.c, cm = point.c;
      if (j == 0) {
        cp.c11 += 2 * h;
        cm.c11 -= 2 * h;
      } else if (j == 1) {
        cp.c22 += 2 * h;
        cm.c22 -= 2 * h;
      } else {
        cp.c12 += h;
        cm.c12 -= h;
      }
      const HomogenizedPoint pp = homog.homogenize(stretch_from_cauchy_green(cp));
      const HomogenizedPoint pm = homog.homogenize(stretch_from_cauchy_green(cm));
      d_fd(0, j) = (pp.s_rve.s11 - pm.s_rve.s11) / (2 * h);
      d_fd(1, j) = (pp.s_rve.s22 - pm.s_rve.s22) / (2 * h);
      d_fd(2, j) = (pp.s_rve.s12 - pm.s_rve.s12) / (2 * h);
    }
    CHECK((point.d_rve - d_fd).cwiseAbs().maxCoeff() <= 1e-3 * d_fd.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("homogenize: reference state, Hill-Mandel, uniaxial sweep") {
  const RveSpec spec = small_spec();
  const Homogenizer homog(spec);

  SUBCASE("stress-free reference with positive-definite tangent") {
    const HomogenizedPoint ref = homog.homogenize(DefGradient::identity());
    CHECK(ref.s_rve.norm() <= 1e-9);
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(ref.d_rve);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
  }

  SUBCASE("Hill-Mandel virtual-work identity") {
    CHECK(homog.hill_mandel_gap(DefGradient::symmetric(1.07, 0.95, 0.04), 3) <= 1e-8);
    CHECK(homog.hill_mandel_gap(DefGradient::symmetric(0.93, 1.02, -0.05), 4) <= 1e-8);
  }

  SUBCASE("uniaxial S11 response is smooth and monotone") {
    std::vector<double> s11;
    for (double f11 : {0.9, 0.95, 1.0, 1.05, 1.1, 1.15})
      s11.push_back(homog.homogenize(DefGradient::symmetric(f11, 1.0, 0.0)).s_rve.s11);
    for (std::size_t i = 0; i + 1 < s11.size(); ++i) CHECK(s11[i] < s11[i + 1]);
  }

  SUBCASE("determinism across instances") {
    const Homogenizer homog2(spec);
    const DefGradient f = DefGradient::symmetric(1.04, 0.98, 0.01);
    const HomogenizedPoint a = homog.homogenize(f);
    const HomogenizedPoint b = homog2.homogenize(f);
    CHECK(a.s_rve.s11 == b.s_rve.s11);
    CHECK(a.s_rve.s12 == b.s_rve.s12);
    CHECK((a.d_rve - b.d_rve).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("homogenized stiffness at identity sits between Reuss and Voigt bounds") {
  RveSpec spec = small_spec();
  spec.matrix = MicroMaterialParams::with_derived_c5(1.0, 1.0, 1.0, 1.0);
  spec.inclusion = MicroMaterialParams::with_derived_c5(1000.0, 1000.0, 1000.0, 1000.0);
  const Homogenizer homog(spec);
  const double vf = homog.geometry().achieved_fraction;

  const TangentVoigt d_m = micro_material(CauchyGreen::identity(), spec.matrix).d;
  const TangentVoigt d_i = micro_material(CauchyGreen::identity(), spec.inclusion).d;
  const TangentVoigt voigt = vf * d_i + (1.0 - vf) * d_m;
  const TangentVoigt reuss = (vf * d_i.inverse() + (1.0 - vf) * d_m.inverse()).inverse();

  const TangentVoigt d_rve = homog.homogenize(DefGradient::identity()).d_rve;
  const double tol = 1e-8 * voigt.cwiseAbs().maxCoeff();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> upper(voigt - d_rve);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> lower(d_rve - reuss);
  CHECK(upper.eigenvalues().minCoeff() >= -tol);
  CHECK(lower.eigenvalues().minCoeff() >= -tol);
}

TEST_CASE("RveSpec json round trip and hashing") {
  RveSpec spec = small_spec();
  spec.write_json_file("/tmp/hybridfem_rve_spec.json");
  const RveSpec loaded = RveSpec::from_json_file("/tmp/hybridfem_rve_spec.json");
  CHECK(loaded.canonical_json() == spec.canonical_json());
  CHECK(loaded.hash() == spec.hash());
  RveSpec other = spec;
  other.seed += 1;
  CHECK(other.hash() != spec.hash());
}
