#include "hybridfem/rve.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

namespace hybridfem {

namespace {

nlohmann::json params_to_json(const MicroMaterialParams& p) {
  return {{"c1", p.c1}, {"c2", p.c2}, {"c3", p.c3}, {"c4", p.c4}, {"c5", p.c5}};
}

MicroMaterialParams params_from_json(const nlohmann::json& j) {
  MicroMaterialParams p;
  p.c1 = j.at("c1").get<double>();
  p.c2 = j.at("c2").get<double>();
  p.c3 = j.at("c3").get<double>();
  p.c4 = j.at("c4").get<double>();
  p.c5 = j.contains("c5") ? j.at("c5").get<double>() : 2.0 * p.c1 + 4.0 * p.c2 + 2.0 * p.c3;
  return p;
}

}  // namespace

double RveSpec::nominal_radius() const {
  if (n_inclusions <= 0) return 0.0;
  return side * std::sqrt(volume_fraction / (n_inclusions * M_PI));
}

std::string RveSpec::canonical_json() const {
  nlohmann::json j;
  j["side"] = side;
  j["n_inclusions"] = n_inclusions;
  j["volume_fraction"] = volume_fraction;
  j["matrix"] = params_to_json(matrix);
  j["inclusion"] = params_to_json(inclusion);
  j["seed"] = seed;
  j["target_elements"] = target_elements;
  return j.dump();
}

std::string RveSpec::hash() const { return hex64(fnv1a(canonical_json())); }

RveSpec RveSpec::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("RveSpec: cannot open " + path);
  nlohmann::json j;
  in >> j;
  RveSpec s;
  s.side = j.value("side", s.side);
  s.n_inclusions = j.value("n_inclusions", s.n_inclusions);
  s.volume_fraction = j.value("volume_fraction", s.volume_fraction);
  if (j.contains("matrix")) s.matrix = params_from_json(j.at("matrix"));
  if (j.contains("inclusion")) s.inclusion = params_from_json(j.at("inclusion"));
  s.seed = j.value("seed", s.seed);
  s.target_elements = j.value("target_elements", s.target_elements);
  return s;
}

void RveSpec::write_json_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("RveSpec: cannot open " + path);
  out << canonical_json() << "\n";
}

Mesh generate_rve(const RveSpec& spec, RveGeometry* geometry) {
  if (spec.side <= 0.0 || spec.n_inclusions < 0 || spec.volume_fraction < 0.0 ||
      spec.volume_fraction >= 1.0 || spec.target_elements < 2)
    throw Error("generate_rve: invalid specification");
  if (spec.n_inclusions > 0 && spec.volume_fraction <= 0.0)
    throw Error("generate_rve: inclusions require a positive volume fraction");

  const int grid = std::max(1, static_cast<int>(std::lround(
                                    std::sqrt(spec.target_elements / 2.0))));
  Mesh mesh = tri_grid_mesh(spec.side, grid);
  const int n_el = static_cast<int>(mesh.tris.size());

  RveGeometry geo;
  geo.radius = spec.nominal_radius();

  if (spec.n_inclusions > 0) {
    // Interior-only rejection sampling: minimum centre distance 2.1 r, wall
    // clearance 0.05 r between inclusion edge and box.
    const double r = geo.radius;
    const double lo = r * 1.05;
    const double hi = spec.side - r * 1.05;
    if (hi <= lo) throw Error("generate_rve: inclusions do not fit the box");
    const double min_dist2 = (2.1 * r) * (2.1 * r);
    bool placed = false;
    for (std::uint64_t restart = 0; restart < 32 && !placed; ++restart) {
      std::mt19937_64 rng(spec.seed * 0x9e3779b97f4a7c15ull + restart + 1);
      std::uniform_real_distribution<double> pos(lo, hi);
      std::vector<Eigen::Vector2d> centers;
      int attempts = 0;
      while (static_cast<int>(centers.size()) < spec.n_inclusions && attempts < 20000) {
        ++attempts;
        const Eigen::Vector2d c(pos(rng), pos(rng));
        bool ok = true;
        for (const auto& o : centers)
          if ((c - o).squaredNorm() < min_dist2) {
            ok = false;
            break;
          }
        if (ok) centers.push_back(c);
      }
      if (static_cast<int>(centers.size()) == spec.n_inclusions) {
        geo.centers = std::move(centers);
        placed = true;
      }
    }
    if (!placed) throw Error("generate_rve: packing failed after bounded rejection attempts");

    // Phase assignment by signed centroid margin; the element count is pinned
    // to round(v_f n_el) so the achieved area fraction matches v_f to within
    // half an element.
    std::vector<std::pair<double, int>> margin(static_cast<std::size_t>(n_el));
    for (int e = 0; e < n_el; ++e) {
      const auto& t = mesh.tris[static_cast<std::size_t>(e)];
      const Eigen::Vector2d centroid = (mesh.nodes[static_cast<std::size_t>(t[0])] +
                                        mesh.nodes[static_cast<std::size_t>(t[1])] +
                                        mesh.nodes[static_cast<std::size_t>(t[2])]) /
                                       3.0;
      double dmin = std::numeric_limits<double>::max();
      for (const auto& c : geo.centers) dmin = std::min(dmin, (centroid - c).norm());
      margin[static_cast<std::size_t>(e)] = {r - dmin, e};
    }
    std::sort(margin.begin(), margin.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    const int target = static_cast<int>(std::lround(spec.volume_fraction * n_el));
    for (int k = 0; k < target; ++k)
      mesh.tri_tags[static_cast<std::size_t>(margin[static_cast<std::size_t>(k)].second)] = 1;
    geo.inclusion_elements = target;
    geo.achieved_fraction = static_cast<double>(target) / n_el;
  }

  if (geometry) *geometry = geo;
  return mesh;
}

BoundaryConditions applied_deformation_bc(const DefGradient& f_app, const Mesh& mesh,
                                          double side) {
  if (!f_app.is_symmetric())
    throw Error("applied_deformation_bc: F_app must be symmetric (F21 = F12)");
  if (!(f_app.det() > 0.0)) throw Error("applied_deformation_bc: det(F_app) <= 0");
  const double tol = 1e-12 * side;
  BoundaryConditions bc;
  for (int n = 0; n < mesh.n_nodes(); ++n) {
    const Eigen::Vector2d x = mesh.nodes[static_cast<std::size_t>(n)];
    const bool on_boundary = x.x() <= tol || x.x() >= side - tol || x.y() <= tol ||
                             x.y() >= side - tol;
    if (!on_boundary) continue;
    bc.dirichlet.push_back({n, 0, (f_app.f11 - 1.0) * x.x() + f_app.f12 * x.y()});
    bc.dirichlet.push_back({n, 1, f_app.f12 * x.x() + (f_app.f22 - 1.0) * x.y()});
  }
  return bc;
}

AveragedFields average_fields(const FeProblem& problem, const Eigen::VectorXd& u) {
  AveragedFields out;
  out.f_avg.setZero();
  out.p_avg.setZero();
  double volume = 0.0;
  for (const auto& gp : problem.gauss_geometry()) {
    const Eigen::Matrix2d f = problem.def_gradient(gp, u);
    const CauchyGreen c{f(0, 0) * f(0, 0) + f(1, 0) * f(1, 0),
                        f(0, 1) * f(0, 1) + f(1, 1) * f(1, 1),
                        f(0, 0) * f(0, 1) + f(1, 0) * f(1, 1)};
    const MaterialEval ev = problem.law(gp.tag).evaluate(c);
    Eigen::Matrix2d smat;
    smat << ev.s.s11, ev.s.s12, ev.s.s12, ev.s.s22;
    out.f_avg += gp.w * f;
    out.p_avg += gp.w * (f * smat);
    volume += gp.w;
  }
  out.f_avg /= volume;
  out.p_avg /= volume;
  return out;
}

namespace {

inline int pair4(int i, int j) { return i == j ? i : (i == 0 ? 2 : 3); }  // 11,22,12,21
inline int pair3(int i, int j) { return i == j ? i : 2; }                 // Voigt 11,22,12

// Local first elasticity A_iJkL = delta_ik S_JL + F_iA D_AJBL F_kB as a 4x4
// matrix over the index pairs (11, 22, 12, 21).
Eigen::Matrix4d local_first_elasticity(const Eigen::Matrix2d& f, const MaterialEval& ev) {
  Eigen::Matrix2d smat;
  smat << ev.s.s11, ev.s.s12, ev.s.s12, ev.s.s22;
  Eigen::Matrix4d a = Eigen::Matrix4d::Zero();
  for (int i = 0; i < 2; ++i)
    for (int J = 0; J < 2; ++J)
      for (int k = 0; k < 2; ++k)
        for (int L = 0; L < 2; ++L) {
          double v = (i == k) ? smat(J, L) : 0.0;
          for (int A = 0; A < 2; ++A)
            for (int B = 0; B < 2; ++B)
              v += f(i, A) * ev.d(pair3(A, J), pair3(B, L)) * f(k, B);
          a(pair4(i, J), pair4(k, L)) = v;
        }
  return a;
}

}  // namespace

Eigen::Matrix<double, 4, 3> sensitivity_first_elasticity(FeProblem& problem,
                                                         const Eigen::VectorXd& u) {
  // d(u_bc)/ds for s = (F11, F22, F12): (X1,0), (0,X2), (X2,X1) on every
  // prescribed node.
  const auto& prescribed = problem.prescribed_dofs();
  Eigen::MatrixXd g(prescribed.size(), 3);
  for (std::size_t row = 0; row < prescribed.size(); ++row) {
    const int dof = prescribed[row];
    const Eigen::Vector2d x = problem.mesh().nodes[static_cast<std::size_t>(dof / 2)];
    if (dof % 2 == 0) {
      g(static_cast<Eigen::Index>(row), 0) = x.x();
      g(static_cast<Eigen::Index>(row), 1) = 0.0;
      g(static_cast<Eigen::Index>(row), 2) = x.y();
    } else {
      g(static_cast<Eigen::Index>(row), 0) = 0.0;
      g(static_cast<Eigen::Index>(row), 1) = x.y();
      g(static_cast<Eigen::Index>(row), 2) = x.x();
    }
  }
  const Eigen::MatrixXd w = problem.sensitivity_solve(u, 1.0, g);

  // Total nodal sensitivities: free rows from the adjoint solve, prescribed
  // rows from the boundary data.
  Eigen::MatrixXd du_ds = Eigen::MatrixXd::Zero(problem.n_dofs(), 3);
  {
    int free_row = 0;
    std::vector<char> is_prescribed(static_cast<std::size_t>(problem.n_dofs()), 0);
    for (std::size_t i = 0; i < prescribed.size(); ++i) {
      is_prescribed[static_cast<std::size_t>(prescribed[i])] = 1;
      du_ds.row(prescribed[i]) = g.row(static_cast<Eigen::Index>(i));
    }
    for (int dof = 0; dof < problem.n_dofs(); ++dof)
      if (!is_prescribed[static_cast<std::size_t>(dof)]) du_ds.row(dof) = w.row(free_row++);
  }

  Eigen::Matrix<double, 4, 3> a_sens = Eigen::Matrix<double, 4, 3>::Zero();
  double volume = 0.0;
  for (const auto& gp : problem.gauss_geometry()) {
    const Eigen::Matrix2d f = problem.def_gradient(gp, u);
    const CauchyGreen c{f(0, 0) * f(0, 0) + f(1, 0) * f(1, 0),
                        f(0, 1) * f(0, 1) + f(1, 1) * f(1, 1),
                        f(0, 0) * f(0, 1) + f(1, 0) * f(1, 1)};
    const MaterialEval ev = problem.law(gp.tag).evaluate(c);
    const Eigen::Matrix4d a_loc = local_first_elasticity(f, ev);
    for (int m = 0; m < 3; ++m) {
      Eigen::Matrix2d df = Eigen::Matrix2d::Zero();
      for (int a = 0; a < gp.n_nodes; ++a) {
        const int node = gp.nodes[static_cast<std::size_t>(a)];
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) df(i, j) += du_ds(2 * node + i, m) * gp.grads(a, j);
      }
      const Eigen::Vector4d df_vec(df(0, 0), df(1, 1), df(0, 1), df(1, 0));
      a_sens.col(m) += gp.w * (a_loc * df_vec);
    }
    volume += gp.w;
  }
  return a_sens / volume;
}

TangentVoigt second_from_first(const Eigen::Matrix<double, 4, 3>& a_sens,
                               const DefGradient& f_avg, const Stress2PK& s_rve) {
  if (!(f_avg.det() > 0.0)) throw Error("second_from_first: singular F_avg");
  if (!f_avg.is_symmetric(1e-12)) throw Error("second_from_first: F_avg must be symmetric");
  const Eigen::Matrix2d f = f_avg.matrix();
  const Eigen::Matrix2d finv = f.inverse();
  Eigen::Matrix2d smat;
  smat << s_rve.s11, s_rve.s12, s_rve.s12, s_rve.s22;

  // Symmetric probe directions of the applied stretch.
  const Eigen::Matrix2d v[3] = {(Eigen::Matrix2d() << 1, 0, 0, 0).finished(),
                                (Eigen::Matrix2d() << 0, 0, 0, 1).finished(),
                                (Eigen::Matrix2d() << 0, 1, 1, 0).finished()};

  Eigen::Matrix3d j_s, j_e;
  for (int m = 0; m < 3; ++m) {
    Eigen::Matrix2d dp;
    dp << a_sens(0, m), a_sens(2, m), a_sens(3, m), a_sens(1, m);
    // dS = F^-1 dP - F^-1 dF S, the matrix form of the component rule
    // A_iJkL - delta_ik S_JL contracted with F^-1.
    Eigen::Matrix2d ds = finv * dp - finv * v[m] * smat;
    ds = (0.5 * (ds + ds.transpose())).eval();
    const Eigen::Matrix2d dc = v[m] * f + f * v[m];
    j_s.col(m) = Eigen::Vector3d(ds(0, 0), ds(1, 1), ds(0, 1));
    j_e.col(m) = Eigen::Vector3d(0.5 * dc(0, 0), 0.5 * dc(1, 1), dc(0, 1));
  }
  const double det = j_e.determinant();
  if (std::abs(det) < 1e-14) throw Error("second_from_first: degenerate strain map");
  TangentVoigt d = j_s * j_e.inverse();
  return 0.5 * (d + d.transpose());
}

Homogenizer::Homogenizer(const RveSpec& spec)
    : spec_(spec),
      mesh_(generate_rve(spec, &geometry_)),
      matrix_law_(spec.matrix),
      inclusion_law_(spec.inclusion) {
  if (!spec.matrix.stress_free_reference(1e-9) || !spec.inclusion.stress_free_reference(1e-9))
    throw Error("Homogenizer: phase laws must satisfy the c5 constraint");
}

Homogenizer::SolvedState Homogenizer::solve(const DefGradient& f_app) const {
  if (!f_app.is_symmetric()) throw Error("homogenize: F_app must be symmetric");
  const std::vector<const ConstitutiveLaw*> laws{&matrix_law_, &inclusion_law_};
  const NewtonOptions opt;

  // Proportional sub-stepping of F(t) = I + t (F_app - I), escalated until
  // the path converges or the 10-increment cap is hit.
  std::string last_failure;
  for (int n_sub : {1, 2, 5, 10}) {
    auto problem = std::make_unique<FeProblem>(
        mesh_, laws, applied_deformation_bc(f_app, mesh_, spec_.side));
    Eigen::VectorXd u = Eigen::VectorXd::Zero(problem->n_dofs());
    bool ok = true;
    for (int k = 1; k <= n_sub && ok; ++k) {
      const double t = static_cast<double>(k) / n_sub;
      // Affine predictor: increment every node by the applied field change.
      const double dt = 1.0 / n_sub;
      for (int n = 0; n < mesh_.n_nodes(); ++n) {
        const Eigen::Vector2d x = mesh_.nodes[static_cast<std::size_t>(n)];
        u(2 * n) += dt * ((f_app.f11 - 1.0) * x.x() + f_app.f12 * x.y());
        u(2 * n + 1) += dt * (f_app.f12 * x.x() + (f_app.f22 - 1.0) * x.y());
      }
      const NewtonResult nr = problem->newton_solve(t, u, opt);
      if (!nr.converged) {
        ok = false;
        last_failure = "sub-step " + std::to_string(k) + "/" + std::to_string(n_sub);
      }
    }
    if (ok) return {std::move(problem), std::move(u)};
  }
  throw Error("homogenize: microscale divergence at F_app = (" + std::to_string(f_app.f11) +
              ", " + std::to_string(f_app.f22) + ", " + std::to_string(f_app.f12) +
              "), last failure at " + last_failure);
}

HomogenizedPoint Homogenizer::homogenize(const DefGradient& f_app) const {
  SolvedState state = solve(f_app);
  const AveragedFields avg = average_fields(*state.problem, state.u);

  // F_avg = F_app holds identically for conforming meshes under the
  // homogeneous displacement boundary conditions; treat violations as setup
  // errors.
  const Eigen::Matrix2d f_err = avg.f_avg - f_app.matrix();
  if (f_err.cwiseAbs().maxCoeff() > 1e-8)
    throw Error("homogenize: F_avg deviates from F_app");

  const Eigen::Matrix2d s2 = avg.f_avg.inverse() * avg.p_avg;
  const Stress2PK s_rve{s2(0, 0), s2(1, 1), 0.5 * (s2(0, 1) + s2(1, 0))};

  const Eigen::Matrix<double, 4, 3> a_sens =
      sensitivity_first_elasticity(*state.problem, state.u);
  const DefGradient f_sym = DefGradient::symmetric(
      avg.f_avg(0, 0), avg.f_avg(1, 1), 0.5 * (avg.f_avg(0, 1) + avg.f_avg(1, 0)));

  HomogenizedPoint point;
  point.f_app = f_app;
  point.c = right_cauchy_green(f_app);
  point.s_rve = s_rve;
  point.d_rve = second_from_first(a_sens, f_sym, s_rve);
  return point;
}

double Homogenizer::hill_mandel_gap(const DefGradient& f_app, std::uint64_t probe_seed) const {
  SolvedState state = solve(f_app);
  const AveragedFields avg = average_fields(*state.problem, state.u);

  std::mt19937_64 rng(probe_seed);
  std::uniform_real_distribution<double> delta(-0.1, 0.1);
  const Eigen::Matrix2d df_app =
      (Eigen::Matrix2d() << delta(rng), delta(rng), 0.0, delta(rng)).finished();

  // Virtual field: affine part matching delta-F on the boundary plus a random
  // interior bubble. The identity then probes discrete equilibrium.
  std::uniform_real_distribution<double> bubble(-0.05 * spec_.side, 0.05 * spec_.side);
  Eigen::VectorXd du(state.problem->n_dofs());
  std::vector<char> prescribed(static_cast<std::size_t>(state.problem->n_dofs()), 0);
  for (int dof : state.problem->prescribed_dofs()) prescribed[static_cast<std::size_t>(dof)] = 1;
  for (int n = 0; n < mesh_.n_nodes(); ++n) {
    const Eigen::Vector2d x = mesh_.nodes[static_cast<std::size_t>(n)];
    const Eigen::Vector2d affine = df_app * x;
    for (int i = 0; i < 2; ++i) {
      du(2 * n + i) = affine(i);
      if (!prescribed[static_cast<std::size_t>(2 * n + i)]) du(2 * n + i) += bubble(rng);
    }
  }

  double lhs = 0.0;
  double volume = 0.0;
  for (const auto& gp : state.problem->gauss_geometry()) {
    const Eigen::Matrix2d f = state.problem->def_gradient(gp, state.u);
    const CauchyGreen c{f(0, 0) * f(0, 0) + f(1, 0) * f(1, 0),
                        f(0, 1) * f(0, 1) + f(1, 1) * f(1, 1),
                        f(0, 0) * f(0, 1) + f(1, 0) * f(1, 1)};
    const MaterialEval ev = state.problem->law(gp.tag).evaluate(c);
    Eigen::Matrix2d smat;
    smat << ev.s.s11, ev.s.s12, ev.s.s12, ev.s.s22;
    const Eigen::Matrix2d p = f * smat;
    Eigen::Matrix2d df = Eigen::Matrix2d::Zero();
    for (int a = 0; a < gp.n_nodes; ++a) {
      const int node = gp.nodes[static_cast<std::size_t>(a)];
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) df(i, j) += du(2 * node + i) * gp.grads(a, j);
    }
    lhs += gp.w * (p.array() * df.array()).sum();
    volume += gp.w;
  }
  lhs /= volume;
  const double rhs = (avg.p_avg.array() * df_app.array()).sum();
  return std::abs(lhs - rhs) / std::max(std::abs(rhs), 1e-12);
}

}  // namespace hybridfem
