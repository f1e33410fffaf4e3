#include "hybridfem/fem.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

namespace hybridfem {

namespace {

constexpr double kGp = 0.577350269189625764509148780502;  // 1/sqrt(3)

// Bilinear Q4 shape functions on [-1,1]^2, counter-clockwise node order.
void q4_shape(double xi, double eta, double n[4], double dxi[4], double deta[4]) {
  n[0] = 0.25 * (1 - xi) * (1 - eta);
  n[1] = 0.25 * (1 + xi) * (1 - eta);
  n[2] = 0.25 * (1 + xi) * (1 + eta);
  n[3] = 0.25 * (1 - xi) * (1 + eta);
  dxi[0] = -0.25 * (1 - eta);
  dxi[1] = 0.25 * (1 - eta);
  dxi[2] = 0.25 * (1 + eta);
  dxi[3] = -0.25 * (1 + eta);
  deta[0] = -0.25 * (1 - xi);
  deta[1] = -0.25 * (1 + xi);
  deta[2] = 0.25 * (1 + xi);
  deta[3] = 0.25 * (1 - xi);
}

// One Gauss point of the total-Lagrangian residual and tangent:
// r = B^T s, K = B^T D B + geometric term grad(N_a) . S grad(N_b).
template <int N>
void gauss_point_kernel(const Eigen::Matrix<double, N, 2>& grads, double w,
                        const Eigen::Matrix<double, N, 2>& u_e, const ConstitutiveLaw& law,
                        Eigen::Matrix<double, 2 * N, 1>* r_e,
                        Eigen::Matrix<double, 2 * N, 2 * N>* k_e) {
  const Eigen::Matrix2d grad_u = u_e.transpose() * grads;
  const Eigen::Matrix2d f = Eigen::Matrix2d::Identity() + grad_u;
  const CauchyGreen c{f(0, 0) * f(0, 0) + f(1, 0) * f(1, 0),
                      f(0, 1) * f(0, 1) + f(1, 1) * f(1, 1),
                      f(0, 0) * f(0, 1) + f(1, 0) * f(1, 1)};
  const MaterialEval ev = law.evaluate(c);

  // delta-E rows in Voigt (11, 22, 2*12): B(:, 2a+i) = d e / d u_{a,i}.
  Eigen::Matrix<double, 3, 2 * N> b;
  for (int a = 0; a < N; ++a) {
    const double g1 = grads(a, 0), g2 = grads(a, 1);
    for (int i = 0; i < 2; ++i) {
      b(0, 2 * a + i) = f(i, 0) * g1;
      b(1, 2 * a + i) = f(i, 1) * g2;
      b(2, 2 * a + i) = f(i, 0) * g2 + f(i, 1) * g1;
    }
  }
  const Eigen::Vector3d s(ev.s.s11, ev.s.s22, ev.s.s12);
  if (r_e) *r_e += w * b.transpose() * s;
  if (k_e) {
    *k_e += w * b.transpose() * ev.d * b;
    Eigen::Matrix2d smat;
    smat << ev.s.s11, ev.s.s12, ev.s.s12, ev.s.s22;
    for (int a = 0; a < N; ++a) {
      const Eigen::Vector2d sg = smat * grads.row(a).transpose();
      for (int bb = 0; bb < N; ++bb) {
        const double kgeo = w * grads.row(bb).dot(sg);
        (*k_e)(2 * a, 2 * bb) += kgeo;
        (*k_e)(2 * a + 1, 2 * bb + 1) += kgeo;
      }
    }
  }
}

}  // namespace

void BoundaryConditions::validate(int n_nodes) const {
  std::unordered_map<long, double> seen;
  for (const auto& d : dirichlet) {
    if (d.node < 0 || d.node >= n_nodes || d.dof < 0 || d.dof > 1)
      throw Error("BoundaryConditions: Dirichlet entry out of range");
    const long key = 2L * d.node + d.dof;
    const auto it = seen.find(key);
    if (it != seen.end() && it->second != d.rate)
      throw Error("BoundaryConditions: conflicting Dirichlet values on node " +
                  std::to_string(d.node));
    seen[key] = d.rate;
  }
  for (const auto& t : tractions) {
    if (t.n0 < 0 || t.n0 >= n_nodes || t.n1 < 0 || t.n1 >= n_nodes)
      throw Error("BoundaryConditions: traction edge out of range");
    if (!(t.s0 >= 0.0 && t.s1 <= 1.0 && t.s0 < t.s1))
      throw Error("BoundaryConditions: traction sub-interval invalid");
    for (int node : {t.n0, t.n1})
      for (int dof = 0; dof < 2; ++dof)
        if (t.traction(dof) != 0.0 && seen.count(2L * node + dof))
          throw Error("BoundaryConditions: dof is both fixed and traction-loaded (node " +
                      std::to_string(node) + ")");
  }
}

double SolveReport::average_iterations(double up_to_load) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& s : steps) {
    if (!s.converged || s.load_factor > up_to_load + 1e-12) continue;
    sum += s.iterations;
    ++n;
  }
  if (n == 0) throw Error("SolveReport: no converged steps up to the requested load");
  return sum / n;
}

double ipi_at(const SolveReport& report, const SolveReport& reference, double load_level) {
  if (report.last_converged_load < load_level - 1e-9 ||
      reference.last_converged_load < load_level - 1e-9)
    throw Error("ipi: a report does not reach the requested load level");
  return report.average_iterations(load_level) / reference.average_iterations(load_level);
}

double ipi(const SolveReport& report, const SolveReport& reference) {
  if (std::abs(report.last_converged_load - reference.last_converged_load) >
      1e-9 * std::max(1.0, std::abs(reference.last_converged_load)))
    throw Error("ipi: reports reach different load levels; use ipi_at");
  return ipi_at(report, reference, report.last_converged_load);
}

FeProblem::FeProblem(const Mesh& mesh, const ConstitutiveLaw& law, BoundaryConditions bc)
    : FeProblem(mesh, std::vector<const ConstitutiveLaw*>{&law}, std::move(bc)) {}

FeProblem::FeProblem(const Mesh& mesh, std::vector<const ConstitutiveLaw*> laws,
                     BoundaryConditions bc)
    : mesh_(&mesh), laws_(std::move(laws)), bc_(std::move(bc)) {
  mesh.validate();
  for (int tag : mesh.quad_tags)
    if (tag < 0 || tag >= static_cast<int>(laws_.size()))
      throw Error("FeProblem: element tag without a law");
  for (int tag : mesh.tri_tags)
    if (tag < 0 || tag >= static_cast<int>(laws_.size()))
      throw Error("FeProblem: element tag without a law");
  bc_.validate(mesh.n_nodes());
  build_gauss_geometry();

  std::vector<char> is_prescribed(static_cast<std::size_t>(n_dofs()), 0);
  std::vector<double> rate(static_cast<std::size_t>(n_dofs()), 0.0);
  for (const auto& d : bc_.dirichlet) {
    const int dof = 2 * d.node + d.dof;
    is_prescribed[static_cast<std::size_t>(dof)] = 1;
    rate[static_cast<std::size_t>(dof)] = d.rate;
  }
  free_index_.assign(static_cast<std::size_t>(n_dofs()), -1);
  for (int dof = 0; dof < n_dofs(); ++dof) {
    if (is_prescribed[static_cast<std::size_t>(dof)]) {
      prescribed_dofs_.push_back(dof);
      prescribed_rates_.push_back(rate[static_cast<std::size_t>(dof)]);
    } else {
      free_index_[static_cast<std::size_t>(dof)] = static_cast<int>(free_dofs_.size());
      free_dofs_.push_back(dof);
    }
  }

  // Dead loads at unit load factor: edge tractions plus a uniform body force.
  f_ext_ = Eigen::VectorXd::Zero(n_dofs());
  for (const auto& t : bc_.tractions) {
    const Eigen::Vector2d x0 = mesh.nodes[static_cast<std::size_t>(t.n0)];
    const Eigen::Vector2d x1 = mesh.nodes[static_cast<std::size_t>(t.n1)];
    const double le = (x1 - x0).norm();
    const double ds = t.s1 - t.s0;
    const double mid = 0.5 * (t.s0 + t.s1);
    // Consistent loads of the linear edge shape functions over [s0, s1].
    const double w0 = le * ds * (1.0 - mid);
    const double w1 = le * ds * mid;
    for (int dof = 0; dof < 2; ++dof) {
      f_ext_(2 * t.n0 + dof) += w0 * t.traction(dof);
      f_ext_(2 * t.n1 + dof) += w1 * t.traction(dof);
    }
  }
  if (bc_.body_force.squaredNorm() > 0.0) {
    for (const auto& gp : gauss_) {
      for (int a = 0; a < gp.n_nodes; ++a)
        for (int dof = 0; dof < 2; ++dof)
          f_ext_(2 * gp.nodes[static_cast<std::size_t>(a)] + dof) +=
              gp.w * gp.shape[static_cast<std::size_t>(a)] * bc_.body_force(dof);
    }
  }
}

void FeProblem::build_gauss_geometry() {
  const Mesh& m = *mesh_;
  gauss_.reserve(4 * m.quads.size() + m.tris.size());
  int element = 0;
  for (std::size_t e = 0; e < m.quads.size(); ++e, ++element) {
    const auto& q = m.quads[e];
    Eigen::Matrix<double, 4, 2> xe;
    for (int a = 0; a < 4; ++a) xe.row(a) = m.nodes[static_cast<std::size_t>(q[a])].transpose();
    for (int gx = 0; gx < 2; ++gx) {
      for (int gy = 0; gy < 2; ++gy) {
        double n[4], dxi[4], deta[4];
        q4_shape(gx ? kGp : -kGp, gy ? kGp : -kGp, n, dxi, deta);
        Eigen::Matrix2d jac = Eigen::Matrix2d::Zero();
        for (int a = 0; a < 4; ++a) {
          jac(0, 0) += dxi[a] * xe(a, 0);
          jac(0, 1) += dxi[a] * xe(a, 1);
          jac(1, 0) += deta[a] * xe(a, 0);
          jac(1, 1) += deta[a] * xe(a, 1);
        }
        const double det = jac.determinant();
        if (det <= 0.0) throw Error("FeProblem: non-positive Jacobian in quad");
        const Eigen::Matrix2d jinv = jac.inverse();
        GaussPointGeom gp;
        gp.element = element;
        gp.n_nodes = 4;
        gp.tag = m.quad_tags[e];
        gp.X.setZero();
        for (int a = 0; a < 4; ++a) {
          gp.nodes[static_cast<std::size_t>(a)] = q[a];
          gp.shape[static_cast<std::size_t>(a)] = n[a];
          // dN/dX = J^-1 (dN/dxi, dN/deta) with J_ij = dX_j/dxi_i
          gp.grads(a, 0) = jinv(0, 0) * dxi[a] + jinv(0, 1) * deta[a];
          gp.grads(a, 1) = jinv(1, 0) * dxi[a] + jinv(1, 1) * deta[a];
          gp.X += n[a] * xe.row(a).transpose();
        }
        gp.w = det;  // unit Gauss weights
        gauss_.push_back(gp);
      }
    }
  }
  for (std::size_t e = 0; e < m.tris.size(); ++e, ++element) {
    const auto& t = m.tris[e];
    const Eigen::Vector2d x0 = m.nodes[static_cast<std::size_t>(t[0])];
    const Eigen::Vector2d x1 = m.nodes[static_cast<std::size_t>(t[1])];
    const Eigen::Vector2d x2 = m.nodes[static_cast<std::size_t>(t[2])];
    const double det =
        (x1.x() - x0.x()) * (x2.y() - x0.y()) - (x2.x() - x0.x()) * (x1.y() - x0.y());
    if (det <= 0.0) throw Error("FeProblem: non-positive area in triangle");
    GaussPointGeom gp;
    gp.element = element;
    gp.n_nodes = 3;
    gp.tag = m.tri_tags[e];
    gp.grads(0, 0) = (x1.y() - x2.y()) / det;
    gp.grads(0, 1) = (x2.x() - x1.x()) / det;
    gp.grads(1, 0) = (x2.y() - x0.y()) / det;
    gp.grads(1, 1) = (x0.x() - x2.x()) / det;
    gp.grads(2, 0) = (x0.y() - x1.y()) / det;
    gp.grads(2, 1) = (x1.x() - x0.x()) / det;
    gp.grads.row(3).setZero();
    for (int a = 0; a < 3; ++a) {
      gp.nodes[static_cast<std::size_t>(a)] = t[a];
      gp.shape[static_cast<std::size_t>(a)] = 1.0 / 3.0;
    }
    gp.w = 0.5 * det;  // one-point rule, exact for the linear triangle
    gp.X = (x0 + x1 + x2) / 3.0;
    gauss_.push_back(gp);
  }
}

void FeProblem::apply_dirichlet(double lambda, Eigen::VectorXd& u) const {
  for (std::size_t i = 0; i < prescribed_dofs_.size(); ++i)
    u(prescribed_dofs_[i]) = prescribed_rates_[i] * lambda;
}

Eigen::Matrix2d FeProblem::def_gradient(const GaussPointGeom& gp, const Eigen::VectorXd& u) const {
  Eigen::Matrix2d grad_u = Eigen::Matrix2d::Zero();
  for (int a = 0; a < gp.n_nodes; ++a) {
    const int node = gp.nodes[static_cast<std::size_t>(a)];
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) grad_u(i, j) += u(2 * node + i) * gp.grads(a, j);
  }
  return Eigen::Matrix2d::Identity() + grad_u;
}

void FeProblem::assemble(const Eigen::VectorXd& u, double lambda, Eigen::VectorXd* residual,
                         Eigen::SparseMatrix<double>* k_ff,
                         Eigen::SparseMatrix<double>* k_fp) const {
  if (u.size() != n_dofs()) throw Error("assemble: displacement vector size mismatch");
  if (residual) *residual = -lambda * f_ext_;

  std::vector<Eigen::Triplet<double>> trip_ff, trip_fp;
  const bool need_k = k_ff || k_fp;
  if (k_ff) trip_ff.reserve(gauss_.size() * 24);
  if (k_fp) trip_fp.reserve(gauss_.size() * 8);
  std::string failures;
  int n_failures = 0;

  const auto scatter = [&](const std::array<int, 4>& nodes, int n,
                           const Eigen::Matrix<double, 8, 1>& r_e,
                           const Eigen::Matrix<double, 8, 8>& k_e) {
    for (int a = 0; a < n; ++a) {
      for (int i = 0; i < 2; ++i) {
        const int row = 2 * nodes[static_cast<std::size_t>(a)] + i;
        if (residual) (*residual)(row) += r_e(2 * a + i);
        if (!need_k) continue;
        const int fr = free_index_[static_cast<std::size_t>(row)];
        if (fr < 0) continue;
        for (int bb = 0; bb < n; ++bb) {
          for (int j = 0; j < 2; ++j) {
            const int col = 2 * nodes[static_cast<std::size_t>(bb)] + j;
            const int fc = free_index_[static_cast<std::size_t>(col)];
            const double v = k_e(2 * a + i, 2 * bb + j);
            if (fc >= 0) {
              if (k_ff) trip_ff.emplace_back(fr, fc, v);
            } else if (k_fp) {
              const auto it =
                  std::lower_bound(prescribed_dofs_.begin(), prescribed_dofs_.end(), col);
              trip_fp.emplace_back(fr, static_cast<int>(it - prescribed_dofs_.begin()), v);
            }
          }
        }
      }
    }
  };

  // Gauss records of one element are contiguous; accumulate per element so a
  // constitutive failure can be reported with its element id.
  std::size_t g = 0;
  while (g < gauss_.size()) {
    const GaussPointGeom first = gauss_[g];
    const int element = first.element;
    const int n = first.n_nodes;
    Eigen::Matrix<double, 8, 1> r_e = Eigen::Matrix<double, 8, 1>::Zero();
    Eigen::Matrix<double, 8, 8> k_e = Eigen::Matrix<double, 8, 8>::Zero();
    bool failed = false;
    for (; g < gauss_.size() && gauss_[g].element == element; ++g) {
      if (failed) continue;
      const GaussPointGeom& gp = gauss_[g];
      try {
        if (n == 4) {
          Eigen::Matrix<double, 4, 2> u_e;
          for (int a = 0; a < 4; ++a) {
            u_e(a, 0) = u(2 * gp.nodes[static_cast<std::size_t>(a)]);
            u_e(a, 1) = u(2 * gp.nodes[static_cast<std::size_t>(a)] + 1);
          }
          Eigen::Matrix<double, 8, 1> r = Eigen::Matrix<double, 8, 1>::Zero();
          Eigen::Matrix<double, 8, 8> k = Eigen::Matrix<double, 8, 8>::Zero();
          gauss_point_kernel<4>(gp.grads, gp.w, u_e, *laws_[static_cast<std::size_t>(gp.tag)], &r, need_k ? &k : nullptr);
          r_e += r;
          k_e += k;
        } else {
          Eigen::Matrix<double, 3, 2> u_e;
          for (int a = 0; a < 3; ++a) {
            u_e(a, 0) = u(2 * gp.nodes[static_cast<std::size_t>(a)]);
            u_e(a, 1) = u(2 * gp.nodes[static_cast<std::size_t>(a)] + 1);
          }
          Eigen::Matrix<double, 6, 1> r = Eigen::Matrix<double, 6, 1>::Zero();
          Eigen::Matrix<double, 6, 6> k = Eigen::Matrix<double, 6, 6>::Zero();
          const Eigen::Matrix<double, 3, 2> grads3 = gp.grads.topRows<3>();
          gauss_point_kernel<3>(grads3, gp.w, u_e, *laws_[static_cast<std::size_t>(gp.tag)], &r, need_k ? &k : nullptr);
          r_e.head<6>() += r;
          k_e.topLeftCorner<6, 6>() += k;
        }
      } catch (const std::exception& ex) {
        failed = true;
        ++n_failures;
        if (n_failures <= 8)
          failures += "\n  element " + std::to_string(element) + ": " + ex.what();
      }
    }
    if (!failed) scatter(first.nodes, n, r_e, k_e);
  }
  if (n_failures > 0)
    throw Error("assemble: " + std::to_string(n_failures) + " element(s) failed:" + failures);

  if (k_ff) {
    k_ff->resize(n_free(), n_free());
    k_ff->setFromTriplets(trip_ff.begin(), trip_ff.end());
  }
  if (k_fp) {
    k_fp->resize(n_free(), static_cast<int>(prescribed_dofs_.size()));
    k_fp->setFromTriplets(trip_fp.begin(), trip_fp.end());
  }
}

NewtonResult FeProblem::newton_solve(double lambda, Eigen::VectorXd& u, const NewtonOptions& opt) {
  apply_dirichlet(lambda, u);
  NewtonResult result;
  Eigen::VectorXd residual;
  Eigen::SparseMatrix<double> k_ff;

  double f_ext_norm = 0.0;
  for (int fd : free_dofs_) f_ext_norm += f_ext_(fd) * f_ext_(fd);
  f_ext_norm = std::abs(lambda) * std::sqrt(f_ext_norm);
  const double tol = opt.tol_abs + opt.tol_rel * f_ext_norm;

  for (int it = 0; it < opt.max_iter; ++it) {
    try {
      assemble(u, lambda, &residual, &k_ff);
    } catch (const Error&) {
      return result;  // inadmissible state reached: treated as divergence
    }
    double rnorm = 0.0;
    for (int fd : free_dofs_) rnorm += residual(fd) * residual(fd);
    rnorm = std::sqrt(rnorm);
    result.residual_history.push_back(rnorm);
    result.residual_norm = rnorm;
    if (!std::isfinite(rnorm)) return result;
    if (rnorm <= tol) {
      result.converged = true;
      result.iterations = std::max(1, it);
      return result;
    }

    if (!pattern_analyzed_) {
      solver_.analyzePattern(k_ff);
      pattern_analyzed_ = true;
    }
    solver_.factorize(k_ff);
    if (solver_.info() != Eigen::Success) return result;  // singular tangent
    Eigen::VectorXd r_free(n_free());
    for (int i = 0; i < n_free(); ++i)
      r_free(i) = residual(free_dofs_[static_cast<std::size_t>(i)]);
    const Eigen::VectorXd du = solver_.solve(-r_free);
    if (solver_.info() != Eigen::Success || !du.allFinite()) return result;
    for (int i = 0; i < n_free(); ++i) u(free_dofs_[static_cast<std::size_t>(i)]) += du(i);
    result.iterations = it + 1;
  }
  return result;  // max_iter exceeded
}

SolveReport FeProblem::run_load_program(const LoadProgram& program, Eigen::VectorXd& u,
                                        const NewtonOptions& opt, const StepObserver& observer) {
  if (program.steps_min < 1 || program.target <= 0.0)
    throw Error("run_load_program: target load and minimum step count required");
  SolveReport report;
  const double d0 = program.target / program.steps_min;

  if (program.mode == LoadProgram::Mode::fixed) {
    for (int i = 1; i <= program.steps_min; ++i) {
      const double lambda = program.target * i / program.steps_min;
      Eigen::VectorXd trial = u;
      const NewtonResult nr = newton_solve(lambda, trial, opt);
      const StepRecord rec{lambda, nr.iterations, nr.residual_norm, nr.converged};
      report.steps.push_back(rec);
      if (!nr.converged) return report;
      u = trial;
      report.last_converged_load = lambda;
      if (observer) observer(rec, u);
    }
    report.completed = true;
    return report;
  }

  // Adaptive: halve on divergence, refuse steps below (target/steps_min)/10,
  // grow back after success up to the design size.
  const double floor_step = d0 / 10.0;
  double lambda = 0.0;
  double step = d0;
  while (lambda < program.target * (1.0 - 1e-12)) {
    const double trial_lambda = std::min(lambda + step, program.target);
    Eigen::VectorXd trial = u;
    const NewtonResult nr = newton_solve(trial_lambda, trial, opt);
    const StepRecord rec{trial_lambda, nr.iterations, nr.residual_norm, nr.converged};
    report.steps.push_back(rec);
    if (nr.converged) {
      u = trial;
      lambda = trial_lambda;
      report.last_converged_load = lambda;
      if (observer) observer(rec, u);
      step = std::min(2.0 * step, d0);
    } else {
      step *= 0.5;
      if (step < floor_step * (1.0 - 1e-12)) return report;
    }
  }
  report.completed = true;
  return report;
}

Eigen::MatrixXd FeProblem::sensitivity_solve(const Eigen::VectorXd& u, double lambda,
                                             const Eigen::MatrixXd& bc_sensitivity) {
  if (bc_sensitivity.rows() != static_cast<Eigen::Index>(prescribed_dofs_.size()))
    throw Error("sensitivity_solve: sensitivity rows must match prescribed dofs");
  Eigen::SparseMatrix<double> k_ff, k_fp;
  assemble(u, lambda, nullptr, &k_ff, &k_fp);
  if (!pattern_analyzed_) {
    solver_.analyzePattern(k_ff);
    pattern_analyzed_ = true;
  }
  solver_.factorize(k_ff);
  if (solver_.info() != Eigen::Success)
    throw Error("sensitivity_solve: singular tangent at the converged state");
  Eigen::MatrixXd w(n_free(), bc_sensitivity.cols());
  for (Eigen::Index m = 0; m < bc_sensitivity.cols(); ++m) {
    const Eigen::VectorXd rhs = -(k_fp * bc_sensitivity.col(m));
    w.col(m) = solver_.solve(rhs);
    if (solver_.info() != Eigen::Success)
      throw Error("sensitivity_solve: back substitution failed");
  }
  return w;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> element_residual_and_stiffness(
    const FeProblem& problem, int element, const Eigen::VectorXd& u) {
  Eigen::Matrix<double, 8, 1> r_e = Eigen::Matrix<double, 8, 1>::Zero();
  Eigen::Matrix<double, 8, 8> k_e = Eigen::Matrix<double, 8, 8>::Zero();
  int n = 0;
  for (const auto& gp : problem.gauss_geometry()) {
    if (gp.element != element) continue;
    n = gp.n_nodes;
    if (n == 4) {
      Eigen::Matrix<double, 4, 2> u_e;
      for (int a = 0; a < 4; ++a) {
        u_e(a, 0) = u(2 * gp.nodes[static_cast<std::size_t>(a)]);
        u_e(a, 1) = u(2 * gp.nodes[static_cast<std::size_t>(a)] + 1);
      }
      Eigen::Matrix<double, 8, 1> r = Eigen::Matrix<double, 8, 1>::Zero();
      Eigen::Matrix<double, 8, 8> k = Eigen::Matrix<double, 8, 8>::Zero();
      try {
        gauss_point_kernel<4>(gp.grads, gp.w, u_e, problem.law(gp.tag), &r, &k);
      } catch (const std::exception& ex) {
        throw Error("element " + std::to_string(element) + ": " + ex.what());
      }
      r_e += r;
      k_e += k;
    } else {
      Eigen::Matrix<double, 3, 2> u_e;
      for (int a = 0; a < 3; ++a) {
        u_e(a, 0) = u(2 * gp.nodes[static_cast<std::size_t>(a)]);
        u_e(a, 1) = u(2 * gp.nodes[static_cast<std::size_t>(a)] + 1);
      }
      Eigen::Matrix<double, 6, 1> r = Eigen::Matrix<double, 6, 1>::Zero();
      Eigen::Matrix<double, 6, 6> k = Eigen::Matrix<double, 6, 6>::Zero();
      const Eigen::Matrix<double, 3, 2> grads3 = gp.grads.topRows<3>();
      try {
        gauss_point_kernel<3>(grads3, gp.w, u_e, problem.law(gp.tag), &r, &k);
      } catch (const std::exception& ex) {
        throw Error("element " + std::to_string(element) + ": " + ex.what());
      }
      r_e.head<6>() += r;
      k_e.topLeftCorner<6, 6>() += k;
    }
  }
  if (n == 0) throw Error("element_residual_and_stiffness: unknown element id");
  return {r_e.head(2 * n), k_e.topLeftCorner(2 * n, 2 * n)};
}

std::vector<GaussPointState> gauss_fields(const FeProblem& problem, const Eigen::VectorXd& u) {
  std::vector<GaussPointState> out;
  out.reserve(problem.gauss_geometry().size());
  for (const auto& gp : problem.gauss_geometry()) {
    GaussPointState st;
    st.geom = gp;
    const Eigen::Matrix2d f = problem.def_gradient(gp, u);
    st.f = {f(0, 0), f(1, 1), f(0, 1), f(1, 0)};
    st.c = right_cauchy_green(st.f);
    st.e = green_lagrange(st.c);
    const MaterialEval ev = problem.law(gp.tag).evaluate(st.c);
    st.s = ev.s;
    st.d = ev.d;
    out.push_back(st);
  }
  return out;
}

void write_solution_json(const std::string& path, const Mesh& mesh, const Eigen::VectorXd& u) {
  nlohmann::json j;
  j["schema"] = "hybridfem-solution-v1";
  auto& nodes = j["nodes"] = nlohmann::json::array();
  for (const auto& x : mesh.nodes) nodes.push_back({x.x(), x.y()});
  auto& quads = j["quads"] = nlohmann::json::array();
  for (const auto& q : mesh.quads) quads.push_back(q);
  auto& tris = j["tris"] = nlohmann::json::array();
  for (const auto& t : mesh.tris) tris.push_back(t);
  j["quad_tags"] = mesh.quad_tags;
  j["tri_tags"] = mesh.tri_tags;
  auto& disp = j["displacement"] = nlohmann::json::array();
  for (int n = 0; n < mesh.n_nodes(); ++n) disp.push_back({u(2 * n), u(2 * n + 1)});
  std::ofstream out(path);
  if (!out) throw Error("write_solution_json: cannot open " + path);
  out << j.dump() << "\n";
}

void write_gauss_csv(const std::string& path, const std::vector<GaussPointState>& states) {
  std::ofstream out(path);
  if (!out) throw Error("write_gauss_csv: cannot open " + path);
  out << "element,x,y,E11,E22,E12,S11,S22,S12,D1111,D1122,D1112,D2222,D2212,D1212\n";
  char line[512];
  for (const auto& st : states) {
    const auto d = pack_tangent(st.d);
    std::snprintf(line, sizeof(line),
                  "%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,"
                  "%.12g,%.12g\n",
                  st.geom.element, st.geom.X.x(), st.geom.X.y(), st.e.e11, st.e.e22, st.e.e12,
                  st.s.s11, st.s.s22, st.s.s12, d[0], d[1], d[2], d[3], d[4], d[5]);
    out << line;
  }
}

}  // namespace hybridfem
