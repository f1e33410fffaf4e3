#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "hybridfem/material.hpp"
#include "hybridfem/mesh.hpp"

namespace hybridfem {

// Prescribed displacement ramping linearly with the load factor:
// u(node, dof) = rate * lambda.
struct DirichletBC {
  int node = 0;
  int dof = 0;  // 0 = x, 1 = y
  double rate = 0.0;
};

// Dead traction (per unit reference length) on the straight edge n0-n1,
// scaled by the load factor. [s0, s1] restricts the loaded portion of the
// edge in its local coordinate, for loads that end mid-edge.
struct EdgeTraction {
  int n0 = 0, n1 = 0;
  Eigen::Vector2d traction = Eigen::Vector2d::Zero();
  double s0 = 0.0, s1 = 1.0;
};

struct BoundaryConditions {
  std::vector<DirichletBC> dirichlet;
  std::vector<EdgeTraction> tractions;
  Eigen::Vector2d body_force = Eigen::Vector2d::Zero();  // per unit reference area

  void validate(int n_nodes) const;
};

struct NewtonOptions {
  double tol_rel = 1e-8;   // on ||R|| relative to the external force norm
  double tol_abs = 1e-10;
  int max_iter = 30;
};

struct NewtonResult {
  bool converged = false;
  int iterations = 0;  // number of assemble/solve passes (>= 1)
  double residual_norm = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> residual_history;
};

struct StepRecord {
  double load_factor = 0.0;
  int iterations = 0;
  double residual_norm = 0.0;
  bool converged = false;
};

// Per-load-step convergence log; the input of the iterative performance
// index.
struct SolveReport {
  std::vector<StepRecord> steps;
  bool completed = false;
  double last_converged_load = 0.0;

  // Mean Newton iterations over converged steps with load factor <= level.
  double average_iterations(double up_to_load = std::numeric_limits<double>::infinity()) const;
};

struct LoadProgram {
  enum class Mode { fixed, adaptive };
  Mode mode = Mode::fixed;
  double target = 1.0;  // final load factor
  int steps_min = 10;
};

// IPI = N_it / N_it^mod: average Newton iterations per load step relative to
// the model-driven reference, both evaluated up to the same load level.
double ipi(const SolveReport& report, const SolveReport& reference);
double ipi_at(const SolveReport& report, const SolveReport& reference, double load_level);

// Reference-configuration quadrature geometry of one Gauss point.
struct GaussPointGeom {
  int element = 0;                    // quads first, then triangles
  int n_nodes = 0;
  std::array<int, 4> nodes{};
  Eigen::Matrix<double, 4, 2> grads;  // cartesian shape gradients, first n_nodes rows
  std::array<double, 4> shape{};      // shape values, first n_nodes entries
  double w = 0.0;                     // quadrature weight x |J|
  Eigen::Vector2d X;                  // reference position
  int tag = 0;
};

struct GaussPointState {
  GaussPointGeom geom;
  DefGradient f;
  CauchyGreen c;
  GreenLagrange e;
  Stress2PK s;
  TangentVoigt d;
};

// Total-Lagrangian displacement problem on a fixed mesh: assembly of the
// residual and consistent tangent, Newton iteration, and load stepping.
// One instance owns its solver state; distinct instances may run
// concurrently.
class FeProblem {
 public:
  FeProblem(const Mesh& mesh, const ConstitutiveLaw& law, BoundaryConditions bc);
  // One constitutive law per element tag.
  FeProblem(const Mesh& mesh, std::vector<const ConstitutiveLaw*> laws, BoundaryConditions bc);

  int n_dofs() const { return 2 * mesh_->n_nodes(); }
  int n_free() const { return static_cast<int>(free_dofs_.size()); }
  const Mesh& mesh() const { return *mesh_; }
  const ConstitutiveLaw& law(int tag = 0) const { return *laws_[static_cast<std::size_t>(tag)]; }
  const std::vector<GaussPointGeom>& gauss_geometry() const { return gauss_; }
  const std::vector<int>& prescribed_dofs() const { return prescribed_dofs_; }

  // Writes the prescribed entries of u at the given load factor.
  void apply_dirichlet(double lambda, Eigen::VectorXd& u) const;

  // Residual R = R_int(u) - lambda R_ext over all dofs (prescribed rows hold
  // reactions). Optionally assembles the free-free tangent block and the
  // coupling block to prescribed dofs.
  void assemble(const Eigen::VectorXd& u, double lambda, Eigen::VectorXd* residual,
                Eigen::SparseMatrix<double>* k_ff = nullptr,
                Eigen::SparseMatrix<double>* k_fp = nullptr) const;

  NewtonResult newton_solve(double lambda, Eigen::VectorXd& u, const NewtonOptions& opt = {});

  // Fixed or adaptive stepping to program.target; on repeated divergence the
  // adaptive step shrinks down to (target/steps_min)/10 before giving up and
  // reporting the last converged load. The observer sees every accepted step.
  using StepObserver = std::function<void(const StepRecord&, const Eigen::VectorXd&)>;
  SolveReport run_load_program(const LoadProgram& program, Eigen::VectorXd& u,
                               const NewtonOptions& opt = {},
                               const StepObserver& observer = nullptr);

  // Solves K_ff W = -K_fp G at the state u for the right-hand-side columns
  // G of prescribed-dof sensitivities; one factorization, one back
  // substitution per column. Returns the free-dof sensitivities W.
  Eigen::MatrixXd sensitivity_solve(const Eigen::VectorXd& u, double lambda,
                                    const Eigen::MatrixXd& bc_sensitivity);

  // Deformation gradient at one Gauss point for the displacement state u.
  Eigen::Matrix2d def_gradient(const GaussPointGeom& gp, const Eigen::VectorXd& u) const;

  // External force vector at unit load factor.
  const Eigen::VectorXd& external_force() const { return f_ext_; }

 private:
  const Mesh* mesh_;
  std::vector<const ConstitutiveLaw*> laws_;
  BoundaryConditions bc_;
  std::vector<GaussPointGeom> gauss_;
  std::vector<int> free_index_;       // dof -> free index or -1
  std::vector<int> free_dofs_;        // free index -> dof
  std::vector<int> prescribed_dofs_;  // prescribed index -> dof
  std::vector<double> prescribed_rates_;
  Eigen::VectorXd f_ext_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> solver_;
  bool pattern_analyzed_ = false;

  void build_gauss_geometry();
};

// Residual and consistent stiffness of a single element (geometric plus
// material part) at the global displacement state u.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> element_residual_and_stiffness(
    const FeProblem& problem, int element, const Eigen::VectorXd& u);

// Per-Gauss-point kinematics and constitutive state for a displacement field,
// evaluated with the problem's own (per-tag) laws.
std::vector<GaussPointState> gauss_fields(const FeProblem& problem, const Eigen::VectorXd& u);

// JSON export of mesh, connectivity and nodal fields; CSV export of the
// Gauss-point table (x, y, E, S, D entries).
void write_solution_json(const std::string& path, const Mesh& mesh, const Eigen::VectorXd& u);
void write_gauss_csv(const std::string& path, const std::vector<GaussPointState>& states);

}  // namespace hybridfem
