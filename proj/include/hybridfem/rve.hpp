#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "hybridfem/fem.hpp"

namespace hybridfem {

// Square representative volume element: a soft matrix with stiff circular
// inclusions of equal radius, randomly placed with a fixed seed.
struct RveSpec {
  double side = 1.0;
  int n_inclusions = 20;
  double volume_fraction = 0.20;
  MicroMaterialParams matrix = MicroMaterialParams::with_derived_c5(1.0, 1.0, 1.0, 1.0);
  MicroMaterialParams inclusion =
      MicroMaterialParams::with_derived_c5(1000.0, 1000.0, 1000.0, 1000.0);
  std::uint64_t seed = 0;
  int target_elements = 7800;

  // Radius from the area balance n pi r^2 = v_f l^2.
  double nominal_radius() const;

  std::string canonical_json() const;
  std::string hash() const;  // provenance fingerprint
  static RveSpec from_json_file(const std::string& path);
  void write_json_file(const std::string& path) const;
};

struct RveGeometry {
  std::vector<Eigen::Vector2d> centers;
  double radius = 0.0;
  double achieved_fraction = 0.0;
  int inclusion_elements = 0;
};

// Structured triangulation with per-element phase tags (0 matrix,
// 1 inclusion); deterministic for a fixed seed.
Mesh generate_rve(const RveSpec& spec, RveGeometry* geometry = nullptr);

// Homogeneous displacement boundary conditions u = (F_app - I) X on every
// boundary node of the square; F_app must be symmetric with positive
// determinant.
BoundaryConditions applied_deformation_bc(const DefGradient& f_app, const Mesh& mesh,
                                          double side);

struct HomogenizedPoint {
  CauchyGreen c;
  Stress2PK s_rve;
  TangentVoigt d_rve = TangentVoigt::Zero();
  DefGradient f_app;
};

struct AveragedFields {
  Eigen::Matrix2d f_avg;
  Eigen::Matrix2d p_avg;  // first Piola-Kirchhoff
};

// Volume averages of F and P over the reference domain by quadrature.
AveragedFields average_fields(const FeProblem& problem, const Eigen::VectorXd& u);

// First elasticity sensitivities dP_avg/ds for the symmetric parameters
// s = (F11, F22, F12): rows are the P components (11, 22, 12, 21), one
// column per parameter. Reuses the factorized microscale tangent; one back
// substitution per parameter.
Eigen::Matrix<double, 4, 3> sensitivity_first_elasticity(FeProblem& problem,
                                                         const Eigen::VectorXd& u);

// Second elasticity tensor (Voigt) from the first one via
// D_AJBL = F^-1_Ai F^-1_Bk (A_iJkL - delta_ik S_JL), evaluated on symmetric
// strain directions and symmetrized.
TangentVoigt second_from_first(const Eigen::Matrix<double, 4, 3>& a_sens,
                               const DefGradient& f_avg, const Stress2PK& s_rve);

// Owns one RVE realization (mesh + phase laws). homogenize() calls on
// distinct inputs are independent and safe to run concurrently.
class Homogenizer {
 public:
  explicit Homogenizer(const RveSpec& spec);

  const RveSpec& spec() const { return spec_; }
  const Mesh& mesh() const { return mesh_; }
  const RveGeometry& geometry() const { return geometry_; }

  // Microscale equilibrium under F_app (with proportional sub-stepping of
  // the applied deformation when a direct solve diverges), averaged stress
  // and the sensitivity-based consistent tangent.
  HomogenizedPoint homogenize(const DefGradient& f_app) const;

  // Relative gap of the averaged virtual-work identity for the solved state,
  // probed with an affine + random-bubble virtual field.
  double hill_mandel_gap(const DefGradient& f_app, std::uint64_t probe_seed = 1) const;

 private:
  struct SolvedState {
    std::unique_ptr<FeProblem> problem;
    Eigen::VectorXd u;
  };
  SolvedState solve(const DefGradient& f_app) const;

  RveSpec spec_;
  RveGeometry geometry_;
  Mesh mesh_;
  MicroMaterial matrix_law_;
  MicroMaterial inclusion_law_;
};

}  // namespace hybridfem
