#pragma once

#include <functional>
#include <memory>
#include <string>

#include "hybridfem/tensor.hpp"

namespace hybridfem {

// Two-parameter families of compressible hyperelastic laws.
//
// Microscale phases (matrix / inclusions) and the appendix analytic law share
//   Psi = c1 I1 + c2 I2 + c3 I3 + c4/2 (I1 - 3)^2 - c5 Log(sqrt(I3)),
// with c5 = 2 c1 + 4 c2 + 2 c3 making the reference configuration stress-free.
struct MicroMaterialParams {
  double c1 = 1.0, c2 = 1.0, c3 = 1.0, c4 = 1.0;
  double c5 = 8.0;

  static MicroMaterialParams with_derived_c5(double c1, double c2, double c3, double c4) {
    return {c1, c2, c3, c4, 2.0 * c1 + 4.0 * c2 + 2.0 * c3};
  }
  bool stress_free_reference(double tol = 1e-12) const {
    return std::abs(c5 - (2.0 * c1 + 4.0 * c2 + 2.0 * c3)) <=
           tol * std::max(1.0, std::abs(c5));
  }
};

// Macroscale modelling component  Psi_mod = C1 [I1 - 2 Log(sqrt(I3))].
// C1 = 0 turns the analytic contribution off (pure data-driven mode).
struct MacroModelParams {
  double c1 = 0.0;
};

struct MaterialEval {
  double psi = 0.0;
  Stress2PK s;
  TangentVoigt d = TangentVoigt::Zero();
};

// Constitutive point evaluation: C -> (Psi, S, D). Implementations are
// immutable after construction and safe to call concurrently.
class ConstitutiveLaw {
 public:
  virtual ~ConstitutiveLaw() = default;
  virtual MaterialEval evaluate(const CauchyGreen& c) const = 0;
  virtual std::string name() const = 0;
};

class MicroMaterial final : public ConstitutiveLaw {
 public:
  explicit MicroMaterial(const MicroMaterialParams& p) : p_(p) {}
  MaterialEval evaluate(const CauchyGreen& c) const override;
  std::string name() const override { return "micro"; }
  const MicroMaterialParams& params() const { return p_; }

 private:
  MicroMaterialParams p_;
};

class MacroModel final : public ConstitutiveLaw {
 public:
  explicit MacroModel(const MacroModelParams& p) : p_(p) {}
  MaterialEval evaluate(const CauchyGreen& c) const override;
  std::string name() const override { return "model"; }
  const MacroModelParams& params() const { return p_; }

 private:
  MacroModelParams p_;
};

MaterialEval micro_material(const CauchyGreen& c, const MicroMaterialParams& p);
MaterialEval macro_model(const CauchyGreen& c, const MacroModelParams& p);

// Central finite differences of S with respect to the Green-Lagrange strain.
// Test oracle for the hand-coded tangents; step defaults to the rule
// h = 1e-6 max(1, ||C||).
using StressFunction = std::function<Stress2PK(const CauchyGreen&)>;
TangentVoigt fd_tangent(const StressFunction& stress, const CauchyGreen& c, double h = 0.0);

}  // namespace hybridfem
