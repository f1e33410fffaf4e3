#pragma once

#include <memory>

#include "hybridfem/kriging.hpp"

namespace hybridfem {

// Constitutive operating modes: the analytic model alone, the Kriging
// surrogate alone (C1 = 0), or their sum.
enum class LawMode { model, data, hybrid };

LawMode law_mode_from_string(const std::string& s);
std::string to_string(LawMode mode);

// Runtime constitutive law S = S_mod(C) + y_s(c), D = D_mod(C) + y_d(c)
// with the remainders taken from the Kriging mean. The tangent handed to
// Newton is the predicted one, not a differentiated stress surrogate.
// Immutable after construction; evaluate() is concurrently callable.
class HybridLaw final : public ConstitutiveLaw {
 public:
  // Model-driven: no surrogate involved.
  explicit HybridLaw(const MacroModelParams& macro);
  // Data-driven (macro.c1 must be 0) or hybrid.
  HybridLaw(LawMode mode, const MacroModelParams& macro,
            std::shared_ptr<const KrigingModel> surrogate);

  MaterialEval evaluate(const CauchyGreen& c) const override;

  struct Bands {
    Eigen::VectorXd lower, upper;  // 9 outputs: 3 stress + 6 tangent entries
  };
  std::pair<MaterialEval, Bands> evaluate_with_bands(const CauchyGreen& c) const;

  LawMode mode() const { return mode_; }
  const MacroModelParams& macro() const { return macro_; }
  const KrigingModel* surrogate() const { return surrogate_.get(); }
  std::string name() const override { return to_string(mode_); }

 private:
  LawMode mode_;
  MacroModelParams macro_;
  std::shared_ptr<const KrigingModel> surrogate_;
};

}  // namespace hybridfem
