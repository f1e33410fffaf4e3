#include "hybridfem/material.hpp"

namespace hybridfem {

namespace {

// Voigt index pairs (11, 22, 12) into in-plane tensor indices.
constexpr int kPairA[3] = {0, 1, 0};
constexpr int kPairB[3] = {0, 1, 1};

inline double kron(int a, int b) { return a == b ? 1.0 : 0.0; }

}  // namespace

MaterialEval micro_material(const CauchyGreen& c, const MicroMaterialParams& p) {
  const Invariants inv = invariants(c);
  if (inv.i3 <= 0.0)
    throw Error("micro_material: det(C) = " + std::to_string(inv.i3) + " <= 0");
  const Eigen::Matrix2d g = c.inverse2();

  MaterialEval out;
  out.psi = p.c1 * inv.i1 + p.c2 * inv.i2 + p.c3 * inv.i3 +
            0.5 * p.c4 * (inv.i1 - 3.0) * (inv.i1 - 3.0) - 0.5 * p.c5 * std::log(inv.i3);

  // S = alpha I + beta C^-1 with
  //   alpha = 2 (c1 + c2 + c4 (I1 - 3)),  beta = 2 (c2 + c3) I3 - c5.
  const double alpha = 2.0 * (p.c1 + p.c2 + p.c4 * (inv.i1 - 3.0));
  const double beta = 2.0 * (p.c2 + p.c3) * inv.i3 - p.c5;
  out.s = {alpha + beta * g(0, 0), alpha + beta * g(1, 1), beta * g(0, 1)};

  // D_abcd = 4 c4 d_ab d_cd + 4 (c2 + c3) I3 G_ab G_cd
  //          - beta (G_ac G_bd + G_ad G_bc)
  const double gamma = 4.0 * (p.c2 + p.c3) * inv.i3;
  for (int m = 0; m < 3; ++m) {
    const int a = kPairA[m], b = kPairB[m];
    for (int n = 0; n < 3; ++n) {
      const int cc = kPairA[n], dd = kPairB[n];
      out.d(m, n) = 4.0 * p.c4 * kron(a, b) * kron(cc, dd) + gamma * g(a, b) * g(cc, dd) -
                    beta * (g(a, cc) * g(b, dd) + g(a, dd) * g(b, cc));
    }
  }
  return out;
}

MaterialEval macro_model(const CauchyGreen& c, const MacroModelParams& p) {
  const Invariants inv = invariants(c);
  if (inv.i3 <= 0.0)
    throw Error("macro_model: det(C) = " + std::to_string(inv.i3) + " <= 0");

  MaterialEval out;
  if (p.c1 == 0.0) return out;

  const Eigen::Matrix2d g = c.inverse2();
  out.psi = p.c1 * (inv.i1 - std::log(inv.i3));
  out.s = {2.0 * p.c1 * (1.0 - g(0, 0)), 2.0 * p.c1 * (1.0 - g(1, 1)), -2.0 * p.c1 * g(0, 1)};
  for (int m = 0; m < 3; ++m) {
    const int a = kPairA[m], b = kPairB[m];
    for (int n = 0; n < 3; ++n) {
      const int cc = kPairA[n], dd = kPairB[n];
      out.d(m, n) = 2.0 * p.c1 * (g(a, cc) * g(b, dd) + g(a, dd) * g(b, cc));
    }
  }
  return out;
}

MaterialEval MicroMaterial::evaluate(const CauchyGreen& c) const { return micro_material(c, p_); }
MaterialEval MacroModel::evaluate(const CauchyGreen& c) const { return macro_model(c, p_); }

TangentVoigt fd_tangent(const StressFunction& stress, const CauchyGreen& c, double h) {
  if (h == 0.0) h = 1e-6 * std::max(1.0, c.norm());
  if (!(h > 0.0)) throw Error("fd_tangent: step must be positive");

  TangentVoigt d;
  for (int j = 0; j < 3; ++j) {
    // Column j is dS / dE_j in the factor-2 shear convention. A unit Voigt
    // strain increment e_j maps to dC = (2h, 0, 0), (0, 2h, 0), (0, 0, h)
    // on (C11, C22, C12).
    CauchyGreen cp = c, cm = c;
    double step = h;
    if (j == 0) {
      cp.c11 += 2.0 * h;
      cm.c11 -= 2.0 * h;
    } else if (j == 1) {
      cp.c22 += 2.0 * h;
      cm.c22 -= 2.0 * h;
    } else {
      cp.c12 += h;
      cm.c12 -= h;
    }
    if (cp.det2() <= 0.0 || cm.det2() <= 0.0)
      throw Error("fd_tangent: perturbed state leaves the admissible set");
    const Stress2PK sp = stress(cp);
    const Stress2PK sm = stress(cm);
    d(0, j) = (sp.s11 - sm.s11) / (2.0 * step);
    d(1, j) = (sp.s22 - sm.s22) / (2.0 * step);
    d(2, j) = (sp.s12 - sm.s12) / (2.0 * step);
  }
  return d;
}

}  // namespace hybridfem
