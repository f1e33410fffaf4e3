#pragma once

#include <array>
#include <cmath>

#include <Eigen/Dense>

#include "hybridfem/util.hpp"

namespace hybridfem {

// Plane-strain kinematics. In-plane tensors are stored componentwise; the
// out-of-plane stretch is identically one and enters the invariants only.
//
// Voigt ordering is (11, 22, 12) throughout. Strain-like vectors carry the
// factor 2 on the shear entry, stress-like vectors do not, so s . e is the
// work density.

struct DefGradient {
  double f11 = 1.0, f22 = 1.0, f12 = 0.0, f21 = 0.0;

  static DefGradient identity() { return {}; }

  // Symmetric stretch from the 3 independent components (F21 = F12).
  static DefGradient symmetric(double f11, double f22, double f12) {
    return {f11, f22, f12, f12};
  }

  double det() const { return f11 * f22 - f12 * f21; }
  bool is_symmetric(double tol = 0.0) const { return std::abs(f12 - f21) <= tol; }

  Eigen::Matrix2d matrix() const {
    Eigen::Matrix2d m;
    m << f11, f12, f21, f22;
    return m;
  }
};

struct CauchyGreen {
  double c11 = 1.0, c22 = 1.0, c12 = 0.0;

  static CauchyGreen identity() { return {}; }

  std::array<double, 3> voigt() const { return {c11, c22, c12}; }

  // In-plane determinant; equals det(C) in 3D because C33 = 1.
  double det2() const { return c11 * c22 - c12 * c12; }

  Eigen::Matrix2d matrix() const {
    Eigen::Matrix2d m;
    m << c11, c12, c12, c22;
    return m;
  }

  Eigen::Matrix2d inverse2() const {
    const double d = det2();
    if (d <= 0.0) throw Error("CauchyGreen: in-plane block not positive definite");
    Eigen::Matrix2d g;
    g << c22 / d, -c12 / d, -c12 / d, c11 / d;
    return g;
  }

  double norm() const { return std::sqrt(c11 * c11 + c22 * c22 + 2.0 * c12 * c12); }
};

struct GreenLagrange {
  double e11 = 0.0, e22 = 0.0, e12 = 0.0;
  // (E11, E22, 2 E12)
  std::array<double, 3> voigt() const { return {e11, e22, 2.0 * e12}; }
};

struct Stress2PK {
  double s11 = 0.0, s22 = 0.0, s12 = 0.0;
  std::array<double, 3> voigt() const { return {s11, s22, s12}; }
  double norm() const { return std::sqrt(s11 * s11 + s22 * s22 + 2.0 * s12 * s12); }
};

// 3x3 Voigt image of the material tangent D = 4 d^2 Psi / dC dC.
using TangentVoigt = Eigen::Matrix3d;

struct Invariants {
  double i1, i2, i3;
};

inline CauchyGreen right_cauchy_green(const DefGradient& f) {
  if (!(f.det() > 0.0))
    throw Error("right_cauchy_green: non-positive det(F) = " + std::to_string(f.det()));
  return {f.f11 * f.f11 + f.f21 * f.f21, f.f12 * f.f12 + f.f22 * f.f22,
          f.f11 * f.f12 + f.f21 * f.f22};
}

inline GreenLagrange green_lagrange(const CauchyGreen& c) {
  return {0.5 * (c.c11 - 1.0), 0.5 * (c.c22 - 1.0), 0.5 * c.c12};
}

// I1 = tr C, I2 = tr Cof C, I3 = det C, all with the implicit C33 = 1.
inline Invariants invariants(const CauchyGreen& c) {
  const double d2 = c.det2();
  return {c.c11 + c.c22 + 1.0, c.c11 + c.c22 + d2, d2};
}

// Independent entries of a major-symmetric Voigt tangent, upper triangle
// row-major: (11,11) (11,22) (11,12) (22,22) (22,12) (12,12).
inline std::array<double, 6> pack_tangent(const TangentVoigt& d) {
  return {d(0, 0), d(0, 1), d(0, 2), d(1, 1), d(1, 2), d(2, 2)};
}

inline TangentVoigt unpack_tangent(const std::array<double, 6>& v) {
  TangentVoigt d;
  d << v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5];
  return d;
}

// SPD square root of a 2x2 matrix, used to recover the symmetric stretch
// producing a given C.
inline DefGradient stretch_from_cauchy_green(const CauchyGreen& c) {
  const double d2 = c.det2();
  if (d2 <= 0.0) throw Error("stretch_from_cauchy_green: C not positive definite");
  const double s = std::sqrt(d2);
  const double t = std::sqrt(c.c11 + c.c22 + 2.0 * s);
  return DefGradient::symmetric((c.c11 + s) / t, (c.c22 + s) / t, c.c12 / t);
}

}  // namespace hybridfem
