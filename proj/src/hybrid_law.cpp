#include "hybridfem/hybrid_law.hpp"

namespace hybridfem {

LawMode law_mode_from_string(const std::string& s) {
  if (s == "model") return LawMode::model;
  if (s == "data") return LawMode::data;
  if (s == "hybrid") return LawMode::hybrid;
  throw Error("unknown law mode '" + s + "' (expected model|data|hybrid)");
}

std::string to_string(LawMode mode) {
  switch (mode) {
    case LawMode::model: return "model";
    case LawMode::data: return "data";
    case LawMode::hybrid: return "hybrid";
  }
  return "?";
}

HybridLaw::HybridLaw(const MacroModelParams& macro) : mode_(LawMode::model), macro_(macro) {
  if (macro.c1 < 0.0) throw Error("HybridLaw: C1 must be non-negative");
}

HybridLaw::HybridLaw(LawMode mode, const MacroModelParams& macro,
                     std::shared_ptr<const KrigingModel> surrogate)
    : mode_(mode), macro_(macro), surrogate_(std::move(surrogate)) {
  if (macro_.c1 < 0.0) throw Error("HybridLaw: C1 must be non-negative");
  if (mode_ == LawMode::model) {
    surrogate_.reset();
    return;
  }
  if (!surrogate_) throw Error("HybridLaw: " + to_string(mode_) + " mode requires a surrogate");
  if (surrogate_->n_outputs() != 9)
    throw Error("HybridLaw: surrogate must predict 3 stress + 6 tangent remainders");
  if (mode_ == LawMode::data && macro_.c1 != 0.0)
    throw Error("HybridLaw: data mode means C1 = 0");
}

MaterialEval HybridLaw::evaluate(const CauchyGreen& c) const {
  MaterialEval out = macro_model(c, macro_);
  if (mode_ == LawMode::model) return out;

  const Eigen::Vector3d input(c.c11, c.c22, c.c12);
  const Eigen::VectorXd y = surrogate_->predict_mean(input);
  out.s.s11 += y(0);
  out.s.s22 += y(1);
  out.s.s12 += y(2);
  out.d += unpack_tangent({y(3), y(4), y(5), y(6), y(7), y(8)});
  return out;
}

std::pair<MaterialEval, HybridLaw::Bands> HybridLaw::evaluate_with_bands(
    const CauchyGreen& c) const {
  if (mode_ == LawMode::model) {
    const MaterialEval ev = evaluate(c);
    Bands bands;
    bands.lower = Eigen::VectorXd::Zero(9);
    bands.upper = Eigen::VectorXd::Zero(9);
    const auto s = ev.s.voigt();
    const auto d = pack_tangent(ev.d);
    for (int k = 0; k < 3; ++k) bands.lower(k) = bands.upper(k) = s[static_cast<std::size_t>(k)];
    for (int k = 0; k < 6; ++k)
      bands.lower(3 + k) = bands.upper(3 + k) = d[static_cast<std::size_t>(k)];
    return {ev, bands};
  }

  const MaterialEval ev = evaluate(c);
  const Eigen::Vector3d input(c.c11, c.c22, c.c12);
  auto [lo, hi] = surrogate_->confidence_interval(input);
  // Shift the remainder bands by the analytic contribution so the bands
  // bracket the total response.
  const MaterialEval mod = macro_model(c, macro_);
  const auto s_mod = mod.s.voigt();
  const auto d_mod = pack_tangent(mod.d);
  for (int k = 0; k < 3; ++k) {
    lo(k) += s_mod[static_cast<std::size_t>(k)];
    hi(k) += s_mod[static_cast<std::size_t>(k)];
  }
  for (int k = 0; k < 6; ++k) {
    lo(3 + k) += d_mod[static_cast<std::size_t>(k)];
    hi(3 + k) += d_mod[static_cast<std::size_t>(k)];
  }
  return {ev, Bands{lo, hi}};
}

}  // namespace hybridfem
