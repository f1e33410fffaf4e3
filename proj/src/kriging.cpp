#include "hybridfem/kriging.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "hybridfem/util.hpp"

namespace hybridfem {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Shared per-dimension absolute-distance tables of the training inputs.
std::vector<Eigen::MatrixXd> distance_tables(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows(), d = x.cols();
  std::vector<Eigen::MatrixXd> dist(static_cast<std::size_t>(d));
  for (Eigen::Index k = 0; k < d; ++k) {
    dist[static_cast<std::size_t>(k)].resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        dist[static_cast<std::size_t>(k)](i, j) = std::abs(x(i, k) - x(j, k));
  }
  return dist;
}

void build_correlation(const std::vector<Eigen::MatrixXd>& dist, const Eigen::VectorXd& theta,
                       double nugget, Eigen::MatrixXd& r) {
  const Eigen::Index n = dist.front().rows();
  const Eigen::Index d = static_cast<Eigen::Index>(dist.size());
  r.resize(n, n);
  Eigen::VectorXd s(d);
  for (Eigen::Index k = 0; k < d; ++k) s(k) = kSqrt3 / theta(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    r(i, i) = 1.0 + nugget;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double acc = 0.0, prod = 1.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double t = s(k) * dist[static_cast<std::size_t>(k)](i, j);
        acc += t;
        prod *= 1.0 + t;
      }
      const double v = prod * std::exp(-acc);
      r(i, j) = v;
      r(j, i) = v;
    }
  }
}

// Profiled REML pieces at fixed correlation lengths.
struct RemlEval {
  double loglike = kNegInf;
  double mu = 0.0;
  double sigma2 = 0.0;
  double nugget = 0.0;
  bool ok = false;
};

RemlEval reml_eval(const std::vector<Eigen::MatrixXd>& dist, const Eigen::VectorXd& ys,
                   const Eigen::VectorXd& theta, const KrigingOptions& opt,
                   Eigen::MatrixXd& r_work, Eigen::LLT<Eigen::MatrixXd>& llt_work) {
  RemlEval out;
  const Eigen::Index n = ys.size();
  for (double nugget = opt.nugget; nugget <= opt.nugget_max * (1.0 + 1e-12); nugget *= 10.0) {
    build_correlation(dist, theta, nugget, r_work);
    llt_work.compute(r_work);
    if (llt_work.info() != Eigen::Success) continue;

    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd z1 = llt_work.solve(ones);
    const Eigen::VectorXd zy = llt_work.solve(ys);
    const double ones_z1 = ones.dot(z1);
    if (!(ones_z1 > 0.0)) continue;
    const double mu = ones.dot(zy) / ones_z1;
    const Eigen::VectorXd resid = ys - mu * ones;
    const double quad = resid.dot(zy - mu * z1);
    const double sigma2 = std::max(quad / std::max<Eigen::Index>(n - 1, 1), 1e-300);

    double logdet = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(llt_work.matrixLLT()(i, i));
    logdet *= 2.0;

    out.loglike = -0.5 * ((n - 1) * std::log(sigma2) + logdet + std::log(ones_z1));
    out.mu = mu;
    out.sigma2 = sigma2;
    out.nugget = nugget;
    out.ok = std::isfinite(out.loglike);
    if (out.ok) return out;
  }
  out.loglike = kNegInf;
  out.ok = false;
  return out;
}

}  // namespace

double matern32(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                const Eigen::VectorXd& theta) {
  if (a.size() != b.size() || a.size() != theta.size())
    throw Error("matern32: dimension mismatch");
  double acc = 0.0, prod = 1.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    if (!(theta(k) > 0.0)) throw Error("matern32: theta must be positive");
    const double t = kSqrt3 * std::abs(a(k) - b(k)) / theta(k);
    acc += t;
    prod *= 1.0 + t;
  }
  return prod * std::exp(-acc);
}

Eigen::VectorXd KrigingModel::normalize(const Eigen::VectorXd& x) const {
  return (x - x_lo_).cwiseQuotient(x_scale_);
}

void KrigingModel::finalize_output(OutputModel& om, const Eigen::VectorXd& ys) const {
  const Eigen::Index n = ys.size();
  Eigen::MatrixXd r;
  const auto dist = distance_tables(inputs_norm_);
  build_correlation(dist, om.theta, om.nugget, r);
  om.llt.compute(r);
  if (om.llt.info() != Eigen::Success)
    throw Error("KrigingModel: correlation factorization failed; try a larger nugget");
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  om.rinv_ones = om.llt.solve(ones);
  om.ones_rinv_ones = ones.dot(om.rinv_ones);
  om.alpha = om.llt.solve(ys - om.mu * ones);
}

KrigingModel KrigingModel::fit(const TrainingSet& set, const KrigingOptions& options) {
  if (!set.has_remainders)
    throw Error("KrigingModel::fit: training set carries no remainder outputs");
  const Eigen::Index n = static_cast<Eigen::Index>(set.samples.size());
  Eigen::MatrixXd x(n, 3), y(n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = set.samples[static_cast<std::size_t>(i)];
    for (int k = 0; k < 3; ++k) {
      x(i, k) = s.c[static_cast<std::size_t>(k)];
      y(i, k) = s.s_rem[static_cast<std::size_t>(k)];
    }
    for (int k = 0; k < 6; ++k) y(i, 3 + k) = s.d_rem[static_cast<std::size_t>(k)];
  }
  return fit(x, y, options, set.meta);
}

KrigingModel KrigingModel::fit(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& outputs,
                               const KrigingOptions& options, DatasetMeta meta) {
  if (inputs.rows() != outputs.rows()) throw Error("KrigingModel::fit: row mismatch");
  if (inputs.rows() < 2) throw Error("KrigingModel::fit: at least 2 training points required");
  if (!inputs.allFinite() || !outputs.allFinite())
    throw Error("KrigingModel::fit: non-finite training data");

  KrigingModel model;
  model.inputs_ = inputs;
  model.raw_outputs_ = outputs;
  model.options_ = options;
  model.meta_ = std::move(meta);

  const Eigen::Index n = inputs.rows(), d = inputs.cols(), ny = outputs.cols();
  model.x_lo_ = inputs.colwise().minCoeff();
  const Eigen::VectorXd hi = inputs.colwise().maxCoeff();
  model.x_scale_.resize(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double span = hi(k) - model.x_lo_(k);
    model.x_scale_(k) = span > 1e-300 ? span : 1.0;
  }
  model.inputs_norm_.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    model.inputs_norm_.row(i) = model.normalize(inputs.row(i).transpose()).transpose();

  // Distinct inputs are a hard requirement: duplicated rows make the
  // correlation matrix singular at every theta.
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if ((model.inputs_norm_.row(i) - model.inputs_norm_.row(j)).cwiseAbs().maxCoeff() == 0.0)
        throw Error("KrigingModel::fit: duplicate training inputs " + std::to_string(i) + ", " +
                    std::to_string(j));

  const auto dist = distance_tables(model.inputs_norm_);
  model.outputs_.resize(static_cast<std::size_t>(ny));

  parallel_for(
      static_cast<std::size_t>(ny),
      [&](std::size_t j) {
        OutputModel& om = model.outputs_[j];
        const Eigen::VectorXd y = outputs.col(static_cast<Eigen::Index>(j));
        om.y_mean = y.mean();
        const double var = (y.array() - om.y_mean).square().sum() / std::max<Eigen::Index>(n - 1, 1);
        om.y_std = std::sqrt(var);

        if (om.y_std <= 1e-14 * std::max(1.0, std::abs(om.y_mean))) {
          // Constant output: the predictor returns the constant, with zero
          // process variance.
          om.constant = true;
          om.y_std = 1.0;
          om.theta = Eigen::VectorXd::Constant(d, 1.0);
          om.sigma2 = 0.0;
          om.mu = 0.0;
          om.nugget = options.nugget;
          return;
        }

        const Eigen::VectorXd ys = (y.array() - om.y_mean) / om.y_std;
        Eigen::MatrixXd r_work;
        Eigen::LLT<Eigen::MatrixXd> llt_work;
        const auto objective = [&](const Eigen::VectorXd& log_theta) {
          const Eigen::VectorXd theta = log_theta.array().exp();
          return reml_eval(dist, ys, theta, options, r_work, llt_work).loglike;
        };

        const double lo = std::log(options.theta_lo), hi_b = std::log(options.theta_hi);
        std::mt19937_64 rng(options.seed * 0x9e3779b97f4a7c15ull + j + 1);
        std::uniform_real_distribution<double> upos(lo, hi_b);
        std::uniform_real_distribution<double> u01(0.0, 1.0);

        // Global phase: particle swarm in log-theta space.
        const int np = options.particles;
        std::vector<Eigen::VectorXd> pos(static_cast<std::size_t>(np)),
            vel(static_cast<std::size_t>(np)), pbest(static_cast<std::size_t>(np));
        std::vector<double> pbest_val(static_cast<std::size_t>(np), kNegInf);
        Eigen::VectorXd gbest = Eigen::VectorXd::Constant(d, 0.5 * (lo + hi_b));
        double gbest_val = kNegInf;
        for (int p = 0; p < np; ++p) {
          auto& xp = pos[static_cast<std::size_t>(p)];
          xp.resize(d);
          auto& vp = vel[static_cast<std::size_t>(p)];
          vp.resize(d);
          for (Eigen::Index k = 0; k < d; ++k) {
            xp(k) = upos(rng);
            vp(k) = 0.25 * (u01(rng) - 0.5) * (hi_b - lo);
          }
          pbest[static_cast<std::size_t>(p)] = xp;
          const double val = objective(xp);
          pbest_val[static_cast<std::size_t>(p)] = val;
          if (val > gbest_val) {
            gbest_val = val;
            gbest = xp;
          }
        }
        for (int it = 0; it < options.iterations; ++it) {
          for (int p = 0; p < np; ++p) {
            auto& xp = pos[static_cast<std::size_t>(p)];
            auto& vp = vel[static_cast<std::size_t>(p)];
            for (Eigen::Index k = 0; k < d; ++k) {
              vp(k) = options.inertia * vp(k) +
                      options.cognitive * u01(rng) * (pbest[static_cast<std::size_t>(p)](k) - xp(k)) +
                      options.social * u01(rng) * (gbest(k) - xp(k));
              xp(k) = std::clamp(xp(k) + vp(k), lo, hi_b);
            }
            const double val = objective(xp);
            if (val > pbest_val[static_cast<std::size_t>(p)]) {
              pbest_val[static_cast<std::size_t>(p)] = val;
              pbest[static_cast<std::size_t>(p)] = xp;
            }
            if (val > gbest_val) {
              gbest_val = val;
              gbest = xp;
            }
          }
        }

        // Local phase: compass pattern search around the best particle.
        double step = 0.1 * (hi_b - lo);
        for (int it = 0; it < options.pattern_steps && step > 1e-12; ++it) {
          bool improved = false;
          for (Eigen::Index k = 0; k < d && !improved; ++k) {
            for (double sign : {+1.0, -1.0}) {
              Eigen::VectorXd trial = gbest;
              trial(k) = std::clamp(trial(k) + sign * step, lo, hi_b);
              const double val = objective(trial);
              if (val > gbest_val) {
                gbest_val = val;
                gbest = trial;
                improved = true;
                break;
              }
            }
          }
          if (!improved) step *= 0.5;
        }

        if (!std::isfinite(gbest_val))
          throw Error("KrigingModel::fit: singular correlation at all tried theta for output " +
                      std::to_string(j) + "; consider a larger nugget");

        om.theta = gbest.array().exp();
        const RemlEval fin = reml_eval(dist, ys, om.theta, options, r_work, llt_work);
        om.mu = fin.mu;
        om.sigma2 = fin.sigma2;
        om.nugget = fin.nugget;
      },
      options.n_threads);

  for (Eigen::Index j = 0; j < ny; ++j) {
    OutputModel& om = model.outputs_[static_cast<std::size_t>(j)];
    if (om.constant) continue;
    const Eigen::VectorXd ys =
        (outputs.col(j).array() - om.y_mean) / om.y_std;
    model.finalize_output(om, ys);
  }
  return model;
}

Eigen::VectorXd KrigingModel::predict_mean(const Eigen::VectorXd& x) const {
  if (outputs_.empty()) throw Error("KrigingModel: not fitted");
  const Eigen::VectorXd xn = normalize(x);
  const Eigen::Index n = inputs_norm_.rows();
  Eigen::VectorXd out(static_cast<Eigen::Index>(outputs_.size()));
  Eigen::VectorXd rstar(n);
  for (std::size_t j = 0; j < outputs_.size(); ++j) {
    const OutputModel& om = outputs_[j];
    if (om.constant) {
      out(static_cast<Eigen::Index>(j)) = om.y_mean;
      continue;
    }
    Eigen::VectorXd s = (kSqrt3 / om.theta.array()).matrix();
    for (Eigen::Index i = 0; i < n; ++i) {
      double acc = 0.0, prod = 1.0;
      for (Eigen::Index k = 0; k < xn.size(); ++k) {
        const double t = s(k) * std::abs(xn(k) - inputs_norm_(i, k));
        acc += t;
        prod *= 1.0 + t;
      }
      rstar(i) = prod * std::exp(-acc);
    }
    const double ys_hat = om.mu + rstar.dot(om.alpha);
    out(static_cast<Eigen::Index>(j)) = om.y_mean + om.y_std * ys_hat;
  }
  return out;
}

Eigen::VectorXd KrigingModel::predict_variance(const Eigen::VectorXd& x) const {
  if (outputs_.empty()) throw Error("KrigingModel: not fitted");
  const Eigen::VectorXd xn = normalize(x);
  const Eigen::Index n = inputs_norm_.rows();
  Eigen::VectorXd out(static_cast<Eigen::Index>(outputs_.size()));
  Eigen::VectorXd rstar(n);
  for (std::size_t j = 0; j < outputs_.size(); ++j) {
    const OutputModel& om = outputs_[j];
    if (om.constant) {
      out(static_cast<Eigen::Index>(j)) = 0.0;
      continue;
    }
    Eigen::VectorXd s = (kSqrt3 / om.theta.array()).matrix();
    for (Eigen::Index i = 0; i < n; ++i) {
      double acc = 0.0, prod = 1.0;
      for (Eigen::Index k = 0; k < xn.size(); ++k) {
        const double t = s(k) * std::abs(xn(k) - inputs_norm_(i, k));
        acc += t;
        prod *= 1.0 + t;
      }
      rstar(i) = prod * std::exp(-acc);
    }
    const Eigen::VectorXd rinv_rstar = om.llt.solve(rstar);
    const double b = 1.0 - rstar.dot(om.rinv_ones);
    double v = om.sigma2 * (1.0 - rstar.dot(rinv_rstar) + b * b / om.ones_rinv_ones);
    v *= om.y_std * om.y_std;
    out(static_cast<Eigen::Index>(j)) = std::max(v, 0.0);
  }
  return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> KrigingModel::confidence_interval(
    const Eigen::VectorXd& x, double level) const {
  if (std::abs(level - 0.95) > 1e-12)
    throw Error("confidence_interval: only the 95% level is tabulated");
  const double z = 1.96;
  const Eigen::VectorXd mean = predict_mean(x);
  const Eigen::VectorXd sd = predict_variance(x).cwiseSqrt();
  return {mean - z * sd, mean + z * sd};
}

Eigen::VectorXd KrigingModel::theta(int output) const {
  return outputs_.at(static_cast<std::size_t>(output)).theta;
}
double KrigingModel::sigma2(int output) const {
  const OutputModel& om = outputs_.at(static_cast<std::size_t>(output));
  return om.sigma2 * om.y_std * om.y_std;
}
double KrigingModel::process_mean(int output) const {
  const OutputModel& om = outputs_.at(static_cast<std::size_t>(output));
  return om.y_mean + om.y_std * om.mu;
}

double KrigingModel::reml(int output, const Eigen::VectorXd& theta_normalized) const {
  const OutputModel& om = outputs_.at(static_cast<std::size_t>(output));
  if (om.constant) return 0.0;
  const Eigen::VectorXd ys =
      (raw_outputs_.col(output).array() - om.y_mean) / om.y_std;
  const auto dist = distance_tables(inputs_norm_);
  Eigen::MatrixXd r_work;
  Eigen::LLT<Eigen::MatrixXd> llt_work;
  return reml_eval(dist, ys, theta_normalized, options_, r_work, llt_work).loglike;
}

void KrigingModel::save(const std::string& path) const {
  nlohmann::json j;
  j["schema"] = "hybridfem-kriging-v1";
  j["meta"] = {{"source", meta_.source},       {"macro_c1", meta_.macro_c1},
               {"region_width", meta_.region_width}, {"region_layers", meta_.region_layers},
               {"seed", meta_.seed},           {"note", meta_.note}};
  j["options"] = {{"particles", options_.particles},
                  {"iterations", options_.iterations},
                  {"pattern_steps", options_.pattern_steps},
                  {"inertia", options_.inertia},
                  {"cognitive", options_.cognitive},
                  {"social", options_.social},
                  {"theta_lo", options_.theta_lo},
                  {"theta_hi", options_.theta_hi},
                  {"nugget", options_.nugget},
                  {"nugget_max", options_.nugget_max},
                  {"seed", options_.seed}};
  auto dump_matrix = [](const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
      rows.push_back(row);
    }
    return rows;
  };
  auto dump_vector = [](const Eigen::VectorXd& v) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
  };
  j["inputs"] = dump_matrix(inputs_);
  j["outputs_raw"] = dump_matrix(raw_outputs_);
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& om : outputs_) {
    outs.push_back({{"theta", dump_vector(om.theta)},
                    {"sigma2", om.sigma2},
                    {"mu", om.mu},
                    {"y_mean", om.y_mean},
                    {"y_std", om.y_std},
                    {"nugget", om.nugget},
                    {"constant", om.constant},
                    {"alpha", dump_vector(om.alpha)},
                    {"rinv_ones", dump_vector(om.rinv_ones)},
                    {"ones_rinv_ones", om.ones_rinv_ones}});
  }
  j["per_output"] = outs;
  std::ofstream out(path);
  if (!out) throw Error("KrigingModel::save: cannot open " + path);
  out << j.dump() << "\n";
}

KrigingModel KrigingModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("KrigingModel::load: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw Error("KrigingModel::load: malformed file " + path + ": " + ex.what());
  }
  if (j.value("schema", "") != "hybridfem-kriging-v1")
    throw Error("KrigingModel::load: unknown schema in " + path);

  KrigingModel model;
  const auto& jm = j.at("meta");
  model.meta_.source = jm.value("source", "");
  model.meta_.macro_c1 = jm.value("macro_c1", 0.0);
  model.meta_.region_width = jm.value("region_width", 0.0);
  model.meta_.region_layers = jm.value("region_layers", 0);
  model.meta_.seed = jm.value("seed", std::uint64_t{0});
  model.meta_.note = jm.value("note", "");
  const auto& jo = j.at("options");
  model.options_.particles = jo.value("particles", 40);
  model.options_.iterations = jo.value("iterations", 200);
  model.options_.pattern_steps = jo.value("pattern_steps", 100);
  model.options_.inertia = jo.value("inertia", 0.7);
  model.options_.cognitive = jo.value("cognitive", 1.5);
  model.options_.social = jo.value("social", 1.5);
  model.options_.theta_lo = jo.value("theta_lo", 1e-2);
  model.options_.theta_hi = jo.value("theta_hi", 1e2);
  model.options_.nugget = jo.value("nugget", 1e-12);
  model.options_.nugget_max = jo.value("nugget_max", 1e-6);
  model.options_.seed = jo.value("seed", std::uint64_t{0});

  auto load_matrix = [](const nlohmann::json& rows) {
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index d = n > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
    Eigen::MatrixXd m(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index k = 0; k < d; ++k)
        m(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
    return m;
  };
  auto load_vector = [](const nlohmann::json& vals) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i)
      v(i) = vals[static_cast<std::size_t>(i)].get<double>();
    return v;
  };
  model.inputs_ = load_matrix(j.at("inputs"));
  model.raw_outputs_ = load_matrix(j.at("outputs_raw"));

  const Eigen::Index n = model.inputs_.rows(), d = model.inputs_.cols();
  if (n < 2) throw Error("KrigingModel::load: truncated input block");
  model.x_lo_ = model.inputs_.colwise().minCoeff();
  const Eigen::VectorXd hi = model.inputs_.colwise().maxCoeff();
  model.x_scale_.resize(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double span = hi(k) - model.x_lo_(k);
    model.x_scale_(k) = span > 1e-300 ? span : 1.0;
  }
  model.inputs_norm_.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    model.inputs_norm_.row(i) = model.normalize(model.inputs_.row(i).transpose()).transpose();

  for (const auto& om_json : j.at("per_output")) {
    OutputModel om;
    om.theta = load_vector(om_json.at("theta"));
    om.sigma2 = om_json.at("sigma2").get<double>();
    om.mu = om_json.at("mu").get<double>();
    om.y_mean = om_json.at("y_mean").get<double>();
    om.y_std = om_json.at("y_std").get<double>();
    om.nugget = om_json.at("nugget").get<double>();
    om.constant = om_json.at("constant").get<bool>();
    om.alpha = load_vector(om_json.at("alpha"));
    om.rinv_ones = load_vector(om_json.at("rinv_ones"));
    om.ones_rinv_ones = om_json.at("ones_rinv_ones").get<double>();
    if (!om.constant && om.alpha.size() != n)
      throw Error("KrigingModel::load: truncated coefficient block");
    model.outputs_.push_back(std::move(om));
  }

  // Rebuild the Cholesky factors for variance predictions; the stored alpha
  // keeps mean predictions bit-identical to the saved model.
  const auto dist = distance_tables(model.inputs_norm_);
  for (auto& om : model.outputs_) {
    if (om.constant) continue;
    Eigen::MatrixXd r;
    build_correlation(dist, om.theta, om.nugget, r);
    om.llt.compute(r);
    if (om.llt.info() != Eigen::Success)
      throw Error("KrigingModel::load: correlation factorization failed");
  }
  return model;
}

}  // namespace hybridfem
