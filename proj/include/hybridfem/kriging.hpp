#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "hybridfem/dataset.hpp"

namespace hybridfem {

// Matern 3/2 product correlation with one length scale per input dimension:
//   R(c, c') = prod_k (1 + sqrt(3)|c_k - c'_k| / theta_k)
//              exp(-sqrt(3)|c_k - c'_k| / theta_k).
double matern32(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                const Eigen::VectorXd& theta);

struct KrigingOptions {
  // Particle swarm (global phase) followed by compass pattern search
  // (local refinement), both in log-theta space.
  int particles = 40;
  int iterations = 200;
  int pattern_steps = 100;
  double inertia = 0.7;
  double cognitive = 1.5;
  double social = 1.5;
  // Correlation-length bounds in normalized input units.
  double theta_lo = 1e-2;
  double theta_hi = 1e2;
  // Diagonal regularization; escalated tenfold on Cholesky failure. The
  // default keeps the interpolation bias at training points below 1e-6
  // relative even for dense grid-like designs.
  double nugget = 1e-12;
  double nugget_max = 1e-6;
  std::uint64_t seed = 0;
  unsigned n_threads = 0;
};

// Per-output independent Ordinary Kriging over a shared input set. Inputs
// are normalized to [0,1] per dimension, outputs standardized per component.
// A fitted model is immutable; predictions are safe under unrestricted
// concurrent calls.
class KrigingModel {
 public:
  KrigingModel() = default;

  // Restricted-maximum-likelihood fit of the correlation lengths, one
  // independent search per output; the process variance and the constant
  // mean are profiled in closed form. Deterministic per seed.
  static KrigingModel fit(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& outputs,
                          const KrigingOptions& options = {}, DatasetMeta meta = {});
  static KrigingModel fit(const TrainingSet& set, const KrigingOptions& options = {});

  int n_training() const { return static_cast<int>(inputs_.rows()); }
  int n_inputs() const { return static_cast<int>(inputs_.cols()); }
  int n_outputs() const { return static_cast<int>(outputs_.size()); }

  // GLS mean predictor (raw output units).
  Eigen::VectorXd predict_mean(const Eigen::VectorXd& x) const;
  // Per-output prediction variance including the mean-estimation term (raw
  // output units squared); non-negative.
  Eigen::VectorXd predict_variance(const Eigen::VectorXd& x) const;
  // Mean +- z sqrt(variance); level 0.95 gives z = 1.96.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> confidence_interval(const Eigen::VectorXd& x,
                                                                  double level = 0.95) const;

  void save(const std::string& path) const;
  static KrigingModel load(const std::string& path);

  const DatasetMeta& meta() const { return meta_; }
  const KrigingOptions& options() const { return options_; }
  Eigen::VectorXd theta(int output) const;
  double sigma2(int output) const;
  double process_mean(int output) const;

  // REML log-likelihood (up to a constant) of output j at the given
  // normalized-unit correlation lengths; exposed for optimizer sanity
  // checks.
  double reml(int output, const Eigen::VectorXd& theta_normalized) const;

 private:
  struct OutputModel {
    Eigen::VectorXd theta;  // normalized units
    double sigma2 = 0.0;    // standardized units
    double mu = 0.0;        // standardized units
    double y_mean = 0.0;
    double y_std = 1.0;
    double nugget = 0.0;
    bool constant = false;
    Eigen::VectorXd alpha;      // R^-1 (y - mu 1)
    Eigen::VectorXd rinv_ones;  // R^-1 1
    double ones_rinv_ones = 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt;  // rebuilt on load, used for variance
  };

  Eigen::VectorXd normalize(const Eigen::VectorXd& x) const;
  void finalize_output(OutputModel& om, const Eigen::VectorXd& y_std_units) const;

  Eigen::MatrixXd inputs_;      // raw
  Eigen::MatrixXd inputs_norm_;
  Eigen::VectorXd x_lo_, x_scale_;
  std::vector<OutputModel> outputs_;
  KrigingOptions options_;
  DatasetMeta meta_;
  Eigen::MatrixXd raw_outputs_;  // kept for persistence and exactness checks
};

}  // namespace hybridfem
