#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "hybridfem/rve.hpp"
#include "hybridfem/sampling.hpp"

namespace hybridfem {

// One training record: Voigt strain input against the stress and tangent
// remainders (ground truth minus the analytic model).
struct TrainingSample {
  std::array<double, 3> c{};      // (C11, C22, C12)
  std::array<double, 3> s_rem{};  // stress remainder
  std::array<double, 6> d_rem{};  // tangent remainder, packed upper triangle
  std::array<double, 3> f_app{};  // generating stretch (F11, F22, F12)
};

struct DatasetMeta {
  std::string schema = "hybridfem-dataset-v1";
  std::string source;  // ground-truth fingerprint, e.g. "rve:<hash>"
  double macro_c1 = 0.0;
  double region_width = 0.0;
  int region_layers = 0;
  std::uint64_t seed = 0;
  std::string note;
};

struct TrainingSet {
  std::vector<TrainingSample> samples;
  DatasetMeta meta;
  bool has_remainders = true;  // reference clouds carry inputs only

  // One sample exactly at the reference configuration c = (1, 1, 0).
  bool has_reference_sample(double tol = 1e-12) const;
};

// Ground-truth provider for dataset construction: either a closed-form law
// or a full RVE homogenization.
class GroundTruth {
 public:
  virtual ~GroundTruth() = default;
  virtual HomogenizedPoint evaluate(const DefGradient& f_app) const = 0;
  virtual std::string source_id() const = 0;
};

class AnalyticGroundTruth final : public GroundTruth {
 public:
  explicit AnalyticGroundTruth(const MicroMaterialParams& params) : params_(params) {}
  HomogenizedPoint evaluate(const DefGradient& f_app) const override;
  std::string source_id() const override;

 private:
  MicroMaterialParams params_;
};

// File-backed store of homogenized points keyed by (source, F_app); RVE
// reference clouds dominate runtime, so results are computed once per
// realization and reused.
class TruthCache {
 public:
  explicit TruthCache(std::string path);
  std::optional<HomogenizedPoint> lookup(const std::string& source, const DefGradient& f) const;
  void store(const std::string& source, const HomogenizedPoint& point);
  void flush() const;
  std::size_t size() const { return entries_.size(); }

 private:
  static std::string key(const std::string& source, const DefGradient& f);
  std::string path_;
  std::map<std::string, HomogenizedPoint> entries_;
  mutable std::mutex mutex_;
};

class RveGroundTruth final : public GroundTruth {
 public:
  RveGroundTruth(std::shared_ptr<const Homogenizer> homogenizer,
                 std::shared_ptr<TruthCache> cache = nullptr)
      : homogenizer_(std::move(homogenizer)), cache_(std::move(cache)) {}
  HomogenizedPoint evaluate(const DefGradient& f_app) const override;
  std::string source_id() const override;
  const Homogenizer& homogenizer() const { return *homogenizer_; }

 private:
  std::shared_ptr<const Homogenizer> homogenizer_;
  std::shared_ptr<TruthCache> cache_;
};

// Evaluates the ground truth at every sample (concurrently, results in
// sample order) and subtracts the analytic model response. Any failed
// evaluation aborts the build listing the offending samples.
TrainingSet build_training_set(const std::vector<DefGradient>& samples, const GroundTruth& truth,
                               const MacroModelParams& macro, unsigned n_threads = 0);

// Input-only cloud in the same schema (empty remainder fields).
TrainingSet make_reference_cloud(const std::vector<DefGradient>& samples, std::string source);

// JSON-Lines persistence with a content hash; loading a tampered or
// truncated file fails loudly.
void save_training_set(const TrainingSet& set, const std::string& path);
TrainingSet load_training_set(const std::string& path);

}  // namespace hybridfem
