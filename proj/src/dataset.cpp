#include "hybridfem/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hybridfem/util.hpp"

namespace hybridfem {

namespace {

std::string format_f_app(const DefGradient& f) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g", f.f11, f.f22, f.f12);
  return buf;
}

nlohmann::json sample_to_json(const TrainingSample& s, bool with_remainders) {
  nlohmann::json j;
  j["c"] = s.c;
  if (with_remainders) {
    j["s_rem"] = s.s_rem;
    j["d_rem"] = s.d_rem;
  } else {
    j["s_rem"] = nlohmann::json::array();
    j["d_rem"] = nlohmann::json::array();
  }
  j["f_app"] = s.f_app;
  return j;
}

}  // namespace

bool TrainingSet::has_reference_sample(double tol) const {
  for (const auto& s : samples)
    if (std::abs(s.c[0] - 1.0) <= tol && std::abs(s.c[1] - 1.0) <= tol &&
        std::abs(s.c[2]) <= tol)
      return true;
  return false;
}

HomogenizedPoint AnalyticGroundTruth::evaluate(const DefGradient& f_app) const {
  if (!f_app.is_symmetric()) throw Error("AnalyticGroundTruth: F_app must be symmetric");
  HomogenizedPoint point;
  point.f_app = f_app;
  point.c = right_cauchy_green(f_app);
  const MaterialEval ev = micro_material(point.c, params_);
  point.s_rve = ev.s;
  point.d_rve = ev.d;
  return point;
}

std::string AnalyticGroundTruth::source_id() const {
  nlohmann::json j{{"c1", params_.c1},
                   {"c2", params_.c2},
                   {"c3", params_.c3},
                   {"c4", params_.c4},
                   {"c5", params_.c5}};
  return "analytic:" + hex64(fnv1a(j.dump()));
}

TruthCache::TruthCache(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;  // fresh cache
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    HomogenizedPoint p;
    const auto f = j.at("f_app");
    p.f_app = DefGradient::symmetric(f[0].get<double>(), f[1].get<double>(), f[2].get<double>());
    p.c = right_cauchy_green(p.f_app);
    const auto s = j.at("s_rve");
    p.s_rve = {s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
    std::array<double, 6> d{};
    for (int i = 0; i < 6; ++i) d[static_cast<std::size_t>(i)] = j.at("d_rve")[static_cast<std::size_t>(i)].get<double>();
    p.d_rve = unpack_tangent(d);
    entries_[key(j.at("source").get<std::string>(), p.f_app)] = p;
  }
}

std::string TruthCache::key(const std::string& source, const DefGradient& f) {
  return source + "|" + format_f_app(f);
}

std::optional<HomogenizedPoint> TruthCache::lookup(const std::string& source,
                                                   const DefGradient& f) const {
  std::lock_guard<std::mutex> lock(mutex_);
  const auto it = entries_.find(key(source, f));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void TruthCache::store(const std::string& source, const HomogenizedPoint& point) {
  std::lock_guard<std::mutex> lock(mutex_);
  entries_[key(source, point.f_app)] = point;
}

void TruthCache::flush() const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::ofstream out(path_);
  if (!out) throw Error("TruthCache: cannot open " + path_);
  for (const auto& [k, p] : entries_) {
    const std::string source = k.substr(0, k.find('|'));
    nlohmann::json j;
    j["source"] = source;
    j["f_app"] = {p.f_app.f11, p.f_app.f22, p.f_app.f12};
    j["s_rve"] = {p.s_rve.s11, p.s_rve.s22, p.s_rve.s12};
    j["d_rve"] = pack_tangent(p.d_rve);
    out << j.dump() << "\n";
  }
}

HomogenizedPoint RveGroundTruth::evaluate(const DefGradient& f_app) const {
  if (cache_) {
    if (const auto hit = cache_->lookup(source_id(), f_app)) return *hit;
  }
  const HomogenizedPoint point = homogenizer_->homogenize(f_app);
  if (cache_) cache_->store(source_id(), point);
  return point;
}

std::string RveGroundTruth::source_id() const { return "rve:" + homogenizer_->spec().hash(); }

TrainingSet build_training_set(const std::vector<DefGradient>& samples, const GroundTruth& truth,
                               const MacroModelParams& macro, unsigned n_threads) {
  TrainingSet set;
  set.meta.source = truth.source_id();
  set.meta.macro_c1 = macro.c1;
  set.samples.resize(samples.size());

  std::vector<std::string> failures(samples.size());
  parallel_for(
      samples.size(),
      [&](std::size_t i) {
        const DefGradient& f = samples[i];
        try {
          const HomogenizedPoint point = truth.evaluate(f);
          const MaterialEval mod = macro_model(point.c, macro);
          TrainingSample& s = set.samples[i];
          s.c = point.c.voigt();
          s.f_app = {f.f11, f.f22, f.f12};
          s.s_rem = {point.s_rve.s11 - mod.s.s11, point.s_rve.s22 - mod.s.s22,
                     point.s_rve.s12 - mod.s.s12};
          const auto d_true = pack_tangent(point.d_rve);
          const auto d_mod = pack_tangent(mod.d);
          for (int k = 0; k < 6; ++k)
            s.d_rem[static_cast<std::size_t>(k)] =
                d_true[static_cast<std::size_t>(k)] - d_mod[static_cast<std::size_t>(k)];
        } catch (const std::exception& ex) {
          failures[i] = ex.what();
        }
      },
      n_threads);

  std::string failed;
  int n_failed = 0;
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (failures[i].empty()) continue;
    ++n_failed;
    if (n_failed <= 8)
      failed += "\n  sample " + std::to_string(i) + ": " + failures[i];
  }
  if (n_failed > 0)
    throw Error("build_training_set: " + std::to_string(n_failed) +
                " sample(s) failed (no silent gaps):" + failed);
  return set;
}

TrainingSet make_reference_cloud(const std::vector<DefGradient>& samples, std::string source) {
  TrainingSet set;
  set.has_remainders = false;
  set.meta.source = std::move(source);
  set.meta.note = "reference-cloud";
  set.samples.resize(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const CauchyGreen c = right_cauchy_green(samples[i]);
    set.samples[i].c = c.voigt();
    set.samples[i].f_app = {samples[i].f11, samples[i].f22, samples[i].f12};
  }
  return set;
}

void save_training_set(const TrainingSet& set, const std::string& path) {
  std::ostringstream body;
  for (const auto& s : set.samples) body << sample_to_json(s, set.has_remainders).dump() << "\n";
  const std::string records = body.str();

  nlohmann::json head;
  head["schema"] = set.meta.schema;
  head["source"] = set.meta.source;
  head["macro_c1"] = set.meta.macro_c1;
  head["region_width"] = set.meta.region_width;
  head["region_layers"] = set.meta.region_layers;
  head["seed"] = set.meta.seed;
  head["note"] = set.meta.note;
  head["has_remainders"] = set.has_remainders;
  head["count"] = set.samples.size();
  head["content_hash"] = hex64(fnv1a(records));

  std::ofstream out(path);
  if (!out) throw Error("save_training_set: cannot open " + path);
  out << head.dump() << "\n" << records;
}

TrainingSet load_training_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("load_training_set: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error("load_training_set: empty file " + path);
  const nlohmann::json head = nlohmann::json::parse(line);
  if (head.value("schema", "") != "hybridfem-dataset-v1")
    throw Error("load_training_set: unknown schema in " + path);

  TrainingSet set;
  set.meta.schema = head.at("schema").get<std::string>();
  set.meta.source = head.value("source", "");
  set.meta.macro_c1 = head.value("macro_c1", 0.0);
  set.meta.region_width = head.value("region_width", 0.0);
  set.meta.region_layers = head.value("region_layers", 0);
  set.meta.seed = head.value("seed", std::uint64_t{0});
  set.meta.note = head.value("note", "");
  set.has_remainders = head.value("has_remainders", true);

  std::ostringstream body;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    body << line << "\n";
    const nlohmann::json j = nlohmann::json::parse(line);
    TrainingSample s;
    for (int k = 0; k < 3; ++k) s.c[static_cast<std::size_t>(k)] = j.at("c")[static_cast<std::size_t>(k)].get<double>();
    for (int k = 0; k < 3; ++k)
      s.f_app[static_cast<std::size_t>(k)] = j.at("f_app")[static_cast<std::size_t>(k)].get<double>();
    if (set.has_remainders) {
      for (int k = 0; k < 3; ++k)
        s.s_rem[static_cast<std::size_t>(k)] = j.at("s_rem")[static_cast<std::size_t>(k)].get<double>();
      for (int k = 0; k < 6; ++k)
        s.d_rem[static_cast<std::size_t>(k)] = j.at("d_rem")[static_cast<std::size_t>(k)].get<double>();
    }
    set.samples.push_back(s);
  }
  if (set.samples.size() != head.at("count").get<std::size_t>())
    throw Error("load_training_set: record count mismatch in " + path);
  if (hex64(fnv1a(body.str())) != head.at("content_hash").get<std::string>())
    throw Error("load_training_set: content hash mismatch in " + path);
  return set;
}

}  // namespace hybridfem
