#include "satweight/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <string_view>
#include <type_traits>
#include <utility>

#include "satweight/errors.hpp"

namespace satweight {

// Generated at build time from configs/*.json.
const std::vector<std::pair<std::string_view, std::string_view>>& embedded_presets();

using nlohmann::json;

namespace {

constexpr double kDeg = kPi / 180.0;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw Error(ErrorCategory::config, "field '" + path + "': " + what);
}

class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& child(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) fail(path(key), "missing");
    return *it;
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  Fields object(const std::string& key) { return Fields(child(key), path(key)); }

  template <class T>
  T get(const std::string& key) {
    const json& v = child(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(path(key), "expected true or false");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) fail(path(key), "expected a non-negative integer");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(path(key), "expected an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(path(key), "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(path(key), "expected a string");
    }
    return v.get<T>();
  }

  std::vector<double> numbers(const std::string& key) {
    const json& v = child(key);
    if (!v.is_array()) fail(path(key), "expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) fail(path(key), "expected an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  std::vector<Strategy> strategies(const std::string& key) {
    const json& v = child(key);
    if (!v.is_array() || v.empty()) fail(path(key), "expected a non-empty array of strategy names");
    std::vector<Strategy> out;
    for (const auto& x : v) {
      if (!x.is_string()) fail(path(key), "expected strategy names");
      try {
        out.push_back(strategy_from_string(x.get<std::string>()));
      } catch (const Error& e) {
        fail(path(key), e.what());
      }
    }
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) fail(path(key), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
void check(const std::string& section, F&& validate) {
  try {
    validate();
  } catch (const Error& e) {
    throw Error(ErrorCategory::config, "section '" + section + "': " + e.what());
  }
}

GenConfig parse_gen(Fields f) {
  GenConfig c;
  c.epochs = f.get<std::size_t>("epochs");
  {
    Fields n = f.object("n_satellites");
    c.n_satellites = {n.get<std::size_t>("min"), n.get<std::size_t>("max")};
    n.finish();
  }
  c.biased_fraction = f.get<double>("biased_fraction");
  {
    Fields m = f.object("mixture");
    c.mixture = {m.get<double>("alpha"), m.get<double>("mu"), m.get<double>("sigma"), m.get<double>("lambda")};
    m.finish();
  }
  c.seed = f.get<std::uint64_t>("seed");
  c.orbit_radius = f.get<double>("orbit_radius_m");
  c.min_elevation = f.get<double>("min_elevation_deg") * kDeg;
  c.gamma = f.get<double>("gamma_m");
  c.clip = f.get<double>("clip_m");
  {
    Fields s = f.object("split");
    c.split = {s.get<double>("train"), s.get<double>("validation"), s.get<double>("test")};
    s.finish();
  }
  c.split_seed = f.get<std::uint64_t>("split_seed");
  f.finish();
  return c;
}

json gen_json(const GenConfig& c) {
  return {{"epochs", c.epochs},
          {"n_satellites", {{"min", c.n_satellites.min}, {"max", c.n_satellites.max}}},
          {"biased_fraction", c.biased_fraction},
          {"mixture", {{"alpha", c.mixture.alpha}, {"mu", c.mixture.mu}, {"sigma", c.mixture.sigma}, {"lambda", c.mixture.lambda}}},
          {"seed", c.seed},
          {"orbit_radius_m", c.orbit_radius},
          {"min_elevation_deg", c.min_elevation / kDeg},
          {"gamma_m", c.gamma},
          {"clip_m", c.clip},
          {"split", {{"train", c.split.train}, {"validation", c.split.validation}, {"test", c.split.test}}},
          {"split_seed", c.split_seed}};
}

SolverConfig parse_solver(Fields f) {
  SolverConfig s;
  s.max_iterations = f.get<int>("max_iterations");
  s.step_tolerance = f.get<double>("step_tolerance_m");
  s.initial_damping = f.get<double>("initial_damping");
  s.damping_up = f.get<double>("damping_up");
  s.damping_down = f.get<double>("damping_down");
  f.finish();
  return s;
}

FdeConfig parse_fde(Fields f) {
  FdeConfig c;
  c.global_test_alpha = f.get<double>("global_test_alpha");
  // Absent or null: N - 4.
  if (f.has("max_exclusions") && !f.child("max_exclusions").is_null()) {
    c.max_exclusions = f.get<std::size_t>("max_exclusions");
  }
  c.min_satellites = f.get<std::size_t>("min_satellites");
  c.measurement_sigma = f.get<double>("measurement_sigma_m");
  f.finish();
  return c;
}

SigmaModelCoeffs parse_sigma(Fields f) {
  SigmaModelCoeffs c;
  c.zenith = f.get<double>("zenith_m2");
  c.cn0 = f.get<double>("cn0_m2hz");
  c.accel = f.get<double>("accel_s4");
  f.finish();
  return c;
}

json strategy_names(const std::vector<Strategy>& list) {
  json out = json::array();
  for (Strategy s : list) out.push_back(std::string(to_string(s)));
  return out;
}

}  // namespace

void RunConfig::validate() const {
  check("gen", [&] { gen.validate(); });
  check("model", [&] {
    if (model.hidden_size == 0 || model.layers == 0 || model.pad_to < 4) {
      throw Error(ErrorCategory::invalid_argument, "hidden_size and layers must be positive, pad_to at least 4");
    }
    if (gen.n_satellites.max > model.pad_to) {
      throw Error(ErrorCategory::invalid_argument, "pad_to is smaller than the largest satellite count");
    }
  });
  check("train", [&] { train.validate(); });
  check("eval", [&] {
    eval.solver.validate();
    eval.fde.validate();
    eval.sigma_model.validate();
  });
  check("sweep", [&] {
    if (sweep.fractions.empty()) throw Error(ErrorCategory::invalid_argument, "fractions must not be empty");
    for (double f : sweep.fractions) {
      if (!(f >= 0.0 && f <= 1.0)) throw Error(ErrorCategory::invalid_argument, "fractions must lie in [0, 1]");
    }
  });
  check("report", [&] {
    report.study.mixture.validate();
    if (!(report.study.biased_fraction >= 0.0 && report.study.biased_fraction <= 1.0) || report.study.trials < 2) {
      throw Error(ErrorCategory::invalid_argument, "biased_fraction must lie in [0, 1] and trials be at least 2");
    }
    (void)report.study.geometry.epoch();
  });
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& [name, text] : embedded_presets()) out.emplace_back(name);
  return out;
}

json preset_json(const std::string& name) {
  for (const auto& [n, text] : embedded_presets()) {
    if (n == name) return json::parse(text);
  }
  std::string known;
  for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
  throw Error(ErrorCategory::config, "unknown preset '" + name + "' (known: " + known + ")");
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  Fields root(j, "");
  if (j.contains("base")) (void)root.get<std::string>("base");
  c.gen = parse_gen(root.object("gen"));
  {
    Fields m = root.object("model");
    c.model.hidden_size = m.get<std::size_t>("hidden_size");
    c.model.layers = m.get<std::size_t>("layers");
    c.model.pad_to = m.get<std::size_t>("pad_to");
    m.finish();
  }
  {
    Fields t = root.object("train");
    c.train.learning_rate = t.get<double>("learning_rate");
    c.train.beta1 = t.get<double>("beta1");
    c.train.beta2 = t.get<double>("beta2");
    c.train.epsilon = t.get<double>("epsilon");
    c.train.batch_size = t.get<std::size_t>("batch_size");
    c.train.max_epochs = t.get<std::size_t>("max_epochs");
    c.train.patience = t.get<std::size_t>("patience");
    c.train.seed = t.get<std::uint64_t>("seed");
    c.train.mask_code = t.get<double>("mask_code");
    c.train.log_labels = t.get<bool>("log_labels");
    c.train.pad_to = c.model.pad_to;
    t.finish();
  }
  {
    Fields e = root.object("eval");
    c.eval.strategies = e.strategies("strategies");
    c.eval.solver = parse_solver(e.object("solver"));
    c.eval.fde = parse_fde(e.object("fde"));
    c.eval.sigma_model = parse_sigma(e.object("sigma_model"));
    e.finish();
  }
  {
    Fields s = root.object("sweep");
    c.sweep.fractions = s.numbers("fractions");
    c.sweep.retrain = s.get<bool>("retrain");
    s.finish();
  }
  {
    Fields r = root.object("report");
    try {
      c.report.study.geometry = canonical_geometry_from_json(r.child("geometry"));
    } catch (const json::exception& e) {
      fail(r.path("geometry"), e.what());
    }
    c.report.study.trials = r.get<std::size_t>("trials");
    c.report.study.seed = r.get<std::uint64_t>("seed");
    c.report.study.biased_fraction = r.get<double>("biased_fraction");
    c.report.strategies = r.strategies("strategies");
    c.report.study.mixture = c.gen.mixture;
    r.finish();
  }
  root.finish();
  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  json fde = {{"global_test_alpha", c.eval.fde.global_test_alpha},
              {"max_exclusions", nullptr},
              {"min_satellites", c.eval.fde.min_satellites},
              {"measurement_sigma_m", c.eval.fde.measurement_sigma}};
  if (c.eval.fde.max_exclusions) fde["max_exclusions"] = *c.eval.fde.max_exclusions;
  return {
      {"gen", gen_json(c.gen)},
      {"model", {{"hidden_size", c.model.hidden_size}, {"layers", c.model.layers}, {"pad_to", c.model.pad_to}}},
      {"train",
       {{"learning_rate", c.train.learning_rate},
        {"beta1", c.train.beta1},
        {"beta2", c.train.beta2},
        {"epsilon", c.train.epsilon},
        {"batch_size", c.train.batch_size},
        {"max_epochs", c.train.max_epochs},
        {"patience", c.train.patience},
        {"seed", c.train.seed},
        {"mask_code", c.train.mask_code},
        {"log_labels", c.train.log_labels}}},
      {"eval",
       {{"strategies", strategy_names(c.eval.strategies)},
        {"solver",
         {{"max_iterations", c.eval.solver.max_iterations},
          {"step_tolerance_m", c.eval.solver.step_tolerance},
          {"initial_damping", c.eval.solver.initial_damping},
          {"damping_up", c.eval.solver.damping_up},
          {"damping_down", c.eval.solver.damping_down}}},
        {"fde", fde},
        {"sigma_model",
         {{"zenith_m2", c.eval.sigma_model.zenith},
          {"cn0_m2hz", c.eval.sigma_model.cn0},
          {"accel_s4", c.eval.sigma_model.accel}}}}},
      {"sweep", {{"fractions", c.sweep.fractions}, {"retrain", c.sweep.retrain}}},
      {"report",
       {{"geometry", to_json(c.report.study.geometry)},
        {"trials", c.report.study.trials},
        {"seed", c.report.study.seed},
        {"biased_fraction", c.report.study.biased_fraction},
        {"strategies", strategy_names(c.report.strategies)}}}};
}

RunConfig load_run_config(const std::optional<std::string>& preset, const std::optional<std::filesystem::path>& file) {
  json patch = json::object();
  if (file) {
    std::ifstream in(*file, std::ios::binary);
    if (!in) throw Error(ErrorCategory::io, "cannot read config " + file->string());
    std::stringstream text;
    text << in.rdbuf();
    try {
      patch = json::parse(text.str());
    } catch (const json::parse_error& e) {
      // nlohmann reports the byte offset; translate it to line and column.
      const std::string s = text.str();
      const std::size_t at = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, s.size());
      std::size_t line = 1, col = 1;
      for (std::size_t i = 0; i < at; ++i) {
        if (s[i] == '\n') {
          ++line;
          col = 1;
        } else {
          ++col;
        }
      }
      throw Error(ErrorCategory::config,
                  file->string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": syntax error");
    }
    if (!patch.is_object()) throw Error(ErrorCategory::config, file->string() + ": top level must be an object");
  }
  std::string base = preset.value_or("desk");
  if (patch.contains("base")) {
    if (!patch["base"].is_string()) throw Error(ErrorCategory::config, "field 'base': expected a preset name");
    base = patch["base"].get<std::string>();
  }
  json merged = preset_json(base);
  merged.merge_patch(patch);
  try {
    return run_config_from_json(merged);
  } catch (const Error& e) {
    if (file) throw Error(e.category(), file->string() + ": " + e.what());
    throw;
  }
}

}  // namespace satweight
