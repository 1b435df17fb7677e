#include "satweight/app.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>

#include "satweight/io.hpp"
#include "satweight/parallel.hpp"

namespace satweight {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class Clock {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void configure_threads(const CommandOptions& o) {
  if (o.threads < 0) throw Error(ErrorCategory::invalid_argument, "--threads must be non-negative");
  if (o.deterministic) {
    set_thread_count(1);
  } else if (o.threads > 0) {
    set_thread_count(o.threads);
  }
}

void say(const CommandOptions& o, const std::string& line) {
  if (!o.quiet) std::fprintf(stderr, "%s\n", line.c_str());
}

std::string number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

json file_entry(const fs::path& p) { return {{"path", p.string()}, {"sha256", sha256_file(p)}}; }

// Report files must not depend on where inputs live.
json content_entry(const json& entry) {
  if (entry.is_null()) return entry;
  return {{"name", fs::path(entry["path"].get<std::string>()).filename().string()}, {"sha256", entry["sha256"]}};
}

json seeds_of(const RunConfig& c) {
  return {{"gen", c.gen.seed}, {"split", c.gen.split_seed}, {"train", c.train.seed}, {"report", c.report.study.seed}};
}

json begin_manifest(const char* command, const CommandOptions& o, const RunConfig& c) {
  return {{"command", command},
          {"tool_version", kToolVersion},
          {"config", to_json(c)},
          {"seeds", seeds_of(c)},
          {"threads", thread_count()},
          {"deterministic", o.deterministic},
          {"inputs", json::array()},
          {"outputs", json::array()}};
}

void finish_manifest(json& m, const fs::path& dir, const Clock& clock) {
  m["wall_seconds"] = clock.seconds();
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + (dir / "manifest.json").string());
  out << m.dump(2) << '\n';
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCategory::io, "cannot create " + dir.string() + ": " + ec.message());
}

const fs::path& required(const std::optional<fs::path>& p, const char* flag) {
  if (!p) throw Error(ErrorCategory::invalid_argument, std::string("missing required option ") + flag);
  return *p;
}

std::vector<Strategy> pick_strategies(const CommandOptions& o, const std::vector<Strategy>& configured, bool have_model) {
  std::vector<Strategy> out;
  if (o.strategies) {
    for (const auto& name : *o.strategies) out.push_back(strategy_from_string(name));
    if (out.empty()) throw Error(ErrorCategory::invalid_argument, "--strategies is empty");
  } else {
    // The configured list silently skips the network when no model is given.
    for (Strategy s : configured) {
      if (s != Strategy::predicted || have_model) out.push_back(s);
    }
  }
  if (!have_model && std::find(out.begin(), out.end(), Strategy::predicted) != out.end()) {
    throw Error(ErrorCategory::invalid_argument, "strategy 'predicted' needs --model");
  }
  return out;
}

json strategy_names(const std::vector<Strategy>& list) {
  json out = json::array();
  for (Strategy s : list) out.push_back(std::string(to_string(s)));
  return out;
}

LstmModel fresh_model(const RunConfig& c, const GenConfig& data_config) {
  if (data_config.n_satellites.max > c.model.pad_to) {
    throw Error(ErrorCategory::config, "model.pad_to " + std::to_string(c.model.pad_to) +
                                           " is smaller than the dataset's largest satellite count " +
                                           std::to_string(data_config.n_satellites.max));
  }
  LstmModel m = LstmModel::initialized(c.model.dims(), c.train.seed);
  m.clip = data_config.clip;
  m.gamma = data_config.gamma;
  return m;
}

// Validation MSE of the best constant prediction (mean training target).
double constant_baseline(std::span<const LabeledEpoch> train_set, std::span<const LabeledEpoch> val_set, bool log_labels) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : train_set) {
    for (double w : r.labels.values) {
      sum += label_to_target(w, log_labels);
      ++n;
    }
  }
  const double mean = n ? sum / static_cast<double>(n) : 0.0;
  double sse = 0.0;
  std::size_t m = 0;
  for (const auto& r : val_set) {
    for (double w : r.labels.values) {
      const double d = label_to_target(w, log_labels) - mean;
      sse += d * d;
      ++m;
    }
  }
  return m ? sse / static_cast<double>(m) : 0.0;
}

struct Trained {
  TrainResult result;
  double baseline = 0.0;
};

Trained fit(const RunConfig& c, const GenConfig& data_config, std::span<const LabeledEpoch> train_set,
            std::span<const LabeledEpoch> val_set, const CommandOptions& o, std::ofstream* log) {
  if (train_set.empty() || val_set.empty()) {
    throw Error(ErrorCategory::invalid_argument, "dataset needs non-empty train and validation splits");
  }
  Trained t;
  t.baseline = constant_baseline(train_set, val_set, c.train.log_labels);
  t.result = train(fresh_model(c, data_config), train_set, val_set, c.train, [&](const EpochLog& e) {
    const json line = {{"epoch", e.epoch},
                       {"train_loss", e.train_loss},
                       {"val_loss", e.val_loss},
                       {"wall_seconds", e.wall_seconds},
                       {"improved", e.improved}};
    if (log) *log << line.dump() << '\n' << std::flush;
    say(o, "epoch " + std::to_string(e.epoch) + " train " + number(e.train_loss) + " val " + number(e.val_loss));
  });
  return t;
}

json training_summary(const Trained& t) {
  return {{"epochs_run", t.result.log.size()},
          {"best_epoch", t.result.best_epoch},
          {"best_val_loss", t.result.best_val_loss},
          {"constant_baseline_val_loss", t.baseline},
          {"early_stopped", t.result.early_stopped}};
}

json report_metadata(const RunConfig& c, const GenConfig& data_config, const std::vector<Strategy>& strategies,
                     const json& dataset, const json& model) {
  return {{"tool_version", kToolVersion},
          {"dataset", dataset.contains("path") ? content_entry(dataset) : dataset},
          {"model", content_entry(model)},
          {"dataset_gen_config", to_json(data_config)},
          {"strategies", strategy_names(strategies)},
          {"eval_config", to_json(c)["eval"]},
          {"seeds", {{"gen", data_config.seed}, {"split", data_config.split_seed}, {"train", c.train.seed}}}};
}

}  // namespace

RunConfig resolve_config(const CommandOptions& o) {
  RunConfig c = load_run_config(o.preset, o.config);
  if (o.seed) {
    c.gen.seed = *o.seed;
    c.train.seed = *o.seed;
    c.report.study.seed = *o.seed;
  }
  if (o.trials) c.report.study.trials = *o.trials;
  if (o.fractions) c.sweep.fractions = *o.fractions;
  if (o.retrain) c.sweep.retrain = true;
  c.validate();
  return c;
}

json cmd_gen(const CommandOptions& o) {
  const Clock clock;
  const RunConfig c = resolve_config(o);
  configure_threads(o);
  make_dir(o.out);
  json m = begin_manifest("gen", o, c);

  std::vector<LabeledEpoch> data = generate_dataset(c.gen, Execution::parallel, c.eval.solver);
  assign_split_tags(data, c.gen.split, c.gen.split_seed);
  const fs::path path = o.out / "dataset.jsonl";
  write_dataset(path, c.gen, data);
  say(o, "wrote " + std::to_string(data.size()) + " epochs to " + path.string());

  m["outputs"].push_back(file_entry(path));
  m["results"] = {{"epochs", data.size()}};
  finish_manifest(m, o.out, clock);
  return m;
}

json cmd_train(const CommandOptions& o) {
  const Clock clock;
  const RunConfig c = resolve_config(o);
  configure_threads(o);
  const fs::path& dataset_path = required(o.dataset, "--dataset");
  make_dir(o.out);
  json m = begin_manifest("train", o, c);
  m["inputs"].push_back(file_entry(dataset_path));

  const Dataset ds = read_dataset(dataset_path);
  const auto train_set = select_split(ds, SplitTag::train);
  const auto val_set = select_split(ds, SplitTag::validation);
  std::ofstream log(o.out / "training_log.jsonl", std::ios::binary | std::ios::trunc);
  if (!log) throw Error(ErrorCategory::io, "cannot write " + (o.out / "training_log.jsonl").string());
  const Trained t = fit(c, ds.config, train_set, val_set, o, &log);
  log.close();

  const fs::path model_path = o.out / "model.bin";
  save_model(model_path, t.result.model);
  m["outputs"].push_back(file_entry(model_path));
  m["outputs"].push_back(file_entry(o.out / "training_log.jsonl"));
  m["results"] = training_summary(t);
  finish_manifest(m, o.out, clock);
  return m;
}

json cmd_eval(const CommandOptions& o) {
  const Clock clock;
  const RunConfig c = resolve_config(o);
  configure_threads(o);
  const fs::path& dataset_path = required(o.dataset, "--dataset");
  make_dir(o.out);
  json m = begin_manifest("eval", o, c);

  std::optional<LstmModel> model;
  json model_entry = nullptr;
  if (o.model) {
    model = load_model(*o.model);
    model_entry = file_entry(*o.model);
    m["inputs"].push_back(model_entry);
  }
  const json dataset_entry = file_entry(dataset_path);
  m["inputs"].push_back(dataset_entry);

  BenchmarkConfig bench = c.eval;
  bench.strategies = pick_strategies(o, c.eval.strategies, model.has_value());
  const Dataset ds = read_dataset(dataset_path);
  const auto test = select_split(ds, SplitTag::test);
  if (test.empty()) throw Error(ErrorCategory::invalid_argument, "dataset has no test split");

  const BenchmarkReport report = run_benchmark(test, bench, model ? &*model : nullptr);
  write_report(report, o.out, report_metadata(c, ds.config, bench.strategies, dataset_entry, model_entry));
  m["outputs"].push_back(file_entry(o.out / "records.csv"));
  for (Strategy s : bench.strategies) m["outputs"].push_back(file_entry(o.out / ("cdf_" + std::string(to_string(s)) + ".csv")));
  m["outputs"].push_back(file_entry(o.out / "summary.json"));
  m["results"] = summary_json(report);
  for (const auto& s : report.summaries) {
    say(o, std::string(to_string(s.strategy)) + ": horizontal q95 " + number(s.horizontal_q95) + " m, availability " +
               number(s.availability));
  }
  finish_manifest(m, o.out, clock);
  return m;
}

json cmd_sweep(const CommandOptions& o) {
  const Clock clock;
  const RunConfig c = resolve_config(o);
  configure_threads(o);
  make_dir(o.out);
  json m = begin_manifest("sweep", o, c);

  std::optional<LstmModel> shared;
  json model_entry = nullptr;
  if (o.model) {
    shared = load_model(*o.model);
    model_entry = file_entry(*o.model);
    m["inputs"].push_back(model_entry);
  }
  BenchmarkConfig bench = c.eval;
  // Without --model the sweep trains its own.
  bench.strategies = pick_strategies(o, c.eval.strategies, true);
  const bool needs_model = std::find(bench.strategies.begin(), bench.strategies.end(), Strategy::predicted) !=
                           bench.strategies.end();

  if (needs_model && !shared && !c.sweep.retrain) {
    say(o, "training the shared model on the base configuration");
    std::vector<LabeledEpoch> base = generate_dataset(c.gen, Execution::parallel, c.eval.solver);
    assign_split_tags(base, c.gen.split, c.gen.split_seed);
    Dataset ds{c.gen, std::move(base)};
    const auto tr = select_split(ds, SplitTag::train);
    const auto va = select_split(ds, SplitTag::validation);
    const Trained t = fit(c, c.gen, tr, va, o, nullptr);
    shared = t.result.model;
    save_model(o.out / "model.bin", *shared);
    model_entry = file_entry(o.out / "model.bin");
    m["outputs"].push_back(model_entry);
    m["shared_training"] = training_summary(t);
  }

  std::vector<SweepRow> rows;
  json per_fraction = json::array();
  for (double f : c.sweep.fractions) {
    GenConfig g = c.gen;
    g.biased_fraction = f;
    std::vector<LabeledEpoch> data = generate_dataset(g, Execution::parallel, c.eval.solver);
    assign_split_tags(data, g.split, g.split_seed);
    Dataset ds{g, std::move(data)};
    const auto test = select_split(ds, SplitTag::test);

    std::optional<LstmModel> model = shared;
    json fraction_model = model_entry;
    const fs::path dir = o.out / ("fraction_" + number(f));
    make_dir(dir);
    if (needs_model && c.sweep.retrain) {
      const Trained t = fit(c, g, select_split(ds, SplitTag::train), select_split(ds, SplitTag::validation), o, nullptr);
      model = t.result.model;
      save_model(dir / "model.bin", *model);
      fraction_model = file_entry(dir / "model.bin");
      m["outputs"].push_back(fraction_model);
    }
    const BenchmarkReport report = run_benchmark(test, bench, model ? &*model : nullptr);
    const json dataset_info = {{"generated", true}, {"records", ds.records.size()}};
    write_report(report, dir, report_metadata(c, g, bench.strategies, dataset_info, fraction_model));
    m["outputs"].push_back(file_entry(dir / "summary.json"));
    for (const auto& s : report.summaries) {
      rows.push_back({f, s.strategy, s.horizontal_q95, s.vertical_q95, s.availability});
      say(o, "fraction " + number(f) + " " + std::string(to_string(s.strategy)) + ": horizontal q95 " +
                 number(s.horizontal_q95) + " m");
    }
    per_fraction.push_back({{"biased_fraction", f}, {"summary", summary_json(report)}});
  }
  write_sweep_table(rows, o.out / "sweep.csv");
  m["outputs"].push_back(file_entry(o.out / "sweep.csv"));
  m["results"] = per_fraction;
  finish_manifest(m, o.out, clock);
  return m;
}

json cmd_report(const CommandOptions& o) {
  const Clock clock;
  const RunConfig c = resolve_config(o);
  configure_threads(o);
  make_dir(o.out);
  json m = begin_manifest("report", o, c);

  std::optional<LstmModel> model;
  json model_entry = nullptr;
  if (o.model) {
    model = load_model(*o.model);
    model_entry = file_entry(*o.model);
    m["inputs"].push_back(model_entry);
  }
  const std::vector<Strategy> strategies = pick_strategies(o, c.report.strategies, model.has_value());
  const std::vector<EllipseRow> rows = confidence_ellipses(c.report.study, strategies, c.eval, model ? &*model : nullptr);
  write_ellipses(rows, o.out / "ellipses.csv");

  const Epoch geometry = c.report.study.geometry.epoch();
  json sats = json::array();
  for (const auto& ch : geometry.channels) {
    sats.push_back({{"sat_id", ch.sat_id}, {"x", ch.position.x}, {"y", ch.position.y}, {"z", ch.position.z}});
  }
  json ellipses = json::array();
  for (const auto& r : rows) {
    ellipses.push_back({{"method", r.method},
                        {"semi_major_m", r.ellipse.semi_major},
                        {"semi_minor_m", r.ellipse.semi_minor},
                        {"orientation_rad", r.ellipse.orientation},
                        {"trials", r.trials}});
  }
  const json report = {{"tool_version", kToolVersion},
                       {"geometry", to_json(c.report.study.geometry)},
                       {"satellites", sats},
                       {"trials", c.report.study.trials},
                       {"seed", c.report.study.seed},
                       {"biased_fraction", c.report.study.biased_fraction},
                       {"mixture", to_json(c.gen)["mixture"]},
                       {"model", content_entry(model_entry)},
                       {"ellipses", ellipses}};
  {
    std::ofstream out(o.out / "report.json", std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCategory::io, "cannot write " + (o.out / "report.json").string());
    out << report.dump(2) << '\n';
  }
  m["outputs"].push_back(file_entry(o.out / "ellipses.csv"));
  m["outputs"].push_back(file_entry(o.out / "report.json"));
  m["results"] = {{"ellipses", ellipses}};
  finish_manifest(m, o.out, clock);
  return m;
}

int exit_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::invalid_argument:
    case ErrorCategory::config: return 2;
    case ErrorCategory::io: return 3;
    case ErrorCategory::corrupt_file:
    case ErrorCategory::version_mismatch: return 4;
    case ErrorCategory::divergence: return 5;
    case ErrorCategory::degenerate_geometry:
    case ErrorCategory::rank_deficient:
    case ErrorCategory::missing_truth: return 6;
  }
  return 1;
}

}  // namespace satweight
