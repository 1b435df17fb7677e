#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "satweight/app.hpp"

namespace {

using satweight::CommandOptions;

int report_error(const std::string& category, const std::string& message, int code) {
  const nlohmann::json j = {{"error", {{"category", category}, {"message", message}}}};
  std::cerr << j.dump() << '\n';
  return code;
}

void common_flags(CLI::App* cmd, CommandOptions& o) {
  cmd->add_option("--config", o.config, "JSON config file (merge patch over the preset)");
  cmd->add_option("--preset", o.preset, "Base preset: desk, paper-synth, field-net");
  cmd->add_option("--seed", o.seed, "Override generator, training and report seeds");
  cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
  cmd->add_option("--threads", o.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--deterministic", o.deterministic, "Single-threaded, bit-reproducible run");
  cmd->add_flag("-q,--quiet", o.quiet, "No progress output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Satellite weighting for single-epoch GNSS positioning"};
  app.set_version_flag("--version", satweight::kToolVersion);
  app.require_subcommand(1);

  CommandOptions o;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic labeled dataset");
  auto* train = app.add_subcommand("train", "Train the weighting network");
  auto* eval = app.add_subcommand("eval", "Benchmark weighting strategies on the test split");
  auto* sweep = app.add_subcommand("sweep", "Benchmark across biased-satellite fractions");
  auto* report = app.add_subcommand("report", "Confidence ellipses and CRLB on the canonical geometry");
  for (auto* cmd : {gen, train, eval, sweep, report}) common_flags(cmd, o);

  train->add_option("--dataset", o.dataset, "Dataset file from `gen`")->required();
  eval->add_option("--dataset", o.dataset, "Dataset file from `gen`")->required();
  for (auto* cmd : {eval, sweep, report}) {
    cmd->add_option("--model", o.model, "Model file from `train`");
    cmd->add_option("--strategies", o.strategies, "Comma-separated strategy names")->delimiter(',');
  }
  sweep->add_option("--fractions", o.fractions, "Comma-separated biased fractions")->delimiter(',');
  sweep->add_flag("--retrain", o.retrain, "Train one model per fraction");
  report->add_option("--trials", o.trials, "Monte-Carlo trials");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error("invalid_argument", e.what(), satweight::exit_code(satweight::ErrorCategory::invalid_argument));
  }

  try {
    nlohmann::json manifest;
    if (gen->parsed()) manifest = satweight::cmd_gen(o);
    if (train->parsed()) manifest = satweight::cmd_train(o);
    if (eval->parsed()) manifest = satweight::cmd_eval(o);
    if (sweep->parsed()) manifest = satweight::cmd_sweep(o);
    if (report->parsed()) manifest = satweight::cmd_report(o);
    std::cout << manifest.dump(2) << '\n';
  } catch (const satweight::Error& e) {
    return report_error(std::string(satweight::to_string(e.category())), e.what(), satweight::exit_code(e.category()));
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 1);
  }
  return 0;
}
