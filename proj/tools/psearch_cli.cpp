#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "psearch/checks.hpp"
#include "psearch/config.hpp"
#include "psearch/error.hpp"
#include "psearch/experiment.hpp"

namespace {

using psearch::ExperimentConfig;

// Leftover arguments are config overrides: `--key value` or `--key=value`.
void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0) {
      throw psearch::Error(psearch::Errc::kConfigError, "unexpected argument '" + arg + "'");
    }
    std::string key = arg.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else {
      if (i + 1 >= extras.size()) {
        throw psearch::Error(psearch::Errc::kConfigError, "missing value for '" + key + "'");
      }
      value = extras[++i];
    }
    for (char& c : key) {
      if (c == '-') c = '_';
    }
    psearch::set_config_value(cfg, key, value);
  }
}

// File, then PSEARCH_OUT, then command-line flags.
ExperimentConfig resolve(const std::string& config_path, const std::vector<std::string>& extras) {
  ExperimentConfig cfg;
  if (!config_path.empty()) psearch::apply_config_file(cfg, config_path);
  if (const char* out = std::getenv("PSEARCH_OUT"); out && *out) cfg.output_dir = out;
  apply_overrides(cfg, extras);
  psearch::validate_config(cfg);
  return cfg;
}

int report(const std::vector<psearch::checks::CheckResult>& results) {
  psearch::checks::print_report(std::cout, results);
  const bool ok = psearch::checks::all_passed(results);
  std::cout << (ok ? "all checks passed" : "some checks FAILED") << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"person search loss experiments on a synthetic world"};
  app.require_subcommand(1);
  std::string config_path;

  auto* run = app.add_subcommand("run", "train, evaluate and write artifacts to output_dir");
  auto* ablate = app.add_subcommand("ablate", "sweep one parameter over its default grid");
  auto* sweep = app.add_subcommand("sweep-gallery", "train once, then evaluate nested gallery sizes");
  auto* check = app.add_subcommand("check", "run a self-verification suite");

  std::string kind;
  ablate->add_option("kind", kind, "dict-size | priority-T | loss-weights | input-count | gallery-size | loss-choice")
      ->required();
  std::string suite;
  check->add_option("suite", suite, "gradients | oracles | invariants")
      ->required()
      ->check(CLI::IsMember({"gradients", "oracles", "invariants"}));
  std::uint64_t check_seed = 1;
  check->add_option("--seed", check_seed, "seed for randomized checks");

  for (auto* sub : {run, ablate, sweep}) {
    sub->add_option("--config", config_path, "flat key = value file");
    sub->allow_extras();
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (check->parsed()) {
      if (suite == "gradients") return report(psearch::checks::gradient_suite(check_seed));
      if (suite == "oracles") return report(psearch::checks::oracle_suite());
      return report(psearch::checks::invariant_suite(check_seed));
    }
    if (run->parsed()) {
      const ExperimentConfig cfg = resolve(config_path, run->remaining());
      const auto outcome = psearch::run_to_directory(cfg);
      std::cout << "mAP " << outcome.full.map << "  top1 " << outcome.full.top1 << "  -> "
                << cfg.output_dir << "\n";
      return 0;
    }
    if (ablate->parsed()) {
      const auto k = psearch::parse_ablation_kind(kind);
      const ExperimentConfig cfg = resolve(config_path, ablate->remaining());
      const std::string csv = psearch::run_ablation(k, cfg);
      psearch::write_file(cfg.output_dir, "ablate-" + psearch::to_string(k) + ".csv", csv);
      std::cout << csv;
      return 0;
    }
    if (sweep->parsed()) {
      const ExperimentConfig cfg = resolve(config_path, sweep->remaining());
      const auto outcome = psearch::run_experiment(cfg);
      psearch::write_file(cfg.output_dir, "gallery_sweep.csv", outcome.eval_csv);
      psearch::write_file(cfg.output_dir, "pr_curve.csv", outcome.pr_csv);
      std::cout << outcome.eval_csv;
      return 0;
    }
  } catch (const psearch::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
