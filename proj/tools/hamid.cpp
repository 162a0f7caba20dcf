// hamid: run identification experiments and write their CSV/JSON artifacts.
//
//   hamid run <config.json> [overrides]
//   hamid sweep [--model two-level|double-well] [--etas a,b,...] [--seeds N] [overrides]
//   hamid demo singularity [overrides]
//   hamid defaults <kind>            print the resolved default config for a kind
//
// Overrides: --out DIR, --seed N, --nd N, --steps N, --tol X, --workers N.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "hamid/bench.hpp"
#include "hamid/errors.hpp"

namespace {

struct Overrides {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<hamid::Index> nd;
  std::optional<hamid::Index> steps;
  std::optional<double> tol;
  std::optional<int> workers;

  void attach(CLI::App* app) {
    app->add_option("--out", out, "Output directory");
    app->add_option("--seed", seed, "Base seed for perturbations and random Hamiltonians");
    app->add_option("--nd", nd, "Hilbert space size N_d (double-well models)");
    app->add_option("--steps", steps, "Number of Crank-Nicolson steps N_tf")->check(CLI::PositiveNumber);
    app->add_option("--tol", tol, "Newton stopping tolerance on e_k")->check(CLI::PositiveNumber);
    app->add_option("--workers", workers, "Sweep worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  }

  void apply(hamid::ExperimentConfig& cfg) const {
    if (out) cfg.out_dir = *out;
    if (seed) {
      cfg.seed = *seed;
      cfg.perturbation.seed = *seed;
    }
    if (nd) {
      if (cfg.resolved_model() == hamid::ModelKind::TwoLevel) {
        if (*nd != 2) throw hamid::ConfigError("--nd: the two-level model has N_d = 2");
      } else {
        cfg.double_well.n_levels = *nd;
      }
    }
    if (steps) cfg.n_steps = *steps;
    if (tol) cfg.newton.tol = *tol;
    if (workers) cfg.workers = *workers;
    cfg.validate();
  }
};

int execute(const hamid::ExperimentConfig& cfg) {
  const hamid::RunOutcome r = hamid::run_experiment(cfg);
  std::cout << r.summary << '\n';
  for (const auto& f : r.files) std::cout << "  " << (cfg.out_dir / f).string() << '\n';
  return r.exit_code;
}

std::vector<double> parse_etas(const std::string& text) {
  std::vector<double> etas;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      size_t used = 0;
      etas.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw hamid::ConfigError("--etas: cannot parse '" + item + "'");
    }
  }
  return etas;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hamiltonian identification from a final evolution operator"};
  app.require_subcommand(1);

  Overrides run_over, sweep_over, demo_over;

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
  run->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  run_over.attach(run);

  std::string model = "two-level";
  std::string etas_text;
  int n_seeds = 15;
  auto* sweep = app.add_subcommand("sweep", "Perturbation-size sweep with regime classification");
  sweep->add_option("--model", model, "two-level or double-well")
      ->check(CLI::IsMember({"two-level", "double-well"}));
  sweep->add_option("--etas", etas_text, "Comma-separated perturbation sizes");
  sweep->add_option("--seeds", n_seeds, "Random guesses per eta")->check(CLI::PositiveNumber);
  sweep_over.attach(sweep);

  std::string demo_name;
  auto* demo = app.add_subcommand("demo", "Built-in demonstrations");
  demo->add_option("name", demo_name, "Demo name")->required()->check(CLI::IsMember({"singularity"}));
  demo_over.attach(demo);

  std::string kind_name;
  auto* defaults = app.add_subcommand("defaults", "Print the default config of an experiment kind");
  defaults->add_option("kind", kind_name, "Experiment kind")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      std::ifstream in(config_path);
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw hamid::ConfigError(config_path + ": " + e.what());
      }
      hamid::ExperimentConfig cfg = hamid::config_from_json(j);
      run_over.apply(cfg);
      return execute(cfg);
    }
    if (*sweep) {
      hamid::ExperimentConfig cfg = hamid::default_config(hamid::ExperimentKind::EtaSweep);
      cfg.model = model == "two-level" ? hamid::ModelKind::TwoLevel : hamid::ModelKind::DoubleWell;
      if (cfg.model == hamid::ModelKind::DoubleWell) cfg.newton.singular_cond_threshold = 1e16;
      if (!etas_text.empty()) cfg.etas = parse_etas(etas_text);
      cfg.perturbation.n_seeds = n_seeds;
      sweep_over.apply(cfg);
      return execute(cfg);
    }
    if (*demo) {
      hamid::ExperimentConfig cfg = hamid::default_config(hamid::ExperimentKind::SingularityDemo);
      demo_over.apply(cfg);
      return execute(cfg);
    }
    if (*defaults) {
      const auto cfg = hamid::default_config(hamid::experiment_kind_from_string(kind_name));
      std::cout << hamid::config_to_json(cfg).dump(2) << '\n';
      return 0;
    }
  } catch (const hamid::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 64;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
