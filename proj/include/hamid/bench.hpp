#pragma once

// Experiment runner: config loading, the seven experiment kinds, regime
// classification for eta sweeps, CSV/JSON artifacts and the run manifest.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hamid/continuation.hpp"
#include "hamid/models.hpp"
#include "hamid/newton.hpp"

namespace hamid {

enum class ExperimentKind {
  NewtonTwoLevel,
  NewtonDoubleWell,
  ContinuationTwoLevel,
  ContinuationDoubleWell,
  EtaSweep,
  SingularityDemo,
  CnOrderCheck,
};

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);  // ConfigError if unknown

enum class ModelKind { TwoLevel, DoubleWell };

std::string to_string(ModelKind kind);

inline constexpr Index kTwoLevelDefaultSteps = 2000;
inline constexpr Index kDoubleWellDefaultSteps = 1600000;

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::NewtonTwoLevel;
  ModelKind model = ModelKind::TwoLevel;  // only read by eta-sweep; other kinds imply it
  TwoLevelParams two_level;
  DoubleWellParams double_well;
  std::optional<Index> n_steps;           // default per model
  PerturbationSpec perturbation{1e-3, 0, 15};
  std::vector<double> etas;               // eta-sweep; default 6 log-spaced values in [1e-5, 1e-2]
  NewtonConfig newton;
  ContinuationConfig continuation;
  std::uint64_t seed = 0;                 // cn-order-check's random Hamiltonian
  int workers = 0;                        // 0: hardware concurrency
  std::filesystem::path out_dir = "out";

  ModelKind resolved_model() const;
  Index resolved_steps() const;
  int resolved_workers() const;
  void validate() const;
};

/// Applies kind-dependent defaults (double-well singular threshold, sweep k_max
/// of 9, eta grid) to a config whose fields were not set explicitly.
ExperimentConfig default_config(ExperimentKind kind);

/// Unknown keys are rejected. Missing keys keep default_config(kind) values.
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Fully resolved parameters; feeding this back to config_from_json
/// reproduces the run.
nlohmann::json config_to_json(const ExperimentConfig& cfg);

enum class Regime { RecoversOriginal, AlternateSolution, Diverges };

std::string to_string(Regime regime);

inline constexpr double kRegimeThreshold = 1e-9;

Regime classify_run(double dev_H0, double dev_H1, double dev_U);

struct SweepRecord {
  double eta = 0.0;
  std::uint64_t seed = 0;
  NewtonStatus status = NewtonStatus::MaxIters;
  int iterations = 0;
  double dev_H0 = 0.0;
  double dev_H1 = 0.0;
  double dev_U = 0.0;
  Regime regime = Regime::Diverges;

  bool converged() const { return status == NewtonStatus::Converged; }
};

struct DeviationStats {
  double mean_log10 = 0.0;
  double median_log10 = 0.0;
  double worst_log10 = 0.0;
};

struct SweepAggregate {
  double eta = 0.0;
  int n_runs = 0;
  double recovered_fraction = 0.0;
  double alternate_fraction = 0.0;
  double diverged_fraction = 0.0;
  double converged_fraction = 0.0;
  DeviationStats dev_H0, dev_H1, dev_U;
  Regime regime = Regime::Diverges;  // plurality, ties toward the worse regime
};

struct EtaSweepResult {
  std::vector<SweepRecord> records;  // sorted by eta, then seed
  std::vector<SweepAggregate> aggregates;
};

/// Runs every (eta, seed) Newton problem on a worker pool.
EtaSweepResult run_eta_sweep(const HamiltonianPair& truth, const SampledField& field,
                             const TimeGrid& grid, const std::vector<double>& etas, int n_seeds,
                             std::uint64_t base_seed, const NewtonConfig& newton, int workers);

std::vector<SweepAggregate> aggregate_sweep(const std::vector<SweepRecord>& records);

/// Six values 10^-5 ... 10^-2, evenly spaced in log10.
std::vector<double> default_eta_grid();

std::string fig2_csv(const std::vector<SweepAggregate>& aggregates);
std::string fig2_raw_csv(const std::vector<SweepRecord>& records);

struct CpuRecord {
  std::string label;
  Index n_d = 0;
  Index n_steps = 0;
  int newton_iterations = 0;
  double wall_seconds = 0.0;
};

std::string cpu_csv(const std::vector<CpuRecord>& rows);

/// Git blob hash: SHA-1 of "blob <size>\0" followed by the bytes, as hex.
std::string git_blob_sha1(const std::string& bytes);

struct RunOutcome {
  int exit_code = 0;                      // 0 ok, 2 experiment-level failure
  std::string summary;                    // one-paragraph human summary
  std::vector<std::string> files;         // written, relative to out_dir
};

/// Runs the experiment and writes its artifacts plus manifest.json into
/// cfg.out_dir (created if needed).
RunOutcome run_experiment(const ExperimentConfig& cfg);

}  // namespace hamid
