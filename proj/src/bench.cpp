#include "hamid/bench.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "hamid/errors.hpp"

namespace hamid {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

const std::array<std::pair<ExperimentKind, const char*>, 7> kKindNames{{
    {ExperimentKind::NewtonTwoLevel, "newton-two-level"},
    {ExperimentKind::NewtonDoubleWell, "newton-double-well"},
    {ExperimentKind::ContinuationTwoLevel, "continuation-two-level"},
    {ExperimentKind::ContinuationDoubleWell, "continuation-double-well"},
    {ExperimentKind::EtaSweep, "eta-sweep"},
    {ExperimentKind::SingularityDemo, "singularity-demo"},
    {ExperimentKind::CnOrderCheck, "cn-order-check"},
}};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

double safe_log10(double x) { return std::log10(std::max(x, 1e-300)); }

int badness(Regime r) {
  switch (r) {
    case Regime::RecoversOriginal: return 0;
    case Regime::AlternateSolution: return 1;
    case Regime::Diverges: return 2;
  }
  return 2;
}

DeviationStats stats_of(std::vector<double> values) {
  DeviationStats s;
  if (values.empty()) return s;
  for (double& v : values) v = safe_log10(v);
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean_log10 = sum / static_cast<double>(values.size());
  const size_t mid = values.size() / 2;
  s.median_log10 = values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  s.worst_log10 = values.back();
  return s;
}

// --- model plumbing ----------------------------------------------------------

struct ModelSetup {
  HamiltonianPair truth;
  ControlField field;
  double t_f = 0.0;
  json resolved;  // derived quantities worth recording
};

ModelSetup setup_model(const ExperimentConfig& cfg) {
  ModelSetup s;
  if (cfg.resolved_model() == ModelKind::TwoLevel) {
    const TwoLevelModel m = two_level_model(cfg.two_level);
    s.truth = m.pair;
    s.field = m.field;
    s.t_f = cfg.two_level.t_f;
    s.resolved = {{"E0", cfg.two_level.resolved_E0()}, {"n_d", 2}};
  } else {
    const DoubleWellModel m = build_double_well(cfg.double_well);
    s.truth = m.pair;
    s.field = pi_pulse_field(m, cfg.double_well.t_f);
    s.t_f = cfg.double_well.t_f;
    s.resolved = {{"n_d", cfg.double_well.n_levels},
                  {"omega_03", m.omega_03},
                  {"mu_03", m.mu_03},
                  {"eigenenergies", m.eigenenergies},
                  {"boundary_amplitude", m.boundary_amplitude}};
  }
  s.resolved["t_f"] = s.t_f;
  s.resolved["n_steps"] = cfg.resolved_steps();
  s.resolved["dt"] = s.t_f / static_cast<double>(cfg.resolved_steps());
  json f;
  to_json(f, s.field);
  s.resolved["field"] = f;
  return s;
}

json pair_to_json(const HamiltonianPair& p) {
  return {{"H0", matrix_to_json(p.H0.dense())}, {"H1", matrix_to_json(p.H1.dense())}};
}

// --- artifact writing ----------------------------------------------------------

class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw Error("cannot open " + (dir_ / name).string() + " for writing");
    out << content;
    if (!out) throw Error("failed writing " + (dir_ / name).string());
    files_.push_back(name);
    hashes_.push_back({{"file", name}, {"bytes", content.size()}, {"sha1", git_blob_sha1(content)}});
  }

  const std::vector<std::string>& files() const { return files_; }
  const json& hashes() const { return hashes_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
  json hashes_ = json::array();
};

struct ExperimentOutput {
  int exit_code = 0;
  std::string summary;
  std::vector<CpuRecord> cpu;
};

// --- experiment kinds -------------------------------------------------------------

ExperimentOutput run_newton(const ExperimentConfig& cfg, const ModelSetup& model, ArtifactWriter& out) {
  const TimeGrid grid(model.t_f, cfg.resolved_steps());
  const SampledField field = sample_field(model.field, grid);
  const UnitaryMatrix u0 = UnitaryMatrix::identity(model.truth.dim());
  const UnitaryMatrix u_tar = propagate_final(u0, model.truth, field, grid);
  const HamiltonianPair guess = perturb_pair(model.truth, cfg.perturbation);

  const auto start = Clock::now();
  const NewtonResult r = newton_identify(u0, u_tar, guess, field, grid, cfg.newton, model.truth);
  const double wall = seconds_since(start);

  const bool two_level = cfg.kind == ExperimentKind::NewtonTwoLevel;
  out.write(two_level ? "table1.csv" : "table2.csv", newton_report_csv(r.report));
  out.write("newton.json", json{{"report", newton_report_json(r.report)},
                                {"identified", pair_to_json(r.pair)},
                                {"truth", pair_to_json(model.truth)}}
                                   .dump(2) + "\n");

  ExperimentOutput o;
  o.cpu.push_back({to_string(cfg.kind), model.truth.dim(), grid.n_steps(), r.report.iterations(), wall});
  std::ostringstream s;
  s << to_string(cfg.kind) << ": " << to_string(r.report.status) << " after " << r.report.iterations()
    << " iterations, final dev_U = " << format_number(r.report.final_dev_U);
  if (!r.report.records.empty()) {
    const NewtonRecord& last = r.report.records.back();
    s << ", dev_H0 = " << format_number(*last.dev_H0) << ", dev_H1 = " << format_number(*last.dev_H1);
  }
  if (r.report.status == NewtonStatus::SingularJacobian) {
    s << " (singular at iteration " << r.report.failed_iteration << ", cond "
      << format_number(r.report.failed_condition) << ")";
    o.exit_code = 2;
  }
  o.summary = s.str();
  return o;
}

ExperimentOutput run_continuation(const ExperimentConfig& cfg, const ModelSetup& model,
                                  ArtifactWriter& out) {
  const TimeGrid grid(model.t_f, cfg.resolved_steps());
  const SampledField field = sample_field(model.field, grid);
  const UnitaryMatrix u0 = UnitaryMatrix::identity(model.truth.dim());
  const UnitaryMatrix u_tar = propagate_final(u0, model.truth, field, grid);
  ContinuationConfig cc = cfg.continuation;
  cc.newton = cfg.newton;

  const auto start = Clock::now();
  const ContinuationResult r = continuation_identify(u0, u_tar, field, grid, cc, model.truth);
  const double wall = seconds_since(start);

  const bool two_level = cfg.kind == ExperimentKind::ContinuationTwoLevel;
  out.write(two_level ? "fig3.csv" : "fig6.csv", continuation_report_csv(r.report));
  out.write("continuation.json", json{{"report", continuation_report_json(r.report)},
                                      {"identified", pair_to_json(r.pair)},
                                      {"truth", pair_to_json(model.truth)}}
                                         .dump(2) + "\n");

  ExperimentOutput o;
  o.cpu.push_back({to_string(cfg.kind), model.truth.dim(), grid.n_steps(),
                   r.report.total_newton_iterations(), wall});
  // Timings stay out of continuation.json so that file is reproducible.
  for (const auto& st : r.report.stages) {
    o.cpu.push_back({"stage " + std::to_string(st.m), model.truth.dim(), grid.n_steps(),
                     st.newton.iterations(), st.elapsed_seconds});
  }
  std::ostringstream s;
  s << to_string(cfg.kind) << ": " << to_string(r.report.status) << ", " << r.report.stages.size()
    << " stages, " << r.report.total_newton_iterations() << " Newton iterations";
  if (r.report.status == ContinuationStatus::StageFailed) {
    s << "; stage m = " << r.report.failed_stage << " ended " << to_string(r.report.failed_reason);
    o.exit_code = 2;
  } else if (!r.report.stages.empty()) {
    const StageRecord& last = r.report.stages.back();
    s << "; final dev_H0 = " << format_number(*last.dev_H0) << ", dev_H1 = " << format_number(*last.dev_H1)
      << ", dev_U = " << format_number(last.dev_U_stage);
  }
  o.summary = s.str();
  return o;
}

ExperimentOutput run_sweep(const ExperimentConfig& cfg, const ModelSetup& model, ArtifactWriter& out) {
  const TimeGrid grid(model.t_f, cfg.resolved_steps());
  const SampledField field = sample_field(model.field, grid);
  const auto start = Clock::now();
  const EtaSweepResult r = run_eta_sweep(model.truth, field, grid, cfg.etas, cfg.perturbation.n_seeds,
                                         cfg.perturbation.seed, cfg.newton, cfg.resolved_workers());
  const double wall = seconds_since(start);
  out.write("fig2.csv", fig2_csv(r.aggregates));
  out.write("fig2_raw.csv", fig2_raw_csv(r.records));

  ExperimentOutput o;
  int iterations = 0;
  for (const auto& rec : r.records) iterations += rec.iterations;
  o.cpu.push_back({to_string(cfg.kind), model.truth.dim(), grid.n_steps(), iterations, wall});
  std::ostringstream s;
  s << "eta-sweep: " << r.records.size() << " runs;";
  for (const auto& a : r.aggregates) {
    s << " eta " << format_number(a.eta) << " -> " << to_string(a.regime) << " (recovered "
      << format_number(a.recovered_fraction) << ");";
  }
  o.summary = s.str();
  return o;
}

ExperimentOutput run_singularity(const ExperimentConfig& cfg, const ModelSetup& model, ArtifactWriter& out) {
  const TimeGrid grid(model.t_f, cfg.resolved_steps());
  const SampledField field = sample_field(model.field, grid);
  ComplexMatrix sx = ComplexMatrix::Zero(2, 2);
  sx(0, 1) = sx(1, 0) = 1.0;
  const UnitaryMatrix target(sx);
  const HamiltonianPair seed = m0_seed(decompose_target(target), model.t_f);

  const auto start = Clock::now();
  const ReducedSystem sys = reduced_system_at(seed, field, grid, target);
  const SingularityDiagnostic diag = rank_diagnostic(sys.matrix, kDefaultRankTolerance);
  json ranks = json::array();
  for (double tol : {1e-10, 1e-9, 1e-8, 1e-7, 1e-6}) {
    ranks.push_back({{"rank_tolerance", tol}, {"numerical_rank", rank_diagnostic(sys.matrix, tol).numerical_rank}});
  }
  json step;
  bool refused = false;
  try {
    const NewtonUpdate u = solve_update(sys, cfg.newton);
    step = {{"outcome", "solved"}, {"condition_estimate", u.condition_estimate}};
  } catch (const SingularJacobianError& e) {
    refused = true;
    step = {{"outcome", "SingularJacobian"}, {"condition_estimate", e.condition_estimate()}};
  }
  const double wall = seconds_since(start);

  std::ostringstream csv;
  csv << "index,singular_value\n";
  for (Index k = 0; k < diag.singular_values.size(); ++k) {
    csv << k << ',' << format_number(diag.singular_values(k)) << '\n';
  }
  out.write("singularity.csv", csv.str());
  out.write("singularity.json", json{{"target", "sigma_x"},
                                     {"pair", pair_to_json(seed)},
                                     {"numerical_rank", diag.numerical_rank},
                                     {"unknowns", sys.matrix.cols()},
                                     {"rank_tolerance", diag.rank_tolerance},
                                     {"condition_estimate", diag.condition_estimate},
                                     {"rank_by_tolerance", ranks},
                                     {"newton_step", step}}
                                    .dump(2) + "\n");

  ExperimentOutput o;
  o.cpu.push_back({to_string(cfg.kind), 2, grid.n_steps(), 0, wall});
  std::ostringstream s;
  s << "singularity-demo: rank " << diag.numerical_rank << " of " << sys.matrix.cols()
    << " at rank tolerance " << format_number(diag.rank_tolerance) << "; Newton step "
    << (refused ? "refused with SingularJacobian" : "was solved") << " (cond "
    << format_number(step["condition_estimate"].get<double>()) << ")";
  o.summary = s.str();
  o.exit_code = refused ? 0 : 2;
  return o;
}

ExperimentOutput run_cn_order(const ExperimentConfig& cfg, const ModelSetup& model, ArtifactWriter& out) {
  const auto start = Clock::now();
  const HamiltonianPair random_pair = perturb_pair(HamiltonianPair::zero(2), {1.0, cfg.seed, 1});
  constexpr double kField = 1.0;
  constexpr double kTime = 1.0;
  std::ostringstream csv;
  csv << "n_steps,error,ratio\n";
  const CnOrderResult first = cn_error_order(random_pair, kField, kTime, 16);
  const CnOrderResult second = cn_error_order(random_pair, kField, kTime, 32);
  csv << 16 << ',' << format_number(first.err_coarse) << ",\n";
  csv << 32 << ',' << format_number(first.err_fine) << ',' << format_number(first.ratio) << '\n';
  csv << 64 << ',' << format_number(second.err_fine) << ',' << format_number(second.ratio) << '\n';
  out.write("cn_order.csv", csv.str());

  // Self-convergence of the model propagation at the resolved grid.
  const Index n = cfg.resolved_steps();
  const UnitaryMatrix u0 = UnitaryMatrix::identity(model.truth.dim());
  const TimeGrid coarse(model.t_f, n);
  const TimeGrid fine(model.t_f, 2 * n);
  const UnitaryMatrix uc = propagate_final(u0, model.truth, sample_field(model.field, coarse), coarse);
  const UnitaryMatrix uf = propagate_final(u0, model.truth, sample_field(model.field, fine), fine);
  const double halving = spec_norm(ComplexMatrix(uc.matrix() - uf.matrix()));
  std::ostringstream h;
  h << "n_steps,halving_difference\n" << n << ',' << format_number(halving) << '\n';
  out.write("cn_halving.csv", h.str());
  const double wall = seconds_since(start);

  auto second_order = [](double r) { return r >= 3.5 && r <= 4.5; };
  const bool in_band = second_order(first.ratio) && second_order(second.ratio);
  ExperimentOutput o;
  o.cpu.push_back({to_string(cfg.kind), model.truth.dim(), n, 0, wall});
  std::ostringstream s;
  s << "cn-order-check: halving ratios " << format_number(first.ratio) << ", " << format_number(second.ratio)
    << (in_band ? " (second order)" : " (outside [3.5, 4.5])") << "; model ||U_N(dt) - U_N(dt/2)|| = "
    << format_number(halving) << " at " << n << " steps";
  o.summary = s.str();
  o.exit_code = in_band ? 0 : 2;
  return o;
}

}  // namespace

// --- names ----------------------------------------------------------------------

std::string to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  for (const auto& [k, n] : kKindNames)
    if (name == n) return k;
  throw ConfigError("unknown experiment kind '" + name + "'");
}

std::string to_string(ModelKind kind) { return kind == ModelKind::TwoLevel ? "two-level" : "double-well"; }

namespace {
ModelKind model_kind_from_string(const std::string& name) {
  if (name == "two-level") return ModelKind::TwoLevel;
  if (name == "double-well") return ModelKind::DoubleWell;
  throw ConfigError("unknown model '" + name + "' (expected two-level or double-well)");
}
}  // namespace

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::RecoversOriginal: return "RecoversOriginal";
    case Regime::AlternateSolution: return "AlternateSolution";
    case Regime::Diverges: return "Diverges";
  }
  return "Diverges";
}

// --- config ---------------------------------------------------------------------

ModelKind ExperimentConfig::resolved_model() const {
  switch (kind) {
    case ExperimentKind::NewtonTwoLevel:
    case ExperimentKind::ContinuationTwoLevel:
    case ExperimentKind::SingularityDemo:
      return ModelKind::TwoLevel;
    case ExperimentKind::NewtonDoubleWell:
    case ExperimentKind::ContinuationDoubleWell:
      return ModelKind::DoubleWell;
    case ExperimentKind::EtaSweep:
    case ExperimentKind::CnOrderCheck:
      return model;
  }
  return model;
}

Index ExperimentConfig::resolved_steps() const {
  if (n_steps) return *n_steps;
  return resolved_model() == ModelKind::TwoLevel ? kTwoLevelDefaultSteps : kDoubleWellDefaultSteps;
}

int ExperimentConfig::resolved_workers() const {
  if (workers > 0) return workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

void ExperimentConfig::validate() const {
  if (n_steps && *n_steps <= 0) throw ConfigError("n_steps must be positive");
  if (workers < 0) throw ConfigError("workers must be nonnegative");
  if (!(perturbation.eta >= 0.0)) throw ConfigError("perturbation.eta must be nonnegative");
  if (perturbation.n_seeds < 1) throw ConfigError("perturbation.n_seeds must be at least 1");
  newton.validate();
  continuation.validate();
  if (resolved_model() == ModelKind::TwoLevel) {
    two_level.validate();
  } else {
    double_well.validate();
  }
  if (kind == ExperimentKind::EtaSweep) {
    if (etas.empty()) throw ConfigError("eta-sweep needs at least one eta");
    for (double e : etas)
      if (!(e >= 0.0) || !std::isfinite(e)) throw ConfigError("etas must be finite and nonnegative");
  }
  if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
}

std::vector<double> default_eta_grid() {
  std::vector<double> etas;
  for (int i = 0; i < 6; ++i) etas.push_back(std::pow(10.0, -5.0 + 0.6 * i));
  return etas;
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  switch (kind) {
    case ExperimentKind::NewtonTwoLevel:
      c.perturbation.eta = 1e-3;
      c.newton.max_iters = 9;
      c.newton.stop_on_tol = false;
      break;
    case ExperimentKind::NewtonDoubleWell:
      c.model = ModelKind::DoubleWell;
      c.perturbation.eta = 1e-6;
      c.newton.max_iters = 11;
      c.newton.stop_on_tol = false;
      c.newton.singular_cond_threshold = 1e16;
      break;
    case ExperimentKind::ContinuationTwoLevel:
      c.continuation.n_intermediate = 20;
      break;
    case ExperimentKind::ContinuationDoubleWell:
      c.model = ModelKind::DoubleWell;
      c.continuation.n_intermediate = 30;
      c.newton.max_iters = 20;
      c.newton.tol = 1e-7;
      c.newton.singular_cond_threshold = 1e16;
      break;
    case ExperimentKind::EtaSweep:
      c.etas = default_eta_grid();
      c.newton.max_iters = 9;
      break;
    case ExperimentKind::SingularityDemo:
      c.two_level.skew = 0.0;
      break;
    case ExperimentKind::CnOrderCheck:
      break;
  }
  return c;
}

ExperimentConfig config_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"kind", "model", "two_level", "double_well", "n_steps", "perturbation", "etas",
                       "newton", "continuation", "seed", "workers", "out_dir"},
                      "config");
  if (!j.contains("kind")) throw ConfigError("config: missing 'kind'");
  try {
    ExperimentConfig c = default_config(experiment_kind_from_string(j.at("kind").get<std::string>()));
    if (j.contains("model")) c.model = model_kind_from_string(j.at("model").get<std::string>());
    if (j.contains("two_level")) {
      const json& t = j.at("two_level");
      reject_unknown_keys(t, {"delta", "mu", "t_f", "E0", "skew"}, "two_level");
      read(t, "delta", c.two_level.delta);
      read(t, "mu", c.two_level.mu);
      read(t, "t_f", c.two_level.t_f);
      read(t, "skew", c.two_level.skew);
      if (t.contains("E0") && !t.at("E0").is_null()) c.two_level.E0 = t.at("E0").get<double>();
    }
    if (j.contains("double_well")) {
      const json& d = j.at("double_well");
      reject_unknown_keys(d, {"mass", "t_f", "n_levels", "r_min", "r_max", "n_points"}, "double_well");
      read(d, "mass", c.double_well.mass);
      read(d, "t_f", c.double_well.t_f);
      read(d, "n_levels", c.double_well.n_levels);
      read(d, "r_min", c.double_well.r_min);
      read(d, "r_max", c.double_well.r_max);
      read(d, "n_points", c.double_well.n_points);
    }
    if (j.contains("n_steps") && !j.at("n_steps").is_null()) c.n_steps = j.at("n_steps").get<Index>();
    if (j.contains("perturbation")) {
      const json& p = j.at("perturbation");
      reject_unknown_keys(p, {"eta", "seed", "n_seeds"}, "perturbation");
      read(p, "eta", c.perturbation.eta);
      read(p, "seed", c.perturbation.seed);
      read(p, "n_seeds", c.perturbation.n_seeds);
    }
    read(j, "etas", c.etas);
    if (j.contains("newton")) {
      const json& n = j.at("newton");
      reject_unknown_keys(n, {"tol", "max_iters", "singular_cond_threshold", "stop_on_tol"}, "newton");
      read(n, "tol", c.newton.tol);
      read(n, "max_iters", c.newton.max_iters);
      read(n, "singular_cond_threshold", c.newton.singular_cond_threshold);
      read(n, "stop_on_tol", c.newton.stop_on_tol);
    }
    if (j.contains("continuation")) {
      const json& n = j.at("continuation");
      reject_unknown_keys(n, {"n_intermediate", "refine_m0", "retry_doubling"}, "continuation");
      read(n, "n_intermediate", c.continuation.n_intermediate);
      read(n, "refine_m0", c.continuation.refine_m0);
      read(n, "retry_doubling", c.continuation.retry_doubling);
    }
    read(j, "seed", c.seed);
    read(j, "workers", c.workers);
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

json config_to_json(const ExperimentConfig& c) {
  json j = {
      {"kind", to_string(c.kind)},
      {"model", to_string(c.resolved_model())},
      {"n_steps", c.resolved_steps()},
      {"perturbation",
       {{"eta", c.perturbation.eta}, {"seed", c.perturbation.seed}, {"n_seeds", c.perturbation.n_seeds}}},
      {"newton",
       {{"tol", c.newton.tol},
        {"max_iters", c.newton.max_iters},
        {"singular_cond_threshold", c.newton.singular_cond_threshold},
        {"stop_on_tol", c.newton.stop_on_tol}}},
      {"continuation",
       {{"n_intermediate", c.continuation.n_intermediate},
        {"refine_m0", c.continuation.refine_m0},
        {"retry_doubling", c.continuation.retry_doubling}}},
      {"seed", c.seed},
      {"workers", c.workers},
      {"out_dir", c.out_dir.string()},
  };
  if (c.resolved_model() == ModelKind::TwoLevel) {
    j["two_level"] = {{"delta", c.two_level.delta},
                      {"mu", c.two_level.mu},
                      {"t_f", c.two_level.t_f},
                      {"E0", c.two_level.resolved_E0()},
                      {"skew", c.two_level.skew}};
  } else {
    j["double_well"] = {{"mass", c.double_well.mass},       {"t_f", c.double_well.t_f},
                        {"n_levels", c.double_well.n_levels}, {"r_min", c.double_well.r_min},
                        {"r_max", c.double_well.r_max},     {"n_points", c.double_well.n_points}};
  }
  if (c.kind == ExperimentKind::EtaSweep) j["etas"] = c.etas;
  return j;
}

// --- classification and sweeps --------------------------------------------------

Regime classify_run(double dev_H0, double dev_H1, double dev_U) {
  if (!(dev_U <= kRegimeThreshold)) return Regime::Diverges;
  if (dev_H0 <= kRegimeThreshold && dev_H1 <= kRegimeThreshold) return Regime::RecoversOriginal;
  return Regime::AlternateSolution;
}

EtaSweepResult run_eta_sweep(const HamiltonianPair& truth, const SampledField& field, const TimeGrid& grid,
                             const std::vector<double>& etas, int n_seeds, std::uint64_t base_seed,
                             const NewtonConfig& newton, int workers) {
  if (n_seeds < 1) throw ConfigError("eta sweep: n_seeds must be at least 1");
  const UnitaryMatrix u0 = UnitaryMatrix::identity(truth.dim());
  const UnitaryMatrix u_tar = propagate_final(u0, truth, field, grid);

  std::vector<double> sorted = etas;
  std::sort(sorted.begin(), sorted.end());
  EtaSweepResult result;
  for (double eta : sorted)
    for (int s = 0; s < n_seeds; ++s) {
      SweepRecord rec;
      rec.eta = eta;
      rec.seed = base_seed + static_cast<std::uint64_t>(s);
      result.records.push_back(rec);
    }

  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (size_t i = next++; i < result.records.size(); i = next++) {
      SweepRecord& rec = result.records[i];
      try {
        const HamiltonianPair guess = perturb_pair(truth, {rec.eta, rec.seed, n_seeds});
        const NewtonResult r = newton_identify(u0, u_tar, guess, field, grid, newton, truth);
        rec.status = r.report.status;
        rec.iterations = r.report.iterations();
        rec.dev_H0 = spec_norm(RealMatrix(truth.H0.dense() - r.pair.H0.dense()));
        rec.dev_H1 = spec_norm(RealMatrix(truth.H1.dense() - r.pair.H1.dense()));
        rec.dev_U = r.report.final_dev_U;
        rec.regime = classify_run(rec.dev_H0, rec.dev_H1, rec.dev_U);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(workers, static_cast<int>(result.records.size())));
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  result.aggregates = aggregate_sweep(result.records);
  return result;
}

std::vector<SweepAggregate> aggregate_sweep(const std::vector<SweepRecord>& records) {
  std::map<double, std::vector<const SweepRecord*>> by_eta;
  for (const auto& r : records) by_eta[r.eta].push_back(&r);
  std::vector<SweepAggregate> out;
  for (const auto& [eta, runs] : by_eta) {
    SweepAggregate a;
    a.eta = eta;
    a.n_runs = static_cast<int>(runs.size());
    std::array<int, 3> counts{0, 0, 0};
    int converged = 0;
    std::vector<double> h0, h1, u;
    for (const SweepRecord* r : runs) {
      ++counts[static_cast<size_t>(badness(r->regime))];
      converged += r->converged() ? 1 : 0;
      h0.push_back(r->dev_H0);
      h1.push_back(r->dev_H1);
      u.push_back(r->dev_U);
    }
    const double n = static_cast<double>(a.n_runs);
    a.recovered_fraction = counts[0] / n;
    a.alternate_fraction = counts[1] / n;
    a.diverged_fraction = counts[2] / n;
    a.converged_fraction = converged / n;
    a.dev_H0 = stats_of(h0);
    a.dev_H1 = stats_of(h1);
    a.dev_U = stats_of(u);
    int best = 2;
    for (int b = 1; b >= 0; --b)
      if (counts[static_cast<size_t>(b)] > counts[static_cast<size_t>(best)]) best = b;
    a.regime = best == 0 ? Regime::RecoversOriginal : best == 1 ? Regime::AlternateSolution : Regime::Diverges;
    out.push_back(a);
  }
  return out;
}

std::string fig2_csv(const std::vector<SweepAggregate>& aggregates) {
  std::ostringstream out;
  out << "eta,n_runs,recovered_fraction,alternate_fraction,diverged_fraction,converged_fraction,"
         "mean_log10_dev_H0,median_log10_dev_H0,worst_log10_dev_H0,"
         "mean_log10_dev_H1,median_log10_dev_H1,worst_log10_dev_H1,"
         "mean_log10_dev_U,median_log10_dev_U,worst_log10_dev_U,regime\n";
  for (const auto& a : aggregates) {
    out << format_number(a.eta) << ',' << a.n_runs << ',' << format_number(a.recovered_fraction) << ','
        << format_number(a.alternate_fraction) << ',' << format_number(a.diverged_fraction) << ','
        << format_number(a.converged_fraction);
    for (const DeviationStats* s : {&a.dev_H0, &a.dev_H1, &a.dev_U}) {
      out << ',' << format_number(s->mean_log10) << ',' << format_number(s->median_log10) << ','
          << format_number(s->worst_log10);
    }
    out << ',' << to_string(a.regime) << '\n';
  }
  return out.str();
}

std::string fig2_raw_csv(const std::vector<SweepRecord>& records) {
  std::ostringstream out;
  out << "eta,seed,status,iterations,converged,dev_H0,dev_H1,dev_U,regime\n";
  for (const auto& r : records) {
    out << format_number(r.eta) << ',' << r.seed << ',' << to_string(r.status) << ',' << r.iterations << ','
        << (r.converged() ? 1 : 0) << ',' << format_number(r.dev_H0) << ',' << format_number(r.dev_H1) << ','
        << format_number(r.dev_U) << ',' << to_string(r.regime) << '\n';
  }
  return out.str();
}

std::string cpu_csv(const std::vector<CpuRecord>& rows) {
  std::ostringstream out;
  out << "label,n_d,n_steps,newton_iterations,wall_seconds\n";
  for (const auto& r : rows) {
    out << r.label << ',' << r.n_d << ',' << r.n_steps << ',' << r.newton_iterations << ','
        << format_number(r.wall_seconds) << '\n';
  }
  return out.str();
}

std::string git_blob_sha1(const std::string& bytes) {
  const std::string blob = "blob " + std::to_string(bytes.size()) + '\0' + bytes;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr) != 1) {
    throw Error("SHA-1 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

// --- driver ---------------------------------------------------------------------

RunOutcome run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();
  ArtifactWriter out(cfg.out_dir);
  const ModelSetup model = setup_model(cfg);

  ExperimentOutput o;
  switch (cfg.kind) {
    case ExperimentKind::NewtonTwoLevel:
    case ExperimentKind::NewtonDoubleWell:
      o = run_newton(cfg, model, out);
      break;
    case ExperimentKind::ContinuationTwoLevel:
    case ExperimentKind::ContinuationDoubleWell:
      o = run_continuation(cfg, model, out);
      break;
    case ExperimentKind::EtaSweep:
      o = run_sweep(cfg, model, out);
      break;
    case ExperimentKind::SingularityDemo:
      o = run_singularity(cfg, model, out);
      break;
    case ExperimentKind::CnOrderCheck:
      o = run_cn_order(cfg, model, out);
      break;
  }
  out.write("cpu.csv", cpu_csv(o.cpu));

  const json resolved = config_to_json(cfg);
  const json manifest = {
      {"tool", "hamid"},
      {"kind", to_string(cfg.kind)},
      {"config", resolved},
      {"config_sha1", git_blob_sha1(resolved.dump())},
      {"derived", model.resolved},
      {"outputs", out.hashes()},
      {"summary", o.summary},
      {"exit_code", o.exit_code},
      {"wall_seconds", seconds_since(start)},
  };
  std::ofstream mf(cfg.out_dir / "manifest.json");
  mf << manifest.dump(2) << '\n';
  if (!mf) throw Error("failed writing manifest.json");

  RunOutcome r;
  r.exit_code = o.exit_code;
  r.summary = o.summary;
  r.files = out.files();
  r.files.push_back("manifest.json");
  return r;
}

}  // namespace hamid
