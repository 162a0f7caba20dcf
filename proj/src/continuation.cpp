#include "hamid/continuation.hpp"

#include <chrono>
#include <limits>
#include <sstream>

#include "hamid/errors.hpp"

namespace hamid {

void ContinuationConfig::validate() const {
  if (n_intermediate < 1) throw ConfigError("continuation.n_intermediate must be at least 1");
  newton.validate();
}

std::string to_string(ContinuationStatus status) {
  return status == ContinuationStatus::Converged ? "Converged" : "StageFailed";
}

int ContinuationReport::total_newton_iterations() const {
  int total = 0;
  for (const auto& s : stages) total += s.newton.iterations();
  return total;
}

UnitaryMatrix intermediate_target(const TargetDecomposition& dec, int m, int n_intermediate) {
  if (n_intermediate < 1 || m < 0 || m > n_intermediate) {
    throw ContractViolation("intermediate_target: need 0 <= m <= N_c, got m = " + std::to_string(m) +
                            ", N_c = " + std::to_string(n_intermediate));
  }
  const double frac = static_cast<double>(m) / static_cast<double>(n_intermediate);
  ComplexMatrix gen(dec.S.dim(), dec.S.dim());
  gen.real() = frac * dec.A.dense();
  gen.imag() = dec.S.dense();
  return unitary_exp(gen);
}

HamiltonianPair m0_seed(const TargetDecomposition& dec, double t_f) {
  if (!(t_f > 0.0)) throw ContractViolation("m0_seed: t_f must be positive");
  return {(-1.0 / t_f) * dec.S, RealSymZeroDiagMatrix(dec.S.dim())};
}

namespace {

std::optional<double> deviation(const std::optional<HamiltonianPair>& truth, const HamiltonianPair& pair,
                                bool coupling) {
  if (!truth) return std::nullopt;
  const RealMatrix diff = coupling ? RealMatrix(truth->H1.dense() - pair.H1.dense())
                                   : RealMatrix(truth->H0.dense() - pair.H0.dense());
  return spec_norm(diff);
}

ContinuationResult run_path(const UnitaryMatrix& u0, const UnitaryMatrix& u_tar, const TargetDecomposition& dec,
                            const SampledField& field, const TimeGrid& grid,
                            const ContinuationConfig& cfg, int n_c,
                            const std::optional<HamiltonianPair>& truth) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  ContinuationResult result{m0_seed(dec, grid.t_f()), {}};
  ContinuationReport& report = result.report;
  report.n_intermediate = n_c;

  for (int m = 0; m <= n_c; ++m) {
    // The last stage aims at U_tar itself rather than exp(iS + A), which is
    // its polar factor and differs by the target's unitarity drift.
    const UnitaryMatrix target = m == n_c ? u_tar : intermediate_target(dec, m, n_c);
    StageRecord stage;
    stage.m = m;
    HamiltonianPair stage_pair = result.pair;
    if (m == 0 && !cfg.refine_m0) {
      const UnitaryMatrix u_final = propagate_final(u0, stage_pair, field, grid);
      stage.newton.status = NewtonStatus::Converged;
      stage.newton.final_dev_U = spec_norm(ComplexMatrix(u_final.matrix() - target.matrix()));
    } else {
      NewtonResult nr = newton_identify(u0, target, stage_pair, field, grid, cfg.newton, truth);
      stage_pair = std::move(nr.pair);
      stage.newton = std::move(nr.report);
    }
    stage.dev_U_stage = stage.newton.final_dev_U;
    stage.dev_H0 = deviation(truth, stage_pair, false);
    stage.dev_H1 = deviation(truth, stage_pair, true);
    stage.elapsed_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    const NewtonStatus status = stage.newton.status;
    report.stages.push_back(std::move(stage));
    if (status != NewtonStatus::Converged) {
      report.status = ContinuationStatus::StageFailed;
      report.failed_stage = m;
      report.failed_reason = status;
      return result;
    }
    result.pair = std::move(stage_pair);
  }
  report.status = ContinuationStatus::Converged;
  return result;
}

}  // namespace

ContinuationResult continuation_identify(const UnitaryMatrix& u0, const UnitaryMatrix& u_tar,
                                         const SampledField& field, const TimeGrid& grid,
                                         const ContinuationConfig& cfg,
                                         const std::optional<HamiltonianPair>& truth) {
  cfg.validate();
  const Index dim = u0.dim();
  if (u_tar.dim() != dim) throw DimensionError("continuation_identify: dimension mismatch");
  if ((u0.matrix() - ComplexMatrix::Identity(dim, dim)).cwiseAbs().maxCoeff() > kDefaultUnitarityTol) {
    throw ContractViolation("continuation_identify: the m = 0 seed requires U_0 = identity");
  }
  const TargetDecomposition dec = decompose_target(u_tar);
  ContinuationResult result = run_path(u0, u_tar, dec, field, grid, cfg, cfg.n_intermediate, truth);
  if (result.report.status == ContinuationStatus::StageFailed && cfg.retry_doubling) {
    result = run_path(u0, u_tar, dec, field, grid, cfg, 2 * cfg.n_intermediate, truth);
    result.report.restarted = true;
  }
  return result;
}

SingularityDiagnostic rank_diagnostic(const RealMatrix& matrix, double rank_tolerance) {
  Eigen::JacobiSVD<RealMatrix> svd(matrix);
  SingularityDiagnostic diag;
  diag.rank_tolerance = rank_tolerance;
  diag.singular_values = svd.singularValues();
  const double smax = diag.singular_values.size() ? diag.singular_values(0) : 0.0;
  const double smin = diag.singular_values.size() ? diag.singular_values.tail(1)(0) : 0.0;
  for (Index k = 0; k < diag.singular_values.size(); ++k) {
    if (diag.singular_values(k) > rank_tolerance * smax) ++diag.numerical_rank;
  }
  diag.condition_estimate = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  return diag;
}

ReducedSystem reduced_system_at(const HamiltonianPair& pair, const SampledField& field,
                                const TimeGrid& grid, const UnitaryMatrix& u_tar) {
  const Index dim = pair.dim();
  if (u_tar.dim() != dim) throw DimensionError("reduced_system_at: dimension mismatch");
  if (field.size() != grid.n_steps()) throw DimensionError("reduced_system_at: field length mismatch");
  JacobianAccumulator acc(dim, grid.dt());
  const UnitaryMatrix u_final = propagate_final(
      UnitaryMatrix::identity(dim), pair, field, grid,
      [&](Index n, const ComplexMatrix& u_n, const ComplexMatrix& u_next) { acc.add(u_n, u_next, field[n]); });
  return reduce_system(acc.finish(), hermitian_residual(u_final, u_tar));
}

SingularityDiagnostic singularity_probe(const HamiltonianPair& pair, const SampledField& field,
                                        const TimeGrid& grid, const UnitaryMatrix& u_tar,
                                        double rank_tolerance) {
  return rank_diagnostic(reduced_system_at(pair, field, grid, u_tar).matrix, rank_tolerance);
}

std::string continuation_report_csv(const ContinuationReport& report) {
  std::ostringstream out;
  out << "m,iterations,dev_U_stage,dev_H0,dev_H1\n";
  for (const auto& s : report.stages) {
    out << s.m << ',' << s.newton.iterations() << ',' << format_number(s.dev_U_stage) << ','
        << (s.dev_H0 ? format_number(*s.dev_H0) : "") << ','
        << (s.dev_H1 ? format_number(*s.dev_H1) : "") << '\n';
  }
  return out.str();
}

nlohmann::json continuation_report_json(const ContinuationReport& report) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : report.stages) {
    nlohmann::json j = {{"m", s.m},
                        {"dev_U_stage", s.dev_U_stage},
                        {"newton", newton_report_json(s.newton)}};
    if (s.dev_H0) j["dev_H0"] = *s.dev_H0;
    if (s.dev_H1) j["dev_H1"] = *s.dev_H1;
    stages.push_back(std::move(j));
  }
  nlohmann::json out = {{"status", to_string(report.status)},
                        {"n_intermediate", report.n_intermediate},
                        {"restarted", report.restarted},
                        {"total_newton_iterations", report.total_newton_iterations()},
                        {"stages", std::move(stages)}};
  if (report.status == ContinuationStatus::StageFailed) {
    out["failed_stage"] = report.failed_stage;
    out["failed_reason"] = to_string(report.failed_reason);
  }
  return out;
}

}  // namespace hamid
