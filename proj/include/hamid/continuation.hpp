#pragma once

// Homotopy over intermediate targets exp(iS + (m/N_c) A), anchored at the
// closed-form solution (-S/t_f, 0) for m = 0, plus a rank diagnostic for the
// reduced Newton system.

#include <optional>
#include <string>
#include <vector>

#include "hamid/hermitian.hpp"
#include "hamid/newton.hpp"
#include "hamid/propagator.hpp"

namespace hamid {

struct ContinuationConfig {
  int n_intermediate = 20;
  NewtonConfig newton;
  bool refine_m0 = true;
  bool retry_doubling = false;  // on stage failure, double N_c and restart once

  void validate() const;
};

struct StageRecord {
  int m = 0;
  NewtonReport newton;
  double dev_U_stage = 0.0;
  std::optional<double> dev_H0;
  std::optional<double> dev_H1;
  double elapsed_seconds = 0.0;  // wall clock since the run started
};

enum class ContinuationStatus { Converged, StageFailed };

std::string to_string(ContinuationStatus status);

struct ContinuationReport {
  std::vector<StageRecord> stages;
  ContinuationStatus status = ContinuationStatus::Converged;
  int failed_stage = -1;
  NewtonStatus failed_reason = NewtonStatus::Converged;
  int n_intermediate = 0;  // effective N_c (after a doubling restart)
  bool restarted = false;

  int total_newton_iterations() const;
};

struct ContinuationResult {
  HamiltonianPair pair;
  ContinuationReport report;
};

struct SingularityDiagnostic {
  double condition_estimate = 0.0;  // sigma_max / sigma_min
  Index numerical_rank = 0;
  double rank_tolerance = 0.0;
  Eigen::VectorXd singular_values;
};

inline constexpr double kDefaultRankTolerance = 1e-9;

/// exp(iS + (m/N_c) A). Throws ContractViolation unless 0 <= m <= N_c.
UnitaryMatrix intermediate_target(const TargetDecomposition& dec, int m, int n_intermediate);

/// (-S/t_f, 0).
HamiltonianPair m0_seed(const TargetDecomposition& dec, double t_f);

/// Requires U_0 = identity (ContractViolation otherwise). Stage failures are
/// reported, not thrown; the returned pair is the last converged stage.
ContinuationResult continuation_identify(const UnitaryMatrix& u0, const UnitaryMatrix& u_tar,
                                         const SampledField& field, const TimeGrid& grid,
                                         const ContinuationConfig& cfg,
                                         const std::optional<HamiltonianPair>& truth = std::nullopt);

/// The reduced Newton system at `pair`, propagated from the identity and
/// measured against `u_tar`.
ReducedSystem reduced_system_at(const HamiltonianPair& pair, const SampledField& field,
                                const TimeGrid& grid, const UnitaryMatrix& u_tar);

/// Numerical rank and condition of the reduced Newton system at `pair`
/// (propagated from the identity towards `u_tar`).
SingularityDiagnostic singularity_probe(const HamiltonianPair& pair, const SampledField& field,
                                        const TimeGrid& grid, const UnitaryMatrix& u_tar,
                                        double rank_tolerance = kDefaultRankTolerance);

/// Numerical rank of an assembled reduced system.
SingularityDiagnostic rank_diagnostic(const RealMatrix& matrix, double rank_tolerance);

/// One row per stage: m,iterations,dev_U_stage,dev_H0,dev_H1.
std::string continuation_report_csv(const ContinuationReport& report);
nlohmann::json continuation_report_json(const ContinuationReport& report);

}  // namespace hamid
