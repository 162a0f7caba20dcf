#pragma once

// Newton identification of (H0, H1) from a known field and a target final
// evolution operator.

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hamid/hermitian.hpp"
#include "hamid/propagator.hpp"

namespace hamid {

struct NewtonConfig {
  double tol = 1e-12;        // stop when e_k = ||dH0|| + ||dH1|| <= tol
  int max_iters = 50;
  double singular_cond_threshold = 1e12;
  bool stop_on_tol = true;   // false: always run max_iters iterations

  void validate() const;
};

struct NewtonUpdate {
  RealSymMatrix dH0;
  RealSymZeroDiagMatrix dH1;
  double condition_estimate = 0.0;  // 1-norm condition of the solved system
};

enum class NewtonStatus { Converged, MaxIters, SingularJacobian };

std::string to_string(NewtonStatus status);

struct NewtonRecord {
  int k = 0;
  double e_k = 0.0;
  std::optional<double> dev_H0;
  std::optional<double> dev_H1;
  double dev_U = 0.0;
  double jacobian_condition = 0.0;
  double residual_skew = 0.0;  // ||anti-Hermitian part of i(U_N^dagger U_tar - I)||
};

struct NewtonReport {
  std::vector<NewtonRecord> records;
  NewtonStatus status = NewtonStatus::MaxIters;
  int failed_iteration = -1;        // set for SingularJacobian
  double failed_condition = 0.0;
  double final_dev_U = 0.0;         // at the returned pair

  int iterations() const { return static_cast<int>(records.size()); }
};

enum class Operator { H0, H1 };

struct UnknownSlot {
  Operator op;
  Index i;
  Index j;
};

/// Square real system of size dim^2 obtained from the complex Kronecker
/// system by keeping the upper-triangle equations and merging the columns of
/// symmetric unknowns.
struct ReducedSystem {
  Index dim = 0;
  RealMatrix matrix;
  Eigen::VectorXd rhs;
  std::vector<UnknownSlot> unknowns;
};

/// J0 = dt sum_n (Ubar_n^T kron Ubar_n^dagger), J1 = dt sum_n E_n (...),
/// with Ubar_n = (U_{n+1} + U_n)/2 and column-major vectorization.
struct Jacobian {
  ComplexMatrix J0;
  ComplexMatrix J1;
};

/// Folds the Jacobian sums one step at a time so propagations need not keep
/// their states. Accumulation order is fixed, so results are reproducible.
class JacobianAccumulator {
 public:
  JacobianAccumulator(Index dim, double dt, Index block_size = 256);

  void add(const ComplexMatrix& u_n, const ComplexMatrix& u_next, double e_n);
  Jacobian finish();

 private:
  void flush();

  Index dim_;
  double dt_;
  Index block_size_;
  Index pending_ = 0;
  ComplexMatrix block_;       // columns conj(vec(Ubar_n))
  Eigen::VectorXd weights_;   // E_n per pending column
  ComplexMatrix gram0_;       // lower triangle of sum q q^dagger
  ComplexMatrix gram1_pos_;   // lower triangle of sum_{E>0} E q q^dagger
  ComplexMatrix gram1_neg_;   // lower triangle of sum_{E<0} |E| q q^dagger
};

/// S = i (U_N^dagger U_tar - U_tar^dagger U_N) / 2.
ComplexMatrix hermitian_residual(const UnitaryMatrix& u_final, const UnitaryMatrix& u_tar);

Jacobian assemble_jacobian(const Trajectory& traj, const SampledField& field);

ReducedSystem reduce_system(const Jacobian& jac, const ComplexMatrix& residual);

/// LU with partial pivoting. Throws SingularJacobianError when the condition
/// estimate exceeds cfg.singular_cond_threshold.
NewtonUpdate solve_update(const ReducedSystem& sys, const NewtonConfig& cfg);

/// Maps an update back to the unknown vector ordering of `unknowns`.
Eigen::VectorXd pack_update(const HamiltonianPair& update, const std::vector<UnknownSlot>& unknowns);

struct NewtonResult {
  HamiltonianPair pair;
  NewtonReport report;
};

/// Algorithm: propagate, Hermitian residual, Jacobian, reduce, solve, update;
/// stop on e_k <= tol, max_iters, or a singular Jacobian. When `truth` is
/// given the report carries H deviations from it.
NewtonResult newton_identify(const UnitaryMatrix& u0, const UnitaryMatrix& u_tar,
                             const HamiltonianPair& guess, const SampledField& field,
                             const TimeGrid& grid, const NewtonConfig& cfg,
                             const std::optional<HamiltonianPair>& truth = std::nullopt);

/// CSV with header k,e_k,dev_H0,dev_H1,dev_U,cond; values at 12 significant
/// digits, empty cells for unknown deviations.
std::string newton_report_csv(const NewtonReport& report);
nlohmann::json newton_report_json(const NewtonReport& report);

/// %.12g, with "nan"/"inf" spelled consistently.
std::string format_number(double x);

}  // namespace hamid
