#pragma once

// Time grid, control fields, and Crank-Nicolson propagation of the evolution
// operator i dU/dt = [H0 + E(t) H1] U.

#include <functional>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "hamid/hermitian.hpp"

namespace hamid {

/// Field-free Hamiltonian H0 and zero-diagonal coupling H1 (atomic units).
struct HamiltonianPair {
  RealSymMatrix H0;
  RealSymZeroDiagMatrix H1;

  HamiltonianPair() = default;
  HamiltonianPair(RealSymMatrix h0, RealSymZeroDiagMatrix h1);

  Index dim() const { return H0.dim(); }
  static HamiltonianPair zero(Index dim);
};

HamiltonianPair operator+(const HamiltonianPair& a, const HamiltonianPair& b);

class TimeGrid {
 public:
  TimeGrid(double t_f, Index n_steps);

  double t_f() const { return t_f_; }
  Index n_steps() const { return n_steps_; }
  double dt() const { return dt_; }
  double time(Index n) const { return static_cast<double>(n) * dt_; }

 private:
  double t_f_;
  Index n_steps_;
  double dt_;
};

/// E(t) = E0/2 sin^2(pi t / t_f) (1 + skew (t/t_f - 1/2)).
/// With skew = 0 the field is symmetric about t_f/2; combined with midpoint
/// sampling and a real pair, U_N is then exactly complex symmetric and the
/// reduced Newton system loses rank. A nonzero skew breaks that.
struct SinSqEnvelope {
  double E0 = 0.0;
  double skew = 0.0;
};

/// E(t) = amplitude sin^2(envelope_freq_mult pi t / t_f) cos(carrier t).
struct PiPulse {
  double amplitude = 0.0;
  double envelope_freq_mult = 4.0;
  double carrier = 0.0;
};

/// Pre-sampled midpoint values, one per time step.
struct Tabulated {
  std::vector<double> samples;
};

using ControlField = std::variant<SinSqEnvelope, PiPulse, Tabulated>;

/// Closed-form value at time t. Throws ContractViolation for Tabulated.
double field_value(const ControlField& field, double t, double t_f);

/// Midpoint samples E_n = E(t_n + dt/2).
class SampledField {
 public:
  SampledField() = default;
  explicit SampledField(std::vector<double> values) : values_(std::move(values)) {}

  Index size() const { return static_cast<Index>(values_.size()); }
  double operator[](Index n) const { return values_[static_cast<size_t>(n)]; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> values_;
};

SampledField sample_field(const ControlField& field, const TimeGrid& grid);

/// All states U_0..U_N of a propagation.
struct Trajectory {
  TimeGrid grid;
  std::vector<UnitaryMatrix> states;

  const UnitaryMatrix& final_state() const { return states.back(); }
};

/// One Crank-Nicolson step U_{n+1} = (I + L)^{-1}(I - L) U_n with
/// L = i dt/2 (H0 + E_n H1). Negative dt steps backwards.
UnitaryMatrix cn_step(const UnitaryMatrix& u_n, const RealSymMatrix& h0,
                      const RealSymZeroDiagMatrix& h1, double e_n, double dt);

/// Called once per step with (n, U_n, U_{n+1}).
using StepObserver =
    std::function<void(Index n, const ComplexMatrix& u_n, const ComplexMatrix& u_next)>;

/// Propagates without storing states; the observer sees every step.
UnitaryMatrix propagate_final(const UnitaryMatrix& u0, const HamiltonianPair& pair,
                              const SampledField& field, const TimeGrid& grid,
                              const StepObserver& observer = {});

Trajectory propagate(const UnitaryMatrix& u0, const HamiltonianPair& pair,
                     const SampledField& field, const TimeGrid& grid);

/// Final state U_N and its derivative dU_N along (dH0, dH1), obtained by
/// differentiating the CN recursion step by step:
/// (I + L) dU_{n+1} = (I - L) dU_n - dL (U_{n+1} + U_n).
struct TangentResult {
  ComplexMatrix u_final;
  ComplexMatrix du_final;
};

TangentResult propagate_tangent(const UnitaryMatrix& u0, const HamiltonianPair& pair,
                                const HamiltonianPair& direction, const SampledField& field,
                                const TimeGrid& grid);

/// dt-halving check against the exact exponential for a constant field.
/// `degenerate` is set (and ratio is NaN) when both errors vanish.
struct CnOrderResult {
  double err_coarse = 0.0;
  double err_fine = 0.0;
  double ratio = 0.0;
  bool degenerate = false;
};

CnOrderResult cn_error_order(const HamiltonianPair& pair, double constant_field, double t_f,
                             Index n_steps);

void to_json(nlohmann::json& j, const ControlField& field);
ControlField control_field_from_json(const nlohmann::json& j);

}  // namespace hamid
