#pragma once

// Benchmark systems: the resonant two-level atom in the rotating frame, and
// an asymmetric double well in its truncated field-free eigenbasis. Plus
// seeded random perturbations of a Hamiltonian pair.

#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "hamid/propagator.hpp"

namespace hamid {

/// 1 atomic unit of time in seconds.
inline constexpr double kAtomicTimeSeconds = 2.418884326e-17;
inline constexpr double kPicosecond = 1e-12;

struct TwoLevelParams {
  double delta = 1e-7;               // detuning, a.u.
  double mu = 1.0;                   // dipole, a.u.
  double t_f = 9000.0;               // a.u.
  std::optional<double> E0;          // default: 2 pi / (mu t_f), full inversion
  double skew = 1.0;                 // envelope asymmetry, see SinSqEnvelope

  double resolved_E0() const;
  void validate() const;
};

struct TwoLevelModel {
  HamiltonianPair pair;
  ControlField field;
};

/// H0 = diag(0, delta), H1 = mu sigma_x, SinSqEnvelope{E0, skew}.
TwoLevelModel two_level_model(const TwoLevelParams& p);

struct DoubleWellParams {
  double mass = 1000.0;
  double t_f = 2.0 * kPicosecond / kAtomicTimeSeconds;
  Index n_levels = 12;
  double r_min = -2.5;
  double r_max = 2.5;
  Index n_points = 513;               // interior sine-grid points

  void validate() const;
};

struct DoubleWellModel {
  HamiltonianPair pair;               // H0 = diag(E_v), H1 = <v|r/2|w> with zeroed diagonal
  double omega_03 = 0.0;
  double mu_03 = 0.0;
  std::vector<double> eigenenergies;
  std::vector<double> dipole_diagonal;  // the removed <v|r/2|v>
  double boundary_amplitude = 0.0;      // worst |psi(edge)| / max|psi| over kept states
  double orthonormality_defect = 0.0;   // max |C^T C - I|
  double dipole_asymmetry = 0.0;        // max |D - D^T| before zeroing
};

/// V(r) = r^4 - r^2 - r/20.
double double_well_potential(double r);

/// Sine-basis (Dirichlet box) discretization of -1/(2M) d^2/dr^2 + V(r), lowest
/// n_levels eigenstates. Throws GridError when a kept state has not decayed
/// to 1e-8 of its maximum at the box edges.
DoubleWellModel build_double_well(const DoubleWellParams& p);

/// E(t) = 2 pi / (t_f mu_03) sin^2(4 pi t / t_f) cos(omega_03 t).
ControlField pi_pulse_field(const DoubleWellModel& model, double t_f);

struct PerturbationSpec {
  double eta = 0.0;
  std::uint64_t seed = 0;
  int n_seeds = 15;
};

/// (H0 + eta dH0, H1 + eta dH1) with dH entries uniform in [-1, 1]; dH0 upper
/// triangle (with diagonal) drawn first, then dH1 strict upper triangle.
HamiltonianPair perturb_pair(const HamiltonianPair& pair, const PerturbationSpec& spec);

nlohmann::json double_well_fixture_json(const DoubleWellModel& model);

}  // namespace hamid
