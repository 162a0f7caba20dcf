#include "hamid/models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "hamid/errors.hpp"

namespace hamid {
namespace {
constexpr double kBoundaryDecay = 1e-8;
}

double TwoLevelParams::resolved_E0() const {
  return E0 ? *E0 : 2.0 * std::numbers::pi / (mu * t_f);
}

void TwoLevelParams::validate() const {
  if (!(t_f > 0.0)) throw ModelError("two-level: t_f must be positive");
  if (mu == 0.0) throw ModelError("two-level: mu must be nonzero");
  if (!(std::abs(skew) < 2.0)) throw ModelError("two-level: |skew| must be below 2 so the envelope keeps its sign");
}

TwoLevelModel two_level_model(const TwoLevelParams& p) {
  p.validate();
  RealMatrix h0 = RealMatrix::Zero(2, 2);
  h0(1, 1) = p.delta;
  RealMatrix h1 = RealMatrix::Zero(2, 2);
  h1(0, 1) = h1(1, 0) = p.mu;
  return {{RealSymMatrix::from_dense(h0), RealSymZeroDiagMatrix::from_dense(h1)},
          SinSqEnvelope{p.resolved_E0(), p.skew}};
}

void DoubleWellParams::validate() const {
  if (!(mass > 0.0)) throw ModelError("double-well: mass must be positive");
  if (!(t_f > 0.0)) throw ModelError("double-well: t_f must be positive");
  if (n_levels < 4) throw ModelError("double-well: need at least 4 levels (the pulse drives 0 -> 3)");
  if (!(r_min < r_max)) throw ModelError("double-well: r_min must be below r_max");
  if (n_points < 4 * n_levels) throw ModelError("double-well: n_points must be at least 4 n_levels");
}

double double_well_potential(double r) {
  const double r2 = r * r;
  return r2 * r2 - r2 - r / 20.0;
}

DoubleWellModel build_double_well(const DoubleWellParams& p) {
  p.validate();
  const Index n = p.n_points;
  const double length = p.r_max - p.r_min;
  const double h = length / static_cast<double>(n + 1);

  // Orthogonal sine transform: S(k, m) = sqrt(2/(n+1)) sin(pi (k+1)(m+1)/(n+1)).
  RealMatrix sine(n, n);
  const double norm = std::sqrt(2.0 / static_cast<double>(n + 1));
  for (Index k = 0; k < n; ++k)
    for (Index m = 0; m < n; ++m)
      sine(k, m) = norm * std::sin(std::numbers::pi * static_cast<double>((k + 1) * (m + 1)) /
                                   static_cast<double>(n + 1));
  Eigen::VectorXd kinetic(n);
  for (Index m = 0; m < n; ++m) {
    const double wave = std::numbers::pi * static_cast<double>(m + 1) / length;
    kinetic(m) = wave * wave / (2.0 * p.mass);
  }
  Eigen::VectorXd r(n);
  for (Index k = 0; k < n; ++k) r(k) = p.r_min + h * static_cast<double>(k + 1);

  RealMatrix ham = sine * kinetic.asDiagonal() * sine;
  ham = 0.5 * (ham + ham.transpose()).eval();
  for (Index k = 0; k < n; ++k) ham(k, k) += double_well_potential(r(k));

  Eigen::SelfAdjointEigenSolver<RealMatrix> es(ham);
  if (es.info() != Eigen::Success) throw NumericalError("double-well: eigensolver failed");

  const Index levels = p.n_levels;
  RealMatrix states = es.eigenvectors().leftCols(levels);
  DoubleWellModel model;
  for (Index v = 0; v < levels; ++v) {
    auto col = states.col(v);
    Index peak = 0;
    col.cwiseAbs().maxCoeff(&peak);
    if (col(peak) < 0.0) col = -col;  // sign convention: largest lobe positive
    const double edge = std::max(std::abs(col(0)), std::abs(col(n - 1))) / std::abs(col(peak));
    model.boundary_amplitude = std::max(model.boundary_amplitude, edge);
    model.eigenenergies.push_back(es.eigenvalues()(v));
  }
  if (!(model.boundary_amplitude < kBoundaryDecay)) {
    throw GridError("double-well: eigenstates reach the box edge (relative amplitude " +
                    std::to_string(model.boundary_amplitude) + "); widen [r_min, r_max]");
  }

  model.orthonormality_defect =
      (states.transpose() * states - RealMatrix::Identity(levels, levels)).cwiseAbs().maxCoeff();
  const RealMatrix dipole = states.transpose() * (0.5 * r).asDiagonal() * states;
  model.dipole_asymmetry = (dipole - dipole.transpose()).cwiseAbs().maxCoeff();

  RealMatrix h1 = 0.5 * (dipole + dipole.transpose());
  for (Index v = 0; v < levels; ++v) model.dipole_diagonal.push_back(h1(v, v));
  model.mu_03 = h1(0, 3);
  h1.diagonal().setZero();

  RealMatrix h0 = RealMatrix::Zero(levels, levels);
  for (Index v = 0; v < levels; ++v) h0(v, v) = model.eigenenergies[static_cast<size_t>(v)];
  model.pair = {RealSymMatrix::from_dense(h0), RealSymZeroDiagMatrix::from_dense(h1, 0.0)};
  model.omega_03 = model.eigenenergies[3] - model.eigenenergies[0];
  return model;
}

ControlField pi_pulse_field(const DoubleWellModel& model, double t_f) {
  if (model.mu_03 == 0.0) throw ModelError("pi_pulse_field: vanishing mu_03");
  if (!(t_f > 0.0)) throw ModelError("pi_pulse_field: t_f must be positive");
  return PiPulse{2.0 * std::numbers::pi / (t_f * model.mu_03), 4.0, model.omega_03};
}

HamiltonianPair perturb_pair(const HamiltonianPair& pair, const PerturbationSpec& spec) {
  const Index n = pair.dim();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  RealMatrix d0 = RealMatrix::Zero(n, n);
  RealMatrix d1 = RealMatrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) d0(i, j) = d0(j, i) = unit(rng);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) d1(i, j) = d1(j, i) = unit(rng);
  return {pair.H0 + spec.eta * RealSymMatrix::from_dense(d0, 0.0),
          pair.H1 + spec.eta * RealSymZeroDiagMatrix::from_dense(d1, 0.0)};
}

nlohmann::json double_well_fixture_json(const DoubleWellModel& model) {
  return {{"eigenenergies", model.eigenenergies},
          {"dipole_diagonal", model.dipole_diagonal},
          {"omega_03", model.omega_03},
          {"mu_03", model.mu_03},
          {"boundary_amplitude", model.boundary_amplitude},
          {"H0", matrix_to_json(model.pair.H0.dense())},
          {"H1", matrix_to_json(model.pair.H1.dense())}};
}

}  // namespace hamid
