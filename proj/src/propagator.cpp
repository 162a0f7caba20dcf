#include "hamid/propagator.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "hamid/errors.hpp"

namespace hamid {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

void check_pair(const HamiltonianPair& pair, Index dim) {
  if (pair.H0.dim() != dim || pair.H1.dim() != dim) {
    throw DimensionError("Hamiltonian dimension " + std::to_string(pair.H0.dim()) + "/" +
                         std::to_string(pair.H1.dim()) + " does not match operator dimension " +
                         std::to_string(dim));
  }
}

void check_field(const SampledField& field, const TimeGrid& grid) {
  if (field.size() != grid.n_steps()) {
    throw DimensionError("sampled field has " + std::to_string(field.size()) +
                         " values, grid has " + std::to_string(grid.n_steps()) + " steps");
  }
}

// Reusable workspace for repeated Cayley steps with a fixed pair.
class CayleyStepper {
 public:
  CayleyStepper(const HamiltonianPair& pair, double dt)
      : h0_(pair.H0.dense()), h1_(pair.H1.dense()), half_dt_(0.5 * dt), n_(pair.dim()),
        lhs_(n_, n_), lu_(n_) {}

  // Factorizes I + L for field value e.
  void factor(double e) {
    lhs_.real().setIdentity();
    lhs_.imag() = half_dt_ * (h0_ + e * h1_);
    lu_.compute(lhs_);
  }

  // (I + L)^{-1}(I - L) u = 2 (I + L)^{-1} u - u.
  void apply(const ComplexMatrix& u, ComplexMatrix& out) const {
    out.noalias() = lu_.solve(u);
    out = 2.0 * out - u;
  }

  // L x for the current field value.
  ComplexMatrix l_times(const ComplexMatrix& x) const {
    return Complex(0.0, 1.0) * (lhs_.imag() * x);
  }

  const Eigen::PartialPivLU<ComplexMatrix>& lu() const { return lu_; }

 private:
  const RealMatrix& h0_;
  const RealMatrix& h1_;
  double half_dt_;
  Index n_;
  ComplexMatrix lhs_;
  Eigen::PartialPivLU<ComplexMatrix> lu_;
};

}  // namespace

HamiltonianPair::HamiltonianPair(RealSymMatrix h0, RealSymZeroDiagMatrix h1)
    : H0(std::move(h0)), H1(std::move(h1)) {
  if (H0.dim() != H1.dim()) throw DimensionError("HamiltonianPair: H0 and H1 dimensions differ");
}

HamiltonianPair HamiltonianPair::zero(Index dim) {
  return {RealSymMatrix(dim), RealSymZeroDiagMatrix(dim)};
}

HamiltonianPair operator+(const HamiltonianPair& a, const HamiltonianPair& b) {
  return {a.H0 + b.H0, a.H1 + b.H1};
}

TimeGrid::TimeGrid(double t_f, Index n_steps) : t_f_(t_f), n_steps_(n_steps), dt_(0.0) {
  if (!(t_f > 0.0) || !std::isfinite(t_f)) throw ContractViolation("TimeGrid: t_f must be positive");
  if (n_steps <= 0) throw ContractViolation("TimeGrid: n_steps must be positive");
  dt_ = t_f / static_cast<double>(n_steps);
}

double field_value(const ControlField& field, double t, double t_f) {
  return std::visit(
      Overloaded{
          [&](const SinSqEnvelope& f) {
            const double s = std::sin(std::numbers::pi * t / t_f);
            return 0.5 * f.E0 * s * s * (1.0 + f.skew * (t / t_f - 0.5));
          },
          [&](const PiPulse& f) {
            const double s = std::sin(f.envelope_freq_mult * std::numbers::pi * t / t_f);
            return f.amplitude * s * s * std::cos(f.carrier * t);
          },
          [](const Tabulated&) -> double {
            throw ContractViolation("field_value: tabulated fields have no closed form");
          },
      },
      field);
}

SampledField sample_field(const ControlField& field, const TimeGrid& grid) {
  if (const auto* tab = std::get_if<Tabulated>(&field)) {
    if (static_cast<Index>(tab->samples.size()) != grid.n_steps()) {
      throw DimensionError("tabulated field has " + std::to_string(tab->samples.size()) +
                           " samples, grid has " + std::to_string(grid.n_steps()) + " steps");
    }
    return SampledField(tab->samples);
  }
  std::vector<double> values(static_cast<size_t>(grid.n_steps()));
  for (Index n = 0; n < grid.n_steps(); ++n) {
    values[static_cast<size_t>(n)] = field_value(field, grid.time(n) + 0.5 * grid.dt(), grid.t_f());
  }
  return SampledField(std::move(values));
}

UnitaryMatrix cn_step(const UnitaryMatrix& u_n, const RealSymMatrix& h0,
                      const RealSymZeroDiagMatrix& h1, double e_n, double dt) {
  const HamiltonianPair pair(h0, h1);
  check_pair(pair, u_n.dim());
  CayleyStepper stepper(pair, dt);
  stepper.factor(e_n);
  ComplexMatrix next;
  stepper.apply(u_n.matrix(), next);
  return UnitaryMatrix::trusted(std::move(next));
}

UnitaryMatrix propagate_final(const UnitaryMatrix& u0, const HamiltonianPair& pair,
                              const SampledField& field, const TimeGrid& grid,
                              const StepObserver& observer) {
  check_pair(pair, u0.dim());
  check_field(field, grid);
  CayleyStepper stepper(pair, grid.dt());
  ComplexMatrix u = u0.matrix();
  ComplexMatrix next(u.rows(), u.cols());
  for (Index n = 0; n < grid.n_steps(); ++n) {
    stepper.factor(field[n]);
    stepper.apply(u, next);
    if (observer) observer(n, u, next);
    u.swap(next);
  }
  return UnitaryMatrix::trusted(std::move(u));
}

Trajectory propagate(const UnitaryMatrix& u0, const HamiltonianPair& pair,
                     const SampledField& field, const TimeGrid& grid) {
  Trajectory traj{grid, {}};
  traj.states.reserve(static_cast<size_t>(grid.n_steps() + 1));
  traj.states.push_back(u0);
  propagate_final(u0, pair, field, grid, [&](Index, const ComplexMatrix&, const ComplexMatrix& next) {
    traj.states.push_back(UnitaryMatrix::trusted(next));
  });
  return traj;
}

TangentResult propagate_tangent(const UnitaryMatrix& u0, const HamiltonianPair& pair,
                                const HamiltonianPair& direction, const SampledField& field,
                                const TimeGrid& grid) {
  check_pair(pair, u0.dim());
  check_pair(direction, u0.dim());
  check_field(field, grid);
  const Index dim = u0.dim();
  CayleyStepper stepper(pair, grid.dt());
  ComplexMatrix u = u0.matrix();
  ComplexMatrix du = ComplexMatrix::Zero(dim, dim);
  ComplexMatrix next(dim, dim);
  const Complex i_half_dt(0.0, 0.5 * grid.dt());
  for (Index n = 0; n < grid.n_steps(); ++n) {
    stepper.factor(field[n]);
    stepper.apply(u, next);
    const ComplexMatrix dl =
        i_half_dt * (direction.H0.dense() + field[n] * direction.H1.dense()).cast<Complex>();
    const ComplexMatrix rhs = du - stepper.l_times(du) - dl * (next + u);
    du = stepper.lu().solve(rhs);
    u.swap(next);
  }
  return {std::move(u), std::move(du)};
}

CnOrderResult cn_error_order(const HamiltonianPair& pair, double constant_field, double t_f,
                             Index n_steps) {
  const Index dim = pair.dim();
  const RealMatrix h = pair.H0.dense() + constant_field * pair.H1.dense();
  const UnitaryMatrix exact = unitary_exp(Complex(0.0, -t_f) * h.cast<Complex>());
  auto error_at = [&](Index steps) {
    const TimeGrid grid(t_f, steps);
    const SampledField field(std::vector<double>(static_cast<size_t>(steps), constant_field));
    const UnitaryMatrix u = propagate_final(UnitaryMatrix::identity(dim), pair, field, grid);
    return spec_norm(ComplexMatrix(u.matrix() - exact.matrix()));
  };
  CnOrderResult out;
  out.err_coarse = error_at(n_steps);
  out.err_fine = error_at(2 * n_steps);
  if (out.err_fine == 0.0) {
    out.degenerate = true;
    out.ratio = std::numeric_limits<double>::quiet_NaN();
  } else {
    out.ratio = out.err_coarse / out.err_fine;
  }
  return out;
}

void to_json(nlohmann::json& j, const ControlField& field) {
  std::visit(Overloaded{
                 [&](const SinSqEnvelope& f) { j = {{"kind", "sin_sq"}, {"E0", f.E0}, {"skew", f.skew}}; },
                 [&](const PiPulse& f) {
                   j = {{"kind", "pi_pulse"},
                        {"amplitude", f.amplitude},
                        {"envelope_freq_mult", f.envelope_freq_mult},
                        {"carrier", f.carrier}};
                 },
                 [&](const Tabulated& f) { j = {{"kind", "tabulated"}, {"samples", f.samples}}; },
             },
             field);
}

ControlField control_field_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "sin_sq") return SinSqEnvelope{j.at("E0").get<double>(), j.value("skew", 0.0)};
  if (kind == "pi_pulse") {
    return PiPulse{j.at("amplitude").get<double>(), j.value("envelope_freq_mult", 4.0),
                   j.at("carrier").get<double>()};
  }
  if (kind == "tabulated") return Tabulated{j.at("samples").get<std::vector<double>>()};
  throw ConfigError("unknown field kind '" + kind + "'");
}

}  // namespace hamid
