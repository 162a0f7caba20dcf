#include "hamid/newton.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "hamid/errors.hpp"

namespace hamid {

void NewtonConfig::validate() const {
  if (!(tol > 0.0)) throw ConfigError("newton.tol must be positive");
  if (max_iters <= 0) throw ConfigError("newton.max_iters must be positive");
  if (!(singular_cond_threshold > 0.0)) throw ConfigError("newton.singular_cond_threshold must be positive");
}

std::string to_string(NewtonStatus status) {
  switch (status) {
    case NewtonStatus::Converged: return "Converged";
    case NewtonStatus::MaxIters: return "MaxIters";
    case NewtonStatus::SingularJacobian: return "SingularJacobian";
  }
  return "unknown";
}

// --- Jacobian accumulation -------------------------------------------------

JacobianAccumulator::JacobianAccumulator(Index dim, double dt, Index block_size)
    : dim_(dim), dt_(dt), block_size_(block_size) {
  const Index n2 = dim * dim;
  block_.resize(n2, block_size);
  weights_.resize(block_size);
  gram0_ = ComplexMatrix::Zero(n2, n2);
  gram1_pos_ = ComplexMatrix::Zero(n2, n2);
  gram1_neg_ = ComplexMatrix::Zero(n2, n2);
}

void JacobianAccumulator::add(const ComplexMatrix& u_n, const ComplexMatrix& u_next, double e_n) {
  const Index n2 = dim_ * dim_;
  auto col = block_.col(pending_);
  const Complex* a = u_n.data();
  const Complex* b = u_next.data();
  for (Index p = 0; p < n2; ++p) col(p) = std::conj(0.5 * (a[p] + b[p]));
  weights_(pending_) = e_n;
  if (++pending_ == block_size_) flush();
}

void JacobianAccumulator::flush() {
  if (pending_ == 0) return;
  const auto q = block_.leftCols(pending_);
  gram0_.selfadjointView<Eigen::Lower>().rankUpdate(q);

  Index n_pos = 0;
  Index n_neg = 0;
  for (Index c = 0; c < pending_; ++c) {
    if (weights_(c) > 0.0) ++n_pos;
    else if (weights_(c) < 0.0) ++n_neg;
  }
  ComplexMatrix pos(q.rows(), n_pos);
  ComplexMatrix neg(q.rows(), n_neg);
  Index ip = 0;
  Index in = 0;
  for (Index c = 0; c < pending_; ++c) {
    const double w = weights_(c);
    if (w > 0.0) pos.col(ip++) = std::sqrt(w) * q.col(c);
    else if (w < 0.0) neg.col(in++) = std::sqrt(-w) * q.col(c);
  }
  if (n_pos > 0) gram1_pos_.selfadjointView<Eigen::Lower>().rankUpdate(pos);
  if (n_neg > 0) gram1_neg_.selfadjointView<Eigen::Lower>().rankUpdate(neg);
  pending_ = 0;
}

Jacobian JacobianAccumulator::finish() {
  flush();
  const Index n = dim_;
  const Index n2 = n * n;
  const ComplexMatrix g0 = gram0_.selfadjointView<Eigen::Lower>();
  const ComplexMatrix g1 = ComplexMatrix(gram1_pos_.selfadjointView<Eigen::Lower>()) -
                           ComplexMatrix(gram1_neg_.selfadjointView<Eigen::Lower>());
  // gram[i + a n, j + b n] = sum conj(Ubar[i,a]) Ubar[j,b]
  //                        = coefficient of X[i,j] in (Ubar^dagger X Ubar)[a,b].
  Jacobian jac{ComplexMatrix(n2, n2), ComplexMatrix(n2, n2)};
  for (Index b = 0; b < n; ++b) {
    for (Index a = 0; a < n; ++a) {
      const Index row = a + b * n;
      for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < n; ++i) {
          jac.J0(row, i + j * n) = dt_ * g0(i + a * n, j + b * n);
          jac.J1(row, i + j * n) = dt_ * g1(i + a * n, j + b * n);
        }
      }
    }
  }
  return jac;
}

// --- residual, assembly, reduction -----------------------------------------

ComplexMatrix hermitian_residual(const UnitaryMatrix& u_final, const UnitaryMatrix& u_tar) {
  if (u_final.dim() != u_tar.dim()) throw DimensionError("hermitian_residual: dimension mismatch");
  const ComplexMatrix w = u_final.matrix().adjoint() * u_tar.matrix();
  return Complex(0.0, 0.5) * (w - w.adjoint());
}

Jacobian assemble_jacobian(const Trajectory& traj, const SampledField& field) {
  const Index steps = traj.grid.n_steps();
  if (static_cast<Index>(traj.states.size()) != steps + 1) {
    throw DimensionError("assemble_jacobian: trajectory is incomplete");
  }
  if (field.size() != steps) throw DimensionError("assemble_jacobian: field length mismatch");
  JacobianAccumulator acc(traj.states.front().dim(), traj.grid.dt());
  for (Index n = 0; n < steps; ++n) {
    acc.add(traj.states[static_cast<size_t>(n)].matrix(),
            traj.states[static_cast<size_t>(n + 1)].matrix(), field[n]);
  }
  return acc.finish();
}

ReducedSystem reduce_system(const Jacobian& jac, const ComplexMatrix& residual) {
  const Index n = residual.rows();
  const Index n2 = n * n;
  if (residual.cols() != n || jac.J0.rows() != n2 || jac.J0.cols() != n2 ||
      jac.J1.rows() != n2 || jac.J1.cols() != n2) {
    throw DimensionError("reduce_system: inconsistent dimensions");
  }

  ReducedSystem sys;
  sys.dim = n;
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) sys.unknowns.push_back({Operator::H0, i, j});
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) sys.unknowns.push_back({Operator::H1, i, j});

  // Merged complex column per unknown.
  ComplexMatrix columns(n2, n2);
  for (size_t c = 0; c < sys.unknowns.size(); ++c) {
    const auto& u = sys.unknowns[c];
    const ComplexMatrix& j = u.op == Operator::H0 ? jac.J0 : jac.J1;
    columns.col(static_cast<Index>(c)) = j.col(u.i + u.j * n);
    if (u.i != u.j) columns.col(static_cast<Index>(c)) += j.col(u.j + u.i * n);
  }

  sys.matrix.resize(n2, n2);
  sys.rhs.resize(n2);
  Index row = 0;
  for (Index a = 0; a < n; ++a) {
    for (Index b = a; b < n; ++b) {
      const Index eq = a + b * n;
      sys.matrix.row(row) = columns.row(eq).real();
      sys.rhs(row) = residual(a, b).real();
      ++row;
      if (a < b) {
        sys.matrix.row(row) = columns.row(eq).imag();
        sys.rhs(row) = residual(a, b).imag();
        ++row;
      }
    }
  }
  return sys;
}

NewtonUpdate solve_update(const ReducedSystem& sys, const NewtonConfig& cfg) {
  const Index n = sys.dim;
  const Index n2 = n * n;
  if (sys.matrix.rows() != n2 || sys.matrix.cols() != n2 || sys.rhs.size() != n2 ||
      static_cast<Index>(sys.unknowns.size()) != n2) {
    throw DimensionError("solve_update: system is not square of size dim^2");
  }
  // Exact 1-norm condition from the explicit inverse. Eigen's rcond()
  // estimator reports 1 for some exactly singular matrices; the system is
  // small enough (at most a few hundred unknowns) that the inverse is cheap.
  Eigen::PartialPivLU<RealMatrix> lu(sys.matrix);
  const RealMatrix inv = lu.inverse();
  double cond = sys.matrix.cwiseAbs().colwise().sum().maxCoeff() * inv.cwiseAbs().colwise().sum().maxCoeff();
  if (!std::isfinite(cond)) cond = std::numeric_limits<double>::infinity();
  if (!(cond <= cfg.singular_cond_threshold)) throw SingularJacobianError(cond);
  const Eigen::VectorXd x = lu.solve(sys.rhs);

  RealMatrix d0 = RealMatrix::Zero(n, n);
  RealMatrix d1 = RealMatrix::Zero(n, n);
  for (size_t c = 0; c < sys.unknowns.size(); ++c) {
    const auto& u = sys.unknowns[c];
    RealMatrix& d = u.op == Operator::H0 ? d0 : d1;
    d(u.i, u.j) = x(static_cast<Index>(c));
    d(u.j, u.i) = x(static_cast<Index>(c));
  }
  return {RealSymMatrix::from_dense(d0, 0.0), RealSymZeroDiagMatrix::from_dense(d1, 0.0), cond};
}

Eigen::VectorXd pack_update(const HamiltonianPair& update, const std::vector<UnknownSlot>& unknowns) {
  Eigen::VectorXd x(static_cast<Index>(unknowns.size()));
  for (size_t c = 0; c < unknowns.size(); ++c) {
    const auto& u = unknowns[c];
    x(static_cast<Index>(c)) = u.op == Operator::H0 ? update.H0(u.i, u.j) : update.H1(u.i, u.j);
  }
  return x;
}

// --- Newton loop ------------------------------------------------------------

namespace {

double residual_skew(const UnitaryMatrix& u_final, const UnitaryMatrix& u_tar) {
  const Index n = u_final.dim();
  const ComplexMatrix k =
      Complex(0.0, 1.0) * (u_final.matrix().adjoint() * u_tar.matrix() - ComplexMatrix::Identity(n, n));
  return spec_norm(ComplexMatrix(0.5 * (k - k.adjoint())));
}

}  // namespace

NewtonResult newton_identify(const UnitaryMatrix& u0, const UnitaryMatrix& u_tar,
                             const HamiltonianPair& guess, const SampledField& field,
                             const TimeGrid& grid, const NewtonConfig& cfg,
                             const std::optional<HamiltonianPair>& truth) {
  cfg.validate();
  const Index dim = u0.dim();
  if (u_tar.dim() != dim || guess.dim() != dim || (truth && truth->dim() != dim)) {
    throw DimensionError("newton_identify: inconsistent dimensions");
  }
  if (field.size() != grid.n_steps()) throw DimensionError("newton_identify: field length mismatch");

  NewtonResult result{guess, {}};
  NewtonReport& report = result.report;
  double e_k = std::numeric_limits<double>::infinity();
  double last_cond = 0.0;

  for (int k = 0;; ++k) {
    const bool last = k == cfg.max_iters || (cfg.stop_on_tol && e_k <= cfg.tol);
    std::optional<JacobianAccumulator> acc;
    if (!last) acc.emplace(dim, grid.dt());
    StepObserver observer;
    if (acc) {
      observer = [&](Index n, const ComplexMatrix& u_n, const ComplexMatrix& u_next) {
        acc->add(u_n, u_next, field[n]);
      };
    }
    const UnitaryMatrix u_final = propagate_final(u0, result.pair, field, grid, observer);
    report.final_dev_U = spec_norm(ComplexMatrix(u_tar.matrix() - u_final.matrix()));

    if (k > 0) {
      NewtonRecord rec;
      rec.k = k;
      rec.e_k = e_k;
      if (truth) {
        rec.dev_H0 = spec_norm(RealMatrix(truth->H0.dense() - result.pair.H0.dense()));
        rec.dev_H1 = spec_norm(RealMatrix(truth->H1.dense() - result.pair.H1.dense()));
      }
      rec.dev_U = report.final_dev_U;
      rec.jacobian_condition = last_cond;
      rec.residual_skew = residual_skew(u_final, u_tar);
      report.records.push_back(rec);
    }
    if (last) {
      report.status = e_k <= cfg.tol ? NewtonStatus::Converged : NewtonStatus::MaxIters;
      break;
    }

    const ReducedSystem sys = reduce_system(acc->finish(), hermitian_residual(u_final, u_tar));
    NewtonUpdate update;
    try {
      update = solve_update(sys, cfg);
    } catch (const SingularJacobianError& err) {
      report.status = NewtonStatus::SingularJacobian;
      report.failed_iteration = k + 1;
      report.failed_condition = err.condition_estimate();
      break;
    }
    result.pair = HamiltonianPair(result.pair.H0 + update.dH0, result.pair.H1 + update.dH1);
    e_k = spec_norm(update.dH0.dense()) + spec_norm(update.dH1.dense());
    last_cond = update.condition_estimate;
  }
  return result;
}

// --- serialization ------------------------------------------------------------

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

std::string newton_report_csv(const NewtonReport& report) {
  std::ostringstream out;
  out << "k,e_k,dev_H0,dev_H1,dev_U,cond\n";
  for (const auto& r : report.records) {
    out << r.k << ',' << format_number(r.e_k) << ','
        << (r.dev_H0 ? format_number(*r.dev_H0) : "") << ','
        << (r.dev_H1 ? format_number(*r.dev_H1) : "") << ',' << format_number(r.dev_U) << ','
        << format_number(r.jacobian_condition) << '\n';
  }
  return out.str();
}

nlohmann::json newton_report_json(const NewtonReport& report) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : report.records) {
    nlohmann::json j = {{"k", r.k},
                        {"e_k", r.e_k},
                        {"dev_U", r.dev_U},
                        {"jacobian_condition", r.jacobian_condition},
                        {"residual_skew", r.residual_skew}};
    if (r.dev_H0) j["dev_H0"] = *r.dev_H0;
    if (r.dev_H1) j["dev_H1"] = *r.dev_H1;
    records.push_back(std::move(j));
  }
  nlohmann::json out = {{"status", to_string(report.status)},
                        {"iterations", report.iterations()},
                        {"final_dev_U", report.final_dev_U},
                        {"records", std::move(records)}};
  if (report.status == NewtonStatus::SingularJacobian) {
    out["failed_iteration"] = report.failed_iteration;
    out["failed_condition"] = report.failed_condition;
  }
  return out;
}

}  // namespace hamid
