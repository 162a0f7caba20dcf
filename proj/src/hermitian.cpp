#include "hamid/hermitian.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "hamid/errors.hpp"

namespace hamid {
namespace {

// Eigenphases closer than this to -pi are reported as +pi.
constexpr double kBranchSnap = 1e-10;

void require_square(Index rows, Index cols, const char* what) {
  if (rows != cols) {
    throw DimensionError(std::string(what) + ": expected a square matrix, got " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
}

double scale_of(const RealMatrix& m) {
  return std::max(1.0, m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff());
}

double principal_phase(Complex z) {
  double theta = std::arg(z);
  if (theta < -std::numbers::pi + kBranchSnap) theta += 2.0 * std::numbers::pi;
  return theta;
}

}  // namespace

// --- structured real matrices ---------------------------------------------

RealSymMatrix::RealSymMatrix(Index dim) : m_(RealMatrix::Zero(dim, dim)) {}

RealSymMatrix RealSymMatrix::from_dense(const RealMatrix& m, double tol) {
  require_square(m.rows(), m.cols(), "RealSymMatrix");
  const double defect = m.size() == 0 ? 0.0 : (m - m.transpose()).cwiseAbs().maxCoeff();
  if (defect > tol * scale_of(m)) {
    throw ContractViolation("RealSymMatrix: asymmetry " + std::to_string(defect));
  }
  RealSymMatrix out;
  out.m_ = m.triangularView<Eigen::Upper>();
  out.m_.triangularView<Eigen::StrictlyLower>() = m.transpose().triangularView<Eigen::StrictlyLower>();
  return out;
}

RealSymMatrix operator+(const RealSymMatrix& a, const RealSymMatrix& b) {
  if (a.dim() != b.dim()) throw DimensionError("RealSymMatrix +: dimension mismatch");
  RealSymMatrix out;
  out.m_ = a.m_ + b.m_;
  return out;
}

RealSymMatrix operator-(const RealSymMatrix& a, const RealSymMatrix& b) {
  if (a.dim() != b.dim()) throw DimensionError("RealSymMatrix -: dimension mismatch");
  RealSymMatrix out;
  out.m_ = a.m_ - b.m_;
  return out;
}

RealSymMatrix operator*(double s, const RealSymMatrix& a) {
  RealSymMatrix out;
  out.m_ = s * a.m_;
  return out;
}

RealSymZeroDiagMatrix::RealSymZeroDiagMatrix(Index dim) : m_(RealMatrix::Zero(dim, dim)) {}

RealSymZeroDiagMatrix RealSymZeroDiagMatrix::from_dense(const RealMatrix& m, double tol) {
  const RealSymMatrix sym = RealSymMatrix::from_dense(m, tol);
  const double diag = m.rows() == 0 ? 0.0 : m.diagonal().cwiseAbs().maxCoeff();
  if (diag > tol * scale_of(m)) {
    throw ContractViolation("RealSymZeroDiagMatrix: nonzero diagonal " + std::to_string(diag));
  }
  RealSymZeroDiagMatrix out;
  out.m_ = sym.dense();
  out.m_.diagonal().setZero();
  return out;
}

RealSymZeroDiagMatrix operator+(const RealSymZeroDiagMatrix& a, const RealSymZeroDiagMatrix& b) {
  if (a.dim() != b.dim()) throw DimensionError("RealSymZeroDiagMatrix +: dimension mismatch");
  RealSymZeroDiagMatrix out;
  out.m_ = a.m_ + b.m_;
  return out;
}

RealSymZeroDiagMatrix operator-(const RealSymZeroDiagMatrix& a, const RealSymZeroDiagMatrix& b) {
  if (a.dim() != b.dim()) throw DimensionError("RealSymZeroDiagMatrix -: dimension mismatch");
  RealSymZeroDiagMatrix out;
  out.m_ = a.m_ - b.m_;
  return out;
}

RealSymZeroDiagMatrix operator*(double s, const RealSymZeroDiagMatrix& a) {
  RealSymZeroDiagMatrix out;
  out.m_ = s * a.m_;
  return out;
}

RealAntiSymMatrix::RealAntiSymMatrix(Index dim) : m_(RealMatrix::Zero(dim, dim)) {}

RealAntiSymMatrix RealAntiSymMatrix::from_dense(const RealMatrix& m, double tol) {
  require_square(m.rows(), m.cols(), "RealAntiSymMatrix");
  const double defect = m.size() == 0 ? 0.0 : (m + m.transpose()).cwiseAbs().maxCoeff();
  if (defect > tol * scale_of(m)) {
    throw ContractViolation("RealAntiSymMatrix: antisymmetry defect " + std::to_string(defect));
  }
  RealAntiSymMatrix out;
  out.m_ = m.triangularView<Eigen::StrictlyUpper>();
  out.m_.triangularView<Eigen::StrictlyLower>() =
      -m.transpose().triangularView<Eigen::StrictlyLower>().toDenseMatrix();
  return out;
}

// --- unitary wrapper --------------------------------------------------------

UnitaryMatrix::UnitaryMatrix(ComplexMatrix m, double tol) : m_(std::move(m)) {
  require_square(m_.rows(), m_.cols(), "UnitaryMatrix");
  const double defect = unitarity_defect(m_);
  if (!(defect <= tol)) {
    throw ContractViolation("UnitaryMatrix: ||U^dagger U - I|| = " + std::to_string(defect));
  }
}

UnitaryMatrix UnitaryMatrix::identity(Index dim) {
  return UnitaryMatrix(ComplexMatrix::Identity(dim, dim), TrustedTag{});
}

UnitaryMatrix UnitaryMatrix::trusted(ComplexMatrix m) {
  require_square(m.rows(), m.cols(), "UnitaryMatrix");
  return UnitaryMatrix(std::move(m), TrustedTag{});
}

// --- norms ------------------------------------------------------------------

bool is_hermitian(const ComplexMatrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  if (m.size() == 0) return true;
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

double spec_norm(const ComplexMatrix& m) {
  require_square(m.rows(), m.cols(), "spec_norm");
  if (m.size() == 0) return 0.0;
  if (is_hermitian(m, 0.0)) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("spec_norm: eigensolver failed");
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  return svd.singularValues()(0);
}

double spec_norm(const RealMatrix& m) {
  require_square(m.rows(), m.cols(), "spec_norm");
  if (m.size() == 0) return 0.0;
  if (m == m.transpose()) {
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("spec_norm: eigensolver failed");
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  Eigen::JacobiSVD<RealMatrix> svd(m);
  return svd.singularValues()(0);
}

double unitarity_defect(const ComplexMatrix& u) {
  const Index n = u.rows();
  ComplexMatrix g = u.adjoint() * u - ComplexMatrix::Identity(n, n);
  // g is Hermitian up to round-off; symmetrize so the eigen path applies.
  g = 0.5 * (g + g.adjoint()).eval();
  return spec_norm(g);
}

// --- exp / log --------------------------------------------------------------

ComplexMatrix nearest_unitary(const ComplexMatrix& m) {
  Eigen::JacobiSVD<ComplexMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

ComplexMatrix unitary_log(const UnitaryMatrix& u) {
  const Index n = u.dim();
  // Long propagations drift off the unitary group by ~1e-10; the Schur
  // diagonal of the polar factor then lies exactly on the unit circle.
  Eigen::ComplexSchur<ComplexMatrix> schur(nearest_unitary(u.matrix()));
  if (schur.info() != Eigen::Success) throw NumericalError("unitary_log: Schur decomposition failed");
  const ComplexMatrix& q = schur.matrixU();
  const ComplexMatrix& t = schur.matrixT();
  Eigen::VectorXcd log_eig(n);
  for (Index k = 0; k < n; ++k) log_eig(k) = Complex(0.0, principal_phase(t(k, k)));
  ComplexMatrix m = q * log_eig.asDiagonal() * q.adjoint();
  // Exact anti-Hermitian form.
  return 0.5 * (m - m.adjoint());
}

Eigen::VectorXd unitary_phases(const UnitaryMatrix& u) {
  Eigen::ComplexSchur<ComplexMatrix> schur(u.matrix(), false);
  if (schur.info() != Eigen::Success) throw NumericalError("unitary_phases: Schur decomposition failed");
  const ComplexMatrix& t = schur.matrixT();
  Eigen::VectorXd phases(u.dim());
  for (Index k = 0; k < u.dim(); ++k) phases(k) = principal_phase(t(k, k));
  std::sort(phases.data(), phases.data() + phases.size());
  return phases;
}

TargetDecomposition split_log(const ComplexMatrix& m, double tol) {
  require_square(m.rows(), m.cols(), "split_log");
  const RealMatrix a = m.real();
  const RealMatrix s = m.imag();
  const double a_defect = m.size() == 0 ? 0.0 : (a + a.transpose()).cwiseAbs().maxCoeff();
  const double s_defect = m.size() == 0 ? 0.0 : (s - s.transpose()).cwiseAbs().maxCoeff();
  if (a_defect > tol || s_defect > tol) {
    throw ContractViolation("split_log: input is not anti-Hermitian (defects " +
                            std::to_string(a_defect) + ", " + std::to_string(s_defect) + ")");
  }
  return {RealSymMatrix::from_dense(0.5 * (s + s.transpose()), 0.0),
          RealAntiSymMatrix::from_dense(0.5 * (a - a.transpose()), 0.0)};
}

UnitaryMatrix unitary_exp(const ComplexMatrix& m) {
  require_square(m.rows(), m.cols(), "unitary_exp");
  const Index n = m.rows();
  if (n == 0) return UnitaryMatrix::identity(0);
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m + m.adjoint()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw ContractViolation("unitary_exp: input is not anti-Hermitian");
  }
  ComplexMatrix h = Complex(0.0, -1.0) * m;
  h = 0.5 * (h + h.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
  if (es.info() != Eigen::Success) throw NumericalError("unitary_exp: eigensolver failed");
  Eigen::VectorXcd phase(n);
  for (Index k = 0; k < n; ++k) phase(k) = std::polar(1.0, es.eigenvalues()(k));
  return UnitaryMatrix::trusted(es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint());
}

ComplexMatrix recombine(const TargetDecomposition& dec) {
  ComplexMatrix m(dec.S.dim(), dec.S.dim());
  m.real() = dec.A.dense();
  m.imag() = dec.S.dense();
  return m;
}

TargetDecomposition decompose_target(const UnitaryMatrix& u, double decomp_tol) {
  TargetDecomposition dec = split_log(unitary_log(u));
  const double err = spec_norm(ComplexMatrix(unitary_exp(recombine(dec)).matrix() - u.matrix()));
  // The log is taken of the polar factor, so its distance to u is allowed on top.
  const double drift = spec_norm(ComplexMatrix(nearest_unitary(u.matrix()) - u.matrix()));
  if (!(err <= decomp_tol + drift)) {
    throw NumericalError("decompose_target: exp(iS + A) misses the target by " + std::to_string(err));
  }
  return dec;
}

// --- JSON -------------------------------------------------------------------

namespace {

template <typename Fn>
nlohmann::json rows_to_json(Index n, Fn entry) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < n; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < n; ++j) row.push_back(entry(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

RealMatrix rows_from_json(const nlohmann::json& rows, Index n, const char* key) {
  if (!rows.is_array() || static_cast<Index>(rows.size()) != n) {
    throw DimensionError(std::string("matrix JSON: '") + key + "' must have dim rows");
  }
  RealMatrix m(n, n);
  for (Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != n) {
      throw DimensionError(std::string("matrix JSON: row of '") + key + "' must have dim entries");
    }
    for (Index j = 0; j < n; ++j) m(i, j) = row[static_cast<size_t>(j)].get<double>();
  }
  return m;
}

}  // namespace

nlohmann::json matrix_to_json(const RealMatrix& m) {
  require_square(m.rows(), m.cols(), "matrix_to_json");
  return {{"dim", m.rows()}, {"re", rows_to_json(m.rows(), [&](Index i, Index j) { return m(i, j); })}};
}

nlohmann::json matrix_to_json(const ComplexMatrix& m) {
  require_square(m.rows(), m.cols(), "matrix_to_json");
  return {{"dim", m.rows()},
          {"re", rows_to_json(m.rows(), [&](Index i, Index j) { return m(i, j).real(); })},
          {"im", rows_to_json(m.rows(), [&](Index i, Index j) { return m(i, j).imag(); })}};
}

RealMatrix real_matrix_from_json(const nlohmann::json& j) {
  const Index n = j.at("dim").get<Index>();
  if (n <= 0) throw DimensionError("matrix JSON: dim must be positive");
  if (j.contains("im")) {
    const RealMatrix im = rows_from_json(j.at("im"), n, "im");
    if (im.cwiseAbs().maxCoeff() != 0.0) throw ContractViolation("matrix JSON: expected a real matrix");
  }
  return rows_from_json(j.at("re"), n, "re");
}

ComplexMatrix complex_matrix_from_json(const nlohmann::json& j) {
  const Index n = j.at("dim").get<Index>();
  if (n <= 0) throw DimensionError("matrix JSON: dim must be positive");
  ComplexMatrix m(n, n);
  m.real() = rows_from_json(j.at("re"), n, "re");
  m.imag() = j.contains("im") ? rows_from_json(j.at("im"), n, "im") : RealMatrix::Zero(n, n);
  return m;
}

}  // namespace hamid
