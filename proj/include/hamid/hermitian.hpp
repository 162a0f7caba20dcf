#pragma once

// Dense complex-matrix substrate: structured real matrices, unitary wrapper,
// spectral norm, and exp/log of unitaries.

#include <complex>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace hamid {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kDefaultUnitarityTol = 1e-10;
inline constexpr double kDefaultDecompTol = 1e-10;

/// Real symmetric matrix. Exactly symmetric: the lower triangle is always a
/// copy of the upper one.
class RealSymMatrix {
 public:
  RealSymMatrix() = default;
  explicit RealSymMatrix(Index dim);

  /// Accepts `m` if its asymmetry is at most `tol` (relative to max(1, |m|)),
  /// then mirrors the upper triangle.
  static RealSymMatrix from_dense(const RealMatrix& m, double tol = 1e-12);

  Index dim() const { return m_.rows(); }
  const RealMatrix& dense() const { return m_; }
  double operator()(Index i, Index j) const { return m_(i, j); }
  ComplexMatrix to_complex() const { return m_.cast<Complex>(); }

  friend RealSymMatrix operator+(const RealSymMatrix& a, const RealSymMatrix& b);
  friend RealSymMatrix operator-(const RealSymMatrix& a, const RealSymMatrix& b);
  friend RealSymMatrix operator*(double s, const RealSymMatrix& a);

 private:
  RealMatrix m_;
};

/// Real symmetric matrix with an exactly zero diagonal.
class RealSymZeroDiagMatrix {
 public:
  RealSymZeroDiagMatrix() = default;
  explicit RealSymZeroDiagMatrix(Index dim);

  static RealSymZeroDiagMatrix from_dense(const RealMatrix& m, double tol = 1e-12);

  Index dim() const { return m_.rows(); }
  const RealMatrix& dense() const { return m_; }
  double operator()(Index i, Index j) const { return m_(i, j); }
  ComplexMatrix to_complex() const { return m_.cast<Complex>(); }

  friend RealSymZeroDiagMatrix operator+(const RealSymZeroDiagMatrix& a,
                                         const RealSymZeroDiagMatrix& b);
  friend RealSymZeroDiagMatrix operator-(const RealSymZeroDiagMatrix& a,
                                         const RealSymZeroDiagMatrix& b);
  friend RealSymZeroDiagMatrix operator*(double s, const RealSymZeroDiagMatrix& a);

 private:
  RealMatrix m_;
};

/// Real antisymmetric matrix (zero diagonal, lower = -upper exactly).
class RealAntiSymMatrix {
 public:
  RealAntiSymMatrix() = default;
  explicit RealAntiSymMatrix(Index dim);

  static RealAntiSymMatrix from_dense(const RealMatrix& m, double tol = 1e-12);

  Index dim() const { return m_.rows(); }
  const RealMatrix& dense() const { return m_; }
  double operator()(Index i, Index j) const { return m_(i, j); }

 private:
  RealMatrix m_;
};

/// Complex matrix checked unitary (||U^dagger U - I|| <= tol) at construction.
class UnitaryMatrix {
 public:
  UnitaryMatrix() = default;
  explicit UnitaryMatrix(ComplexMatrix m, double tol = kDefaultUnitarityTol);

  static UnitaryMatrix identity(Index dim);

  /// Skips the unitarity check. For producers whose output is unitary by
  /// construction (Cayley steps, exponentials of anti-Hermitian matrices).
  static UnitaryMatrix trusted(ComplexMatrix m);

  Index dim() const { return m_.rows(); }
  const ComplexMatrix& matrix() const { return m_; }
  Complex operator()(Index i, Index j) const { return m_(i, j); }

 private:
  struct TrustedTag {};
  UnitaryMatrix(ComplexMatrix m, TrustedTag) : m_(std::move(m)) {}

  ComplexMatrix m_;
};

/// U_tar = exp(iS + A) with S real symmetric, A real antisymmetric.
struct TargetDecomposition {
  RealSymMatrix S;
  RealAntiSymMatrix A;
};

/// Spectral norm. Largest |eigenvalue| for Hermitian input (fast path),
/// largest singular value otherwise; the two agree on normal matrices.
double spec_norm(const ComplexMatrix& m);
double spec_norm(const RealMatrix& m);

/// ||U^dagger U - I||.
double unitarity_defect(const ComplexMatrix& u);

bool is_hermitian(const ComplexMatrix& m, double tol);

/// W V^dagger from the SVD W Sigma V^dagger: the closest unitary in any
/// unitarily invariant norm.
ComplexMatrix nearest_unitary(const ComplexMatrix& m);

/// Principal logarithm of a unitary (of its polar factor, when u carries
/// round-off drift). Phases lie in (-pi, pi]; an eigenvalue at -1 is
/// assigned +pi. The result is anti-Hermitian to round-off because the
/// eigenbasis comes from a complex Schur form.
ComplexMatrix unitary_log(const UnitaryMatrix& u);

/// Eigenphases of a unitary, principal branch, ascending.
Eigen::VectorXd unitary_phases(const UnitaryMatrix& u);

/// Splits anti-Hermitian M = A + iS into its real antisymmetric part A and
/// real symmetric part S.
TargetDecomposition split_log(const ComplexMatrix& m, double tol = 1e-10);

/// exp(M) for anti-Hermitian M via the Hermitian eigenproblem of -iM.
UnitaryMatrix unitary_exp(const ComplexMatrix& m);

/// iS + A.
ComplexMatrix recombine(const TargetDecomposition& dec);

/// unitary_log followed by split_log, with the round trip checked to
/// decomp_tol plus the distance from u to its polar factor.
TargetDecomposition decompose_target(const UnitaryMatrix& u, double decomp_tol = kDefaultDecompTol);

// JSON: {"dim": n, "re": [[...]], "im": [[...]]}; real matrices omit "im".
nlohmann::json matrix_to_json(const RealMatrix& m);
nlohmann::json matrix_to_json(const ComplexMatrix& m);
RealMatrix real_matrix_from_json(const nlohmann::json& j);
ComplexMatrix complex_matrix_from_json(const nlohmann::json& j);

}  // namespace hamid
