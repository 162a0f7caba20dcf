#pragma once

// Shared helpers for the test binaries: seeded random matrices and an
// independent Taylor/scaling-squaring exponential used as an oracle.

#include <random>

#include "hamid/hermitian.hpp"
#include "hamid/propagator.hpp"

namespace hamid::testing {

inline RealMatrix random_symmetric(Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  RealMatrix m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) m(i, j) = m(j, i) = u(rng);
  return m;
}

inline RealMatrix random_symmetric_zero_diag(Index n, std::mt19937_64& rng, double scale = 1.0) {
  RealMatrix m = random_symmetric(n, rng, scale);
  m.diagonal().setZero();
  return m;
}

inline HamiltonianPair random_pair(Index n, std::mt19937_64& rng, double scale = 1.0) {
  return {RealSymMatrix::from_dense(random_symmetric(n, rng, scale)),
          RealSymZeroDiagMatrix::from_dense(random_symmetric_zero_diag(n, rng, scale))};
}

/// Haar-ish unitary: Q of a complex Gaussian matrix, column phases fixed.
inline ComplexMatrix random_unitary(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  ComplexMatrix z(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) z(i, j) = Complex(g(rng), g(rng));
  Eigen::HouseholderQR<ComplexMatrix> qr(z);
  ComplexMatrix q = qr.householderQ();
  const ComplexMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j) q.col(j) *= std::polar(1.0, std::arg(r(j, j)));
  return q;
}

/// exp(M) by scaling and squaring with a long Taylor series. Deliberately a
/// different algorithm from the library's eigen-decomposition path.
inline ComplexMatrix taylor_exp(const ComplexMatrix& m) {
  const double norm = m.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  while (norm / std::ldexp(1.0, squarings) > 0.25) ++squarings;
  const ComplexMatrix a = m / std::ldexp(1.0, squarings);
  ComplexMatrix term = ComplexMatrix::Identity(m.rows(), m.cols());
  ComplexMatrix sum = term;
  for (int k = 1; k < 30; ++k) {
    term = (term * a / static_cast<double>(k)).eval();
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = (sum * sum).eval();
  return sum;
}

inline double max_abs(const ComplexMatrix& m) { return m.cwiseAbs().maxCoeff(); }
inline double max_abs(const RealMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace hamid::testing
