#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "semieff/errors.hpp"

namespace semieff::numerics {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline bool is_symmetric(const Matrix& a, double rel_tol = 1e-12) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

inline double min_eigenvalue(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

/// Symmetric to 1e-12 relative and strictly positive definite.
inline bool is_spd(const Matrix& a) {
  if (!is_symmetric(a)) return false;
  Eigen::LLT<Matrix> llt(a);
  return llt.info() == Eigen::Success && min_eigenvalue(a) > 0.0;
}

inline std::string describe(const Matrix& a) {
  std::ostringstream os;
  os << "[";
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    os << (i ? "; " : "");
    for (Eigen::Index j = 0; j < a.cols(); ++j) os << (j ? ", " : "") << a(i, j);
  }
  os << "]";
  return os.str();
}

inline Eigen::LLT<Matrix> cholesky(const Matrix& a) {
  if (a.rows() != a.cols() || !is_symmetric(a)) throw SingularMatrixError("matrix is not symmetric: " + describe(a));
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) throw SingularMatrixError("Cholesky failed, matrix not positive definite: " + describe(a));
  return llt;
}

inline Vector solve_spd(const Matrix& a, const Vector& b) {
  if (a.rows() != b.size()) throw DomainError("solve_spd: dimension mismatch");
  return cholesky(a).solve(b);
}

inline Matrix solve_spd_matrix(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw DomainError("solve_spd: dimension mismatch");
  return cholesky(a).solve(b);
}

inline Matrix inverse_spd(const Matrix& a) {
  return solve_spd_matrix(a, Matrix::Identity(a.rows(), a.cols()));
}

/// Symmetrize away round-off so downstream SPD checks see an exactly symmetric matrix.
inline Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.transpose()); }

}  // namespace semieff::numerics
