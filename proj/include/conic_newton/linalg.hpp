#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>

namespace conic_newton {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// A square operator given by its matrix-vector action. The action must be
/// deterministic and dimension-preserving.
struct LinearOperator {
  Index dim = 0;
  std::function<Vector(const Vector&)> apply;

  static LinearOperator identity(Index n) {
    return {n, [](const Vector& v) { return v; }};
  }

  static LinearOperator from_matrix(Matrix m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("LinearOperator: matrix must be square");
    const Index n = m.rows();
    return {n, [mat = std::move(m)](const Vector& v) -> Vector { return mat * v; }};
  }

  /// Materializes the operator by applying it to the canonical basis.
  Matrix to_dense() const {
    Matrix out(dim, dim);
    Vector e = Vector::Zero(dim);
    for (Index j = 0; j < dim; ++j) {
      e(j) = 1.0;
      out.col(j) = apply(e);
      e(j) = 0.0;
    }
    return out;
  }
};

struct GmresOutcome {
  Vector solution;
  double residual_norm = 0.0;  // recomputed as ||b - A x||, never the recurrence value
  int iterations = 0;
  bool converged = false;
};

/// Restarted GMRES with modified Gram-Schmidt Arnoldi and Givens rotations.
/// Stops once ||b - A x|| <= rel_tol * ||b||. No preconditioning. A restart
/// of 0 selects the default min(dim, 100). On an exact Arnoldi breakdown the
/// best iterate found so far is returned with `converged` reflecting the
/// recomputed residual test.
inline GmresOutcome gmres(const LinearOperator& op, const Vector& rhs, double rel_tol,
                          int max_iters, int restart = 0) {
  if (rhs.size() != op.dim) throw std::invalid_argument("gmres: rhs dimension mismatch");
  if (!rhs.allFinite()) throw std::invalid_argument("gmres: rhs has non-finite entries");
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw std::invalid_argument("gmres: rel_tol must be in (0,1)");
  if (max_iters < 1) throw std::invalid_argument("gmres: max_iters must be positive");

  const Index n = op.dim;
  if (restart <= 0) restart = static_cast<int>(std::min<Index>(n, 100));
  restart = static_cast<int>(std::min<Index>(restart, n));

  GmresOutcome out;
  out.solution = Vector::Zero(n);
  const double bnorm = rhs.norm();
  if (bnorm == 0.0) {
    out.converged = true;
    return out;
  }
  const double target = rel_tol * bnorm;

  Matrix basis(n, restart + 1);
  Matrix hess = Matrix::Zero(restart + 1, restart);
  Vector cs(restart), sn(restart), g(restart + 1);

  bool done = false;
  while (!done && out.iterations < max_iters) {
    Vector residual = rhs - op.apply(out.solution);
    double beta = residual.norm();
    if (beta <= target) break;

    basis.col(0) = residual / beta;
    g.setZero();
    g(0) = beta;

    int cols = 0;
    bool breakdown = false;
    for (int j = 0; j < restart && out.iterations < max_iters; ++j) {
      Vector w = op.apply(basis.col(j));
      ++out.iterations;
      if (!w.allFinite()) throw std::runtime_error("gmres: operator produced non-finite output");

      for (int i = 0; i <= j; ++i) {
        hess(i, j) = basis.col(i).dot(w);
        w -= hess(i, j) * basis.col(i);
      }
      hess(j + 1, j) = w.norm();
      breakdown = hess(j + 1, j) <= 1e-14 * beta;
      if (!breakdown) basis.col(j + 1) = w / hess(j + 1, j);

      for (int i = 0; i < j; ++i) {
        const double tmp = cs(i) * hess(i, j) + sn(i) * hess(i + 1, j);
        hess(i + 1, j) = -sn(i) * hess(i, j) + cs(i) * hess(i + 1, j);
        hess(i, j) = tmp;
      }
      const double denom = std::hypot(hess(j, j), hess(j + 1, j));
      cs(j) = denom == 0.0 ? 1.0 : hess(j, j) / denom;
      sn(j) = denom == 0.0 ? 0.0 : hess(j + 1, j) / denom;
      hess(j, j) = denom;
      hess(j + 1, j) = 0.0;
      g(j + 1) = -sn(j) * g(j);
      g(j) = cs(j) * g(j);

      cols = j + 1;
      if (breakdown || std::abs(g(j + 1)) <= target) {
        done = true;
        break;
      }
    }

    if (cols > 0) {
      Vector y = hess.topLeftCorner(cols, cols)
                     .triangularView<Eigen::Upper>()
                     .solve(g.head(cols));
      out.solution += basis.leftCols(cols) * y;
    }
    if (breakdown) done = true;
  }

  out.residual_norm = (rhs - op.apply(out.solution)).norm();
  out.converged = out.residual_norm <= target;
  return out;
}

/// LU factorization with partial pivoting of a square nonsingular matrix,
/// computed once and reused across solves.
class DenseFactorization {
 public:
  explicit DenseFactorization(const Matrix& m) : lu_(m), dim_(m.rows()) {
    if (m.rows() != m.cols()) throw std::invalid_argument("dense_factorize: matrix must be square");
    if (!m.allFinite()) throw std::invalid_argument("dense_factorize: matrix has non-finite entries");
    const double scale = m.cwiseAbs().maxCoeff();
    const double tol = 1e-14 * std::max(1.0, scale);
    for (Index i = 0; i < dim_; ++i) {
      if (std::abs(lu_.matrixLU()(i, i)) <= tol) {
        throw std::runtime_error("dense_factorize: singular matrix, zero pivot at index " +
                                 std::to_string(i));
      }
    }
  }

  Vector solve(const Vector& rhs) const {
    if (rhs.size() != dim_) throw std::invalid_argument("factor_solve: rhs dimension mismatch");
    return lu_.solve(rhs);
  }

  Index dim() const { return dim_; }

 private:
  Eigen::PartialPivLU<Matrix> lu_;
  Index dim_;
};

inline DenseFactorization dense_factorize(const Matrix& m) { return DenseFactorization(m); }

inline Vector factor_solve(const DenseFactorization& f, const Vector& rhs) { return f.solve(rhs); }

struct SymEig {
  Vector eigenvalues;   // descending
  Matrix eigenvectors;  // columns match eigenvalue order
};

/// Symmetric eigendecomposition. The input is symmetrized as (Z + Z^T)/2
/// before factorizing; eigenvalues are returned in descending order.
inline SymEig sym_eig(const Matrix& z) {
  if (z.rows() != z.cols()) throw std::invalid_argument("sym_eig: matrix must be square");
  if (!z.allFinite()) throw std::invalid_argument("sym_eig: matrix has non-finite entries");
  const Matrix sym = 0.5 * (z + z.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) throw std::runtime_error("sym_eig: eigensolver failed");
  SymEig out;
  out.eigenvalues = solver.eigenvalues().reverse();
  out.eigenvectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

}  // namespace conic_newton
