#include <catch2/catch_amalgamated.hpp>

#include "conic_newton/linalg.hpp"
#include "conic_newton/rng.hpp"

using namespace conic_newton;

namespace {

// Independent direct-solve oracle: plain Gaussian elimination with partial
// pivoting, no library calls.
Vector gaussian_elimination(Matrix a, Vector b) {
  const Index n = a.rows();
  for (Index col = 0; col < n; ++col) {
    Index pivot = col;
    for (Index row = col + 1; row < n; ++row)
      if (std::abs(a(row, col)) > std::abs(a(pivot, col))) pivot = row;
    a.row(col).swap(a.row(pivot));
    std::swap(b(col), b(pivot));
    for (Index row = col + 1; row < n; ++row) {
      const double factor = a(row, col) / a(col, col);
      a.row(row).tail(n - col) -= factor * a.row(col).tail(n - col);
      b(row) -= factor * b(col);
    }
  }
  Vector x(n);
  for (Index row = n - 1; row >= 0; --row) {
    double acc = b(row);
    for (Index col = row + 1; col < n; ++col) acc -= a(row, col) * x(col);
    x(row) = acc / a(row, row);
  }
  return x;
}

Matrix random_matrix(Rng& rng, Index n, double lo, double hi) {
  Matrix m(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) m(i, j) = rng.uniform(lo, hi);
  return m;
}

Vector random_vector(Rng& rng, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

TEST_CASE("gmres solves the identity system in one iteration") {
  Rng rng(11);
  const Vector rhs = random_vector(rng, 5);
  const auto out = gmres(LinearOperator::identity(5), rhs, 1e-10, 50);
  REQUIRE(out.converged);
  REQUIRE(out.iterations == 1);
  REQUIRE((out.solution - rhs).norm() < 1e-12);
}

TEST_CASE("gmres solves a diagonal system") {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 2.0;
  d(1, 1) = 4.0;
  Vector rhs(2);
  rhs << 2.0, 4.0;
  const auto out = gmres(LinearOperator::from_matrix(d), rhs, 1e-12, 50);
  REQUIRE(out.converged);
  REQUIRE(std::abs(out.solution(0) - 1.0) < 1e-12);
  REQUIRE(std::abs(out.solution(1) - 1.0) < 1e-12);
}

TEST_CASE("gmres matches the elimination oracle on a dense 8x8 system") {
  Rng rng(2024);
  Matrix a = random_matrix(rng, 8, -1.0, 1.0);
  a += 8.0 * Matrix::Identity(8, 8);
  const Vector rhs = random_vector(rng, 8);
  const Vector expected = gaussian_elimination(a, rhs);
  const auto out = gmres(LinearOperator::from_matrix(a), rhs, 1e-13, 200);
  REQUIRE(out.converged);
  REQUIRE((out.solution - expected).norm() < 1e-8 * (1.0 + expected.norm()));
}

TEST_CASE("gmres with full restart matches direct solves on 100 seeded instances") {
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng(500 + trial);
    const Index n = 20;
    Matrix a = random_matrix(rng, n, -1.0, 1.0);
    a += static_cast<double>(n) * Matrix::Identity(n, n);
    const Vector rhs = random_vector(rng, n);
    const Vector expected = gaussian_elimination(a, rhs);
    const auto out = gmres(LinearOperator::from_matrix(a), rhs, 1e-12, 400, static_cast<int>(n));
    REQUIRE(out.converged);
    REQUIRE((out.solution - expected).norm() <= 1e-8 * (1.0 + expected.norm()));
  }
}

TEST_CASE("gmres reports the recomputed residual and respects max_iters") {
  Rng rng(77);
  const Index n = 30;
  Matrix a = random_matrix(rng, n, -1.0, 1.0);
  a += 2.0 * Matrix::Identity(n, n);
  const Vector rhs = random_vector(rng, n);
  const LinearOperator op = LinearOperator::from_matrix(a);
  const auto out = gmres(op, rhs, 1e-14, 3, 3);
  REQUIRE(out.iterations <= 3);
  const double direct = (rhs - op.apply(out.solution)).norm();
  REQUIRE(std::abs(out.residual_norm - direct) <= 1e-10 * (1.0 + direct));
}

TEST_CASE("gmres rejects non-finite operator output") {
  LinearOperator bad{3, [](const Vector& v) {
                       Vector out = v;
                       out(0) = std::numeric_limits<double>::quiet_NaN();
                       return out;
                     }};
  Vector rhs(3);
  rhs << 1.0, 2.0, 3.0;
  REQUIRE_THROWS_AS(gmres(bad, rhs, 1e-8, 10), std::runtime_error);
}

TEST_CASE("dense factorization solves identity and the 2x2 skew block") {
  const auto id = dense_factorize(Matrix::Identity(4, 4));
  Vector rhs(4);
  rhs << 1.0, 2.0, 3.0, 4.0;
  REQUIRE((factor_solve(id, rhs) - rhs).norm() < 1e-14);

  Matrix m(2, 2);
  m << 1.0, 1.0, -1.0, 1.0;  // I + Q for a 1x1 skew block
  Vector rhs2(2);
  rhs2 << 2.0, 0.0;
  const Vector x = factor_solve(dense_factorize(m), rhs2);
  REQUIRE(std::abs(x(0) - 1.0) < 1e-14);
  REQUIRE(std::abs(x(1) - 1.0) < 1e-14);
}

TEST_CASE("dense factorization of random I+Q satisfies the residual bound") {
  Rng rng(31);
  const Index n = 20;
  Matrix skew = random_matrix(rng, n, -1.0, 1.0);
  skew = 0.5 * (skew - skew.transpose());
  const Matrix m = Matrix::Identity(n, n) + skew;
  const auto fac = dense_factorize(m);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector rhs = random_vector(rng, n);
    const Vector x = factor_solve(fac, rhs);
    REQUIRE((m * x - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
  }
}

TEST_CASE("dense factorization reports the singular pivot") {
  Matrix m = Matrix::Zero(3, 3);
  m(0, 0) = 1.0;
  m(1, 1) = 1.0;  // third row/column identically zero
  try {
    dense_factorize(m);
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    REQUIRE(std::string(e.what()).find("pivot at index 2") != std::string::npos);
  }
}

TEST_CASE("sym_eig handles hand instances") {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = -1.0;
  auto eig = sym_eig(d);
  REQUIRE(std::abs(eig.eigenvalues(0) - 3.0) < 1e-12);
  REQUIRE(std::abs(eig.eigenvalues(1) + 1.0) < 1e-12);

  Matrix offdiag(2, 2);
  offdiag << 0.0, 1.0, 1.0, 0.0;
  eig = sym_eig(offdiag);
  REQUIRE(std::abs(eig.eigenvalues(0) - 1.0) < 1e-12);
  REQUIRE(std::abs(eig.eigenvalues(1) + 1.0) < 1e-12);

  // characteristic-polynomial roots: tridiagonal(1,2,1) has 2, 2 +- sqrt(2)
  Matrix tri(3, 3);
  tri << 2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0;
  eig = sym_eig(tri);
  REQUIRE(std::abs(eig.eigenvalues(0) - (2.0 + std::sqrt(2.0))) < 1e-10);
  REQUIRE(std::abs(eig.eigenvalues(1) - 2.0) < 1e-10);
  REQUIRE(std::abs(eig.eigenvalues(2) - (2.0 - std::sqrt(2.0))) < 1e-10);
}

TEST_CASE("sym_eig reconstruction and orthogonality residuals") {
  Rng rng(99);
  const Index n = 6;
  Matrix z = random_matrix(rng, n, -2.0, 2.0);
  z = 0.5 * (z + z.transpose());
  const auto eig = sym_eig(z);
  REQUIRE(std::is_sorted(eig.eigenvalues.data(), eig.eigenvalues.data() + n,
                         std::greater<double>()));
  const Matrix recon =
      eig.eigenvectors * eig.eigenvalues.asDiagonal() * eig.eigenvectors.transpose();
  REQUIRE((z - recon).norm() <= 1e-9 * (1.0 + z.norm()));
  REQUIRE((eig.eigenvectors.transpose() * eig.eigenvectors - Matrix::Identity(n, n)).norm() <=
          1e-10);
}

TEST_CASE("sym_eig rejects non-finite input") {
  Matrix z = Matrix::Zero(2, 2);
  z(0, 1) = std::numeric_limits<double>::infinity();
  REQUIRE_THROWS_AS(sym_eig(z), std::invalid_argument);
}
