#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "conic_newton/cone_program.hpp"
#include "conic_newton/rng.hpp"

namespace conic_newton {

enum class Family { RandomLp, Portfolio, L1Logistic, RobustPca };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::RandomLp: return "lp";
    case Family::Portfolio: return "portfolio";
    case Family::L1Logistic: return "logreg";
    case Family::RobustPca: return "rpca";
  }
  return "?";
}

inline Family family_from_name(const std::string& name) {
  if (name == "lp") return Family::RandomLp;
  if (name == "portfolio") return Family::Portfolio;
  if (name == "logreg") return Family::L1Logistic;
  if (name == "rpca") return Family::RobustPca;
  throw std::invalid_argument("unknown problem family \"" + name + "\"");
}

/// Seeded generator request. `scale` multiplies the reference sizes
/// (lp: p=600, N=300; portfolio: p=2500; logreg: p=100, N=1000;
/// rpca: N=p=25). `binarize_labels` switches the regression targets of the
/// logistic family to +-1 signs; the default keeps the continuous targets.
struct GenSpec {
  Family family = Family::RandomLp;
  double scale = 1.0;
  std::uint64_t seed = 0;
  bool binarize_labels = false;
};

/// Ground truth retained by a generator: exact planted solutions where the
/// construction provides them (lp, and the closed-form minimizer for
/// portfolio), raw model data otherwise. `x_ref` is the cone-form solution
/// vector when it is analytically known.
struct PlantedInfo {
  Family family = Family::RandomLp;
  Vector x_star;       // lp: planted primal
  Vector nu_star;      // lp: equality multipliers
  Vector lambda_star;  // lp: inequality multipliers (zeroed on the support of x_star)
  Vector theta_star;   // portfolio: closed-form weights; logreg: generating coefficients
  Matrix X;            // logreg design / rpca observations
  Vector y;            // logreg targets
  Matrix L_star;       // rpca low-rank part
  Matrix S_star;       // rpca sparse part
  double lambda = 0.0;
  double objective = std::numeric_limits<double>::quiet_NaN();
  Vector x_ref;
};

namespace detail {

/// Column-major fill; one draw per entry, columns left to right.
inline Matrix normal_matrix(Rng& rng, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

inline Vector normal_vector(Rng& rng, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

inline Index scaled_dim(double base, double scale, Index minimum) {
  return std::max<Index>(minimum, static_cast<Index>(std::llround(base * scale)));
}

}  // namespace detail

/// Random equality-form LP  min c'x  s.t.  Gx = h, x >= 0,  planted so that
/// (x*, nu*, lambda*) is a KKT triple: x* is a clipped normal vector,
/// h = G x*, and c = -G' nu* + lambda* with lambda* zeroed on the support
/// of x* to restore complementary slackness. Cone form stacks the equality
/// as paired inequalities over the orthant: A = [G; -G; -I], b = [h; -h; 0].
inline std::pair<ConeProgram, PlantedInfo> gen_lp(const GenSpec& spec) {
  const Index p = detail::scaled_dim(600.0, spec.scale, 2);
  Index N = detail::scaled_dim(300.0, spec.scale, 1);
  if (N >= p) N = p - 1;  // keep G wide
  Rng rng(spec.seed);

  Vector x_star = detail::normal_vector(rng, p).cwiseMax(0.0);
  const Matrix G = detail::normal_matrix(rng, N, p);
  const Vector h = G * x_star;
  const Vector nu_star = detail::normal_vector(rng, N);
  Vector lambda_star(p);
  for (Index i = 0; i < p; ++i) lambda_star(i) = rng.uniform01();
  for (Index i = 0; i < p; ++i)
    if (x_star(i) > 0.0) lambda_star(i) = 0.0;
  const Vector c = -G.transpose() * nu_star + lambda_star;

  ConeProgram prog;
  prog.n = p;
  prog.m = 2 * N + p;
  prog.c = c;
  prog.b.resize(prog.m);
  prog.b << h, -h, Vector::Zero(p);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * N * p + p);
  for (Index j = 0; j < p; ++j) {
    for (Index i = 0; i < N; ++i) {
      triplets.emplace_back(i, j, G(i, j));
      triplets.emplace_back(N + i, j, -G(i, j));
    }
    triplets.emplace_back(2 * N + j, j, -1.0);
  }
  prog.A.resize(prog.m, prog.n);
  prog.A.setFromTriplets(triplets.begin(), triplets.end());
  prog.cones = ConeProduct::from({ConeBlock::nonneg(prog.m)});

  PlantedInfo info;
  info.family = Family::RandomLp;
  info.x_star = x_star;
  info.nu_star = nu_star;
  info.lambda_star = lambda_star;
  info.objective = c.dot(x_star);
  info.x_ref = x_star;
  return {std::move(prog), std::move(info)};
}

/// Minimum-variance weights over p assets: min theta' Sigma theta subject
/// to 1'theta = 1, lifted to an epigraph variable w with the rotated
/// quadratic constraint written as one second-order cone block of dimension
/// p+2, plus paired orthant rows for the budget equality. Sigma is sampled
/// positive definite as M'M + 1e-3 I.
inline std::pair<ConeProgram, PlantedInfo> gen_portfolio(const GenSpec& spec) {
  const Index p = detail::scaled_dim(2500.0, spec.scale, 2);
  Rng rng(spec.seed);

  const Matrix m_raw = detail::normal_matrix(rng, p, p);
  Matrix sigma = m_raw.transpose() * m_raw;
  sigma.diagonal().array() += 1e-3;

  const SymEig eig = sym_eig(sigma);
  const Matrix sqrt_sigma = eig.eigenvectors *
                            eig.eigenvalues.cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                            eig.eigenvectors.transpose();

  const Vector ones = Vector::Ones(p);
  const Vector sigma_inv_ones = sigma.llt().solve(ones);
  const Vector theta_star = sigma_inv_ones / ones.dot(sigma_inv_ones);
  const double w_star = theta_star.dot(sigma * theta_star);

  ConeProgram prog;
  prog.n = p + 1;
  prog.m = p + 4;
  prog.c = Vector::Zero(prog.n);
  prog.c(p) = 1.0;
  prog.b.resize(prog.m);
  prog.b << Vector::Zero(p), 1.0, 1.0, 1.0, -1.0;

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(p * p + 2 * p + 2);
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < p; ++i) triplets.emplace_back(i, j, -2.0 * sqrt_sigma(i, j));
  triplets.emplace_back(p, p, 1.0);       // row for 1 - w
  triplets.emplace_back(p + 1, p, -1.0);  // row for 1 + w
  for (Index j = 0; j < p; ++j) {
    triplets.emplace_back(p + 2, j, 1.0);   // 1'theta <= 1
    triplets.emplace_back(p + 3, j, -1.0);  // 1'theta >= 1
  }
  prog.A.resize(prog.m, prog.n);
  prog.A.setFromTriplets(triplets.begin(), triplets.end());
  prog.cones = ConeProduct::from({ConeBlock::soc(p + 2), ConeBlock::nonneg(2)});

  PlantedInfo info;
  info.family = Family::Portfolio;
  info.theta_star = theta_star;
  info.objective = w_star;
  info.x_ref.resize(p + 1);
  info.x_ref << theta_star, w_star;
  return {std::move(prog), std::move(info)};
}

/// l1-penalized logistic loss sum_i log(1 + exp(y_i X_i. theta)) + lambda
/// ||theta||_1 in cone form: epigraph variables w, split exponentials
/// (l, q) with exp(-w_i) <= l_i and exp(y_i X_i. theta - w_i) <= q_i,
/// l + q <= 1, and |theta| <= t rows. Data: sparse normal coefficients
/// (about 90% zeroed), normal design, y = X theta* + noise kept continuous
/// unless binarize_labels is set.
inline std::pair<ConeProgram, PlantedInfo> gen_logistic(const GenSpec& spec) {
  const Index p = detail::scaled_dim(100.0, spec.scale, 2);
  const Index N = detail::scaled_dim(1000.0, spec.scale, 2);
  const double lambda = 1.0;
  Rng rng(spec.seed);

  Vector theta_star = detail::normal_vector(rng, p);
  for (Index i = 0; i < p; ++i)
    if (rng.uniform01() < 0.9) theta_star(i) = 0.0;
  const Matrix X = detail::normal_matrix(rng, N, p);
  const Vector noise = detail::normal_vector(rng, N);
  Vector y = X * theta_star + noise;
  if (spec.binarize_labels)
    for (Index i = 0; i < N; ++i) y(i) = y(i) >= 0.0 ? 1.0 : -1.0;

  // variable layout x = (theta, w, t, l, q)
  const Index off_theta = 0;
  const Index off_w = p;
  const Index off_t = p + N;
  const Index off_l = 2 * p + N;
  const Index off_q = 2 * p + 2 * N;

  ConeProgram prog;
  prog.n = 2 * p + 3 * N;
  prog.m = 7 * N + 2 * p;
  prog.c = Vector::Zero(prog.n);
  prog.c.segment(off_w, N).setOnes();
  prog.c.segment(off_t, p).setConstant(lambda);
  prog.b = Vector::Zero(prog.m);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(N) * (p + 4) + 4 * p);
  // exp(-w_i) <= l_i  as  (-w_i, 1, l_i)
  for (Index i = 0; i < N; ++i) {
    const Index row = 3 * i;
    triplets.emplace_back(row, off_w + i, 1.0);
    prog.b(row + 1) = 1.0;
    triplets.emplace_back(row + 2, off_l + i, -1.0);
  }
  // exp(y_i X_i. theta - w_i) <= q_i  as  (y_i X_i. theta - w_i, 1, q_i)
  for (Index i = 0; i < N; ++i) {
    const Index row = 3 * N + 3 * i;
    for (Index j = 0; j < p; ++j) {
      const double value = -y(i) * X(i, j);
      if (value != 0.0) triplets.emplace_back(row, off_theta + j, value);
    }
    triplets.emplace_back(row, off_w + i, 1.0);
    prog.b(row + 1) = 1.0;
    triplets.emplace_back(row + 2, off_q + i, -1.0);
  }
  // l + q <= 1
  for (Index i = 0; i < N; ++i) {
    const Index row = 6 * N + i;
    triplets.emplace_back(row, off_l + i, 1.0);
    triplets.emplace_back(row, off_q + i, 1.0);
    prog.b(row) = 1.0;
  }
  // theta + t >= 0 and t - theta >= 0
  for (Index j = 0; j < p; ++j) {
    const Index row = 7 * N + j;
    triplets.emplace_back(row, off_theta + j, -1.0);
    triplets.emplace_back(row, off_t + j, -1.0);
    triplets.emplace_back(row + p, off_theta + j, 1.0);
    triplets.emplace_back(row + p, off_t + j, -1.0);
  }
  prog.A.resize(prog.m, prog.n);
  prog.A.setFromTriplets(triplets.begin(), triplets.end());

  std::vector<ConeBlock> blocks;
  blocks.reserve(2 * N + 3);
  for (Index i = 0; i < 2 * N; ++i) blocks.push_back(ConeBlock::exp_primal());
  blocks.push_back(ConeBlock::nonneg(N));
  blocks.push_back(ConeBlock::nonneg(p));
  blocks.push_back(ConeBlock::nonneg(p));
  prog.cones = ConeProduct::from(std::move(blocks));

  PlantedInfo info;
  info.family = Family::L1Logistic;
  info.theta_star = theta_star;
  info.X = X;
  info.y = y;
  info.lambda = lambda;
  return {std::move(prog), std::move(info)};
}

/// Nuclear-norm recovery  min ||L||_*  s.t.  ||S||_1 <= lambda, L + S = X,
/// through the trace characterization: the block matrix [[W1, L],[L', W2]]
/// must be positive semidefinite and the objective is (tr W1 + tr W2)/2.
/// Cone form uses selector rows mapping (W1, W2, L) into the column-major
/// vectorization of the full (N+p)-order block matrix, elementwise bounds
/// |vec S| <= t with 1't <= lambda, and paired rows for L + S = X.
inline std::pair<ConeProgram, PlantedInfo> gen_robust_pca(const GenSpec& spec) {
  const Index N = detail::scaled_dim(25.0, spec.scale, 2);
  const Index p = N;
  const double lambda = 1.0;
  Rng rng(spec.seed);

  const Index rank = std::max<Index>(1, static_cast<Index>(std::llround(N / 2.0)));
  const Matrix U = detail::normal_matrix(rng, N, rank);
  const Matrix V = detail::normal_matrix(rng, p, rank);
  const Matrix L_star = U * V.transpose();
  Matrix S_star(N, p);
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < N; ++i) S_star(i, j) = rng.uniform01();
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < N; ++i)
      if (rng.uniform01() < 0.9) S_star(i, j) = 0.0;
  const Matrix X = L_star + S_star;

  const Index np = N * p;
  const Index d = N + p;
  // variable layout x = (vec W1, vec W2, t, vec L, vec S)
  const Index off_w1 = 0;
  const Index off_w2 = N * N;
  const Index off_t = N * N + p * p;
  const Index off_l = off_t + np;
  const Index off_s = off_l + np;

  ConeProgram prog;
  prog.n = N * N + p * p + 3 * np;
  prog.m = 4 * np + 1 + d * d;
  prog.c = Vector::Zero(prog.n);
  for (Index a = 0; a < N; ++a) prog.c(off_w1 + a + a * N) = 0.5;
  for (Index a = 0; a < p; ++a) prog.c(off_w2 + a + a * p) = 0.5;
  prog.b = Vector::Zero(prog.m);

  const Eigen::Map<const Vector> vec_x(X.data(), np);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(9 * np + N * N + p * p + 1);
  for (Index j = 0; j < np; ++j) {
    triplets.emplace_back(j, off_t + j, -1.0);  // t + S >= 0
    triplets.emplace_back(j, off_s + j, -1.0);
    triplets.emplace_back(np + j, off_t + j, -1.0);  // t - S >= 0
    triplets.emplace_back(np + j, off_s + j, 1.0);
    triplets.emplace_back(2 * np + 1 + j, off_l + j, 1.0);  // X - L - S >= 0
    triplets.emplace_back(2 * np + 1 + j, off_s + j, 1.0);
    triplets.emplace_back(3 * np + 1 + j, off_l + j, -1.0);  // L + S - X >= 0
    triplets.emplace_back(3 * np + 1 + j, off_s + j, -1.0);
    prog.b(2 * np + 1 + j) = vec_x(j);
    prog.b(3 * np + 1 + j) = -vec_x(j);
  }
  for (Index j = 0; j < np; ++j) triplets.emplace_back(2 * np, off_t + j, 1.0);  // 1't <= lambda
  prog.b(2 * np) = lambda;

  // semidefinite block: s = vec([[W1, L], [L', W2]])
  const Index psd_row = 4 * np + 1;
  for (Index col = 0; col < N; ++col)
    for (Index row = 0; row < N; ++row)
      triplets.emplace_back(psd_row + row + col * d, off_w1 + row + col * N, -1.0);
  for (Index col = 0; col < p; ++col)
    for (Index row = 0; row < p; ++row)
      triplets.emplace_back(psd_row + (N + row) + (N + col) * d, off_w2 + row + col * p, -1.0);
  for (Index col = 0; col < p; ++col) {
    for (Index row = 0; row < N; ++row) {
      const Index var = off_l + row + col * N;
      triplets.emplace_back(psd_row + row + (N + col) * d, var, -1.0);
      triplets.emplace_back(psd_row + (N + col) + row * d, var, -1.0);
    }
  }
  prog.A.resize(prog.m, prog.n);
  prog.A.setFromTriplets(triplets.begin(), triplets.end());
  prog.cones = ConeProduct::from({ConeBlock::nonneg(np), ConeBlock::nonneg(np),
                                  ConeBlock::nonneg(1), ConeBlock::nonneg(np),
                                  ConeBlock::nonneg(np), ConeBlock::psd_of_order(d)});

  PlantedInfo info;
  info.family = Family::RobustPca;
  info.L_star = L_star;
  info.S_star = S_star;
  info.X = X;
  info.lambda = lambda;
  return {std::move(prog), std::move(info)};
}

inline std::pair<ConeProgram, PlantedInfo> generate(const GenSpec& spec) {
  switch (spec.family) {
    case Family::RandomLp: return gen_lp(spec);
    case Family::Portfolio: return gen_portfolio(spec);
    case Family::L1Logistic: return gen_logistic(spec);
    case Family::RobustPca: return gen_robust_pca(spec);
  }
  throw std::logic_error("generate: unknown family");
}

namespace detail {

inline std::vector<double> to_std(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace detail

/// Sidecar with the generator's ground truth; large raw data (the logistic
/// design matrix) is regenerable from the seed and not serialized.
inline void write_planted(const PlantedInfo& info, const std::string& path) {
  nlohmann::json doc;
  doc["family"] = family_name(info.family);
  if (info.x_star.size() > 0) doc["x_star"] = detail::to_std(info.x_star);
  if (info.nu_star.size() > 0) doc["nu_star"] = detail::to_std(info.nu_star);
  if (info.lambda_star.size() > 0) doc["lambda_star"] = detail::to_std(info.lambda_star);
  if (info.theta_star.size() > 0) doc["theta_star"] = detail::to_std(info.theta_star);
  if (info.x_ref.size() > 0) doc["x_ref"] = detail::to_std(info.x_ref);
  if (std::isfinite(info.objective)) doc["objective"] = info.objective;
  if (info.lambda != 0.0) doc["lambda"] = info.lambda;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_planted: cannot open " + path);
  out << doc.dump() << '\n';
  if (!out) throw std::runtime_error("write_planted: write failed for " + path);
}

}  // namespace conic_newton
