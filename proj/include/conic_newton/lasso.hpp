#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "conic_newton/linalg.hpp"
#include "conic_newton/newton_solver.hpp"
#include "conic_newton/rng.hpp"
#include "conic_newton/trace.hpp"

namespace conic_newton {

/// Lasso instance (1/2)||y - X theta||^2 + lambda ||theta||_1 together with
/// the splitting penalty rho of its three-step iteration.
struct LassoProblem {
  Matrix X;
  Vector y;
  double lambda = 1.0;
  double rho = 1.0;

  void check() const {
    if (X.rows() != y.size()) throw std::invalid_argument("LassoProblem: X rows != y length");
    if (!(lambda >= 0.0)) throw std::invalid_argument("LassoProblem: lambda must be >= 0");
    if (!(rho > 0.0)) throw std::invalid_argument("LassoProblem: rho must be > 0");
  }
};

/// z = (theta, kappa, mu).
struct LassoIterate {
  Vector theta;
  Vector kappa;
  Vector mu;

  static LassoIterate zero(Index p) { return {Vector::Zero(p), Vector::Zero(p), Vector::Zero(p)}; }

  Vector stacked() const {
    Vector out(3 * theta.size());
    out << theta, kappa, mu;
    return out;
  }

  static LassoIterate from_stacked(const Vector& w) {
    const Index p = w.size() / 3;
    return {w.head(p), w.segment(p, p), w.tail(p)};
  }

  double norm() const {
    return std::sqrt(theta.squaredNorm() + kappa.squaredNorm() + mu.squaredNorm());
  }
};

/// Componentwise sign(v) max(|v| - t, 0): the proximal map of t||.||_1.
inline Vector soft_threshold(const Vector& v, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("soft_threshold: t must be >= 0");
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    const double mag = std::abs(v(i)) - t;
    out(i) = mag > 0.0 ? (v(i) > 0.0 ? mag : -mag) : 0.0;
  }
  return out;
}

/// Cached pieces shared by every sweep: the factorization of X'X + rho I
/// and X'y.
class LassoWork {
 public:
  explicit LassoWork(const LassoProblem& prob)
      : fac_(Matrix(prob.X.transpose() * prob.X +
                    prob.rho * Matrix::Identity(prob.X.cols(), prob.X.cols()))),
        xty_(prob.X.transpose() * prob.y) {}

  const DenseFactorization& factor() const { return fac_; }
  const Vector& xty() const { return xty_; }

 private:
  DenseFactorization fac_;
  Vector xty_;
};

/// One sweep in Gauss-Seidel order:
///   theta <- (X'X + rho I)^{-1} (X'y + rho (kappa - mu))
///   kappa <- S_{lambda/rho}(theta + mu)       (uses the fresh theta)
///   mu    <- mu + theta - kappa.
inline LassoIterate lasso_admm_sweep(const LassoProblem& prob, const LassoWork& work,
                                     const LassoIterate& z) {
  LassoIterate next;
  next.theta = work.factor().solve(work.xty() + prob.rho * (z.kappa - z.mu));
  next.kappa = soft_threshold(next.theta + z.mu, prob.lambda / prob.rho);
  next.mu = z.mu + next.theta - next.kappa;
  return next;
}

/// Fixed-point residual of the sweep, in the coordinates that turn the
/// theta update into a multiply:
///   F(z) = [ (X'X + rho I) theta - (X'y + rho (kappa - mu));
///            kappa - S_{lambda/rho}(theta + mu);
///            kappa - theta ].
inline Vector lasso_residual_F(const LassoProblem& prob, const LassoIterate& z) {
  const Index p = z.theta.size();
  Vector out(3 * p);
  out.head(p) = prob.X.transpose() * (prob.X * z.theta) + prob.rho * z.theta -
                (prob.X.transpose() * prob.y + prob.rho * (z.kappa - z.mu));
  out.segment(p, p) = z.kappa - soft_threshold(z.theta + z.mu, prob.lambda / prob.rho);
  out.tail(p) = z.kappa - z.theta;
  return out;
}

/// Generalized Jacobian of the lasso residual:
///   J = [ X'X + rho I   -rho I   rho I ]
///       [     -D           I       D   ]
///       [     -I           I       0   ]
/// with D diagonal, D_ii = 1 iff |theta_i + mu_i| > lambda/rho (strict, so
/// the kink takes 0).
inline LinearOperator lasso_jacobian_J(const LassoProblem& prob, const LassoIterate& z) {
  const Index p = z.theta.size();
  Vector mask(p);
  const double threshold = prob.lambda / prob.rho;
  for (Index i = 0; i < p; ++i)
    mask(i) = std::abs(z.theta(i) + z.mu(i)) > threshold ? 1.0 : 0.0;

  return {3 * p, [&prob, mask, p](const Vector& w) -> Vector {
            const auto w_theta = w.head(p);
            const auto w_kappa = w.segment(p, p);
            const auto w_mu = w.tail(p);
            Vector out(3 * p);
            out.head(p) = prob.X.transpose() * (prob.X * w_theta) + prob.rho * w_theta -
                          prob.rho * w_kappa + prob.rho * w_mu;
            out.segment(p, p) =
                -mask.cwiseProduct(w_theta) + w_kappa + mask.cwiseProduct(w_mu);
            out.tail(p) = -w_theta + w_kappa;
            return out;
          }};
}

inline double lasso_objective(const LassoProblem& prob, const Vector& theta) {
  return 0.5 * (prob.y - prob.X * theta).squaredNorm() + prob.lambda * theta.lpNorm<1>();
}

enum class LassoStatus { Converged, IterLimit };

struct LassoResult {
  LassoStatus status = LassoStatus::IterLimit;
  Vector theta;  // the thresholded block, exactly sparse
  double objective = 0.0;
  double final_fnorm = 0.0;
  std::vector<TraceRecord> trace;
  std::int64_t iterations = 0;
  std::int64_t sweeps = 0;
  std::int64_t f_evals = 0;
  double wall_s = 0.0;
};

/// Plain splitting iteration on the lasso, stopped on the residual norm.
inline LassoResult solve_lasso_admm(const LassoProblem& prob, const AdmmSettings& settings = {}) {
  prob.check();
  const Index p = prob.X.cols();
  const LassoWork work(prob);
  LassoIterate z = LassoIterate::zero(p);

  LassoResult result;
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    if (settings.deterministic_timing) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  double fnorm = lasso_residual_F(prob, z).norm();
  ++result.f_evals;
  bool converged = fnorm <= settings.fnorm_tol * (1.0 + z.norm());
  for (std::int64_t iter = 1; iter <= settings.max_iters && !converged; ++iter) {
    z = lasso_admm_sweep(prob, work, z);
    ++result.sweeps;
    ++result.iterations;
    fnorm = lasso_residual_F(prob, z).norm();
    ++result.f_evals;
    converged = fnorm <= settings.fnorm_tol * (1.0 + z.norm());
    if (iter % settings.trace_every == 0 || converged) {
      TraceRecord rec;
      rec.iter = iter;
      rec.elapsed_s = elapsed();
      rec.fnorm = fnorm;
      rec.objective = lasso_objective(prob, z.kappa);
      rec.cum_cost = result.sweeps;
      result.trace.push_back(rec);
    }
  }
  result.status = converged ? LassoStatus::Converged : LassoStatus::IterLimit;
  result.theta = z.kappa;
  result.objective = lasso_objective(prob, z.kappa);
  result.final_fnorm = fnorm;
  result.wall_s = elapsed();
  return result;
}

/// The same truncated Newton outer loop as the conic solver, applied
/// directly to the lasso residual map.
inline LassoResult solve_lasso_newton(const LassoProblem& prob, const NewtonSettings& settings = {}) {
  prob.check();
  settings.check();
  const Index p = prob.X.cols();
  const LassoWork work(prob);
  LassoIterate z = LassoIterate::zero(p);

  LassoResult result;
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    if (settings.deterministic_timing) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  Vector f = lasso_residual_F(prob, z);
  ++result.f_evals;
  double fnorm = f.norm();
  bool converged = fnorm <= settings.fnorm_tol * (1.0 + z.norm());

  for (int iter = 1; iter <= settings.T && !converged; ++iter) {
    const double eps_i = settings.eps_schedule(iter);
    const LinearOperator jac = lasso_jacobian_J(prob, z);
    const int max_iters = settings.gmres_max > 0
                              ? settings.gmres_max
                              : static_cast<int>(std::min<Index>(3 * p, 1000));
    const int restart = settings.gmres_restart > 0
                            ? settings.gmres_restart
                            : static_cast<int>(std::min<Index>(3 * p, 100));
    const GmresOutcome gm = gmres(jac, Vector(-f), eps_i, max_iters, restart);
    ++result.iterations;

    // backtracking on ||F||^2, same acceptance rule as the conic loop
    double t = 1.0;
    int backtracks = 0;
    bool accepted = false;
    const double fnorm2 = fnorm * fnorm;
    Vector stacked = z.stacked();
    while (true) {
      const LassoIterate candidate = LassoIterate::from_stacked(stacked + t * gm.solution);
      const Vector f_cand = lasso_residual_F(prob, candidate);
      ++result.f_evals;
      if (f_cand.squaredNorm() < (1.0 - settings.alpha * t) * fnorm2) {
        z = candidate;
        f = f_cand;
        fnorm = f.norm();
        accepted = true;
        break;
      }
      t *= settings.beta;
      ++backtracks;
      if (t < settings.step_floor) break;
    }

    if (!accepted) {
      for (int sweep = 0; sweep < settings.fallback_sweeps; ++sweep) {
        z = lasso_admm_sweep(prob, work, z);
        ++result.sweeps;
      }
      f = lasso_residual_F(prob, z);
      ++result.f_evals;
      fnorm = f.norm();
    }

    converged = fnorm <= settings.fnorm_tol * (1.0 + z.norm());
    if (iter % settings.trace_every == 0 || converged) {
      TraceRecord rec;
      rec.iter = iter;
      rec.elapsed_s = elapsed();
      rec.fnorm = fnorm;
      rec.step_size = accepted ? std::optional<double>(t) : std::optional<double>(0.0);
      rec.gmres_iters = gm.iterations;
      rec.backtracks = backtracks;
      rec.objective = lasso_objective(prob, z.kappa);
      rec.cum_cost = result.sweeps + result.f_evals;
      result.trace.push_back(rec);
    }
  }

  result.status = converged ? LassoStatus::Converged : LassoStatus::IterLimit;
  result.theta = z.kappa;
  result.objective = lasso_objective(prob, z.kappa);
  result.final_fnorm = fnorm;
  result.wall_s = elapsed();
  return result;
}

/// Synthetic lasso data in the style of the sparse-regression generators:
/// normal design, sparse normal coefficients (about 90% zeroed), additive
/// normal noise.
inline LassoProblem gen_lasso(Index p, Index n_samples, double lambda, double rho,
                              std::uint64_t seed) {
  Rng rng(seed);
  LassoProblem prob;
  prob.lambda = lambda;
  prob.rho = rho;
  Vector theta(p);
  for (Index i = 0; i < p; ++i) theta(i) = rng.normal();
  for (Index i = 0; i < p; ++i)
    if (rng.uniform01() < 0.9) theta(i) = 0.0;
  prob.X.resize(n_samples, p);
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < n_samples; ++i) prob.X(i, j) = rng.normal();
  prob.y = prob.X * theta;
  for (Index i = 0; i < n_samples; ++i) prob.y(i) += rng.normal();
  return prob;
}

}  // namespace conic_newton
