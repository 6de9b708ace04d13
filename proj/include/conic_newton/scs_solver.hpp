#pragma once

#include <chrono>
#include <cstdint>
#include <stdexcept>

#include "conic_newton/cone_program.hpp"
#include "conic_newton/cones.hpp"

namespace conic_newton {

struct AdmmSettings {
  std::int64_t max_iters = 100000;
  double fnorm_tol = 1e-9;     // stop once ||F(z)|| <= fnorm_tol * (1 + ||z||)
  std::int64_t trace_every = 1;
  bool deterministic_timing = false;  // zero out wall-clock fields for bitwise traces
};

namespace detail {

/// Projection onto C = R^n x K* x R+, the cone of the u-update.
inline Vector project_embedding_cone(const Embedding& e, const Vector& w) {
  Vector out(e.k());
  out.head(e.n()) = w.head(e.n());
  out.segment(e.n(), e.m()) = project_dual(e.cones(), w.segment(e.n(), e.m()));
  out(e.k() - 1) = std::max(w(e.k() - 1), 0.0);
  return out;
}

}  // namespace detail

/// Fixed-point residual of the splitting iteration on the embedding, in the
/// coordinates that replace the (I+Q)^{-1} solve with a multiply:
///   F(z) = [ (I+Q) u~ - (u + v);  u - P_C(u~ - v);  u~ - u ].
/// Zeros of F are exactly the fixed points of admm_sweep.
inline Vector residual_F(const Embedding& e, const Iterate& z) {
  if (!z.all_finite()) throw std::invalid_argument("residual_F: non-finite iterate");
  const Index k = e.k();
  Vector out(3 * k);
  out.head(k) = z.u_tilde + e.apply_Q(z.u_tilde) - z.u - z.v;
  out.segment(k, k) = z.u - detail::project_embedding_cone(e, z.u_tilde - z.v);
  out.tail(k) = z.u_tilde - z.u;
  return out;
}

/// One Gauss-Seidel sweep of the splitting iteration:
///   u~ <- (I+Q)^{-1}(u + v);  u <- P_C(u~ - v);  v <- v - u~ + u.
/// The projection uses the freshly updated u~.
inline Iterate admm_sweep(const Embedding& e, const Iterate& z) {
  if (!z.all_finite()) throw std::invalid_argument("admm_sweep: non-finite input iterate");
  Iterate next = z;
  next.u_tilde = e.iplusq().solve(z.u + z.v);
  if (!next.u_tilde.allFinite())
    throw std::runtime_error("admm_sweep: non-finite u~ after the linear solve");
  next.u = detail::project_embedding_cone(e, next.u_tilde - z.v);
  if (!next.u.allFinite()) throw std::runtime_error("admm_sweep: non-finite u after projection");
  next.v = z.v - next.u_tilde + next.u;
  return next;
}

namespace detail {

inline void fill_solution_fields(const ConeProgram& p, const Embedding& e, const Iterate& z,
                                 TraceRecord& rec, const Vector* x_ref) {
  const double tau = z.tau();
  if (tau > 1e-12 * (1.0 + z.linf_norm())) {
    const Vector x = z.x() / tau;
    rec.objective = p.c.dot(x);
    if (x_ref != nullptr) rec.dist_to_ref = (x - *x_ref).norm();
  }
  (void)e;
}

}  // namespace detail

/// Plain splitting solver on the embedding. Stopping is on the same
/// residual the Newton solver drives to zero, so iteration counts of the
/// two methods measure the same quantity.
inline SolveResult solve_scs(const ConeProgram& p, const AdmmSettings& settings,
                             const Vector* x_ref = nullptr) {
  const auto violations = validate(p);
  if (!violations.empty())
    throw std::invalid_argument("solve_scs: invalid program: " + violations.front());
  if (!(settings.fnorm_tol > 0.0)) throw std::invalid_argument("solve_scs: fnorm_tol must be > 0");

  const Embedding e(p);
  Iterate z = Iterate::initial(p.n, p.m);

  SolveResult result;
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    if (settings.deterministic_timing) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  double fnorm = residual_F(e, z).norm();
  ++result.f_evals;
  bool converged = fnorm <= settings.fnorm_tol * (1.0 + z.norm());

  {
    TraceRecord rec;
    rec.iter = 0;
    rec.fnorm = fnorm;
    rec.elapsed_s = elapsed();
    rec.cum_cost = result.sweeps;
    detail::fill_solution_fields(p, e, z, rec, x_ref);
    result.trace.push_back(rec);
  }

  for (std::int64_t iter = 1; iter <= settings.max_iters && !converged; ++iter) {
    z = admm_sweep(e, z);
    ++result.sweeps;
    ++result.iterations;
    fnorm = residual_F(e, z).norm();
    ++result.f_evals;
    converged = fnorm <= settings.fnorm_tol * (1.0 + z.norm());

    if (iter % settings.trace_every == 0 || converged) {
      TraceRecord rec;
      rec.iter = iter;
      rec.fnorm = fnorm;
      rec.elapsed_s = elapsed();
      rec.cum_cost = result.sweeps;
      detail::fill_solution_fields(p, e, z, rec, x_ref);
      result.trace.push_back(rec);
    }
  }

  result.final_fnorm = fnorm;
  result.wall_s = elapsed();
  if (converged) {
    const SolveResult extracted = extract(p, z);
    result.status = extracted.status;
    result.x = extracted.x;
    result.y = extracted.y;
    result.s = extracted.s;
    result.certificate = extracted.certificate;
    result.objective = extracted.objective;
  } else {
    result.status = SolveStatus::IterLimit;
  }
  return result;
}

}  // namespace conic_newton
