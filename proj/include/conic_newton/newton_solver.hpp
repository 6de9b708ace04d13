#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>

#include "conic_newton/cone_jacobians.hpp"
#include "conic_newton/cone_program.hpp"
#include "conic_newton/scs_solver.hpp"

namespace conic_newton {

/// Settings of the truncated semismooth Newton loop. The defaults are the
/// fixed choices the method is meant to run with out of the box:
/// T = 100 outer iterations, line-search parameters alpha = 0.001 and
/// beta = 0.5, and inner tolerances eps(i) = 1/(i+1) for the i-th Newton
/// iteration (1-based).
struct NewtonSettings {
  int T = 100;
  double alpha = 0.001;
  double beta = 0.5;
  std::function<double(int)> eps_schedule = [](int i) { return 1.0 / (i + 1); };
  int gmres_max = 0;      // 0: min(3k, 1000)
  int gmres_restart = 0;  // 0: min(3k, 100)
  double fnorm_tol = 1e-9;  // stop once ||F(z)|| <= fnorm_tol * (1 + ||z||)
  std::int64_t trace_every = 1;
  bool deterministic_timing = false;
  ExpJacobianConvention exp_convention = ExpJacobianConvention::NegIdentityOnPolar;
  int fallback_sweeps = 10;           // plain sweeps taken when the line search floors out
  double step_floor = 9.094947017729282e-13;  // 2^-40

  void check() const {
    if (!(alpha > 0.0 && alpha < 0.5))
      throw std::invalid_argument("NewtonSettings: alpha must lie in (0, 1/2)");
    if (!(beta > 0.0 && beta < 1.0))
      throw std::invalid_argument("NewtonSettings: beta must lie in (0, 1)");
    if (T < 1) throw std::invalid_argument("NewtonSettings: T must be positive");
    if (!(fnorm_tol > 0.0)) throw std::invalid_argument("NewtonSettings: fnorm_tol must be > 0");
  }
};

/// One element of the generalized Jacobian of F at z, as an operator:
///   J = [ I+Q   -I   -I ]
///       [      J_u      ]
///       [  I    -I    0 ]
/// where the middle row differentiates u - P_C(u~ - v): J_C is blockwise
/// the identity on the x rows, the stacked dual-cone projection Jacobians
/// at u~_y - v_s on the y rows, and the scalar indicator of
/// u~_tau - v_kappa >= 0 on the tau row.
class NewtonJacobian {
 public:
  NewtonJacobian(const Embedding& e, const Iterate& z,
                 ExpJacobianConvention convention = ExpJacobianConvention::NegIdentityOnPolar)
      : e_(&e),
        cone_jac_(e.cones(), Vector(z.y_tilde() - z.s()), convention),
        ell_(z.tau_tilde() - z.kappa() >= 0.0 ? 1.0 : 0.0) {}

  Index dim() const { return 3 * e_->k(); }

  Vector apply(const Vector& w) const {
    const Index k = e_->k();
    if (w.size() != 3 * k) throw std::invalid_argument("NewtonJacobian: dimension mismatch");
    const auto w_tilde = w.head(k);
    const auto w_u = w.segment(k, k);
    const auto w_v = w.tail(k);

    Vector out(3 * k);
    out.head(k) = w_tilde + e_->apply_Q(w_tilde) - w_u - w_v;

    const Vector dir = w_tilde - w_v;
    Vector jc(k);
    jc.head(e_->n()) = dir.head(e_->n());
    jc.segment(e_->n(), e_->m()) = cone_jac_.apply(dir.segment(e_->n(), e_->m()));
    jc(k - 1) = ell_ * dir(k - 1);
    out.segment(k, k) = w_u - jc;

    out.tail(k) = w_tilde - w_u;
    return out;
  }

  LinearOperator as_operator() const {
    return {dim(), [this](const Vector& w) { return apply(w); }};
  }

 private:
  const Embedding* e_;
  ProductDualJacobian cone_jac_;
  double ell_;
};

inline LinearOperator jacobian_J(const Embedding& e, const Iterate& z,
                                 ExpJacobianConvention convention = ExpJacobianConvention::NegIdentityOnPolar) {
  auto jac = std::make_shared<NewtonJacobian>(e, z, convention);
  return {jac->dim(), [jac](const Vector& w) { return jac->apply(w); }};
}

struct NewtonStepReport {
  Vector delta;
  int gmres_iters = 0;
  double gmres_relres = 0.0;  // ||F + J delta|| / ||F||, recomputed by reapplying J
  bool met_tolerance = false;
};

/// Computes an approximate Newton step J delta = -F by GMRES, truncated at
/// relative residual eps_i. If the inner iteration cap is hit first, the
/// best step found is returned and flagged through met_tolerance.
inline NewtonStepReport newton_step(const Embedding& e, const Iterate& z, double eps_i,
                                    const Vector& f, const NewtonSettings& settings = {}) {
  const Index dim = 3 * e.k();
  const double fnorm = f.norm();
  if (!(fnorm > 0.0)) throw std::invalid_argument("newton_step: residual is zero");

  const NewtonJacobian jac(e, z, settings.exp_convention);
  const LinearOperator op = jac.as_operator();
  const int max_iters =
      settings.gmres_max > 0 ? settings.gmres_max : static_cast<int>(std::min<Index>(dim, 1000));
  const int restart =
      settings.gmres_restart > 0 ? settings.gmres_restart : static_cast<int>(std::min<Index>(dim, 100));

  const GmresOutcome gm = gmres(op, Vector(-f), eps_i, max_iters, restart);

  NewtonStepReport report;
  report.delta = gm.solution;
  report.gmres_iters = gm.iterations;
  report.gmres_relres = (f + jac.apply(gm.solution)).norm() / fnorm;
  report.met_tolerance = report.gmres_relres <= eps_i;
  return report;
}

struct LineSearchResult {
  double t = 0.0;
  Iterate z_next;
  Vector f_next;
  int backtracks = 0;
  int f_evals = 0;
  bool fallback = false;  // step floor reached without sufficient decrease
};

/// Backtracking line search on ||F||^2: accepts the first t = beta^j with
///   ||F(z + t delta)||^2 < (1 - alpha t) ||F(z)||^2   (strict),
/// backtracking while the non-strict reverse inequality holds. Below the
/// hard floor on t the step is rejected and the caller falls back to plain
/// sweeps.
inline LineSearchResult line_search(const Embedding& e, const Iterate& z, const Vector& delta,
                                    double fnorm2, const NewtonSettings& settings = {}) {
  if (!delta.allFinite()) throw std::invalid_argument("line_search: non-finite step");
  LineSearchResult result;
  double t = 1.0;
  while (true) {
    const Iterate candidate = z.plus_scaled(t, delta);
    const Vector f = residual_F(e, candidate);
    ++result.f_evals;
    if (f.squaredNorm() < (1.0 - settings.alpha * t) * fnorm2) {
      result.t = t;
      result.z_next = candidate;
      result.f_next = f;
      return result;
    }
    t *= settings.beta;
    ++result.backtracks;
    if (t < settings.step_floor) {
      result.fallback = true;
      return result;
    }
  }
}

/// Truncated semismooth Newton on the fixed-point residual of the splitting
/// iteration. Each outer iteration rebuilds J at the current point, solves
/// J delta = -F to the scheduled relative tolerance with GMRES, and line
/// searches on ||F||^2; if the line search floors out, a burst of plain
/// sweeps moves the iterate before Newton resumes.
inline SolveResult solve_newton_admm(const ConeProgram& p, const NewtonSettings& settings = {},
                                     const Vector* x_ref = nullptr) {
  settings.check();
  const auto violations = validate(p);
  if (!violations.empty())
    throw std::invalid_argument("solve_newton_admm: invalid program: " + violations.front());

  const Embedding e(p);
  Iterate z = Iterate::initial(p.n, p.m);

  SolveResult result;
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    if (settings.deterministic_timing) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  Vector f = residual_F(e, z);
  ++result.f_evals;
  double fnorm = f.norm();
  bool converged = fnorm <= settings.fnorm_tol * (1.0 + z.norm());

  const auto push_trace = [&](std::int64_t iter, std::optional<double> step,
                              std::optional<int> gmres_iters, std::optional<int> backtracks) {
    TraceRecord rec;
    rec.iter = iter;
    rec.elapsed_s = elapsed();
    rec.fnorm = fnorm;
    rec.step_size = step;
    rec.gmres_iters = gmres_iters;
    rec.backtracks = backtracks;
    rec.cum_cost = result.sweeps + result.f_evals;
    const double tau = z.tau();
    if (tau > 1e-12 * (1.0 + z.linf_norm())) {
      const Vector x = z.x() / tau;
      rec.objective = p.c.dot(x);
      if (x_ref != nullptr) rec.dist_to_ref = (x - *x_ref).norm();
    }
    result.trace.push_back(rec);
  };

  push_trace(0, std::nullopt, std::nullopt, std::nullopt);

  for (int iter = 1; iter <= settings.T && !converged; ++iter) {
    const double eps_i = settings.eps_schedule(iter);
    if (!(eps_i > 0.0 && eps_i < 1.0))
      throw std::invalid_argument("solve_newton_admm: eps schedule must stay in (0,1)");

    const NewtonStepReport step = newton_step(e, z, eps_i, f, settings);
    LineSearchResult ls = line_search(e, z, step.delta, fnorm * fnorm, settings);
    result.f_evals += ls.f_evals;
    ++result.iterations;

    if (ls.fallback) {
      for (int sweep = 0; sweep < settings.fallback_sweeps; ++sweep) {
        z = admm_sweep(e, z);
        ++result.sweeps;
      }
      f = residual_F(e, z);
      ++result.f_evals;
      fnorm = f.norm();
      // step_size 0 marks a fallback row (accepted steps are >= 2^-40)
      if (iter % settings.trace_every == 0) push_trace(iter, 0.0, step.gmres_iters, ls.backtracks);
    } else {
      z = ls.z_next;
      f = ls.f_next;
      fnorm = f.norm();
      converged = fnorm <= settings.fnorm_tol * (1.0 + z.norm());
      if (iter % settings.trace_every == 0 || converged)
        push_trace(iter, ls.t, step.gmres_iters, ls.backtracks);
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
