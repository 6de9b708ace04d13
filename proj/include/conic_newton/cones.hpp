#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "conic_newton/linalg.hpp"

namespace conic_newton {

enum class ConeKind { Zero, Free, NonNegative, SecondOrder, Psd, ExpPrimal, ExpDual };

inline const char* cone_kind_name(ConeKind kind) {
  switch (kind) {
    case ConeKind::Zero: return "zero";
    case ConeKind::Free: return "free";
    case ConeKind::NonNegative: return "nonneg";
    case ConeKind::SecondOrder: return "soc";
    case ConeKind::Psd: return "psd";
    case ConeKind::ExpPrimal: return "exp";
    case ConeKind::ExpDual: return "exp_dual";
  }
  return "?";
}

/// A single cone factor. For Psd the ambient dimension is s*s: the block is
/// the column-major vectorization of a full s x s symmetric matrix (inputs
/// are symmetrized before any eigendecomposition). Exponential blocks are
/// always three-dimensional.
struct ConeBlock {
  ConeKind kind;
  Index dim;

  static ConeBlock zero(Index n) { return {ConeKind::Zero, n}; }
  static ConeBlock free(Index n) { return {ConeKind::Free, n}; }
  static ConeBlock nonneg(Index n) { return {ConeKind::NonNegative, n}; }
  static ConeBlock soc(Index n) { return {ConeKind::SecondOrder, n}; }
  static ConeBlock psd_of_order(Index s) { return {ConeKind::Psd, s * s}; }
  static ConeBlock exp_primal() { return {ConeKind::ExpPrimal, 3}; }
  static ConeBlock exp_dual() { return {ConeKind::ExpDual, 3}; }

  /// Matrix order s for a Psd block; throws if dim is not a perfect square.
  Index psd_order() const {
    const Index s = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(dim))));
    if (s * s != dim) throw std::invalid_argument("ConeBlock: psd dim is not a perfect square");
    return s;
  }

  /// Empty string when well formed, otherwise a description of the problem.
  std::string check() const {
    if (dim < 1) return std::string(cone_kind_name(kind)) + ": dim must be >= 1";
    if ((kind == ConeKind::ExpPrimal || kind == ConeKind::ExpDual) && dim != 3)
      return std::string(cone_kind_name(kind)) + ": dim must be exactly 3";
    if (kind == ConeKind::Psd) {
      const Index s = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(dim))));
      if (s * s != dim) return "psd: dim must be a perfect square (full s*s storage)";
    }
    return {};
  }
};

/// An ordered product of cone blocks; a stacked vector projects blockwise.
struct ConeProduct {
  std::vector<ConeBlock> blocks;
  std::vector<Index> offsets;  // offsets[i] = start of block i; offsets.back() = total_dim
  Index total_dim = 0;

  static ConeProduct from(std::vector<ConeBlock> bs) {
    ConeProduct prod;
    prod.blocks = std::move(bs);
    prod.offsets.reserve(prod.blocks.size() + 1);
    Index off = 0;
    for (const auto& b : prod.blocks) {
      prod.offsets.push_back(off);
      off += b.dim;
    }
    prod.offsets.push_back(off);
    prod.total_dim = off;
    return prod;
  }
};

namespace detail {

inline double safe_exp(double x) { return std::exp(std::min(x, 700.0)); }

/// Case split of the exponential-cone projection, checked in this order:
/// inside the cone, inside the polar cone (-dual), first two components
/// negative, and the remaining region that needs the constrained solve.
/// Boundaries resolve to the earliest matching case.
enum class ExpCase { InCone, InPolar, BothNegative, NeedsSolve };

inline bool exp_cone_contains(double x, double y, double z, double tol) {
  if (y > tol) {
    const double value = y * safe_exp(x / y);
    return std::isfinite(value) && value <= z + tol * (1.0 + std::abs(z));
  }
  if (y >= -tol) return x <= tol && z >= -tol;
  return false;
}

/// Dual cone: cl{(u,v,w) : u < 0, -u e^{v/u} <= e w} with the u = 0 face
/// {v >= 0, w >= 0}.
inline bool exp_dual_cone_contains(double u, double v, double w, double tol) {
  if (u < -tol) {
    const double value = -u * safe_exp(v / u);
    return std::isfinite(value) &&
           value <= std::exp(1.0) * w + tol * (1.0 + std::abs(w));
  }
  if (u <= tol) return v >= -tol && w >= -tol;
  return false;
}

inline ExpCase classify_exp(const Eigen::Vector3d& z) {
  if (exp_cone_contains(z(0), z(1), z(2), 0.0)) return ExpCase::InCone;
  if (exp_dual_cone_contains(-z(0), -z(1), -z(2), 0.0)) return ExpCase::InPolar;
  if (z(0) < 0.0 && z(1) < 0.0) return ExpCase::BothNegative;
  return ExpCase::NeedsSolve;
}

}  // namespace detail

struct ExpProjection {
  Eigen::Vector3d z_star;
  double nu_star = 0.0;
  int newton_iters = 0;
  bool used_bisection = false;
};

namespace detail {

/// KKT residual of the boundary projection problem at gamma = (a, b, c, nu):
///   a - z1 + nu e^{a/b} = 0
///   b - z2 + nu e^{a/b} (1 - a/b) = 0
///   c - z3 - nu = 0
///   b e^{a/b} - c = 0
inline Eigen::Vector4d exp_kkt_residual(const Eigen::Vector4d& gamma, const Eigen::Vector3d& z) {
  const double a = gamma(0), b = gamma(1), c = gamma(2), nu = gamma(3);
  const double r = a / b;
  const double t = safe_exp(r);
  Eigen::Vector4d res;
  res(0) = a - z(0) + nu * t;
  res(1) = b - z(1) + nu * t * (1.0 - r);
  res(2) = c - z(2) - nu;
  res(3) = b * t - c;
  return res;
}

/// Differential of the KKT residual map (the same 4x4 matrix the projection
/// Jacobian is read from).
inline Eigen::Matrix4d exp_kkt_matrix(double a, double b, double nu) {
  const double r = a / b;
  const double t = safe_exp(r);
  Eigen::Matrix4d d;
  d << 1.0 + nu * t / b, -nu * t * a / (b * b), 0.0, t,
       -nu * t * a / (b * b), 1.0 + nu * t * a * a / (b * b * b), 0.0, (1.0 - r) * t,
       0.0, 0.0, 1.0, -1.0,
       t, (1.0 - r) * t, -1.0, 0.0;
  return d;
}

/// Bisection fallback in r = z1*/z2*. Eliminating the multiplier from the
/// KKT system leaves the scalar equation phi(r) = 0 with
///   t(r) = (z1 - r z2) / (r^2 - r + 1),   z2*(r) = z2 + t (r - 1),
///   phi(r) = z2*(r) e^r - z3 - t e^{-r},
/// valid where z2*(r) > 0.
inline bool exp_bisection(const Eigen::Vector3d& z, Eigen::Vector4d& gamma) {
  const auto phi = [&z](double r, double& b_out, double& nu_out) {
    const double t = (z(0) - r * z(1)) / (r * r - r + 1.0);
    b_out = z(1) + t * (r - 1.0);
    nu_out = t * safe_exp(-r);
    return b_out * safe_exp(r) - z(2) - nu_out;
  };

  // Scan for a sign change over an expanding grid restricted to b(r) > 0.
  constexpr double kSpan = 60.0;
  constexpr int kGrid = 4801;
  double rlo = 0.0, rhi = 0.0;
  bool have_bracket = false;
  double prev_r = 0.0, prev_phi = 0.0;
  bool have_prev = false;
  for (int i = 0; i < kGrid; ++i) {
    const double r = -kSpan + 2.0 * kSpan * static_cast<double>(i) / (kGrid - 1);
    double b, nu;
    const double value = phi(r, b, nu);
    if (!(b > 0.0) || !std::isfinite(value)) {
      have_prev = false;
      continue;
    }
    if (have_prev && prev_phi * value <= 0.0) {
      rlo = prev_r;
      rhi = r;
      have_bracket = true;
      break;
    }
    prev_r = r;
    prev_phi = value;
    have_prev = true;
  }
  if (!have_bracket) return false;

  double b_lo, nu_lo;
  double phi_lo = phi(rlo, b_lo, nu_lo);
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (rlo + rhi);
    double b_mid, nu_mid;
    const double phi_mid = phi(mid, b_mid, nu_mid);
    if (phi_lo * phi_mid <= 0.0) {
      rhi = mid;
    } else {
      rlo = mid;
      phi_lo = phi_mid;
    }
  }
  const double r = 0.5 * (rlo + rhi);
  double b, nu;
  phi(r, b, nu);
  if (!(b > 0.0)) return false;
  gamma << r * b, b, z(2) + nu, nu;
  return true;
}

}  // namespace detail

/// Solves the boundary case of the exponential-cone projection through its
/// KKT system with a damped Newton method (step halving keeps the second
/// component positive), falling back to bisection in z1*/z2* if Newton
/// stalls. Returns the projection and its multiplier.
inline ExpProjection project_exp_kkt(const Eigen::Vector3d& z) {
  constexpr double kResidualTol = 1e-12;
  constexpr int kMaxNewton = 100;

  ExpProjection out;
  Eigen::Vector4d gamma;
  {
    const double a0 = std::max(z(0), 1.0);
    const double b0 = std::max(z(1), 1.0);
    const double c0 = std::max(b0 * detail::safe_exp(a0 / b0), 1e-6);
    gamma << a0, b0, c0, 0.0;
  }

  Eigen::Vector4d residual = detail::exp_kkt_residual(gamma, z);
  bool converged = false;
  for (int iter = 0; iter < kMaxNewton; ++iter) {
    if (residual.cwiseAbs().maxCoeff() <= kResidualTol) {
      converged = true;
      out.newton_iters = iter;
      break;
    }
    const Eigen::Matrix4d d = detail::exp_kkt_matrix(gamma(0), gamma(1), gamma(3));
    const Eigen::Vector4d step = d.fullPivLu().solve(-residual);
    if (!step.allFinite()) break;

    double scale = 1.0;
    bool accepted = false;
    const double res_norm = residual.norm();
    for (int halving = 0; halving < 60; ++halving) {
      const Eigen::Vector4d candidate = gamma + scale * step;
      if (candidate(1) > 1e-14) {
        const Eigen::Vector4d cand_res = detail::exp_kkt_residual(candidate, z);
        if (cand_res.allFinite() && cand_res.norm() < res_norm) {
          gamma = candidate;
          residual = cand_res;
          accepted = true;
          break;
        }
      }
      scale *= 0.5;
    }
    if (!accepted) break;  // stalled; bisection below
  }

  if (!converged) {
    Eigen::Vector4d bis;
    if (!detail::exp_bisection(z, bis))
      throw std::runtime_error("project_exp_kkt: Newton stalled and bisection found no root");
    gamma = bis;
    residual = detail::exp_kkt_residual(gamma, z);
    out.used_bisection = true;
    // polish
    for (int iter = 0; iter < 50 && residual.cwiseAbs().maxCoeff() > kResidualTol; ++iter) {
      const Eigen::Matrix4d d = detail::exp_kkt_matrix(gamma(0), gamma(1), gamma(3));
      const Eigen::Vector4d step = d.fullPivLu().solve(-residual);
      double scale = 1.0;
      for (int halving = 0; halving < 60; ++halving) {
        const Eigen::Vector4d candidate = gamma + scale * step;
        if (candidate(1) > 1e-14) {
          const Eigen::Vector4d cand_res = detail::exp_kkt_residual(candidate, z);
          if (cand_res.allFinite() && cand_res.norm() < residual.norm()) {
            gamma = candidate;
            residual = cand_res;
            break;
          }
        }
        scale *= 0.5;
      }
    }
    if (residual.cwiseAbs().maxCoeff() > 1e-10)
      throw std::runtime_error("project_exp_kkt: failed to reach KKT tolerance");
  }

  out.nu_star = gamma(3);
  out.z_star << gamma(0), gamma(1), z(2) + gamma(3);  // third KKT equation, exactly
  return out;
}

namespace detail {

inline Eigen::Vector3d project_exp_primal(const Eigen::Vector3d& z) {
  switch (classify_exp(z)) {
    case ExpCase::InCone: return z;
    case ExpCase::InPolar: return Eigen::Vector3d::Zero();
    case ExpCase::BothNegative:
      return {z(0), std::max(z(1), 0.0), std::max(z(2), 0.0)};
    case ExpCase::NeedsSolve: return project_exp_kkt(z).z_star;
  }
  return z;
}

inline Vector project_psd(const Vector& z) {
  const Index s = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(z.size()))));
  const Eigen::Map<const Matrix> mat(z.data(), s, s);
  const SymEig eig = sym_eig(mat);
  const Vector clipped = eig.eigenvalues.cwiseMax(0.0);
  const Matrix projected =
      eig.eigenvectors * clipped.asDiagonal() * eig.eigenvectors.transpose();
  const Matrix symmetrized = 0.5 * (projected + projected.transpose());
  return Eigen::Map<const Vector>(symmetrized.data(), s * s);
}

inline Vector project_soc(const Vector& z) {
  const Index m = z.size();
  if (m == 1) return z.cwiseMax(0.0);  // one-dimensional second-order cone is R+
  const double head_norm = z.head(m - 1).norm();
  const double tail = z(m - 1);
  if (head_norm <= tail) return z;  // in-cone branch wins ties
  if (head_norm <= -tail) return Vector::Zero(m);
  Vector out(m);
  const double coeff = 0.5 * (1.0 + tail / head_norm);
  out.head(m - 1) = coeff * z.head(m - 1);
  out(m - 1) = coeff * head_norm;
  return out;
}

}  // namespace detail

/// Euclidean projection onto the block's cone.
inline Vector project(const ConeBlock& cone, const Vector& z) {
  if (z.size() != cone.dim) throw std::invalid_argument("project: dimension mismatch");
  switch (cone.kind) {
    case ConeKind::Zero: return Vector::Zero(cone.dim);
    case ConeKind::Free: return z;
    case ConeKind::NonNegative: return z.cwiseMax(0.0);
    case ConeKind::SecondOrder: return detail::project_soc(z);
    case ConeKind::Psd: return detail::project_psd(z);
    case ConeKind::ExpPrimal: return detail::project_exp_primal(z);
    case ConeKind::ExpDual: {
      // Moreau: P_{K*}(z) = z + P_K(-z)
      const Eigen::Vector3d v = z;
      return Vector(v + detail::project_exp_primal(-v));
    }
  }
  throw std::logic_error("project: unknown cone kind");
}

/// Euclidean projection onto the dual of the block's cone.
inline Vector project_dual(const ConeBlock& cone, const Vector& z) {
  if (z.size() != cone.dim) throw std::invalid_argument("project_dual: dimension mismatch");
  switch (cone.kind) {
    case ConeKind::Zero: return z;                   // dual of {0} is everything
    case ConeKind::Free: return Vector::Zero(cone.dim);  // dual of R^n is {0}
    case ConeKind::NonNegative:
    case ConeKind::SecondOrder:
    case ConeKind::Psd:
      return project(cone, z);  // self-dual
    case ConeKind::ExpPrimal: return project(ConeBlock::exp_dual(), z);
    case ConeKind::ExpDual: return project(ConeBlock::exp_primal(), z);
  }
  throw std::logic_error("project_dual: unknown cone kind");
}

inline Vector project(const ConeProduct& cones, const Vector& z) {
  if (z.size() != cones.total_dim) throw std::invalid_argument("project: dimension mismatch");
  Vector out(z.size());
  for (std::size_t i = 0; i < cones.blocks.size(); ++i) {
    const Index off = cones.offsets[i];
    const Index dim = cones.blocks[i].dim;
    out.segment(off, dim) = project(cones.blocks[i], z.segment(off, dim));
  }
  return out;
}

inline Vector project_dual(const ConeProduct& cones, const Vector& z) {
  if (z.size() != cones.total_dim) throw std::invalid_argument("project_dual: dimension mismatch");
  Vector out(z.size());
  for (std::size_t i = 0; i < cones.blocks.size(); ++i) {
    const Index off = cones.offsets[i];
    const Index dim = cones.blocks[i].dim;
    out.segment(off, dim) = project_dual(cones.blocks[i], z.segment(off, dim));
  }
  return out;
}

/// Membership up to `tol` in the natural residual of each cone: smallest
/// component for the orthant, z2 - ||z1|| for the second-order cone, the
/// minimum eigenvalue for the semidefinite cone (relative to ||Z||_F), and
/// the case conditions for the exponential cone.
inline bool in_cone(const ConeBlock& cone, const Vector& z, double tol) {
  if (z.size() != cone.dim) throw std::invalid_argument("in_cone: dimension mismatch");
  switch (cone.kind) {
    case ConeKind::Zero: return z.cwiseAbs().maxCoeff() <= tol;
    case ConeKind::Free: return true;
    case ConeKind::NonNegative: return z.minCoeff() >= -tol;
    case ConeKind::SecondOrder: {
      if (cone.dim == 1) return z(0) >= -tol;
      return z.head(cone.dim - 1).norm() <= z(cone.dim - 1) + tol;
    }
    case ConeKind::Psd: {
      const Index s = cone.psd_order();
      const Eigen::Map<const Matrix> mat(z.data(), s, s);
      const SymEig eig = sym_eig(mat);
      return eig.eigenvalues.minCoeff() >= -tol * (1.0 + mat.norm());
    }
    case ConeKind::ExpPrimal: return detail::exp_cone_contains(z(0), z(1), z(2), tol);
    case ConeKind::ExpDual: return detail::exp_dual_cone_contains(z(0), z(1), z(2), tol);
  }
  throw std::logic_error("in_cone: unknown cone kind");
}

inline bool in_dual_cone(const ConeBlock& cone, const Vector& z, double tol) {
  switch (cone.kind) {
    case ConeKind::Zero: return in_cone(ConeBlock::free(cone.dim), z, tol);
    case ConeKind::Free: return in_cone(ConeBlock::zero(cone.dim), z, tol);
    case ConeKind::NonNegative:
    case ConeKind::SecondOrder:
    case ConeKind::Psd:
      return in_cone(cone, z, tol);
    case ConeKind::ExpPrimal: return in_cone(ConeBlock::exp_dual(), z, tol);
    case ConeKind::ExpDual: return in_cone(ConeBlock::exp_primal(), z, tol);
  }
  throw std::logic_error("in_dual_cone: unknown cone kind");
}

inline bool in_cone(const ConeProduct& cones, const Vector& z, double tol) {
  for (std::size_t i = 0; i < cones.blocks.size(); ++i) {
    if (!in_cone(cones.blocks[i], z.segment(cones.offsets[i], cones.blocks[i].dim), tol))
      return false;
  }
  return true;
}

inline bool in_dual_cone(const ConeProduct& cones, const Vector& z, double tol) {
  for (std::size_t i = 0; i < cones.blocks.size(); ++i) {
    if (!in_dual_cone(cones.blocks[i], z.segment(cones.offsets[i], cones.blocks[i].dim), tol))
      return false;
  }
  return true;
}

}  // namespace conic_newton
