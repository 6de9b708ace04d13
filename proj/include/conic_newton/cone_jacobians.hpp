#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <variant>

#include "conic_newton/cones.hpp"
#include "conic_newton/linalg.hpp"

namespace conic_newton {

/// The projection onto the exponential cone is the constant 0 on the
/// interior of the polar cone, so its derivative there is the zero matrix.
/// The generalized-Jacobian element this library hands out at such points
/// is switchable: the default is -I (the stated convention this solver
/// family uses); ZeroOnPolar selects the actual derivative. The
/// finite-difference suite documents that ZeroOnPolar is the one matching
/// the projection's derivative.
enum class ExpJacobianConvention { NegIdentityOnPolar, ZeroOnPolar };

namespace detail {

struct ZeroJac {};
struct IdentityJac {};
struct ScaledIdentityJac {
  double factor;
};
struct DiagJac {
  Vector diag;
};
/// Second-order cone, boundary case: diagonal plus rank-two structure, kept
/// matrix-free.
struct SocJac {
  Vector z1;
  double z2;
  double norm;
};
/// Semidefinite cone: Q, eigenvalues, and the divided-difference mask; a
/// Jacobian-vector product is Q (Gamma o (Q^T Ztilde Q)) Q^T.
struct PsdJac {
  Matrix q;
  Matrix gamma;
  Index order;
};
struct DenseJac {
  Matrix m;
};

using JacRepr = std::variant<ZeroJac, IdentityJac, ScaledIdentityJac, DiagJac, SocJac, PsdJac, DenseJac>;

}  // namespace detail

/// One generalized-Jacobian element of a cone projection, taken at a fixed
/// point. Holds whatever precomputed state the block needs (masks, norms,
/// an eigendecomposition) so that apply() is cheap inside a Krylov loop.
class ConeJacobian {
 public:
  ConeJacobian(Index dim, detail::JacRepr repr) : dim_(dim), repr_(std::move(repr)) {}

  Index dim() const { return dim_; }

  Vector apply(const Vector& v) const {
    if (v.size() != dim_) throw std::invalid_argument("ConeJacobian::apply: dimension mismatch");
    return std::visit([&](const auto& repr) { return apply_repr(repr, v); }, repr_);
  }

  /// Dense materialization (test use; applies the operator to the basis).
  Matrix dense() const {
    Matrix out(dim_, dim_);
    Vector e = Vector::Zero(dim_);
    for (Index j = 0; j < dim_; ++j) {
      e(j) = 1.0;
      out.col(j) = apply(e);
      e(j) = 0.0;
    }
    return out;
  }

 private:
  Vector apply_repr(const detail::ZeroJac&, const Vector& v) const { return Vector::Zero(v.size()); }
  Vector apply_repr(const detail::IdentityJac&, const Vector& v) const { return v; }
  Vector apply_repr(const detail::ScaledIdentityJac& repr, const Vector& v) const {
    return repr.factor * v;
  }
  Vector apply_repr(const detail::DiagJac& repr, const Vector& v) const {
    return repr.diag.cwiseProduct(v);
  }
  Vector apply_repr(const detail::SocJac& repr, const Vector& v) const {
    const Index m = dim_;
    const auto v1 = v.head(m - 1);
    const double vm = v(m - 1);
    const double inner = repr.z1.dot(v1);
    Vector out(m);
    out.head(m - 1) = 0.5 * v1 +
                      (repr.z2 / (2.0 * repr.norm)) * (v1 - (inner / (repr.norm * repr.norm)) * repr.z1) +
                      (vm / (2.0 * repr.norm)) * repr.z1;
    out(m - 1) = inner / (2.0 * repr.norm) + 0.5 * vm;
    return out;
  }
  Vector apply_repr(const detail::PsdJac& repr, const Vector& v) const {
    const Index s = repr.order;
    const Eigen::Map<const Matrix> vt(v.data(), s, s);
    const Matrix sym = 0.5 * (vt + vt.transpose());
    const Matrix w = repr.q.transpose() * sym * repr.q;
    const Matrix t = repr.gamma.cwiseProduct(w);
    Matrix out = repr.q * t * repr.q.transpose();
    out = 0.5 * (out + out.transpose());
    return Eigen::Map<const Vector>(out.data(), s * s);
  }
  Vector apply_repr(const detail::DenseJac& repr, const Vector& v) const { return repr.m * v; }

  Index dim_;
  detail::JacRepr repr_;
};

/// Orthant projection Jacobian: diagonal 0/1 mask, 1 on the >= 0 side
/// (ties take the in-cone branch).
inline ConeJacobian jacobian_nonneg(const Vector& z) {
  Vector mask(z.size());
  for (Index i = 0; i < z.size(); ++i) mask(i) = z(i) >= 0.0 ? 1.0 : 0.0;
  return {z.size(), detail::DiagJac{std::move(mask)}};
}

/// Second-order cone projection Jacobian: 0 deep in the polar cone, I in
/// the cone, and the diagonal-plus-low-rank boundary matrix otherwise.
inline ConeJacobian jacobian_soc(const Vector& z) {
  const Index m = z.size();
  if (m == 1) return jacobian_nonneg(z);
  const double head_norm = z.head(m - 1).norm();
  const double tail = z(m - 1);
  if (head_norm <= tail) return {m, detail::IdentityJac{}};
  if (head_norm <= -tail) return {m, detail::ZeroJac{}};
  // third case: head_norm > |tail| >= 0 forces head_norm > 0
  if (!(head_norm > 0.0)) throw std::logic_error("jacobian_soc: zero z1 cannot reach the boundary case");
  return {m, detail::SocJac{z.head(m - 1), tail, head_norm}};
}

namespace detail {

/// Divided-difference mask of eigenvalue clipping. Off the diagonal this is
/// (max(li,0) - max(lj,0)) / (li - lj), zeroed when the gap falls below
/// 1e-10 * (1 + max|l|); the diagonal is the 0/1 indicator of li >= 0.
inline Matrix psd_gamma(const Vector& eigenvalues) {
  const Index s = eigenvalues.size();
  const double scale = 1.0 + eigenvalues.cwiseAbs().maxCoeff();
  Matrix gamma(s, s);
  for (Index i = 0; i < s; ++i) {
    for (Index j = 0; j < s; ++j) {
      if (i == j) {
        gamma(i, j) = eigenvalues(i) >= 0.0 ? 1.0 : 0.0;
      } else {
        const double gap = eigenvalues(i) - eigenvalues(j);
        if (std::abs(gap) > 1e-10 * scale) {
          gamma(i, j) =
              (std::max(eigenvalues(i), 0.0) - std::max(eigenvalues(j), 0.0)) / gap;
        } else {
          gamma(i, j) = 0.0;
        }
      }
    }
  }
  return gamma;
}

}  // namespace detail

/// Semidefinite-cone projection Jacobian at vec(Z), with the state
/// (one eigendecomposition) precomputed for repeated products.
inline ConeJacobian jacobian_psd(const Matrix& z) {
  const SymEig eig = sym_eig(z);
  return {z.rows() * z.rows(),
          detail::PsdJac{eig.eigenvectors, detail::psd_gamma(eig.eigenvalues), z.rows()}};
}

/// Jacobian-vector product of the semidefinite projection: the directional
/// derivative of eigenvalue clipping at Z in direction Ztilde, via the
/// eigenbasis divided-difference form of (dQ)L+Q^T + Q(dL+)Q^T + QL+(dQ)^T
/// with the pseudo-inverse convention for repeated eigenvalues.
inline Matrix jacobian_psd_jvp(const Matrix& z, const Matrix& ztilde) {
  if (z.rows() != ztilde.rows() || z.cols() != ztilde.cols() || z.rows() != z.cols())
    throw std::invalid_argument("jacobian_psd_jvp: shape mismatch");
  const ConeJacobian jac = jacobian_psd(z);
  const Matrix sym = 0.5 * (ztilde + ztilde.transpose());
  const Vector out = jac.apply(Eigen::Map<const Vector>(sym.data(), sym.size()));
  return Eigen::Map<const Matrix>(out.data(), z.rows(), z.rows());
}

/// Exponential-cone projection Jacobian. The boundary case solves the
/// projection's KKT system, assembles its 4x4 differential matrix at the
/// solution, and reads the Jacobian off the upper-left 3x3 block of the
/// inverse.
inline ConeJacobian jacobian_exp(const Eigen::Vector3d& z,
                                 ExpJacobianConvention convention = ExpJacobianConvention::NegIdentityOnPolar) {
  switch (detail::classify_exp(z)) {
    case detail::ExpCase::InCone: return {3, detail::IdentityJac{}};
    case detail::ExpCase::InPolar:
      if (convention == ExpJacobianConvention::NegIdentityOnPolar)
        return {3, detail::ScaledIdentityJac{-1.0}};
      return {3, detail::ZeroJac{}};
    case detail::ExpCase::BothNegative: {
      Vector diag(3);
      diag << 1.0, z(1) >= 0.0 ? 1.0 : 0.0, z(2) >= 0.0 ? 1.0 : 0.0;
      return {3, detail::DiagJac{std::move(diag)}};
    }
    case detail::ExpCase::NeedsSolve: {
      const ExpProjection proj = project_exp_kkt(z);
      const Eigen::Matrix4d d =
          detail::exp_kkt_matrix(proj.z_star(0), proj.z_star(1), proj.nu_star);
      const Eigen::FullPivLU<Eigen::Matrix4d> lu(d);
      if (!lu.isInvertible())
        throw std::runtime_error("jacobian_exp: singular KKT differential matrix");
      const Eigen::Matrix4d dinv = lu.inverse();
      return {3, detail::DenseJac{dinv.topLeftCorner<3, 3>()}};
    }
  }
  throw std::logic_error("jacobian_exp: unreachable");
}

/// Jacobian of the projection onto the dual of the block's cone, evaluated
/// at z. Self-dual blocks reuse their primal Jacobians; the exponential
/// block uses I - J_exp(-z) from the Moreau decomposition.
inline ConeJacobian jacobian_dual(const ConeBlock& cone, const Vector& z,
                                  ExpJacobianConvention convention = ExpJacobianConvention::NegIdentityOnPolar) {
  if (z.size() != cone.dim) throw std::invalid_argument("jacobian_dual: dimension mismatch");
  switch (cone.kind) {
    case ConeKind::Zero: return {cone.dim, detail::IdentityJac{}};  // dual is the free cone
    case ConeKind::Free: return {cone.dim, detail::ZeroJac{}};      // dual is {0}
    case ConeKind::NonNegative: return jacobian_nonneg(z);
    case ConeKind::SecondOrder: return jacobian_soc(z);
    case ConeKind::Psd: {
      const Index s = cone.psd_order();
      const Eigen::Map<const Matrix> mat(z.data(), s, s);
      return jacobian_psd(mat);
    }
    case ConeKind::ExpPrimal: {
      const Matrix inner = jacobian_exp(Eigen::Vector3d(-z), convention).dense();
      return {3, detail::DenseJac{Matrix::Identity(3, 3) - inner}};
    }
    case ConeKind::ExpDual: {
      // dual of the dual cone is the exponential cone itself
      return jacobian_exp(Eigen::Vector3d(z), convention);
    }
  }
  throw std::logic_error("jacobian_dual: unknown cone kind");
}

/// Blockwise Jacobian of the dual-cone projection of a product, i.e. the
/// stacked per-block Jacobians at the matching slices of z.
class ProductDualJacobian {
 public:
  ProductDualJacobian(const ConeProduct& cones, const Vector& z,
                      ExpJacobianConvention convention = ExpJacobianConvention::NegIdentityOnPolar)
      : cones_(&cones) {
    if (z.size() != cones.total_dim)
      throw std::invalid_argument("ProductDualJacobian: dimension mismatch");
    blocks_.reserve(cones.blocks.size());
    for (std::size_t i = 0; i < cones.blocks.size(); ++i) {
      blocks_.push_back(jacobian_dual(cones.blocks[i],
                                      z.segment(cones.offsets[i], cones.blocks[i].dim),
                                      convention));
    }
  }

  Vector apply(const Vector& v) const {
    Vector out(cones_->total_dim);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const Index off = cones_->offsets[i];
      const Index dim = cones_->blocks[i].dim;
      out.segment(off, dim) = blocks_[i].apply(v.segment(off, dim));
    }
    return out;
  }

 private:
  const ConeProduct* cones_;
  std::vector<ConeJacobian> blocks_;
};

}  // namespace conic_newton
