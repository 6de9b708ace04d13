#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "conic_newton/cones.hpp"
#include "conic_newton/linalg.hpp"
#include "conic_newton/trace.hpp"

namespace conic_newton {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// A cone program  min c'x  s.t.  Ax + s = b,  s in K,  with K the ordered
/// product of `cones` over the m constraint rows.
struct ConeProgram {
  Index n = 0;
  Index m = 0;
  Vector c;
  SparseMatrix A;
  Vector b;
  ConeProduct cones;
};

/// Structural checks; returns one message per violation (empty when valid).
inline std::vector<std::string> validate(const ConeProgram& p) {
  std::vector<std::string> violations;
  if (p.n < 1) violations.push_back("n: must be >= 1");
  if (p.m < 1) violations.push_back("m: must be >= 1");
  if (p.c.size() != p.n)
    violations.push_back("c: length " + std::to_string(p.c.size()) + " != n = " + std::to_string(p.n));
  if (p.b.size() != p.m)
    violations.push_back("b: length " + std::to_string(p.b.size()) + " != m = " + std::to_string(p.m));
  if (p.A.rows() != p.m || p.A.cols() != p.n)
    violations.push_back("A: shape " + std::to_string(p.A.rows()) + "x" + std::to_string(p.A.cols()) +
                         " != " + std::to_string(p.m) + "x" + std::to_string(p.n));
  if (p.c.size() == p.n && !p.c.allFinite()) violations.push_back("c: non-finite entry");
  if (p.b.size() == p.m && !p.b.allFinite()) violations.push_back("b: non-finite entry");
  Index triplet = 0;
  for (int k = 0; k < p.A.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(p.A, k); it; ++it, ++triplet) {
      if (!std::isfinite(it.value())) {
        violations.push_back("A: non-finite value at (" + std::to_string(it.row()) + "," +
                             std::to_string(it.col()) + "), triplet " + std::to_string(triplet));
      }
    }
  }
  Index off = 0;
  for (std::size_t i = 0; i < p.cones.blocks.size(); ++i) {
    const auto& block = p.cones.blocks[i];
    const std::string problem = block.check();
    if (!problem.empty())
      violations.push_back("cones[" + std::to_string(i) + "] (rows " + std::to_string(off) + ".." +
                           std::to_string(off + block.dim - 1) + "): " + problem);
    off += block.dim;
  }
  if (p.cones.total_dim != p.m)
    violations.push_back("cones: total_dim = " + std::to_string(p.cones.total_dim) +
                         " does not cover m = " + std::to_string(p.m) + " rows");
  return violations;
}

/// The homogeneous self-dual embedding of a cone program: the skew matrix
///      Q = [ 0   A'  c ]
///          [-A   0   b ]
///          [-c' -b'  0 ]
/// over u = (x, y, tau), v = (r, s, kappa), with the I+Q factorization
/// cached once and shared by every sweep and Newton step.
class Embedding {
 public:
  explicit Embedding(const ConeProgram& p)
      : n_(p.n), m_(p.m), k_(p.n + p.m + 1), c_(p.c), b_(p.b), at_(p.A.transpose()), a_(p.A),
        cones_(p.cones) {
    Matrix iq = Matrix::Identity(k_, k_);
    iq.block(0, n_, n_, m_) += Matrix(at_);
    iq.block(n_, 0, m_, n_) -= Matrix(a_);
    iq.block(0, k_ - 1, n_, 1) += c_;
    iq.block(n_, k_ - 1, m_, 1) += b_;
    iq.block(k_ - 1, 0, 1, n_) -= c_.transpose();
    iq.block(k_ - 1, n_, 1, m_) -= b_.transpose();
    factor_ = std::make_shared<DenseFactorization>(iq);
  }

  Index n() const { return n_; }
  Index m() const { return m_; }
  Index k() const { return k_; }
  const Vector& c() const { return c_; }
  const Vector& b() const { return b_; }
  const ConeProduct& cones() const { return cones_; }
  const DenseFactorization& iplusq() const { return *factor_; }

  Vector apply_Q(const Vector& w) const {
    if (w.size() != k_) throw std::invalid_argument("apply_Q: dimension mismatch");
    Vector out(k_);
    const auto wx = w.head(n_);
    const auto wy = w.segment(n_, m_);
    const double wt = w(k_ - 1);
    out.head(n_) = at_ * wy + c_ * wt;
    out.segment(n_, m_) = -(a_ * wx) + b_ * wt;
    out(k_ - 1) = -c_.dot(wx) - b_.dot(wy);
    return out;
  }

  LinearOperator q_operator() const {
    return {k_, [this](const Vector& w) { return apply_Q(w); }};
  }

  /// Dense Q, for inspection on small instances only.
  Matrix dense_Q() const {
    if (k_ > 500) throw std::logic_error("dense_Q: materialization restricted to k <= 500");
    Matrix q = Matrix::Zero(k_, k_);
    q.block(0, n_, n_, m_) = Matrix(at_);
    q.block(n_, 0, m_, n_) = -Matrix(a_);
    q.block(0, k_ - 1, n_, 1) = c_;
    q.block(n_, k_ - 1, m_, 1) = b_;
    q.block(k_ - 1, 0, 1, n_) = -c_.transpose();
    q.block(k_ - 1, n_, 1, m_) = -b_.transpose();
    return q;
  }

 private:
  Index n_, m_, k_;
  Vector c_, b_;
  SparseMatrix at_, a_;
  ConeProduct cones_;
  std::shared_ptr<DenseFactorization> factor_;
};

inline Embedding build_embedding(const ConeProgram& p) {
  const auto violations = validate(p);
  if (!violations.empty())
    throw std::invalid_argument("build_embedding: invalid program: " + violations.front());
  return Embedding(p);
}

enum class SolveStatus { Optimal, PrimalInfeasible, DualInfeasible, Indeterminate, IterLimit };

inline const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::PrimalInfeasible: return "PrimalInfeasible";
    case SolveStatus::DualInfeasible: return "DualInfeasible";
    case SolveStatus::Indeterminate: return "Indeterminate";
    case SolveStatus::IterLimit: return "IterLimit";
  }
  return "?";
}

struct SolveResult {
  SolveStatus status = SolveStatus::Indeterminate;
  std::optional<Vector> x;  // present iff Optimal
  std::optional<Vector> y;
  std::optional<Vector> s;
  std::optional<Vector> certificate;
  std::optional<double> objective;
  std::vector<TraceRecord> trace;
  double final_fnorm = 0.0;
  std::int64_t iterations = 0;
  std::int64_t sweeps = 0;        // plain ADMM sweeps performed (including fallbacks)
  std::int64_t f_evals = 0;       // fixed-point residual evaluations
  double wall_s = 0.0;
};

/// The stacked variable z = (u~, u, v) of the embedding, with named views
/// of the (x, y, tau) blocks of u~ and u and the (r, s, kappa) blocks of v.
struct Iterate {
  Vector u_tilde;
  Vector u;
  Vector v;
  Index n = 0;
  Index m = 0;

  Index k() const { return n + m + 1; }

  auto x() const { return u.head(n); }
  auto y() const { return u.segment(n, m); }
  double tau() const { return u(n + m); }
  auto x_tilde() const { return u_tilde.head(n); }
  auto y_tilde() const { return u_tilde.segment(n, m); }
  double tau_tilde() const { return u_tilde(n + m); }
  auto r() const { return v.head(n); }
  auto s() const { return v.segment(n, m); }
  double kappa() const { return v(n + m); }

  /// Algorithm start point: everything zero except the tau and kappa slots,
  /// which start at one so the homogeneous system is not solved trivially.
  static Iterate initial(Index n, Index m) {
    Iterate z;
    z.n = n;
    z.m = m;
    const Index k = n + m + 1;
    z.u_tilde = Vector::Zero(k);
    z.u = Vector::Zero(k);
    z.v = Vector::Zero(k);
    z.u_tilde(k - 1) = 1.0;
    z.u(k - 1) = 1.0;
    z.v(k - 1) = 1.0;
    return z;
  }

  Vector stacked() const {
    Vector out(3 * k());
    out << u_tilde, u, v;
    return out;
  }

  static Iterate from_stacked(const Vector& w, Index n, Index m) {
    const Index k = n + m + 1;
    if (w.size() != 3 * k) throw std::invalid_argument("Iterate::from_stacked: size mismatch");
    Iterate z;
    z.n = n;
    z.m = m;
    z.u_tilde = w.head(k);
    z.u = w.segment(k, k);
    z.v = w.tail(k);
    return z;
  }

  double norm() const {
    return std::sqrt(u_tilde.squaredNorm() + u.squaredNorm() + v.squaredNorm());
  }

  double linf_norm() const {
    return std::max({u_tilde.cwiseAbs().maxCoeff(), u.cwiseAbs().maxCoeff(),
                     v.cwiseAbs().maxCoeff()});
  }

  bool all_finite() const { return u_tilde.allFinite() && u.allFinite() && v.allFinite(); }

  Iterate plus_scaled(double t, const Vector& delta) const {
    const Index k = this->k();
    if (delta.size() != 3 * k) throw std::invalid_argument("Iterate::plus_scaled: size mismatch");
    Iterate out = *this;
    out.u_tilde += t * delta.head(k);
    out.u += t * delta.segment(k, k);
    out.v += t * delta.tail(k);
    return out;
  }
};

/// Reads the feasibility status and solution off a converged embedding
/// iterate. tau bounded away from zero yields the scaled primal-dual
/// solution; otherwise the sign of c'u_x / b'u_y picks the infeasibility
/// certificate, and Indeterminate covers the degenerate remainder. The
/// threshold is tol * (1 + ||z||_inf).
inline SolveResult extract(const ConeProgram& p, const Iterate& z, double tol = 1e-9) {
  if (z.n != p.n || z.m != p.m) throw std::invalid_argument("extract: iterate/program mismatch");
  SolveResult result;
  const double eff_tol = tol * (1.0 + z.linf_norm());
  const double tau = z.tau();
  if (tau > eff_tol) {
    result.status = SolveStatus::Optimal;
    result.x = Vector(z.x() / tau);
    result.y = Vector(z.y() / tau);
    result.s = Vector(z.s() / tau);
    result.objective = p.c.dot(*result.x);
    return result;
  }
  const double ctx = p.c.dot(z.x());
  const double bty = p.b.dot(z.y());
  if (ctx < -eff_tol) {
    result.status = SolveStatus::DualInfeasible;
    result.certificate = Vector(z.x() / (-ctx));  // c' cert = -1, -A cert in K
    return result;
  }
  if (bty < -eff_tol) {
    result.status = SolveStatus::PrimalInfeasible;
    result.certificate = Vector(z.y() / (-bty));  // b' cert = -1, A' cert = 0, cert in K*
    return result;
  }
  result.status = SolveStatus::Indeterminate;
  return result;
}

namespace detail {

inline ConeKind cone_kind_from_name(const std::string& name) {
  if (name == "zero") return ConeKind::Zero;
  if (name == "free") return ConeKind::Free;
  if (name == "nonneg") return ConeKind::NonNegative;
  if (name == "soc") return ConeKind::SecondOrder;
  if (name == "psd") return ConeKind::Psd;
  if (name == "exp") return ConeKind::ExpPrimal;
  if (name == "exp_dual") return ConeKind::ExpDual;
  throw std::runtime_error("unknown cone kind \"" + name + "\"");
}

inline void require_keys(const nlohmann::json& obj, const std::vector<std::string>& keys,
                         const std::string& where) {
  for (const auto& key : keys) {
    if (!obj.contains(key)) throw std::runtime_error(where + ": missing field \"" + key + "\"");
  }
  for (const auto& item : obj.items()) {
    if (std::find(keys.begin(), keys.end(), item.key()) == keys.end())
      throw std::runtime_error(where + ": unknown field \"" + item.key() + "\"");
  }
}

inline Vector vector_from_json(const nlohmann::json& arr, const std::string& where) {
  if (!arr.is_array()) throw std::runtime_error(where + ": expected an array");
  Vector out(arr.size());
  Index i = 0;
  for (const auto& item : arr) {
    if (!item.is_number()) throw std::runtime_error(where + ": non-numeric entry");
    out(i++) = item.get<double>();
  }
  return out;
}

}  // namespace detail

/// On-disk problem format: a single JSON document
///   {version, n, m, c, b, A: {rows, cols, vals}, cones: [{kind, dim}]}
/// with doubles printed as shortest round-trip decimals, so write/read is
/// an exact identity. Parsing is strict: unknown fields and unknown cone
/// kinds are errors.
inline void write_program(const ConeProgram& p, const std::string& path) {
  const auto violations = validate(p);
  if (!violations.empty())
    throw std::invalid_argument("write_program: invalid program: " + violations.front());
  nlohmann::json doc;
  doc["version"] = 1;
  doc["n"] = p.n;
  doc["m"] = p.m;
  doc["c"] = std::vector<double>(p.c.data(), p.c.data() + p.c.size());
  doc["b"] = std::vector<double>(p.b.data(), p.b.data() + p.b.size());
  std::vector<Index> rows, cols;
  std::vector<double> vals;
  rows.reserve(p.A.nonZeros());
  cols.reserve(p.A.nonZeros());
  vals.reserve(p.A.nonZeros());
  for (int k = 0; k < p.A.outerSize(); ++k) {  // column-major order: deterministic
    for (SparseMatrix::InnerIterator it(p.A, k); it; ++it) {
      rows.push_back(it.row());
      cols.push_back(it.col());
      vals.push_back(it.value());
    }
  }
  doc["A"] = {{"rows", rows}, {"cols", cols}, {"vals", vals}};
  nlohmann::json cones = nlohmann::json::array();
  for (const auto& block : p.cones.blocks)
    cones.push_back({{"kind", cone_kind_name(block.kind)}, {"dim", block.dim}});
  doc["cones"] = cones;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_program: cannot open " + path);
  out << doc.dump() << '\n';
  if (!out) throw std::runtime_error("write_program: write failed for " + path);
}

inline ConeProgram read_program(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_program: cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("read_program: " + path + ": " + e.what());
  }
  detail::require_keys(doc, {"version", "n", "m", "c", "b", "A", "cones"}, path);
  if (!doc["version"].is_number_integer() || doc["version"].get<int>() != 1)
    throw std::runtime_error(path + ": version: expected 1");

  ConeProgram p;
  p.n = doc["n"].get<Index>();
  p.m = doc["m"].get<Index>();
  p.c = detail::vector_from_json(doc["c"], path + ": c");
  p.b = detail::vector_from_json(doc["b"], path + ": b");

  detail::require_keys(doc["A"], {"rows", "cols", "vals"}, path + ": A");
  const auto& rows = doc["A"]["rows"];
  const auto& cols = doc["A"]["cols"];
  const auto& vals = doc["A"]["vals"];
  if (rows.size() != cols.size() || rows.size() != vals.size())
    throw std::runtime_error(path + ": A: rows/cols/vals lengths differ");
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Index r = rows[i].get<Index>();
    const Index col = cols[i].get<Index>();
    if (r < 0 || r >= p.m || col < 0 || col >= p.n)
      throw std::runtime_error(path + ": A: triplet " + std::to_string(i) + " out of range");
    triplets.emplace_back(r, col, vals[i].get<double>());
  }
  p.A.resize(p.m, p.n);
  p.A.setFromTriplets(triplets.begin(), triplets.end());

  if (!doc["cones"].is_array()) throw std::runtime_error(path + ": cones: expected an array");
  std::vector<ConeBlock> blocks;
  for (std::size_t i = 0; i < doc["cones"].size(); ++i) {
    const auto& entry = doc["cones"][i];
    const std::string where = path + ": cones[" + std::to_string(i) + "]";
    detail::require_keys(entry, {"kind", "dim"}, where);
    ConeBlock block{detail::cone_kind_from_name(entry["kind"].get<std::string>()),
                    entry["dim"].get<Index>()};
    const std::string problem = block.check();
    if (!problem.empty()) throw std::runtime_error(where + ": " + problem);
    blocks.push_back(block);
  }
  p.cones = ConeProduct::from(std::move(blocks));

  const auto violations = validate(p);
  if (!violations.empty()) throw std::runtime_error(path + ": " + violations.front());
  return p;
}

}  // namespace conic_newton
