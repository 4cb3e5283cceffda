// SPDX-License-Identifier: Apache-2.0
//
// Driving measure mu of the recursion: a finite mixture of affine maps
// x -> M x + Q, optionally mixed with one family whose scale |M| is
// log-uniform on [a, b]. kappa(s) = E|M|^s is exact for both.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "affrec/error.hpp"
#include "affrec/group.hpp"
#include "affrec/rng.hpp"

namespace affrec {

struct AffineAtom {
  double prob = 0.0;
  Similarity m;
  Vector q;
};

/// |M| = exp(U), U uniform on [log a, log b]; orthogonal part and Q fixed.
struct LogUniformFamily {
  double prob = 0.0;
  double a = 1.0;
  double b = 1.0;
  std::vector<Matrix> orthogonal;
  Vector q;

  double log_width() const { return std::log(b) - std::log(a); }

  /// E|M|^s restricted to the family (without its weight).
  double moment(double s) const {
    const double lw = log_width();
    if (std::abs(s) * lw < 1e-8) return std::exp(s * 0.5 * (std::log(a) + std::log(b)));
    return (std::pow(b, s) - std::pow(a, s)) / (s * lw);
  }

  /// E[|M|^s log|M|] restricted to the family.
  double log_moment(double s) const {
    const double la = std::log(a);
    const double lb = std::log(b);
    const double lw = lb - la;
    if (std::abs(s) * lw < 1e-8) return 0.5 * (la + lb);
    const double bs = std::pow(b, s);
    const double as = std::pow(a, s);
    return ((bs * lb - as * la) * s - (bs - as)) / (s * s * lw);
  }
};

class MuSpec {
 public:
  MuSpec(BlockStructure blocks, std::vector<AffineAtom> atoms, std::optional<LogUniformFamily> family = std::nullopt)
      : blocks_(std::move(blocks)), atoms_(std::move(atoms)), family_(std::move(family)) {
    double total = 0.0;
    for (const auto& at : atoms_) {
      if (!(at.prob > 0.0) || at.prob > 1.0) throw InputError("atom probabilities must lie in (0, 1]");
      if (!(at.m.blocks() == blocks_)) throw InputError("all atoms must share the block structure");
      require_dim(blocks_, at.q.size(), "translation");
      total += at.prob;
    }
    if (family_) {
      const auto& f = *family_;
      if (!(f.prob > 0.0) || f.prob > 1.0) throw InputError("family probability must lie in (0, 1]");
      if (!(f.a > 0.0) || !(f.b > f.a)) throw InputError("log-uniform family needs 0 < a < b");
      require_dim(blocks_, f.q.size(), "family translation");
      Similarity::from_block_scales(blocks_, block_scales(f.a), f.orthogonal);  // validates shapes
      total += f.prob;
    }
    if (atoms_.empty() && !family_) throw InputError("measure has no atoms");
    if (std::abs(total - 1.0) > 1e-12) throw InputError("probabilities must sum to 1 within 1e-12");
    std::vector<double> distinct;
    for (const auto& at : atoms_) distinct.push_back(at.m.scale());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (!family_ && distinct.size() < 2) throw InputError("measure needs at least two distinct scales");
  }

  const BlockStructure& blocks() const { return blocks_; }
  int dim() const { return blocks_.dim(); }
  const std::vector<AffineAtom>& atoms() const { return atoms_; }
  const std::optional<LogUniformFamily>& family() const { return family_; }
  bool is_finite_mixture() const { return !family_.has_value(); }

  std::vector<double> atom_scales() const {
    std::vector<double> s;
    for (const auto& at : atoms_) s.push_back(at.m.scale());
    return s;
  }

  /// Similarity of the continuous family at scale a.
  Similarity family_map(double a) const {
    return Similarity(blocks_, a, family_->orthogonal);
  }

 private:
  std::vector<double> block_scales(double a) const {
    std::vector<double> s;
    for (int j = 0; j < blocks_.blocks(); ++j) s.push_back(std::pow(a, blocks_.exponent(j)));
    return s;
  }

  BlockStructure blocks_;
  std::vector<AffineAtom> atoms_;
  std::optional<LogUniformFamily> family_;
};

/// kappa(s) = E|M|^s.
inline double kappa(const MuSpec& mu, double s) {
  if (s < 0.0) throw InputError("kappa needs s >= 0");
  if (s == 0.0) return 1.0;
  double k = 0.0;
  for (const auto& at : mu.atoms()) k += at.prob * std::pow(at.m.scale(), s);
  if (mu.family()) k += mu.family()->prob * mu.family()->moment(s);
  return k;
}

/// E[|M|^s log|M|]; at s = alpha this is m_alpha, at s = 0 it is E log|M|.
inline double log_moment(const MuSpec& mu, double s) {
  double k = 0.0;
  for (const auto& at : mu.atoms()) k += at.prob * std::pow(at.m.scale(), s) * std::log(at.m.scale());
  if (mu.family()) k += mu.family()->prob * mu.family()->log_moment(s);
  return k;
}

inline double expected_log_scale(const MuSpec& mu) { return log_moment(mu, 0.0); }

/// Critical exponent: the positive root of kappa(s) = 1.
inline double solve_alpha(const MuSpec& mu) {
  if (expected_log_scale(mu) >= 0.0) throw HypothesisError("E log|M| >= 0, the recursion is not contracting");
  double hi = 1.0;
  while (kappa(mu, hi) <= 1.0) {
    hi *= 2.0;
    if (hi > 256.0) throw HypothesisError("kappa(s) stays below 1 on (0, 256]: no positive root");
  }
  double lo = hi / 2.0;
  for (int i = 0; i < 1100 && kappa(mu, lo) >= 1.0; ++i) lo /= 2.0;
  if (kappa(mu, lo) >= 1.0) throw NumericError("could not bracket the root of kappa");
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (kappa(mu, mid) < 1.0 ? lo : hi) = mid;
  }
  double s = 0.5 * (lo + hi);
  // Newton polish; kappa'(s) = E|M|^s log|M| > 0 at the root
  for (int i = 0; i < 4; ++i) {
    const double d = log_moment(mu, s);
    if (!(d > 0.0)) break;
    const double next = s - (kappa(mu, s) - 1.0) / d;
    if (!(next > lo && next < hi)) break;
    s = next;
  }
  return s;
}

inline double m_alpha(const MuSpec& mu, double alpha) {
  const double m = log_moment(mu, alpha);
  if (!(m > 0.0)) throw HypothesisError("m_alpha is not positive; alpha is inconsistent with kappa");
  return m;
}

inline GroupStructure group_structure(const MuSpec& mu, double tol = 1e-9) {
  if (mu.family()) return GroupStructure::dense(mu.atom_scales());
  return detect_group_structure(mu.atom_scales(), tol);
}

namespace detail {

/// E[M] of the continuous family alone.
inline Matrix family_mean_matrix(const BlockStructure& blocks, const LogUniformFamily& f) {
  Matrix z = Matrix::Zero(blocks.dim(), blocks.dim());
  for (int j = 0; j < blocks.blocks(); ++j)
    z.block(blocks.offset(j), blocks.offset(j), blocks.block_dim(j), blocks.block_dim(j)) =
        f.moment(blocks.exponent(j)) * f.orthogonal[static_cast<std::size_t>(j)];
  return z;
}

}  // namespace detail

/// E[M] as a matrix.
inline Matrix mean_operator(const MuSpec& mu) {
  const auto& blocks = mu.blocks();
  Matrix z = Matrix::Zero(mu.dim(), mu.dim());
  for (const auto& at : mu.atoms()) z += at.prob * at.m.matrix();
  if (mu.family()) z += mu.family()->prob * detail::family_mean_matrix(blocks, *mu.family());
  return z;
}

inline Vector mean_translation(const MuSpec& mu) {
  Vector q = Vector::Zero(mu.dim());
  for (const auto& at : mu.atoms()) q += at.prob * at.q;
  if (mu.family()) q += mu.family()->prob * mu.family()->q;
  return q;
}

struct MeanOperator {
  Matrix z;
  Vector m;
};

/// z = E M and the stationary mean m = (I - z)^{-1} E Q. Defined for alpha > 1.
inline MeanOperator mean_operator_and_mean(const MuSpec& mu, double alpha) {
  if (!(alpha > 1.0)) throw RegimeError("the stationary mean exists only for alpha > 1");
  MeanOperator out;
  out.z = mean_operator(mu);
  const Matrix a = Matrix::Identity(mu.dim(), mu.dim()) - out.z;
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) throw NumericError("I - E M is singular");
  out.m = lu.solve(mean_translation(mu));
  return out;
}

/// z restricted to the blocks with exponent below `lambda_cut` (other blocks zeroed).
inline Matrix restricted_mean_operator(const MuSpec& mu, double lambda_cut) {
  const auto& blocks = mu.blocks();
  Matrix z = mean_operator(mu);
  for (int j = 0; j < blocks.blocks(); ++j) {
    if (blocks.exponent(j) < lambda_cut) continue;
    const int o = blocks.offset(j);
    const int dj = blocks.block_dim(j);
    z.block(o, o, dj, dj).setZero();
  }
  return z;
}

/// Exact E[R R^T] of the stationary law from
///   S = E[M S M^T] + E[M m Q^T] + E[Q m^T M^T] + E[Q Q^T],
/// solved through vec(E[M S M^T]) = E[M (x) M] vec(S). Needs kappa(2) < 1.
inline Matrix stationary_second_moment(const MuSpec& mu, double alpha) {
  if (!(alpha > 2.0)) throw RegimeError("the stationary second moment is finite only for alpha > 2");
  const int d = mu.dim();
  const Vector m = mean_operator_and_mean(mu, alpha).m;
  Matrix mm = Matrix::Zero(d * d, d * d);
  Matrix rhs = Matrix::Zero(d, d);
  for (const auto& at : mu.atoms()) {
    const Matrix g = at.m.matrix();
    mm += at.prob * Eigen::kroneckerProduct(g, g).eval();
    rhs += at.prob * (g * m * at.q.transpose() + at.q * m.transpose() * g.transpose() + at.q * at.q.transpose());
  }
  if (mu.family()) {
    const auto& f = *mu.family();
    const auto& blocks = mu.blocks();
    // M = D_a K with D_a diagonal a^{lambda_i}; E[M (x) M] has entries E[a^{lambda_i + lambda_k}] (K (x) K).
    Matrix k = Matrix::Zero(d, d);
    for (int j = 0; j < blocks.blocks(); ++j)
      k.block(blocks.offset(j), blocks.offset(j), blocks.block_dim(j), blocks.block_dim(j)) = f.orthogonal[static_cast<std::size_t>(j)];
    const Matrix kk = Eigen::kroneckerProduct(k, k).eval();
    Matrix fm = Matrix::Zero(d * d, d * d);
    for (int r1 = 0; r1 < d; ++r1)
      for (int r2 = 0; r2 < d; ++r2) {
        const double e = f.moment( blocks.coordinate_exponent(r1) + blocks.coordinate_exponent(r2));
        fm.row(r1 * d + r2) = e * kk.row(r1 * d + r2);
      }
    mm += f.prob * fm;
    const Matrix ez = detail::family_mean_matrix(blocks, f);
    rhs += f.prob * (ez * m * f.q.transpose() + f.q * m.transpose() * ez.transpose() + f.q * f.q.transpose());
  }
  // Eigen is column-major: vec stacks columns, vec(A S B^T) = (B (x) A) vec(S); here A = B = M.
  Eigen::Map<const Vector> b(rhs.data(), d * d);
  const Matrix sys = Matrix::Identity(d * d, d * d) - mm;
  Eigen::FullPivLU<Matrix> lu(sys);
  if (!lu.isInvertible()) throw NumericError("second-moment system is singular");
  Vector s = lu.solve(b);
  Matrix out = Eigen::Map<Matrix>(s.data(), d, d);
  return 0.5 * (out + out.transpose());
}

/// Exact covariance of the stationary law (alpha > 2).
inline Matrix stationary_covariance(const MuSpec& mu, double alpha) {
  const Vector m = mean_operator_and_mean(mu, alpha).m;
  return stationary_second_moment(mu, alpha) - m * m.transpose();
}

struct HypothesisReport {
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double m_alpha = std::numeric_limits<double>::quiet_NaN();
  double e_log_m = 0.0;
  bool fixed_point_free = true;
  double moment_q_alpha = std::numeric_limits<double>::quiet_NaN();
  GroupStructure structure;
  std::vector<std::string> failures;

  bool ok() const { return failures.empty(); }
};

namespace detail {

/// Common fixed point of all maps, if any: least squares on the stacked
/// system (I - M_i) x = Q_i with residual threshold 1e-9.
inline std::optional<Vector> common_fixed_point(const MuSpec& mu) {
  const int d = mu.dim();
  std::vector<std::pair<Matrix, Vector>> rows;
  for (const auto& at : mu.atoms()) rows.emplace_back(Matrix::Identity(d, d) - at.m.matrix(), at.q);
  if (mu.family()) {
    const auto& f = *mu.family();
    for (double a : {f.a, std::sqrt(f.a * f.b), f.b}) rows.emplace_back(Matrix::Identity(d, d) - mu.family_map(a).matrix(), f.q);
  }
  Matrix a(static_cast<Eigen::Index>(rows.size()) * d, d);
  Vector b(static_cast<Eigen::Index>(rows.size()) * d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    a.block(static_cast<Eigen::Index>(i) * d, 0, d, d) = rows[i].first;
    b.segment(static_cast<Eigen::Index>(i) * d, d) = rows[i].second;
  }
  const Vector x = a.completeOrthogonalDecomposition().solve(b);
  const double resid = (a * x - b).norm();
  if (resid <= 1e-9 * std::max(1.0, b.norm())) return x;
  return std::nullopt;
}

}  // namespace detail

/// Checks every clause of the standing hypothesis and reports the failing ones.
inline HypothesisReport validate_hypothesis_H(const MuSpec& mu) {
  HypothesisReport r;
  r.e_log_m = expected_log_scale(mu);
  if (r.e_log_m >= 0.0) r.failures.push_back("E log|M| >= 0");
  try {
    r.structure = group_structure(mu);
  } catch (const Error& e) {
    r.failures.push_back(e.what());
  }
  if (r.e_log_m < 0.0) {
    try {
      r.alpha = solve_alpha(mu);
      r.m_alpha = m_alpha(mu, r.alpha);
    } catch (const Error& e) {
      r.failures.push_back(e.what());
    }
  }
  const auto fp = detail::common_fixed_point(mu);
  r.fixed_point_free = !fp.has_value();
  if (!r.fixed_point_free) r.failures.push_back("all maps share a fixed point");
  if (std::isfinite(r.alpha)) {
    double eq = 0.0;
    for (const auto& at : mu.atoms()) eq += at.prob * std::pow(tau(at.q, mu.blocks()), r.alpha);
    if (mu.family()) eq += mu.family()->prob * std::pow(tau(mu.family()->q, mu.blocks()), r.alpha);
    r.moment_q_alpha = eq;
  }
  return r;
}

/// Throws HypothesisError naming the first failed clause.
inline HypothesisReport require_hypothesis_H(const MuSpec& mu) {
  auto r = validate_hypothesis_H(mu);
  if (!r.ok()) throw HypothesisError(r.failures.front());
  return r;
}

/// Draws (M, Q) from mu. Atom matrices are precomputed; d = 1 has a scalar
/// fast path where M is the signed scale.
class AffineSampler {
 public:
  explicit AffineSampler(const MuSpec& mu) : mu_(&mu), dim_(mu.dim()) {
    double c = 0.0;
    for (const auto& at : mu.atoms()) {
      c += at.prob;
      cumulative_.push_back(c);
      mats_.push_back(at.m.matrix());
      trans_.push_back(at.q);
      scales_.push_back(at.m.scale());
    }
    if (mu.family()) {
      family_k_ = Matrix::Zero(dim_, dim_);
      const auto& blocks = mu.blocks();
      for (int j = 0; j < blocks.blocks(); ++j)
        family_k_.block(blocks.offset(j), blocks.offset(j), blocks.block_dim(j), blocks.block_dim(j)) =
            mu.family()->orthogonal[static_cast<std::size_t>(j)];
      exps_.resize(dim_);
      for (int i = 0; i < dim_; ++i) exps_(i) = blocks.coordinate_exponent(i);
    }
    if (!cumulative_.empty()) cumulative_.back() = mu.family() ? cumulative_.back() : 1.0;
    if (dim_ == 1) {
      for (const auto& m : mats_) scalar_m_.push_back(m(0, 0));
      for (const auto& q : trans_) scalar_q_.push_back(q(0));
    }
  }

  int dim() const { return dim_; }
  const MuSpec& measure() const { return *mu_; }
  std::size_t atom_count() const { return mats_.size(); }

  /// Index of the atom selected by u in (0,1); atom_count() means the family.
  std::size_t pick(double u) const {
    for (std::size_t i = 0; i < cumulative_.size(); ++i)
      if (u < cumulative_[i]) return i;
    return mu_->family() ? cumulative_.size() : cumulative_.size() - 1;
  }

  /// d = 1 draw: returns (M, Q) as scalars.
  std::pair<double, double> draw_scalar(RngStream& rng) const {
    const std::size_t i = pick(rng.uniform());
    if (i < scalar_m_.size()) return {scalar_m_[i], scalar_q_[i]};
    const auto& f = *mu_->family();
    const double a = std::exp(std::log(f.a) + rng.uniform() * f.log_width());
    return {a * f.orthogonal[0](0, 0), f.q(0)};
  }

  /// General draw into caller-provided storage. Returns the scale |M|.
  double draw(RngStream& rng, Matrix& m, Vector& q) const {
    const std::size_t i = pick(rng.uniform());
    if (i < mats_.size()) {
      m = mats_[i];
      q = trans_[i];
      return scales_[i];
    }
    const auto& f = *mu_->family();
    const double a = std::exp(std::log(f.a) + rng.uniform() * f.log_width());
    m = family_k_;
    for (int r = 0; r < dim_; ++r) m.row(r) *= std::pow(a, exps_(r));
    q = f.q;
    return a;
  }

  const Matrix& atom_matrix(std::size_t i) const { return mats_[i]; }
  const Vector& atom_translation(std::size_t i) const { return trans_[i]; }

 private:
  const MuSpec* mu_;
  int dim_;
  std::vector<double> cumulative_;
  std::vector<Matrix> mats_;
  std::vector<Vector> trans_;
  std::vector<double> scales_;
  std::vector<double> scalar_m_;
  std::vector<double> scalar_q_;
  Matrix family_k_;
  Vector exps_;
};

inline std::string describe(const HypothesisReport& r) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(6);
  os << "alpha=" << r.alpha << " m_alpha=" << r.m_alpha << " E_log_M=" << r.e_log_m
     << " structure=" << r.structure.describe() << " fixed_point_free=" << (r.fixed_point_free ? "true" : "false");
  return os.str();
}

}  // namespace affrec
