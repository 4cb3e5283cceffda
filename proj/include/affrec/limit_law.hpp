// SPDX-License-Identifier: Apache-2.0
//
// Limit laws of the normalized partial sums: centerings, the exponent C(v)
// of the characteristic function Phi = exp C in every regime, and the
// stability identities.
//
// C(v) for alpha < 2 is computed two ways from frozen batches:
//   direct:    t^a E[(chi_v(R/t) - 1) e^{i<R/t, W>} - compensator], with
//              R ~ nu and W = Z* v independent;
//   via delta: factor * m_alpha * t^a E[Lambda~(rep(W/t)) 1{r(W/t) >= 1}].
#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "affrec/error.hpp"
#include "affrec/group.hpp"
#include "affrec/measure.hpp"
#include "affrec/parallel.hpp"
#include "affrec/recursion.hpp"
#include "affrec/stats.hpp"
#include "affrec/tail.hpp"

namespace affrec {

struct VectorEstimate {
  Vector value;
  Vector se;
};

struct CovarianceEstimate {
  Matrix q;
  Matrix se;
};

/// Exact mean of the blocks with lo < lambda_j < hi (other blocks zero).
/// Block j has a mean only when lambda_j < alpha.
inline Vector partial_mean(const MuSpec& mu, double alpha, double lo, double hi) {
  const auto& b = mu.blocks();
  const Matrix z = mean_operator(mu);
  const Vector eq = mean_translation(mu);
  Vector m = Vector::Zero(b.dim());
  for (int j = 0; j < b.blocks(); ++j) {
    const double l = b.exponent(j);
    if (!(l > lo + 1e-12 && l < hi - 1e-12)) continue;
    if (!(l < alpha - 1e-12)) throw RegimeError("block mean does not exist (lambda_j >= alpha)");
    const int o = b.offset(j), dj = b.block_dim(j);
    const Matrix a = Matrix::Identity(dj, dj) - z.block(o, o, dj, dj);
    m.segment(o, dj) = a.fullPivLu().solve(eq.segment(o, dj));
  }
  return m;
}

/// Components of x in the blocks with lambda_j < a (below) or == a (at).
inline Vector block_part(const Vector& x, const BlockStructure& b, double a, bool at) {
  Vector y = Vector::Zero(x.size());
  for (int j = 0; j < b.blocks(); ++j) {
    const double l = b.exponent(j);
    if (at ? std::abs(l - a) <= 1e-9 : l < a - 1e-9) y.segment(b.offset(j), b.block_dim(j)) = x.segment(b.offset(j), b.block_dim(j));
  }
  return y;
}

/// Empirical covariance of the samples around m, with per-entry SE. With
/// `restrict_half` the blocks with lambda_j >= alpha/2 are zeroed.
inline CovarianceEstimate covariance_q(const TrajectoryBatch& samples, const Vector& m, double alpha,
                                       const BlockStructure& blocks, bool restrict_half = false) {
  if (!(alpha > 2.0)) throw RegimeError("the covariance form needs alpha > 2");
  const int d = samples.dim();
  if (m.size() != d) throw InputError("mean has the wrong dimension");
  require_dim(blocks, d, "samples");
  CovarianceEstimate out{Matrix::Zero(d, d), Matrix::Zero(d, d)};
  std::vector<bool> keep(static_cast<std::size_t>(d), true);
  if (restrict_half)
    for (int i = 0; i < d; ++i) keep[static_cast<std::size_t>(i)] = blocks.coordinate_exponent(i) < alpha / 2 - 1e-9;
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      if (!keep[static_cast<std::size_t>(i)] || !keep[static_cast<std::size_t>(j)]) continue;
      RunningStats s;
      for (Eigen::Index r = 0; r < samples.size(); ++r)
        s.add((samples.values(r, i) - m(i)) * (samples.values(r, j) - m(j)));
      out.q(i, j) = out.q(j, i) = s.mean();
      out.se(i, j) = out.se(j, i) = s.se();
    }
  return out;
}

/// C_{2+}(v) = -q(v,v)/2 - <v,m>^2/2 - q(v, (I - z*)^{-1} z* v).
inline double C_2plus(const Vector& v, const Matrix& q, const Matrix& z, const Vector& m) {
  const Matrix zt = z.transpose();
  const Matrix a = Matrix::Identity(z.rows(), z.cols()) - zt;
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) throw NumericError("I - z* is singular");
  const Vector w = lu.solve(zt * v);
  const double vm = v.dot(m);
  return -0.5 * v.dot(q * v) - 0.5 * vm * vm - v.dot(q * w);
}

/// Exponent of Phi_{2+}: -q(v,v)/2 - q(v, (I - z*)^{-1} z* v).
inline double phi_2plus_exponent(const Vector& v, const Matrix& q, const Matrix& z) {
  return C_2plus(v, q, z, Vector::Zero(v.size()));
}

struct LawSampling {
  Eigen::Index count = 200000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  double q_lo = 0.99;
  double q_hi = 0.9999;
  int dense_points = 8;
  int shell_radial = 33;
  int shell_angular = 96;
  std::size_t partners = 32;
};

inline bool low_precision(const ComplexEstimate& e) { return e.se > 0.25 * std::abs(e.value); }

/// Frozen stationary and dual batches of one measure, with the Lambda- and
/// Delta-functionals evaluated on them. Repeated calls are deterministic.
class LimitLawEstimator {
 public:
  explicit LimitLawEstimator(const MuSpec& mu, LawSampling s = {})
      : mu_(std::make_shared<MuSpec>(mu)), sampling_(s) {
    const auto hyp = require_hypothesis_H(*mu_);
    alpha_ = hyp.alpha;
    m_alpha_ = hyp.m_alpha;
    structure_ = hyp.structure;
    regime_ = classify_regime(alpha_, mu_->blocks());
    trunc_ = default_truncation(*mu_, alpha_);
    stationary_ = std::make_shared<TrajectoryBatch>(sample_stationary(*mu_, trunc_, s.count, s.seed, s.workers));
    z_ = std::make_shared<ZSeriesBatch>(sample_z_series(*mu_, trunc_, s.count, s.seed, s.workers));
    geometry_ = std::make_shared<ShellGeometry>(mu_->blocks(), structure_);
    scales_ = scale_window(stationary_->tau_values(mu_->blocks()), structure_, s.q_lo, s.q_hi, s.dense_points);
    tail_ = std::make_shared<TailFunctional>(*stationary_, alpha_, *geometry_, scales_, s.workers);
  }

  const MuSpec& measure() const { return *mu_; }
  double alpha() const { return alpha_; }
  double m_alpha() const { return m_alpha_; }
  Regime regime() const { return regime_; }
  const GroupStructure& structure() const { return structure_; }
  const BlockStructure& blocks() const { return mu_->blocks(); }
  const TrajectoryBatch& stationary() const { return *stationary_; }
  const ZSeriesBatch& z_series() const { return *z_; }
  const TailFunctional& tail() const { return *tail_; }
  const ShellGeometry& geometry() const { return *geometry_; }
  const std::vector<double>& scales() const { return scales_; }
  int truncation() const { return trunc_; }
  const LawSampling& sampling() const { return sampling_; }

  /// Integral of (chi_v - 1) eta^_v minus the regime compensator against Lambda.
  ComplexEstimate c_direct(const Vector& v) const {
    require_dim(blocks(), v.size(), "v");
    if (v.norm() == 0.0) return {};
    switch (regime_) {
      case Regime::kAlphaGt2: throw RegimeError("use C_2plus for alpha > 2");
      case Regime::kAlphaEq2: return c2_direct(v);
      default: break;
    }
    const Vector vv = regime_ == Regime::kMixedT3 ? stable_part(v) : v;
    if (vv.norm() == 0.0) return {};
    const auto w = z_->apply(vv);
    const auto& b = blocks();
    const double a = alpha_;
    const bool comp = alpha_ >= 1.0 - 1e-9;
    const int d = b.dim();
    // E e^{i<x,W>} averaged over several independent partners per sample.
    const auto nw = static_cast<std::size_t>(w.size());
    const std::size_t kp = std::max<std::size_t>(1, std::min<std::size_t>(sampling_.partners, nw));
    const std::size_t stride = std::max<std::size_t>(1, nw / kp);
    auto per = tail_->integrate_per_scale([&](const Vector& x, std::size_t i) -> Complex {
      Complex eta = 0.0;
      for (std::size_t j = 0; j < kp; ++j) {
        const auto row = static_cast<Eigen::Index>((i + j * stride) % nw);
        double xw = 0.0;
        for (int k = 0; k < d; ++k) xw += x(k) * w.values(row, k);
        eta += detail::expi(xw);
      }
      const Complex val = (detail::expi(vv.dot(x)) - 1.0) * eta / static_cast<double>(kp);
      if (!comp) return val;
      const double below = detail::block_dot(vv, x, b, a, false);
      const double at = detail::block_dot(vv, x, b, a, true);
      return val - Complex(0.0, below + at / (1.0 + detail::block_norm2(x, b, a)));
    });
    return combine_scales(per);
  }

  /// Cross formula: factor * m_alpha * Delta_v(Lambda~^1). For alpha = 1 only
  /// the real part is returned; the drift comes from gamma_drift.
  ComplexEstimate c_via_delta(const Vector& v) const {
    require_dim(blocks(), v.size(), "v");
    if (v.norm() == 0.0) return {};
    if (regime_ == Regime::kAlphaGt2 || regime_ == Regime::kMixedT3)
      throw RegimeError("the Delta representation holds for 0 < alpha <= 2");
    const auto w = z_->apply(v);
    const auto win = scale_window(w.tau_values(blocks()), structure_, sampling_.q_lo, sampling_.q_hi,
                                  sampling_.dense_points);
    auto e = delta_v_of_lambda1(w, table(), *geometry_, alpha_, win, sampling_.workers);
    const double f = geometry_->sigma_factor(alpha_) * m_alpha_;
    e.value *= f;
    e.se *= f;
    e.spread *= f;
    if (regime_ == Regime::kAlphaEq1) e.value = Complex(e.value.real(), 0.0);
    return e;
  }

  /// Delta_v(Lambda~^1) without the factor.
  ComplexEstimate delta_v(const Vector& v) const {
    const auto w = z_->apply(v);
    const auto win = scale_window(w.tau_values(blocks()), structure_, sampling_.q_lo, sampling_.q_hi,
                                  sampling_.dense_points);
    return delta_v_of_lambda1(w, table(), *geometry_, alpha_, win, sampling_.workers);
  }

  /// gamma(v) for alpha = 1:
  ///   int int ( -<v,x>/(1+|x|^2) - <y,x>/(1+|y|^2|x|^2)
  ///             + <v+y,x>/(1+|v+y|^2|x|^2) ) Lambda(dx) eta_v(dy).
  Estimate gamma_drift(const Vector& v) const {
    if (regime_ != Regime::kAlphaEq1) throw RegimeError("the drift gamma(v) is defined for alpha = 1");
    require_dim(blocks(), v.size(), "v");
    if (v.norm() == 0.0) return {};
    const auto w = z_->apply(v);
    auto per = tail_->integrate_per_scale([&](const Vector& x, std::size_t i) -> Complex {
      const Vector y = w.values.row(static_cast<Eigen::Index>(i)).transpose();
      const double x2 = x.squaredNorm();
      const Vector vy = v + y;
      return {-v.dot(x) / (1.0 + x2) - y.dot(x) / (1.0 + y.squaredNorm() * x2) + vy.dot(x) / (1.0 + vy.squaredNorm() * x2),
              0.0};
    });
    const auto c = combine_scales(per);
    return {c.value.real(), c.se + c.spread};
  }

  /// xi(c) = E[c R / (1 + |c R|^2)] (alpha = 1 centering).
  VectorEstimate xi(double c) const { return xi_term(c, false); }

  /// xi_1(c) = c m_{alpha,-} + E[c R_alpha / (1 + |c R_alpha|^2)].
  VectorEstimate xi1(double c) const {
    auto e = xi_term(c, true);
    e.value += dilate(partial_mean(*mu_, alpha_, 0.0, alpha_), c, blocks());
    return e;
  }

  /// xi_2(c) = c m_{alpha/2,alpha} + E[c R_alpha / (1 + |c R_alpha|^2)].
  VectorEstimate xi2(double c) const {
    auto e = xi_term(c, true);
    e.value += dilate(partial_mean(*mu_, alpha_, alpha_ / 2, alpha_), c, blocks());
    return e;
  }

  /// Components in the blocks with lambda_j > alpha/2.
  Vector stable_part(const Vector& v) const {
    Vector y = v;
    const auto& b = blocks();
    for (int j = 0; j < b.blocks(); ++j)
      if (b.exponent(j) < alpha_ / 2 + 1e-9) y.segment(b.offset(j), b.block_dim(j)).setZero();
    return y;
  }

  /// Components in the blocks with lambda_j < alpha/2.
  Vector gaussian_part(const Vector& v) const { return v - stable_part(v); }

 private:
  const ShellTable& table() const {
    if (!table_) table_ = std::make_shared<ShellTable>(*tail_, sampling_.shell_radial, sampling_.shell_angular);
    return *table_;
  }

  ComplexEstimate c2_direct(const Vector& v) const {
    // E W = (I - z*)^{-1} z* v
    const Matrix zt = mean_operator(*mu_).transpose();
    const Vector ew = (Matrix::Identity(zt.rows(), zt.cols()) - zt).fullPivLu().solve(zt * v);
    auto per = tail_->sigma_integral_per_scale([&](const Vector& w) {
      const double vw = v.dot(w);
      return vw * vw + 2.0 * vw * w.dot(ew);
    });
    for (auto& e : per) {
      e.value *= -0.25;
      e.se *= 0.25;
    }
    return combine_scales(per);
  }

  VectorEstimate xi_term(double c, bool at_only) const {
    const auto& b = blocks();
    const int d = b.dim();
    VectorEstimate out{Vector::Zero(d), Vector::Zero(d)};
    if (c == 0.0) return out;
    std::vector<RunningStats> st(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < stationary_->size(); ++i) {
      Vector x = dilate(stationary_->values.row(i).transpose(), c, b);
      if (at_only) x = block_part(x, b, alpha_, true);
      const double den = 1.0 + x.squaredNorm();
      for (int k = 0; k < d; ++k) st[static_cast<std::size_t>(k)].add(x(k) / den);
    }
    for (int k = 0; k < d; ++k) {
      out.value(k) = st[static_cast<std::size_t>(k)].mean();
      out.se(k) = st[static_cast<std::size_t>(k)].se();
    }
    return out;
  }

  std::shared_ptr<MuSpec> mu_;
  LawSampling sampling_;
  double alpha_ = 0.0;
  double m_alpha_ = 0.0;
  GroupStructure structure_;
  Regime regime_ = Regime::kAlphaLt1;
  int trunc_ = 1;
  std::shared_ptr<TrajectoryBatch> stationary_;
  std::shared_ptr<ZSeriesBatch> z_;
  std::shared_ptr<ShellGeometry> geometry_;
  std::vector<double> scales_;
  std::shared_ptr<TailFunctional> tail_;
  mutable std::shared_ptr<ShellTable> table_;
};

/// Phi(v) = exp(exponent(v)). The Gaussian part (q, z) acts on the blocks
/// below alpha/2 (all of V when alpha > 2 and V is Euclidean); the stable part
/// on the rest.
struct LimitLawSpec {
  Regime regime = Regime::kAlphaGt2;
  double alpha = 0.0;
  GroupStructure structure;
  BlockStructure blocks = BlockStructure::euclidean(1);
  Vector m;
  Matrix z;
  Matrix q;
  std::function<Complex(const Vector&)> stable;

  bool has_gaussian() const { return regime == Regime::kAlphaGt2 || regime == Regime::kMixedT3; }

  Vector gaussian_projection(const Vector& v) const {
    if (regime == Regime::kAlphaGt2) return v;
    Vector y = Vector::Zero(v.size());
    for (int j = 0; j < blocks.blocks(); ++j)
      if (blocks.exponent(j) < alpha / 2 - 1e-9) y.segment(blocks.offset(j), blocks.block_dim(j)) = v.segment(blocks.offset(j), blocks.block_dim(j));
    return y;
  }

  Complex exponent(const Vector& v) const {
    require_dim(blocks, v.size(), "v");
    Complex c{};
    if (has_gaussian()) {
      const Vector g = gaussian_projection(v);
      c += phi_2plus_exponent(g, q, z);
      if (regime == Regime::kMixedT3 && stable) c += stable(v - g);
      return c;
    }
    if (!stable) throw InputError("limit law has no exponent evaluator");
    return stable(v);
  }

  Complex phi(const Vector& v) const { return std::exp(exponent(v)); }
};

inline void check_covariance_form(const Matrix& q) {
  if (q.rows() != q.cols()) throw InputError("q must be square");
  if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + q.cwiseAbs().maxCoeff()))
    throw InputError("q must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(q);
  if (es.eigenvalues().minCoeff() < -1e-10 * (1.0 + q.cwiseAbs().maxCoeff()))
    throw InputError("q must be positive semidefinite");
}

/// Normal law of the alpha > 2 regime from exact m, z and q.
inline LimitLawSpec gaussian_law(const MuSpec& mu) {
  const double alpha = solve_alpha(mu);
  const Regime r = classify_regime(alpha, mu.blocks());
  if (r != Regime::kAlphaGt2) throw RegimeError("the normal limit needs alpha > 2 on a Euclidean space");
  LimitLawSpec s;
  s.regime = r;
  s.alpha = alpha;
  s.structure = group_structure(mu);
  s.blocks = mu.blocks();
  const auto mm = mean_operator_and_mean(mu, alpha);
  s.m = mm.m;
  s.z = mm.z;
  s.q = stationary_covariance(mu, alpha);
  check_covariance_form(s.q);
  return s;
}

enum class CMethod { kDirect, kViaDelta };

/// Law spec whose stable part is evaluated on the estimator's frozen batches.
/// For alpha = 1 the via-delta exponent adds i gamma(v).
inline LimitLawSpec estimated_law(std::shared_ptr<const LimitLawEstimator> est, CMethod method = CMethod::kDirect) {
  LimitLawSpec s;
  s.regime = est->regime();
  s.alpha = est->alpha();
  s.structure = est->structure();
  s.blocks = est->blocks();
  const auto& mu = est->measure();
  if (s.regime == Regime::kAlphaGt2) return gaussian_law(mu);
  if (s.regime == Regime::kMixedT3) {
    for (double l : s.blocks.exponents())
      if (std::abs(l - s.alpha / 2) <= 1e-9) throw RegimeError("the mixed regime needs V_{alpha/2} = {0}");
    const double cut = s.alpha / 2;
    s.z = restricted_mean_operator(mu, cut);
    s.m = partial_mean(mu, s.alpha, 0.0, cut);
    s.q = covariance_q(est->stationary(), s.m, s.alpha, s.blocks, true).q;
    check_covariance_form(s.q);
    s.stable = [est](const Vector& v) { return est->c_direct(v).value; };
    return s;
  }
  if (method == CMethod::kDirect) {
    s.stable = [est](const Vector& v) { return est->c_direct(v).value; };
  } else if (s.regime == Regime::kAlphaEq1) {
    s.stable = [est](const Vector& v) {
      return Complex(est->c_via_delta(v).value.real(), est->gamma_drift(v).value);
    };
  } else {
    s.stable = [est](const Vector& v) { return est->c_via_delta(v).value; };
  }
  if (s.regime == Regime::kAlphaLt1 || s.regime == Regime::kAlpha1to2) {
    // C(delta_r w) = r^alpha C(w): the estimators are evaluated on the unit
    // shell only, where their finite-threshold bias is smallest.
    s.stable = [est, f = std::move(s.stable)](const Vector& v) {
      const double r = est->geometry().radius(v);
      if (!(r > 0.0)) return Complex(0.0);
      return std::pow(r, est->alpha()) * f(est->geometry().representative(v));
    };
  }
  return s;
}

struct CenteringStep {
  long n = 0;
  double c_scale = 1.0;
  bool exact = true;
  Vector d;
};

/// c_n and d_n per n:
///   alpha < 1: d_n = 0;  1 <= alpha < 2: d_n = n xi_1(c_n);
///   alpha = 2: c_n ~ (n log n)^{-1/2}, centering n c_n m;
///   alpha > 2: c_n = n^{-1/2}, centering sqrt(n) m;
///   mixed: sqrt(n) m_- on the Gaussian blocks and n xi_2(c_n) on the rest.
inline std::vector<CenteringStep> centering_schedule(const LimitLawEstimator& est, const std::vector<long>& n_list) {
  std::vector<CenteringStep> out;
  const auto& b = est.blocks();
  const double a = est.alpha();
  for (long n : n_list) {
    if (n < 1) throw InputError("centering needs n >= 1");
    CenteringStep s;
    s.n = n;
    const double nn = static_cast<double>(n);
    switch (est.regime()) {
      case Regime::kAlphaLt1: {
        const auto st = normalizer_schedule(est.structure(), a, n);
        s.c_scale = st.c_scale;
        s.exact = st.exact;
        s.d = Vector::Zero(b.dim());
        break;
      }
      case Regime::kAlphaEq1:
      case Regime::kAlpha1to2: {
        const auto st = normalizer_schedule(est.structure(), a, n);
        s.c_scale = st.c_scale;
        s.exact = st.exact;
        s.d = nn * est.xi1(s.c_scale).value;
        break;
      }
      case Regime::kAlphaEq2: {
        if (n < 2) throw InputError("alpha = 2 centering needs n >= 2");
        const double target = 1.0 / std::sqrt(nn * std::log(nn));
        if (est.structure().is_lattice()) {
          const double p = est.structure().p;
          s.c_scale = std::pow(p, std::round(std::log(target) / std::log(p)));
          s.exact = std::abs(s.c_scale / target - 1.0) < 1e-9;
        } else {
          s.c_scale = target;
        }
        s.d = nn * s.c_scale * partial_mean(est.measure(), a, 0.0, a);
        break;
      }
      case Regime::kAlphaGt2: {
        s.c_scale = 1.0 / std::sqrt(nn);
        s.d = std::sqrt(nn) * mean_operator_and_mean(est.measure(), a).m;
        break;
      }
      case Regime::kMixedT3: {
        const auto st = normalizer_schedule(est.structure(), a, n);
        s.c_scale = st.c_scale;
        s.exact = st.exact;
        const Vector mminus = partial_mean(est.measure(), a, 0.0, a / 2);
        s.d = std::sqrt(nn) * mminus + est.stable_part(nn * est.xi2(s.c_scale).value);
        break;
      }
    }
    out.push_back(s);
  }
  return out;
}

/// Normalized sum for one centering step (c acts as a dilation; Gaussian
/// blocks of the mixed regime are scaled by n^{-1/2}).
inline Vector normalize_sum(const Vector& s, const CenteringStep& step, Regime regime, const BlockStructure& b,
                            double alpha) {
  if (regime == Regime::kMixedT3) {
    Vector out = dilate(s, step.c_scale, b);
    const double r = 1.0 / std::sqrt(static_cast<double>(step.n));
    for (int j = 0; j < b.blocks(); ++j)
      if (b.exponent(j) < alpha / 2) out.segment(b.offset(j), b.block_dim(j)) = r * s.segment(b.offset(j), b.block_dim(j));
    return out - step.d;
  }
  return dilate(s, step.c_scale, b) - step.d;
}

struct StabilityReport {
  Vector beta;
  double residual = 0.0;       // max |L(v) - i<beta,v>| / max |C(u* v)|
  double max_real_part = 0.0;  // max |Re L(v)|
};

/// L(v) = log Phi(u* v) - |u|^alpha log Phi(v) should be i<beta(u), v>.
inline StabilityReport stability_check(const LimitLawSpec& spec, const Similarity& u, const std::vector<Vector>& v_grid) {
  if (v_grid.empty()) throw InputError("empty v grid");
  const int d = spec.blocks.dim();
  const Similarity us = u.adjoint();
  const double ua = std::pow(u.norm(), spec.alpha);
  std::vector<Complex> l;
  double scale = 0.0;
  Eigen::MatrixXd basis(static_cast<Eigen::Index>(v_grid.size()), d);
  Eigen::VectorXd im(static_cast<Eigen::Index>(v_grid.size()));
  for (std::size_t i = 0; i < v_grid.size(); ++i) {
    const Complex cu = spec.exponent(us.apply(v_grid[i]));
    const Complex lv = cu - ua * spec.exponent(v_grid[i]);
    l.push_back(lv);
    scale = std::max(scale, std::abs(cu));
    basis.row(static_cast<Eigen::Index>(i)) = v_grid[i].transpose();
    im(static_cast<Eigen::Index>(i)) = lv.imag();
  }
  StabilityReport r;
  r.beta = basis.colPivHouseholderQr().solve(im);
  double worst = 0.0;
  for (std::size_t i = 0; i < v_grid.size(); ++i) {
    const Complex fit(0.0, v_grid[i].dot(r.beta));
    worst = std::max(worst, std::abs(l[i] - fit));
    r.max_real_part = std::max(r.max_real_part, std::abs(l[i].real()));
  }
  r.residual = scale > 0.0 ? worst / scale : 0.0;
  return r;
}

/// I(v) in |xi(c)| <= I |c| |log |c|| over a grid of |c| < 1/2.
inline double xi_bound_fit(const LimitLawEstimator& est, const std::vector<double>& c_grid) {
  double worst = 0.0;
  for (double c : c_grid) {
    if (!(c > 0.0 && c < 0.5)) throw InputError("c grid must lie in (0, 1/2)");
    worst = std::max(worst, est.xi(c).value.norm() / (c * std::abs(std::log(c))));
  }
  return worst;
}

}  // namespace affrec
