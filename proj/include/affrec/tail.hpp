// SPDX-License-Identifier: Apache-2.0
//
// Tail of the stationary law: Hill exponent, tail constants, the angular
// measure sigma on the shell Sigma_1 and the functionals Lambda~(y) and
// Delta_v(Lambda~^1). Every tail-measure integral is approximated by
//   Lambda(f) ~ t^alpha E f(R / t)
// averaged over a window of thresholds t; in lattice mode t runs over powers
// of p only, since the limit holds along the scale group.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "affrec/error.hpp"
#include "affrec/group.hpp"
#include "affrec/measure.hpp"
#include "affrec/parallel.hpp"
#include "affrec/recursion.hpp"
#include "affrec/stats.hpp"

namespace affrec {

enum class Regime { kAlphaLt1, kAlphaEq1, kAlpha1to2, kAlphaEq2, kAlphaGt2, kMixedT3 };

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::kAlphaLt1: return "AlphaLt1";
    case Regime::kAlphaEq1: return "AlphaEq1";
    case Regime::kAlpha1to2: return "Alpha1to2";
    case Regime::kAlphaEq2: return "AlphaEq2";
    case Regime::kAlphaGt2: return "AlphaGt2";
    case Regime::kMixedT3: return "MixedT3";
  }
  return "unknown";
}

/// Regime of the limit law. With several blocks and alpha > 2 the mixed
/// normalization applies.
inline Regime classify_regime(double alpha, const BlockStructure& blocks, double tol = 1e-9) {
  if (!(alpha > 0.0)) throw InputError("alpha must be positive");
  if (alpha > 2.0 + tol) return blocks.is_euclidean() ? Regime::kAlphaGt2 : Regime::kMixedT3;
  if (std::abs(alpha - 2.0) <= tol) return Regime::kAlphaEq2;
  if (std::abs(alpha - 1.0) <= tol) return Regime::kAlphaEq1;
  return alpha < 1.0 ? Regime::kAlphaLt1 : Regime::kAlpha1to2;
}

struct HillEstimate {
  double alpha = 0.0;
  double se = 0.0;
  std::size_t k = 0;
};

/// Hill estimator on the top k_fraction of the sample.
inline HillEstimate hill_alpha(std::vector<double> values, double k_fraction = 0.05) {
  if (values.size() < 1000) throw EstimationError("Hill estimator needs at least 1000 samples");
  if (!(k_fraction > 0.0) || k_fraction > 0.2) throw InputError("k_fraction must lie in (0, 0.2]");
  const auto k = static_cast<std::size_t>(std::floor(k_fraction * static_cast<double>(values.size())));
  if (k < 2) throw EstimationError("too few order statistics");
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end(), std::greater<>());
  const double threshold = values[k];
  if (!(threshold > 0.0)) throw EstimationError("non-positive threshold order statistic");
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += std::log(values[i] / threshold);
  if (!(s > 0.0)) throw EstimationError("degenerate top order statistics (ties)");
  HillEstimate h;
  h.k = k;
  h.alpha = static_cast<double>(k) / s;
  h.se = h.alpha / std::sqrt(static_cast<double>(k));
  return h;
}

inline HillEstimate hill_alpha(const TrajectoryBatch& b, const BlockStructure& blocks, double k_fraction = 0.05) {
  return hill_alpha(b.tau_values(blocks), k_fraction);
}

/// Geometric grid with `count` points from lo to hi.
inline std::vector<double> geometric_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi >= lo) || count < 1) throw InputError("geometric grid needs 0 < lo <= hi and count >= 1");
  std::vector<double> g;
  for (int i = 0; i < count; ++i)
    g.push_back(count == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
  return g;
}

/// Powers p^k inside [lo, hi].
inline std::vector<double> lattice_grid(double lo, double hi, double p) {
  if (!(p > 1.0) || !(lo > 0.0)) throw InputError("lattice grid needs p > 1 and lo > 0");
  const double lp = std::log(p);
  std::vector<double> g;
  for (long k = static_cast<long>(std::ceil(std::log(lo) / lp - 1e-9)); std::pow(p, static_cast<double>(k)) <= hi * (1 + 1e-12); ++k)
    g.push_back(std::pow(p, static_cast<double>(k)));
  return g;
}

/// Threshold window [q_lo, q_hi] of the tau-sample: geometric in dense mode,
/// powers of p in lattice mode (at least one point). q_hi is capped so that
/// at least 50 samples lie above the window.
inline std::vector<double> scale_window(const std::vector<double>& tau_values, const GroupStructure& structure,
                                        double q_lo = 0.99, double q_hi = 0.9999, int dense_points = 8) {
  const double n = static_cast<double>(tau_values.size());
  q_hi = std::min(q_hi, 1.0 - 50.0 / n);
  q_lo = std::min(q_lo, q_hi);
  const double lo = quantile(tau_values, q_lo);
  const double hi = quantile(tau_values, q_hi);
  if (!(lo > 0.0)) throw EstimationError("degenerate tail sample");
  if (!structure.is_lattice()) return geometric_grid(lo, hi, dense_points);
  auto g = lattice_grid(lo, hi, structure.p);
  if (g.empty()) g.push_back(std::pow(structure.p, std::floor(std::log(hi) / std::log(structure.p))));
  return g;
}

struct TailProfile {
  std::vector<double> t;
  std::vector<double> constant;  // t^alpha P[tau(R) > t]
  std::vector<double> se;
  std::vector<long> exceedances;
  std::vector<std::string> warnings;

  double flatness() const {
    if (constant.empty()) return 0.0;
    const auto [mn, mx] = std::minmax_element(constant.begin(), constant.end());
    return *mn > 0.0 ? *mx / *mn : std::numeric_limits<double>::infinity();
  }
  double min_constant() const { return constant.empty() ? 0.0 : *std::min_element(constant.begin(), constant.end()); }
};

/// t^alpha P^[tau(R) > t] on t_grid with binomial SEs. Grid points beyond the
/// sample or with fewer than 50 exceedances are dropped with a warning; in
/// lattice mode non-powers of p are dropped as well.
inline TailProfile tail_constant_profile(std::vector<double> tau_values, double alpha, const std::vector<double>& t_grid,
                                         const GroupStructure& structure = GroupStructure::dense()) {
  if (tau_values.empty()) throw EstimationError("empty sample");
  std::sort(tau_values.begin(), tau_values.end());
  const double n = static_cast<double>(tau_values.size());
  TailProfile prof;
  for (double t : t_grid) {
    if (structure.is_lattice()) {
      const double k = std::log(t) / std::log(structure.p);
      if (std::abs(k - std::round(k)) > 1e-9) {
        prof.warnings.push_back("t=" + std::to_string(t) + " is not a power of p; removed");
        continue;
      }
    }
    if (t >= tau_values.back()) {
      prof.warnings.push_back("t=" + std::to_string(t) + " beyond the largest sample; removed");
      continue;
    }
    const auto above = tau_values.end() - std::upper_bound(tau_values.begin(), tau_values.end(), t);
    if (above < 50) {
      prof.warnings.push_back("t=" + std::to_string(t) + " has fewer than 50 exceedances; removed");
      continue;
    }
    const double ph = static_cast<double>(above) / n;
    const double ta = std::pow(t, alpha);
    prof.t.push_back(t);
    prof.constant.push_back(ta * ph);
    prof.se.push_back(ta * std::sqrt(ph * (1 - ph) / n));
    prof.exceedances.push_back(static_cast<long>(above));
  }
  return prof;
}

/// Polar decomposition x = gamma_r rep(x) relative to the shell
/// Sigma_1 = {tau = 1} (dense) or {1 <= tau < p} (lattice); the section is
/// the group of pure dilations.
class ShellGeometry {
 public:
  ShellGeometry(BlockStructure blocks, GroupStructure structure)
      : blocks_(std::move(blocks)), structure_(std::move(structure)) {}

  const BlockStructure& blocks() const { return blocks_; }
  const GroupStructure& structure() const { return structure_; }
  bool lattice() const { return structure_.is_lattice(); }

  double radius(const Vector& x) const { return radius_of_tau(tau(x, blocks_)); }

  double radius_of_tau(double t) const {
    if (!lattice() || t <= 0.0) return t;
    const double lp = std::log(structure_.p);
    double k = std::floor(std::log(t) / lp);
    // guard rounding at exact powers of p
    if (std::pow(structure_.p, k + 1) <= t) k += 1;
    if (std::pow(structure_.p, k) > t) k -= 1;
    return std::pow(structure_.p, k);
  }

  Vector representative(const Vector& x) const {
    const double r = radius(x);
    if (r <= 0.0) return x;
    return dilate(x, 1.0 / r, blocks_);
  }

  /// Converts Lambda-integrals over {r >= 1} to sigma-integrals over Sigma_1.
  double sigma_factor(double alpha) const {
    return lattice() ? (1.0 - std::pow(structure_.p, -alpha)) / std::log(structure_.p) : alpha;
  }

 private:
  BlockStructure blocks_;
  GroupStructure structure_;
};

namespace detail {

inline Complex expi(double x) { return {std::cos(x), std::sin(x)}; }

/// Projection of x onto the blocks with exponent < a (below) or == a (at).
inline double block_dot(const Vector& v, const Vector& x, const BlockStructure& b, double a, bool at) {
  double s = 0.0;
  for (int j = 0; j < b.blocks(); ++j) {
    const double l = b.exponent(j);
    const bool take = at ? std::abs(l - a) <= 1e-9 : l < a - 1e-9;
    if (take) s += v.segment(b.offset(j), b.block_dim(j)).dot(x.segment(b.offset(j), b.block_dim(j)));
  }
  return s;
}

inline double block_norm2(const Vector& x, const BlockStructure& b, double a) {
  double s = 0.0;
  for (int j = 0; j < b.blocks(); ++j)
    if (std::abs(b.exponent(j) - a) <= 1e-9) s += x.segment(b.offset(j), b.block_dim(j)).squaredNorm();
  return s;
}

}  // namespace detail

/// Tail functionals of one frozen stationary batch.
class TailFunctional {
 public:
  TailFunctional(const TrajectoryBatch& stationary, double alpha, ShellGeometry geometry, std::vector<double> scales,
                 unsigned workers = 1)
      : samples_(&stationary),
        alpha_(alpha),
        geometry_(std::move(geometry)),
        scales_(std::move(scales)),
        workers_(workers),
        regime_(classify_regime(alpha, geometry_.blocks())) {
    if (scales_.empty()) throw InputError("empty scale grid");
    tau_ = stationary.tau_values(geometry_.blocks());
    std::vector<double> sorted = tau_;
    std::sort(sorted.begin(), sorted.end());
    const double med = sorted[sorted.size() / 2];
    const std::size_t n = sorted.size();
    const double top = sorted[n - std::min<std::size_t>(n, 50)];
    for (double t : scales_)
      if (!(t >= med && t <= top))
        throw InputError("scale outside the admissible window [median, 50th largest] of tau(R)");
    if (geometry_.lattice())
      for (double t : scales_) {
        const double k = std::log(t) / std::log(geometry_.structure().p);
        if (std::abs(k - std::round(k)) > 1e-9) throw InputError("lattice mode needs scales in powers of p");
      }
    if (regime_ == Regime::kAlphaEq2) sigma_q_ = sigma_second_moment_estimate();
  }

  double alpha() const { return alpha_; }
  Regime regime() const { return regime_; }
  const ShellGeometry& geometry() const { return geometry_; }
  const std::vector<double>& scales() const { return scales_; }
  const TrajectoryBatch& samples() const { return *samples_; }

  /// Lambda-integral of f, ~ t^alpha E f(gamma_{1/t} R), per scale.
  template <typename F>
  std::vector<ComplexEstimate> integrate_per_scale(F&& f) const {
    std::vector<ComplexEstimate> out;
    const auto& vals = samples_->values;
    const int d = samples_->dim();
    const auto& blocks = geometry_.blocks();
    for (double t : scales_) {
      const double ta = std::pow(t, alpha_);
      const ComplexSums sums = blocked_reduce(static_cast<std::size_t>(samples_->size()), workers_, ComplexSums{},
                                              [&](std::size_t b, std::size_t e) {
                                                ComplexSums s;
                                                Vector x(d);
                                                for (std::size_t i = b; i < e; ++i) {
                                                  const auto row = static_cast<Eigen::Index>(i);
                                                  if (d == 1) {
                                                    x(0) = vals(row, 0) / t;
                                                  } else {
                                                    x = dilate(vals.row(row).transpose(), 1.0 / t, blocks);
                                                  }
                                                  s.add(f(x, i));
                                                }
                                                return s;
                                              });
      out.push_back({ta * sums.mean(), ta * sums.se(), 0.0});
    }
    return out;
  }

  /// The compensated integrand whose Lambda-integral defines Lambda~(y).
  Complex integrand(const Vector& y, const Vector& x) const {
    const double yx = y.dot(x);
    switch (regime_) {
      case Regime::kAlphaLt1: return detail::expi(yx) - 1.0;
      case Regime::kAlphaEq1: {
        // printed compensator i<x,y> / (1 + |y|^2 |x|^2)
        return detail::expi(yx) - 1.0 - Complex(0.0, yx / (1.0 + y.squaredNorm() * x.squaredNorm()));
      }
      case Regime::kAlpha1to2: return detail::expi(yx) - 1.0 - Complex(0.0, yx);
      default: throw RegimeError("no compensated integrand in this regime");
    }
  }

  ComplexEstimate lambda_tilde_estimate(const Vector& y) const {
    require_dim(geometry_.blocks(), y.size(), "argument");
    if (regime_ == Regime::kAlphaEq2) return {Complex(-0.25 * y.dot(sigma_q_ * y), 0.0), 0.0, 0.0};
    if (regime_ == Regime::kAlphaGt2 || regime_ == Regime::kMixedT3)
      throw RegimeError("Lambda~ is used only for alpha <= 2");
    if (y.norm() == 0.0) return {};
    return combine_scales(integrate_per_scale([&](const Vector& x, std::size_t) { return integrand(y, x); }));
  }

  Complex lambda_tilde(const Vector& y) const { return lambda_tilde_estimate(y).value; }

  /// Lambda~^1(y) = Lambda~(rep y) 1{r(y) >= 1}.
  Complex lambda_tilde_1(const Vector& y) const {
    if (geometry_.radius(y) < 1.0) return {};
    return lambda_tilde(geometry_.representative(y));
  }

  /// Integral of h over sigma, per scale:
  /// factor * t^alpha E[h(rep(R/t)) 1{r(R/t) >= 1}].
  template <typename H>
  std::vector<ComplexEstimate> sigma_integral_per_scale(H&& h) const {
    const double factor = geometry_.sigma_factor(alpha_);
    auto per = integrate_per_scale([&](const Vector& x, std::size_t) -> Complex {
      if (geometry_.radius(x) < 1.0) return {};
      return Complex(h(geometry_.representative(x)));
    });
    for (auto& e : per) {
      e.value *= factor;
      e.se *= factor;
    }
    return per;
  }

  /// int w w^T sigma(dw), averaged over the scale window.
  Matrix sigma_second_moment() const { return sigma_q_.size() ? sigma_q_ : sigma_second_moment_estimate(); }

 private:
  Matrix sigma_second_moment_estimate() const {
    const int d = geometry_.blocks().dim();
    Matrix q = Matrix::Zero(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) {
        const auto per = sigma_integral_per_scale([&](const Vector& w) { return w(i) * w(j); });
        q(i, j) = q(j, i) = combine_scales(per).value.real();
      }
    return q;
  }

  const TrajectoryBatch* samples_;
  double alpha_;
  ShellGeometry geometry_;
  std::vector<double> scales_;
  unsigned workers_;
  Regime regime_;
  std::vector<double> tau_;
  Matrix sigma_q_;
};

/// Lambda~ tabulated on the shell Sigma_1 with linear interpolation:
///   d = 1 dense: the two points +-1;
///   d = 1 lattice: u in [1, p] and -u (by conjugation);
///   d = 2 Euclidean: angle grid (dense) or angle x radius grid (lattice).
/// Other shapes evaluate Lambda~ directly at each point.
class ShellTable {
 public:
  ShellTable(const TailFunctional& tf, int radial_nodes = 33, int angular_nodes = 96)
      : tf_(&tf), blocks_(tf.geometry().blocks()) {
    const auto& geo = tf.geometry();
    d_ = blocks_.dim();
    lattice_ = geo.lattice();
    p_ = lattice_ ? geo.structure().p : 1.0;
    if (tf.regime() == Regime::kAlphaEq2) {
      quadratic_ = true;
      return;
    }
    if (!blocks_.is_euclidean() || d_ > 2) {
      direct_ = true;
      return;
    }
    nr_ = lattice_ ? std::max(2, radial_nodes) : 1;
    na_ = d_ == 1 ? 1 : std::max(8, angular_nodes);
    values_.resize(static_cast<std::size_t>(nr_ * na_));
    for (int a = 0; a < na_; ++a)
      for (int r = 0; r < nr_; ++r) {
        const double rad = nr_ == 1 ? 1.0 : 1.0 + (p_ - 1.0) * r / (nr_ - 1);
        Vector y(d_);
        if (d_ == 1) {
          y(0) = rad;
        } else {
          const double th = 2.0 * std::numbers::pi * a / na_;
          y << rad * std::cos(th), rad * std::sin(th);
        }
        values_[static_cast<std::size_t>(a * nr_ + r)] = tf.lambda_tilde(y);
      }
  }

  /// Lambda~ at a point w of the shell.
  Complex operator()(const Vector& w) const {
    if (quadratic_ || direct_) return tf_->lambda_tilde(w);
    if (d_ == 1) {
      const double u = std::abs(w(0));
      const Complex val = radial(0, u);
      return w(0) >= 0 ? val : std::conj(val);
    }
    const double rad = w.norm();
    double th = std::atan2(w(1), w(0));
    if (th < 0) th += 2.0 * std::numbers::pi;
    const double pos = th / (2.0 * std::numbers::pi) * na_;
    const int a0 = static_cast<int>(std::floor(pos)) % na_;
    const int a1 = (a0 + 1) % na_;
    const double fr = pos - std::floor(pos);
    return (1.0 - fr) * radial(a0, rad) + fr * radial(a1, rad);
  }

  bool tabulated() const { return !quadratic_ && !direct_; }

 private:
  Complex radial(int a, double rad) const {
    if (nr_ == 1) return values_[static_cast<std::size_t>(a)];
    const double pos = std::clamp((rad - 1.0) / (p_ - 1.0) * (nr_ - 1), 0.0, static_cast<double>(nr_ - 1));
    const int r0 = std::min(static_cast<int>(std::floor(pos)), nr_ - 2);
    const double fr = pos - r0;
    return (1.0 - fr) * values_[static_cast<std::size_t>(a * nr_ + r0)] +
           fr * values_[static_cast<std::size_t>(a * nr_ + r0 + 1)];
  }

  const TailFunctional* tf_;
  BlockStructure blocks_;
  int d_ = 1;
  bool lattice_ = false;
  double p_ = 1.0;
  bool quadratic_ = false;
  bool direct_ = false;
  int nr_ = 1;
  int na_ = 1;
  std::vector<Complex> values_;
};

/// Delta_v(Lambda~^1) ~ t^alpha E[Lambda~(rep(W/t)) 1{r(W/t) >= 1}] for dual
/// samples W = Z* v, averaged over `scales` (thresholds for tau(W)).
inline ComplexEstimate delta_v_of_lambda1(const TrajectoryBatch& dual, const ShellTable& table,
                                          const ShellGeometry& geometry, double alpha,
                                          const std::vector<double>& scales, unsigned workers = 1) {
  if (scales.empty()) throw InputError("empty scale grid");
  bool nonzero = false;
  for (Eigen::Index i = 0; i < dual.size() && !nonzero; ++i) nonzero = dual.values.row(i).norm() > 0.0;
  if (!nonzero) throw InputError("dual samples are degenerate at 0 (v = 0)");
  const int d = dual.dim();
  std::vector<ComplexEstimate> per;
  for (double t : scales) {
    const double ta = std::pow(t, alpha);
    const ComplexSums sums =
        blocked_reduce(static_cast<std::size_t>(dual.size()), workers, ComplexSums{}, [&](std::size_t b, std::size_t e) {
          ComplexSums s;
          Vector x(d);
          if (d == 1 && geometry.blocks().is_euclidean()) {
            for (std::size_t i = b; i < e; ++i) {
              const double xv = dual.values(static_cast<Eigen::Index>(i), 0) / t;
              const double r = geometry.radius_of_tau(std::abs(xv));
              if (r < 1.0) {
                s.add({});
                continue;
              }
              x(0) = xv / r;
              s.add(table(x));
            }
            return s;
          }
          for (std::size_t i = b; i < e; ++i) {
            x = dilate(dual.values.row(static_cast<Eigen::Index>(i)).transpose(), 1.0 / t, geometry.blocks());
            if (geometry.radius(x) < 1.0) {
              s.add({});
              continue;
            }
            s.add(table(geometry.representative(x)));
          }
          return s;
        });
    per.push_back({ta * sums.mean(), ta * sums.se(), 0.0});
  }
  return combine_scales(per);
}

struct AngularHistogram {
  int angle_bins = 0;
  int radial_bins = 1;
  std::vector<double> mass;  // sigma mass per bin, averaged over thresholds
  std::vector<double> se;
  std::vector<double> counts;  // exceedance counts per bin at the lowest threshold
  double total_mass = 0.0;
  // d = 1: C_+ and C_- (sigma masses of the two half-lines)
  double c_plus = 0.0;
  double c_minus = 0.0;
};

/// Histogram of sigma on Sigma_1 from the exceedances over each threshold.
/// Bins: sign (d = 1) or angle (d = 2) times radial bins on [1, p) in lattice
/// mode. Needs at least 500 exceedances at every threshold.
inline AngularHistogram angular_measure(const TrajectoryBatch& samples, double alpha, const ShellGeometry& geometry,
                                        const std::vector<double>& thresholds, int angle_bins = 16,
                                        int radial_bins = 4) {
  const int d = samples.dim();
  if (d > 2) throw UnsupportedError("angular histograms are implemented for d <= 2");
  if (thresholds.empty()) throw InputError("no thresholds");
  AngularHistogram h;
  h.angle_bins = d == 1 ? 2 : angle_bins;
  h.radial_bins = geometry.lattice() ? radial_bins : 1;
  const int nb = h.angle_bins * h.radial_bins;
  h.mass.assign(static_cast<std::size_t>(nb), 0.0);
  h.se.assign(static_cast<std::size_t>(nb), 0.0);
  const double n = static_cast<double>(samples.size());
  const double factor = geometry.sigma_factor(alpha);
  const double p = geometry.lattice() ? geometry.structure().p : 1.0;
  for (std::size_t ti = 0; ti < thresholds.size(); ++ti) {
    const double t = thresholds[ti];
    std::vector<double> cnt(static_cast<std::size_t>(nb), 0.0);
    double total = 0.0;
    for (Eigen::Index i = 0; i < samples.size(); ++i) {
      const Vector x = dilate(samples.values.row(i).transpose(), 1.0 / t, geometry.blocks());
      if (geometry.radius(x) < 1.0) continue;
      const Vector w = geometry.representative(x);
      int a = 0;
      if (d == 1) {
        a = w(0) >= 0 ? 0 : 1;
      } else {
        double th = std::atan2(w(1), w(0));
        if (th < 0) th += 2.0 * std::numbers::pi;
        a = std::min(h.angle_bins - 1, static_cast<int>(th / (2.0 * std::numbers::pi) * h.angle_bins));
      }
      int r = 0;
      if (h.radial_bins > 1) {
        const double rad = tau(w, geometry.blocks());
        r = std::clamp(static_cast<int>((rad - 1.0) / (p - 1.0) * h.radial_bins), 0, h.radial_bins - 1);
      }
      cnt[static_cast<std::size_t>(a * h.radial_bins + r)] += 1.0;
      total += 1.0;
    }
    if (total < 500) throw EstimationError("fewer than 500 exceedances at threshold " + std::to_string(t));
    if (ti == 0) h.counts = cnt;
    const double ta = std::pow(t, alpha);
    for (int b = 0; b < nb; ++b) {
      const double ph = cnt[static_cast<std::size_t>(b)] / n;
      h.mass[static_cast<std::size_t>(b)] += factor * ta * ph / static_cast<double>(thresholds.size());
      h.se[static_cast<std::size_t>(b)] +=
          factor * ta * std::sqrt(ph * (1 - ph) / n) / static_cast<double>(thresholds.size());
    }
  }
  for (double m : h.mass) h.total_mass += m;
  if (d == 1) {
    for (int r = 0; r < h.radial_bins; ++r) {
      h.c_plus += h.mass[static_cast<std::size_t>(r)];
      h.c_minus += h.mass[static_cast<std::size_t>(h.radial_bins + r)];
    }
  }
  return h;
}

}  // namespace affrec
