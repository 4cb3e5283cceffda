// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "affrec/error.hpp"

namespace affrec {

using Complex = std::complex<double>;

/// A Monte Carlo estimate with its standard error.
struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

/// Complex Monte Carlo estimate. `se` bounds both components; `spread` is the
/// systematic spread across the scale plateau when one was averaged.
struct ComplexEstimate {
  Complex value{0.0, 0.0};
  double se = 0.0;
  double spread = 0.0;
};

/// Streaming accumulator for mean and variance (Welford).
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double se() const { return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }
  Estimate estimate() const { return {mean(), se()}; }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

class ComplexRunningStats {
 public:
  void add(Complex z) {
    re_.add(z.real());
    im_.add(z.imag());
  }
  std::size_t count() const { return re_.count(); }
  Complex mean() const { return {re_.mean(), im_.mean()}; }
  double se() const { return std::max(re_.se(), im_.se()); }

 private:
  RunningStats re_;
  RunningStats im_;
};

/// Plain sums for blocked reductions of complex means.
struct ComplexSums {
  Complex sum{0.0, 0.0};
  double sq_re = 0.0;
  double sq_im = 0.0;
  double count = 0.0;

  void add(Complex z) {
    sum += z;
    sq_re += z.real() * z.real();
    sq_im += z.imag() * z.imag();
    count += 1.0;
  }
  ComplexSums operator+(const ComplexSums& o) const {
    return {sum + o.sum, sq_re + o.sq_re, sq_im + o.sq_im, count + o.count};
  }
  Complex mean() const { return count > 0 ? sum / count : Complex{}; }
  /// Larger of the two component standard errors of the mean.
  double se() const {
    if (count < 2) return 0.0;
    const Complex m = mean();
    const double vr = std::max(0.0, (sq_re - count * m.real() * m.real()) / (count - 1));
    const double vi = std::max(0.0, (sq_im - count * m.imag() * m.imag()) / (count - 1));
    return std::sqrt(std::max(vr, vi) / count);
  }
};

/// Combines per-scale estimates: inverse-variance weighted mean, weighted SE
/// (scales share samples, so no sqrt(n) gain is claimed), half-range of the
/// per-scale values as spread.
inline ComplexEstimate combine_scales(const std::vector<ComplexEstimate>& per_scale) {
  if (per_scale.empty()) throw EstimationError("no scales to combine");
  bool weighted = true;
  for (const auto& e : per_scale) weighted = weighted && e.se > 0.0;
  ComplexEstimate out;
  double wsum = 0.0;
  double lo_re = per_scale.front().value.real(), hi_re = lo_re;
  double lo_im = per_scale.front().value.imag(), hi_im = lo_im;
  for (const auto& e : per_scale) {
    const double w = weighted ? 1.0 / (e.se * e.se) : 1.0;
    out.value += w * e.value;
    out.se += w * e.se;
    wsum += w;
    lo_re = std::min(lo_re, e.value.real());
    hi_re = std::max(hi_re, e.value.real());
    lo_im = std::min(lo_im, e.value.imag());
    hi_im = std::max(hi_im, e.value.imag());
  }
  out.value /= wsum;
  out.se /= wsum;
  out.spread = 0.5 * std::max(hi_re - lo_re, hi_im - lo_im);
  return out;
}

/// Empirical quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("quantile of an empty sample");
  q = std::clamp(q, 0.0, 1.0);
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double vlo = values[lo];
  if (hi == lo) return vlo;
  const double vhi = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return vlo + (pos - static_cast<double>(lo)) * (vhi - vlo);
}

/// Upper tail probability of a chi-square variable with `dof` degrees of freedom.
inline double chi_square_pvalue(double statistic, double dof) {
  if (dof <= 0) throw InputError("chi-square needs positive degrees of freedom");
  if (statistic <= 0) return 1.0;
  return boost::math::gamma_q(dof / 2.0, statistic / 2.0);
}

/// Pearson chi-square of observed counts against expected counts. Cells with
/// expectation below `min_expected` are pooled into one cell.
struct ChiSquareResult {
  double statistic = 0.0;
  double dof = 0.0;
  double pvalue = 1.0;
};

inline ChiSquareResult chi_square_test(std::span<const double> observed, std::span<const double> expected,
                                       double min_expected = 5.0) {
  if (observed.size() != expected.size()) throw InputError("chi-square cell count mismatch");
  double stat = 0.0;
  double pooled_obs = 0.0;
  double pooled_exp = 0.0;
  int cells = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (expected[i] < min_expected) {
      pooled_obs += observed[i];
      pooled_exp += expected[i];
      continue;
    }
    stat += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
    ++cells;
  }
  if (pooled_exp > 0.0) {
    stat += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
    ++cells;
  }
  ChiSquareResult r;
  r.statistic = stat;
  r.dof = std::max(1, cells - 1);
  r.pvalue = chi_square_pvalue(stat, r.dof);
  return r;
}

/// Aitken delta-squared extrapolation of the last three terms of a sequence.
/// Falls back to the last term when the second difference vanishes.
inline Complex aitken_limit(Complex x0, Complex x1, Complex x2) {
  const Complex d1 = x1 - x0;
  const Complex d2 = x2 - x1;
  const Complex denom = d2 - d1;
  if (std::abs(denom) <= 1e-14 * (std::abs(x2) + 1e-300)) return x2;
  return x2 - d2 * d2 / denom;
}

/// Least-squares fit of complex values on real basis functions. Returns the
/// coefficients in basis order.
inline std::vector<Complex> complex_least_squares(const Eigen::MatrixXd& basis, std::span<const Complex> values) {
  if (basis.rows() != static_cast<Eigen::Index>(values.size()) || basis.rows() < basis.cols())
    throw InputError("least squares needs at least as many points as basis functions");
  Eigen::VectorXd re(basis.rows()), im(basis.rows());
  for (Eigen::Index i = 0; i < basis.rows(); ++i) {
    re(i) = values[static_cast<std::size_t>(i)].real();
    im(i) = values[static_cast<std::size_t>(i)].imag();
  }
  const auto qr = basis.colPivHouseholderQr();
  const Eigen::VectorXd cr = qr.solve(re);
  const Eigen::VectorXd ci = qr.solve(im);
  std::vector<Complex> out(static_cast<std::size_t>(basis.cols()));
  for (Eigen::Index j = 0; j < basis.cols(); ++j) out[static_cast<std::size_t>(j)] = {cr(j), ci(j)};
  return out;
}

/// Ordinary least-squares slope of y on x.
inline double regression_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("regression needs two or more points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0) throw InputError("regression on constant abscissae");
  return sxy / sxx;
}

}  // namespace affrec
