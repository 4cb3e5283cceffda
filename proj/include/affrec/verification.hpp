// SPDX-License-Identifier: Apache-2.0
//
// Monte Carlo checks of the limit laws: empirical characteristic functions
// of normalized sums against Phi, the density of the limit at zero, the
// local limit ratio and exact enumeration for short chains.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "affrec/error.hpp"
#include "affrec/group.hpp"
#include "affrec/limit_law.hpp"
#include "affrec/measure.hpp"
#include "affrec/parallel.hpp"
#include "affrec/recursion.hpp"
#include "affrec/stats.hpp"
#include "affrec/tail.hpp"

namespace affrec {

/// Empirical mean of e^{i<v, X>} per grid point; se = 1/sqrt(N).
inline std::vector<ComplexEstimate> ecf(const TrajectoryBatch& samples, const std::vector<Vector>& v_grid,
                                        unsigned workers = 1) {
  const auto n = static_cast<std::size_t>(samples.size());
  std::vector<ComplexEstimate> out;
  out.reserve(v_grid.size());
  const double se = n > 0 ? 1.0 / std::sqrt(static_cast<double>(n)) : 0.0;
  for (const auto& v : v_grid) {
    require_dim(BlockStructure::euclidean(samples.dim()), v.size(), "v");
    if (v.norm() == 0.0 || n == 0) {
      out.push_back({Complex(1.0, 0.0), 0.0, 0.0});
      continue;
    }
    const Complex sum = blocked_reduce(n, workers, Complex{}, [&](std::size_t b, std::size_t e) {
      Complex s{};
      for (std::size_t i = b; i < e; ++i)
        s += std::polar(1.0, samples.values.row(static_cast<Eigen::Index>(i)).dot(v.transpose()));
      return s;
    });
    out.push_back({sum / static_cast<double>(n), se, 0.0});
  }
  return out;
}

/// ECF of an exact finite law.
inline Complex exact_cf(const DiscreteLaw& law, const Vector& v) {
  Complex s{};
  for (std::size_t i = 0; i < law.support.size(); ++i) s += law.probs[i] * std::polar(1.0, law.support[i].dot(v));
  return s;
}

/// 64-bit FNV-1a of the atoms at full precision.
inline std::string fingerprint(const MuSpec& mu) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&](double x) {
    char buf[32];
    const int len = std::snprintf(buf, sizeof buf, "%.17g;", x);
    for (int i = 0; i < len; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  };
  const auto& b = mu.blocks();
  for (int j = 0; j < b.blocks(); ++j) {
    feed(b.exponent(j));
    feed(b.block_dim(j));
  }
  for (const auto& at : mu.atoms()) {
    feed(at.prob);
    const Matrix m = at.m.matrix();
    for (Eigen::Index i = 0; i < m.size(); ++i) feed(m.data()[i]);
    for (Eigen::Index i = 0; i < at.q.size(); ++i) feed(at.q(i));
  }
  if (const auto& f = mu.family()) {
    feed(f->prob);
    feed(f->a);
    feed(f->b);
    for (const auto& k : f->orthogonal)
      for (Eigen::Index i = 0; i < k.size(); ++i) feed(k.data()[i]);
    for (Eigen::Index i = 0; i < f->q.size(); ++i) feed(f->q(i));
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

/// Homogeneity exponent of |Re log Phi|: 2 with a Gaussian part, alpha otherwise.
inline double decay_exponent(const LimitLawSpec& law) { return law.has_gaussian() ? 2.0 : std::min(law.alpha, 2.0); }

/// 17 points per axis on [-2, 2] * s, with s chosen so that max |Re log Phi|
/// on the grid is 8; points with |Re log Phi| < 0.01 are dropped (the
/// origin is kept).
inline std::vector<Vector> default_v_grid(const LimitLawSpec& law, int points = 17) {
  const int d = law.blocks.dim();
  if (d > 2) throw UnsupportedError("default v grids are defined for d <= 2");
  auto axis_grid = [&](double s) {
    std::vector<Vector> g;
    const int per = points;
    const int total = d == 1 ? per : per * per;
    for (int i = 0; i < total; ++i) {
      Vector v(d);
      v(0) = s * (-2.0 + 4.0 * (i % per) / (per - 1));
      if (d == 2) v(1) = s * (-2.0 + 4.0 * (i / per) / (per - 1));
      g.push_back(v);
    }
    return g;
  };
  double worst = 0.0;
  for (const auto& v : axis_grid(1.0)) worst = std::max(worst, -law.exponent(v).real());
  double s = 1.0;
  if (worst > 0.0) s = std::pow(8.0 / worst, 1.0 / decay_exponent(law));
  std::vector<Vector> out;
  for (const auto& v : axis_grid(s)) {
    if (v.norm() == 0.0 || -law.exponent(v).real() >= 0.01) out.push_back(v);
  }
  return out;
}

/// Caches the exponent per v; estimated laws are expensive to evaluate.
inline LimitLawSpec memoized(LimitLawSpec law) {
  if (!law.stable) return law;
  auto cache = std::make_shared<std::map<std::vector<double>, Complex>>();
  law.stable = [cache, f = law.stable](const Vector& v) {
    std::vector<double> key(v.data(), v.data() + v.size());
    const auto it = cache->find(key);
    if (it != cache->end()) return it->second;
    const Complex c = f(v);
    cache->emplace(std::move(key), c);
    return c;
  };
  return law;
}

/// c_n and d_n for the regimes that need no estimated constants:
/// alpha < 1 (d_n = 0) and Euclidean alpha > 2 (c_n = n^{-1/2}, d_n = sqrt(n) m).
inline std::vector<CenteringStep> closed_form_centering(const MuSpec& mu, const std::vector<long>& n_list) {
  const auto h = require_hypothesis_H(mu);
  const auto regime = classify_regime(h.alpha, mu.blocks());
  std::vector<CenteringStep> out;
  for (long n : n_list) {
    if (n < 0) throw InputError("n must be non-negative");
    CenteringStep s;
    s.n = n;
    if (regime == Regime::kAlphaLt1) {
      if (n == 0) {
        s.c_scale = 1.0;
      } else {
        const auto st = normalizer_schedule(h.structure, h.alpha, n);
        s.c_scale = st.c_scale;
        s.exact = st.exact;
      }
      s.d = Vector::Zero(mu.dim());
    } else if (regime == Regime::kAlphaGt2) {
      const double nn = static_cast<double>(std::max<long>(n, 1));
      s.c_scale = 1.0 / std::sqrt(nn);
      s.d = n == 0 ? Vector::Zero(mu.dim()) : Vector(std::sqrt(nn) * mean_operator_and_mean(mu, h.alpha).m);
    } else {
      throw RegimeError(std::string("centering for regime ") + regime_name(regime) + " needs estimated constants");
    }
    out.push_back(s);
  }
  return out;
}

struct ConvergenceRow {
  long n = 0;
  double c_scale = 1.0;
  bool exact = true;
  std::vector<ComplexEstimate> ecf;
  std::vector<Complex> phi;
  double sup_distance = 0.0;
  double se = 0.0;
  bool inconclusive = false;
};

struct LocalLimitRow {
  long n = 0;
  double count = 0.0;
  double frequency = 0.0;
  double ratio = 0.0;
  double se = 0.0;
  bool inconclusive = false;
};

struct VerificationTolerances {
  double final_distance = 0.05;
  bool require_monotone = true;
  double plateau = 0.2;
};

struct VerificationReport {
  std::string experiment;
  std::string spec_hash;
  std::uint64_t seed = 0;
  Eigen::Index samples = 0;
  std::vector<Vector> v_grid;
  std::vector<ConvergenceRow> rows;
  bool monotone = true;
  std::vector<LocalLimitRow> local_limit;
  double local_target = 0.0;
  double local_target_error = 0.0;
  bool pass = false;
  double runtime_seconds = 0.0;
  std::vector<std::string> notes;
};

/// ECF of the normalized sums against Phi for each centering step; one pass
/// over the chain serves every n.
inline VerificationReport verify_convergence(const MuSpec& mu, const LimitLawSpec& law,
                                             const std::vector<CenteringStep>& steps, const std::vector<Vector>& v_grid,
                                             Eigen::Index count, std::uint64_t seed, unsigned workers = 1,
                                             std::optional<Vector> x0 = std::nullopt,
                                             VerificationTolerances tol = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto h = require_hypothesis_H(mu);
  const auto regime = classify_regime(h.alpha, mu.blocks());
  if (regime != law.regime)
    throw RegimeError(std::string("limit law regime ") + regime_name(law.regime) + " does not match the measure (" +
                      regime_name(regime) + ")");
  if (steps.empty() || v_grid.empty()) throw InputError("verification needs n values and a v grid");
  const Vector start = x0.value_or(Vector::Zero(mu.dim()));
  std::vector<long> ns;
  for (const auto& s : steps) {
    if (h.structure.is_lattice() && s.n > 0 && !s.exact)
      throw InputError("lattice measures are verified on the exact subsequence only (n = " + std::to_string(s.n) + ")");
    if (s.n > 0) ns.push_back(s.n);
  }
  std::vector<TrajectoryBatch> sums;
  if (!ns.empty()) sums = partial_sums(mu, start, ns, count, seed, workers);
  VerificationReport r;
  r.experiment = "convergence";
  r.spec_hash = fingerprint(mu);
  r.seed = seed;
  r.samples = count;
  r.v_grid = v_grid;
  std::vector<Complex> phi;
  for (const auto& v : v_grid) phi.push_back(law.phi(v));
  std::size_t next = 0;
  for (const auto& s : steps) {
    ConvergenceRow row;
    row.n = s.n;
    row.c_scale = s.c_scale;
    row.exact = s.exact;
    if (s.n == 0) {
      row.ecf.assign(v_grid.size(), {Complex(1.0, 0.0), 0.0, 0.0});
    } else {
      TrajectoryBatch norm = sums[next++];
      for (Eigen::Index i = 0; i < norm.size(); ++i)
        norm.values.row(i) = normalize_sum(norm.row(i), s, regime, mu.blocks(), h.alpha).transpose();
      row.ecf = ecf(norm, v_grid, workers);
    }
    row.phi = phi;
    for (std::size_t j = 0; j < v_grid.size(); ++j) {
      row.sup_distance = std::max(row.sup_distance, std::abs(row.ecf[j].value - phi[j]));
      row.se = std::max(row.se, row.ecf[j].se);
    }
    row.inconclusive = row.se > 0.0 && row.sup_distance <= 3.0 * row.se;
    r.rows.push_back(std::move(row));
  }
  for (std::size_t i = 1; i < r.rows.size(); ++i)
    if (r.rows[i].sup_distance >= r.rows[i - 1].sup_distance) r.monotone = false;
  r.pass = r.rows.back().sup_distance < tol.final_distance && (!tol.require_monotone || r.monotone);
  r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

struct QuadGrid {
  /// Half-width of the integration box; 0 picks it from the fitted decay.
  double v_max = 0.0;
  int points = 4001;
};

struct DensityEstimate {
  double value = 0.0;
  double quadrature_error = 0.0;
  double tail_error = 0.0;
  /// Fitted decay |Phi(v)| <= exp(-D |v|^h) for |v| >= 1.
  double decay = 0.0;
};

/// p(0) = (2 pi)^{-d} int Phi(v) dv by composite Simpson on [-V, V]^d with a
/// Richardson error estimate and an incomplete-gamma bound for the tail.
inline DensityEstimate density_at_zero(const LimitLawSpec& law, QuadGrid quad = {}) {
  const int d = law.blocks.dim();
  if (d > 2) throw UnsupportedError("density at zero is implemented for d <= 2");
  const double hexp = decay_exponent(law);
  double D = std::numeric_limits<double>::infinity();
  const int probes = 48;
  for (int i = 0; i < probes; ++i) {
    const double r = std::pow(4.0, static_cast<double>(i % 16) / 16.0);
    Vector v(d);
    if (d == 1) {
      v(0) = (i < probes / 2 ? 1.0 : -1.0) * r;
    } else {
      const double a = 2.0 * std::numbers::pi * i / probes;
      v << r * std::cos(a), r * std::sin(a);
    }
    D = std::min(D, -law.exponent(v).real() / std::pow(r, hexp));
  }
  if (!(D > 0.0)) throw EstimationError("fitted decay D <= 0; integrability of Phi cannot be certified");
  DensityEstimate e;
  e.decay = D;
  const double V = quad.v_max > 0.0 ? quad.v_max : std::max(1.0, std::pow(40.0 / D, 1.0 / hexp));
  int n = std::max(5, quad.points);
  if (n % 2 == 0) ++n;
  if ((n - 1) % 4 != 0) n += 2;
  auto simpson_w = [](int i, int n) { return (i == 0 || i == n - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0); };
  auto integrate = [&](int m, int stride) {
    // nodes i*stride of the fine grid, m nodes on the coarse grid
    const double hstep = (d == 1 ? V : 2.0 * V) / (n - 1) * stride;
    double s = 0.0;
    if (d == 1) {
      for (int i = 0; i < m; ++i) {
        Vector v(1);
        v(0) = hstep * i;
        s += simpson_w(i, m) * law.phi(v).real();
      }
      return s * hstep / 3.0 / std::numbers::pi;
    }
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        Vector v(2);
        v << -V + hstep * i, -V + hstep * j;
        s += simpson_w(i, m) * simpson_w(j, m) * law.phi(v).real();
      }
    return s * hstep * hstep / 9.0 / (4.0 * std::numbers::pi * std::numbers::pi);
  };
  const double fine = integrate(n, 1);
  const double coarse = integrate((n - 1) / 2 + 1, 2);
  e.value = fine;
  e.quadrature_error = std::abs(fine - coarse) / 15.0;
  const double x = D * std::pow(V, hexp);
  if (d == 1) {
    const double s = 1.0 / hexp;
    e.tail_error = 2.0 / (2.0 * std::numbers::pi) * s * std::pow(D, -s) * std::tgamma(s) * boost::math::gamma_q(s, x);
  } else {
    const double s = 2.0 / hexp;
    e.tail_error = 2.0 * std::numbers::pi / hexp * std::pow(D, -s) * std::tgamma(s) * boost::math::gamma_q(s, x) /
                   (4.0 * std::numbers::pi * std::numbers::pi);
  }
  return e;
}

struct LocalLimitReport {
  std::vector<LocalLimitRow> rows;
  double chi = 0.0;
  double target = 0.0;
  double target_error = 0.0;
  bool plateau = false;
  bool inconclusive = false;
  std::string spec_hash;
  std::uint64_t seed = 0;
};

/// Box [lo, hi] with volume lambda(I).
struct Box {
  Vector lo;
  Vector hi;
  double volume() const {
    double v = 1.0;
    for (Eigen::Index i = 0; i < lo.size(); ++i) v *= std::max(0.0, hi(i) - lo(i));
    return v;
  }
  bool contains(const Eigen::Ref<const Vector>& x) const {
    for (Eigen::Index i = 0; i < lo.size(); ++i)
      if (!(x(i) >= lo(i) && x(i) <= hi(i))) return false;
    return true;
  }
};

/// n^chi P[S_n - d_n in I] per n against p(0) lambda(I). `centering(n)` gives
/// d_n in the units of S_n.
inline LocalLimitReport local_limit_check(const MuSpec& mu, const std::function<Vector(long)>& centering, double p0,
                                          double p0_error, const Box& box, const std::vector<long>& n_list,
                                          Eigen::Index count, std::uint64_t seed, unsigned workers = 1,
                                          double plateau_tol = 0.2) {
  const auto h = require_hypothesis_H(mu);
  if (h.structure.is_lattice()) throw UnsupportedError("the local limit check needs a dense scale group");
  if (std::abs(h.alpha - 1.0) < 1e-9 || std::abs(h.alpha - 2.0) < 1e-9)
    throw RegimeError("the local limit check excludes alpha = 1 and alpha = 2");
  require_dim(mu.blocks(), box.lo.size(), "interval");
  require_dim(mu.blocks(), box.hi.size(), "interval");
  if (n_list.empty()) throw InputError("local limit check needs n values");
  LocalLimitReport r;
  r.chi = mu.dim() / (h.alpha < 2.0 ? h.alpha : 2.0);
  r.target = p0 * box.volume();
  r.target_error = p0_error * box.volume();
  r.spec_hash = fingerprint(mu);
  r.seed = seed;
  const auto sums = partial_sums(mu, Vector::Zero(mu.dim()), n_list, count, seed, workers);
  for (std::size_t k = 0; k < n_list.size(); ++k) {
    const long n = n_list[k];
    const Vector dn = centering(n);
    const auto& b = sums[k];
    const double hits = blocked_reduce(static_cast<std::size_t>(b.size()), workers, 0.0, [&](std::size_t s, std::size_t e) {
      double c = 0.0;
      for (std::size_t i = s; i < e; ++i)
        if (box.contains(b.values.row(static_cast<Eigen::Index>(i)).transpose() - dn)) c += 1.0;
      return c;
    });
    LocalLimitRow row;
    row.n = n;
    row.count = hits;
    const double N = static_cast<double>(b.size());
    row.frequency = hits / N;
    const double scale = std::pow(static_cast<double>(n), r.chi);
    row.ratio = scale * row.frequency;
    row.se = scale * std::sqrt(row.frequency * (1.0 - row.frequency) / N);
    row.inconclusive = r.target > 0.0 && r.target / scale * N < 20.0;
    r.inconclusive = r.inconclusive || row.inconclusive;
    r.rows.push_back(row);
  }
  if (r.rows.size() >= 2 && r.target > 0.0) {
    const double a = r.rows[r.rows.size() - 2].ratio;
    const double b = r.rows.back().ratio;
    r.plateau = std::abs(a - b) <= plateau_tol * std::max(a, b) && std::abs(a - r.target) <= plateau_tol * r.target &&
                std::abs(b - r.target) <= plateau_tol * r.target;
  } else if (r.target == 0.0) {
    r.plateau = std::all_of(r.rows.begin(), r.rows.end(), [](const auto& x) { return x.count == 0.0; });
  }
  return r;
}

/// Convenience form: d_n = 0 (alpha < 1) or n m (alpha > 2), p(0) from the law.
inline LocalLimitReport local_limit_check(const MuSpec& mu, const LimitLawSpec& law, const Box& box,
                                          const std::vector<long>& n_list, Eigen::Index count, std::uint64_t seed,
                                          unsigned workers = 1, double plateau_tol = 0.2) {
  const auto h = require_hypothesis_H(mu);
  const auto regime = classify_regime(h.alpha, mu.blocks());
  std::function<Vector(long)> centering;
  if (regime == Regime::kAlphaLt1) {
    centering = [d = mu.dim()](long) { return Vector(Vector::Zero(d)); };
  } else if (regime == Regime::kAlphaGt2) {
    const Vector m = mean_operator_and_mean(mu, h.alpha).m;
    centering = [m](long n) { return Vector(static_cast<double>(n) * m); };
  } else {
    throw RegimeError(std::string("no closed-form centering for regime ") + regime_name(regime));
  }
  if (h.structure.is_lattice()) throw UnsupportedError("the local limit check needs a dense scale group");
  const auto p0 = density_at_zero(law);
  return local_limit_check(mu, centering, p0.value, p0.quadrature_error + p0.tail_error, box, n_list, count, seed,
                           workers, plateau_tol);
}

struct OracleCheck {
  ChiSquareResult chi;
  double max_ecf_deviation = 0.0;
  double ecf_bound = 0.0;
  bool ecf_within = false;
  std::size_t unmatched = 0;
};

/// Simulated S_n against exact enumeration: chi-square on the support and
/// the ECF on v_grid within 4 / sqrt(N).
inline OracleCheck oracle_check(const MuSpec& mu, const Vector& x0, int n, Eigen::Index count, std::uint64_t seed,
                                const std::vector<Vector>& v_grid, unsigned workers = 1) {
  if (n < 1) throw InputError("oracle check needs n >= 1");
  const auto law = brute_force_distribution(mu, x0, n, BruteForceTarget::kS);
  const auto sums = partial_sums(mu, x0, {n}, count, seed, workers);
  const auto& b = sums.front();
  std::vector<double> obs(law.support.size(), 0.0), expct(law.support.size());
  OracleCheck r;
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    const long k = match_support(law, b.row(i));
    if (k < 0) {
      ++r.unmatched;
      continue;
    }
    obs[static_cast<std::size_t>(k)] += 1.0;
  }
  const double N = static_cast<double>(b.size());
  for (std::size_t k = 0; k < law.support.size(); ++k) expct[k] = law.probs[k] * N;
  r.chi = chi_square_test(obs, expct);
  const auto emp = ecf(b, v_grid, workers);
  for (std::size_t j = 0; j < v_grid.size(); ++j)
    r.max_ecf_deviation = std::max(r.max_ecf_deviation, std::abs(emp[j].value - exact_cf(law, v_grid[j])));
  r.ecf_bound = 4.0 / std::sqrt(N);
  r.ecf_within = r.max_ecf_deviation <= r.ecf_bound;
  return r;
}

}  // namespace affrec
