// SPDX-License-Identifier: Apache-2.0
//
// Grid discretization of the Fourier transfer operators
//   P_{c,v} f(x) = sum_i p_i e^{i<v, c(g_i x + b_i)>} f(g_i x + b_i)
// for finite mixtures in dimension 1 or 2, with piecewise-linear
// interpolation, and the dominant eigenvalue k(c, v).
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "affrec/error.hpp"
#include "affrec/group.hpp"
#include "affrec/measure.hpp"
#include "affrec/parallel.hpp"
#include "affrec/recursion.hpp"
#include "affrec/rng.hpp"
#include "affrec/stats.hpp"
#include "affrec/tail.hpp"

namespace affrec {

using ComplexVector = Eigen::VectorXcd;
using SparseOperator = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;

/// theta for the sup weight (1 + tau)^theta; eps and lambda for the Hoelder
/// seminorm. Defaults: eps = alpha/20, lambda = alpha/2 - 2 eps, theta halfway
/// between lambda + 3 eps and 2 lambda.
struct WeightExponents {
  double theta = 1.0;
  double eps = 0.05;
  double lambda = 0.4;

  static WeightExponents defaults(double alpha) {
    WeightExponents w;
    w.eps = alpha / 20.0;
    w.lambda = alpha / 2.0 - 2.0 * w.eps;
    w.theta = 0.5 * (w.lambda + 3.0 * w.eps + 2.0 * w.lambda);
    return w;
  }

  bool feasible(double alpha) const { return theta < alpha && 2.0 * lambda + 3.0 * eps < alpha && eps > 0.0; }
};

enum class GridKind { kUniform, kAsinh };
enum class BoundaryPolicy { kClamp, kDampedLinear };

/// Tensor grid on [-L, L]^d. Uniform grids have mesh h; asinh grids place
/// sinh(u) on a uniform u-grid, which reaches far into the tail with few nodes.
class OperatorGrid {
 public:
  static OperatorGrid uniform(const BlockStructure& blocks, double L, double h, WeightExponents w) {
    if (!(L > 0.0) || !(h > 0.0) || h > L) throw InputError("uniform grid needs 0 < h <= L");
    const auto n = static_cast<std::size_t>(std::llround(2.0 * L / h)) + 1;
    std::vector<double> axis(n);
    for (std::size_t i = 0; i < n; ++i) axis[i] = -L + h * static_cast<double>(i);
    axis.back() = L;
    return OperatorGrid(blocks, GridKind::kUniform, std::move(axis), w);
  }

  static OperatorGrid asinh(const BlockStructure& blocks, double L, std::size_t nodes, WeightExponents w) {
    if (!(L > 0.0) || nodes < 3) throw InputError("asinh grid needs L > 0 and at least 3 nodes");
    if (nodes % 2 == 0) ++nodes;
    const double U = std::asinh(L);
    std::vector<double> axis(nodes);
    for (std::size_t i = 0; i < nodes; ++i)
      axis[i] = std::sinh(-U + 2.0 * U * static_cast<double>(i) / static_cast<double>(nodes - 1));
    axis[nodes / 2] = 0.0;
    axis.front() = -L;
    axis.back() = L;
    return OperatorGrid(blocks, GridKind::kAsinh, std::move(axis), w);
  }

  const BlockStructure& blocks() const { return blocks_; }
  GridKind kind() const { return kind_; }
  int dim() const { return blocks_.dim(); }
  double L() const { return axis_.back(); }
  /// Largest spacing of the axis.
  double h() const { return h_max_; }
  const WeightExponents& exponents() const { return w_; }
  const std::vector<double>& axis() const { return axis_; }
  std::size_t axis_size() const { return axis_.size(); }
  std::size_t size() const { return dim() == 1 ? axis_.size() : axis_.size() * axis_.size(); }

  Vector node(std::size_t i) const {
    Vector x(dim());
    if (dim() == 1) {
      x(0) = axis_[i];
    } else {
      x(0) = axis_[i % axis_.size()];
      x(1) = axis_[i / axis_.size()];
    }
    return x;
  }

  const Eigen::VectorXd& weights() const { return weight_; }
  double weight_at(const Vector& x) const { return std::pow(1.0 + tau(x, blocks_), w_.theta); }

  /// Index of the node with the smallest tau.
  std::size_t origin_index() const { return origin_; }

  /// sup_x |f(x)| / (1 + tau(x))^theta.
  double norm(const ComplexVector& f) const { return (f.cwiseAbs().array() / weight_.array()).maxCoeff(); }

  bool inside(const Vector& y) const {
    for (int k = 0; k < dim(); ++k)
      if (y(k) < axis_.front() || y(k) > axis_.back()) return false;
    return true;
  }

  struct Stencil {
    std::size_t index[4] = {0, 0, 0, 0};
    double weight[4] = {0, 0, 0, 0};
    int count = 0;
    bool clipped = false;
  };

  /// Linear (d = 1) or bilinear (d = 2) interpolation weights at y.
  Stencil stencil(const Vector& y, BoundaryPolicy policy) const {
    Stencil s;
    double damp = 1.0;
    Vector yc = y;
    for (int k = 0; k < dim(); ++k) yc(k) = std::clamp(y(k), axis_.front(), axis_.back());
    s.clipped = !(yc == y);
    if (s.clipped && policy == BoundaryPolicy::kDampedLinear)
      damp = std::pow((1.0 + tau(yc, blocks_)) / (1.0 + tau(y, blocks_)), w_.theta);
    std::size_t j[2] = {0, 0};
    double f[2] = {0.0, 0.0};
    for (int k = 0; k < dim(); ++k) {
      const double yk = y(k);
      const auto it = std::upper_bound(axis_.begin(), axis_.end(), yk);
      const auto pos = static_cast<std::ptrdiff_t>(it - axis_.begin()) - 1;
      const auto jj = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(pos, 0, static_cast<std::ptrdiff_t>(axis_.size()) - 2));
      double w = (yk - axis_[jj]) / (axis_[jj + 1] - axis_[jj]);
      if (yk > axis_.back()) {
        w = policy == BoundaryPolicy::kClamp ? 1.0 : 1.0 + damp * (w - 1.0);
      } else if (yk < axis_.front()) {
        w = policy == BoundaryPolicy::kClamp ? 0.0 : damp * w;
      }
      j[k] = jj;
      f[k] = w;
    }
    const std::size_t n = axis_.size();
    if (dim() == 1) {
      s.count = 2;
      s.index[0] = j[0];
      s.index[1] = j[0] + 1;
      s.weight[0] = 1.0 - f[0];
      s.weight[1] = f[0];
    } else {
      s.count = 4;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          s.index[2 * b + a] = (j[0] + static_cast<std::size_t>(a)) + n * (j[1] + static_cast<std::size_t>(b));
          s.weight[2 * b + a] = (a ? f[0] : 1.0 - f[0]) * (b ? f[1] : 1.0 - f[1]);
        }
    }
    return s;
  }

  /// Interpolated value of a gridded function at y (clamped outside).
  Complex interpolate(const ComplexVector& f, const Vector& y) const {
    const auto s = stencil(y, BoundaryPolicy::kClamp);
    Complex acc = 0.0;
    for (int k = 0; k < s.count; ++k) acc += s.weight[k] * f(static_cast<Eigen::Index>(s.index[k]));
    return acc;
  }

 private:
  OperatorGrid(BlockStructure blocks, GridKind kind, std::vector<double> axis, WeightExponents w)
      : blocks_(std::move(blocks)), kind_(kind), axis_(std::move(axis)), w_(w) {
    if (blocks_.dim() < 1 || blocks_.dim() > 2) throw UnsupportedError("operator grids support d = 1 and d = 2 only");
    if (!(w_.theta > 0.0)) throw InputError("weight exponent theta must be positive");
    const std::size_t n = size();
    if (n > 50'000'000) throw SizeError("operator grid has too many nodes");
    for (std::size_t i = 0; i + 1 < axis_.size(); ++i) h_max_ = std::max(h_max_, axis_[i + 1] - axis_[i]);
    weight_.resize(static_cast<Eigen::Index>(n));
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double t = tau(node(i), blocks_);
      weight_(static_cast<Eigen::Index>(i)) = std::pow(1.0 + t, w_.theta);
      if (t < best) {
        best = t;
        origin_ = i;
      }
    }
  }

  BlockStructure blocks_;
  GridKind kind_;
  std::vector<double> axis_;
  WeightExponents w_;
  double h_max_ = 0.0;
  Eigen::VectorXd weight_;
  std::size_t origin_ = 0;
};

/// Assembled P_{c,v} on a grid.
struct DiscreteOperator {
  std::shared_ptr<const OperatorGrid> grid;
  SparseOperator matrix;
  double c = 0.0;
  Vector v;
  BoundaryPolicy policy = BoundaryPolicy::kClamp;
  /// Probability-weighted fraction of images g x + b that left the grid.
  double clipped_fraction = 0.0;

  ComplexVector apply(const ComplexVector& f) const { return matrix * f; }
  std::size_t size() const { return grid->size(); }
};

/// <v, c y> with c acting as the tau-dilation.
inline double scaled_pairing(const Vector& v, double c, const Vector& y, const BlockStructure& blocks) {
  if (c == 0.0) return 0.0;
  return v.dot(dilate(y, c, blocks));
}

inline DiscreteOperator assemble(const MuSpec& mu, std::shared_ptr<const OperatorGrid> grid, double c, const Vector& v,
                                 BoundaryPolicy policy = BoundaryPolicy::kClamp, unsigned workers = 1) {
  if (!mu.is_finite_mixture()) throw UnsupportedError("operator assembly needs a finite mixture of atoms");
  if (!grid) throw InputError("operator grid is missing");
  if (!(mu.blocks() == grid->blocks())) throw InputError("grid and measure have different block structures");
  require_dim(mu.blocks(), v.size(), "v");
  if (!(c >= 0.0) || !std::isfinite(c)) throw InputError("scale c must be finite and non-negative");
  const std::size_t n = grid->size();
  const auto& atoms = mu.atoms();
  const std::size_t per_row = atoms.size() * (grid->dim() == 1 ? 2u : 4u);
  std::vector<Eigen::Triplet<Complex>> trip(n * per_row);
  std::vector<double> clipped(n, 0.0);
  const auto& blocks = mu.blocks();
  parallel_for(n, workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const Vector x = grid->node(i);
      std::size_t slot = i * per_row;
      for (const auto& at : atoms) {
        const Vector y = at.m.apply(x) + at.q;
        const Complex phase = at.prob * std::polar(1.0, scaled_pairing(v, c, y, blocks));
        const auto s = grid->stencil(y, policy);
        if (s.clipped) clipped[i] += at.prob;
        for (int k = 0; k < s.count; ++k)
          trip[slot++] = {static_cast<int>(i), static_cast<int>(s.index[k]), phase * s.weight[k]};
      }
    }
  });
  DiscreteOperator op;
  op.grid = std::move(grid);
  op.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  op.matrix.setFromTriplets(trip.begin(), trip.end());
  op.matrix.makeCompressed();
  op.c = c;
  op.v = v;
  op.policy = policy;
  double total = 0.0;
  for (double x : clipped) total += x;
  op.clipped_fraction = total / static_cast<double>(n);
  return op;
}

struct EigenOptions {
  double tol = 1e-9;
  int max_iter = 10000;
  /// No halving of the residual within this many steps triggers a random-phase restart.
  int stagnation_window = 1000;
  std::uint64_t seed = 1;
};

struct EigenResult {
  Complex k = 0.0;
  /// Normalized so that psi is 1 at the node nearest the origin when possible.
  ComplexVector psi;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Growth rate of the iterates over the last steps.
  double radius = 0.0;
  std::vector<std::string> warnings;
};

namespace detail {

inline Complex weighted_dot(const ComplexVector& a, const ComplexVector& b, const Eigen::VectorXd& w) {
  return (a.conjugate().array() * b.array() / w.array().square()).sum();
}

inline ComplexVector random_phase(std::size_t n, std::uint64_t seed, std::uint64_t restart) {
  RngStream rng(seed, restart, StreamPurpose::kAuxiliary);
  ComplexVector r(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) r(static_cast<Eigen::Index>(i)) = std::polar(1.0, 2.0 * std::numbers::pi * rng.uniform());
  return r;
}

}  // namespace detail

/// Weighted power iteration with a Rayleigh quotient for k.
inline EigenResult dominant_eigenvalue(const DiscreteOperator& op, const EigenOptions& opt = {}) {
  const auto& grid = *op.grid;
  const auto& w = grid.weights();
  const auto n = static_cast<Eigen::Index>(op.size());
  EigenResult r;
  ComplexVector f = ComplexVector::Ones(n);
  f /= grid.norm(f);
  double best = std::numeric_limits<double>::infinity();
  int best_at = 0;
  std::uint64_t restarts = 0;
  double log_growth = 0.0;
  int growth_steps = 0;
  for (int it = 1; it <= opt.max_iter; ++it) {
    ComplexVector g = op.apply(f);
    const double gn = grid.norm(g);
    if (!std::isfinite(gn)) throw NumericError("power iteration produced non-finite values");
    const Complex k = detail::weighted_dot(f, g, w) / detail::weighted_dot(f, f, w);
    const double res = grid.norm(g - k * f) / grid.norm(f);
    r.k = k;
    r.residual = res;
    r.iterations = it;
    if (it > opt.max_iter - 200) {
      log_growth += std::log(gn / grid.norm(f));
      ++growth_steps;
    }
    if (res <= opt.tol) {
      r.converged = true;
      r.psi = std::move(g);
      break;
    }
    if (gn == 0.0) {
      r.psi = std::move(g);
      r.warnings.push_back("operator annihilated the iterate");
      break;
    }
    f = g / gn;
    if (res < 0.5 * best) {
      best = res;
      best_at = it;
    } else if (it - best_at >= opt.stagnation_window) {
      const ComplexVector phase = detail::random_phase(static_cast<std::size_t>(n), opt.seed, ++restarts);
      f = (f.array() + 0.1 * phase.array() * f.cwiseAbs().array()).matrix();
      f /= grid.norm(f);
      best = std::numeric_limits<double>::infinity();
      best_at = it;
    }
  }
  if (!r.converged) {
    if (r.psi.size() == 0) r.psi = f;
    r.radius = growth_steps > 0 ? std::exp(log_growth / growth_steps) : std::abs(r.k);
    r.warnings.push_back("power iteration did not reach the tolerance; spectral radius estimate " +
                         std::to_string(r.radius));
  } else {
    r.radius = std::abs(r.k);
  }
  const Complex at0 = r.psi(static_cast<Eigen::Index>(grid.origin_index()));
  if (std::abs(at0) > 1e-8 * grid.norm(r.psi)) {
    r.psi /= at0;
  } else {
    r.psi /= grid.norm(r.psi);
  }
  return r;
}

/// Second-largest eigenvalue modulus by iterating the operator deflated with
/// the dominant left and right eigenvectors.
struct GapEstimate {
  double second_modulus = 0.0;
  double gap = 0.0;
};

inline GapEstimate spectral_gap(const DiscreteOperator& op, const EigenResult& dom, int iterations = 3000,
                                std::uint64_t seed = 1) {
  const auto& grid = *op.grid;
  const auto n = static_cast<Eigen::Index>(op.size());
  const SparseOperator adj = op.matrix.adjoint();
  ComplexVector l = ComplexVector::Ones(n) / static_cast<double>(n);
  for (int it = 0; it < 20000; ++it) {
    ComplexVector m = adj * l;
    const Complex s = m.sum();
    if (std::abs(s) == 0.0) break;
    m /= s;
    const double diff = (m - l).cwiseAbs().sum();
    l = std::move(m);
    if (diff < 1e-13) break;
  }
  const Complex lpsi = l.dot(dom.psi);
  if (std::abs(lpsi) < 1e-300) throw NumericError("left and right eigenvectors are orthogonal");
  ComplexVector f = detail::random_phase(static_cast<std::size_t>(n), seed, 0);
  f = (f.array() * grid.weights().array()).matrix();
  auto deflate = [&](ComplexVector x) {
    x -= (l.dot(x) / lpsi) * dom.psi;
    return x;
  };
  f = deflate(f);
  f /= grid.norm(f);
  const int window = std::max(1, iterations / 4);
  double log_growth = 0.0;
  for (int it = 0; it < iterations; ++it) {
    ComplexVector g = deflate(op.apply(f));
    const double gn = grid.norm(g);
    if (gn == 0.0) return {0.0, 1.0};
    if (it >= iterations - window) log_growth += std::log(gn);
    f = g / gn;
  }
  GapEstimate e;
  e.second_modulus = std::exp(log_growth / window);
  e.gap = 1.0 - e.second_modulus / std::max(std::abs(dom.k), 1e-300);
  return e;
}

struct IdentityCheck {
  Complex lhs = 0.0;
  Complex rhs = 0.0;
  double residual = 0.0;
  double clipped_fraction = 0.0;
  std::vector<std::string> warnings;
};

/// (k - 1) nu(psi) against nu(psi (chi_{c* v} - 1)), nu the empirical law of
/// the stationary samples.
inline IdentityCheck eigenvalue_identity_check(const DiscreteOperator& op, const EigenResult& dom,
                                               const TrajectoryBatch& stationary, unsigned workers = 1) {
  const auto& grid = *op.grid;
  require_dim(grid.blocks(), stationary.dim(), "stationary samples");
  struct Acc {
    Complex psi = 0.0;
    Complex psi_chi = 0.0;
    double clipped = 0.0;
    Acc operator+(const Acc& o) const { return {psi + o.psi, psi_chi + o.psi_chi, clipped + o.clipped}; }
  };
  const auto n = static_cast<std::size_t>(stationary.size());
  const Acc a = blocked_reduce(n, workers, Acc{}, [&](std::size_t b, std::size_t e) {
    Acc s;
    for (std::size_t i = b; i < e; ++i) {
      const Vector x = stationary.row(static_cast<Eigen::Index>(i));
      if (!grid.inside(x)) s.clipped += 1.0;
      const Complex p = grid.interpolate(dom.psi, x);
      s.psi += p;
      s.psi_chi += p * (std::polar(1.0, scaled_pairing(op.v, op.c, x, grid.blocks())) - 1.0);
    }
    return s;
  });
  IdentityCheck r;
  const double nn = static_cast<double>(n);
  r.lhs = (dom.k - 1.0) * a.psi / nn;
  r.rhs = a.psi_chi / nn;
  r.clipped_fraction = a.clipped / nn;
  const double scale = std::max(std::abs(r.lhs), std::abs(r.rhs));
  r.residual = scale == 0.0 ? 0.0 : std::abs(r.lhs - r.rhs) / scale;
  if (r.clipped_fraction > 0.05)
    r.warnings.push_back("more than 5% of the stationary samples lie outside the grid");
  return r;
}

struct IntertwiningCheck {
  double residual = 0.0;
  ComplexVector psi_tilde;
};

/// psi~(x) = empirical E e^{i<cx, W>} from dual samples W; reports
/// |P_{c,v} psi~ - k psi~| / |psi~| in the weighted sup norm.
inline IntertwiningCheck intertwining_check(const DiscreteOperator& op, Complex k, const TrajectoryBatch& dual,
                                            unsigned workers = 1) {
  const auto& grid = *op.grid;
  require_dim(grid.blocks(), dual.dim(), "dual samples");
  const std::size_t n = grid.size();
  const auto m = dual.size();
  if (m < 1) throw InputError("intertwining check needs dual samples");
  IntertwiningCheck r;
  r.psi_tilde.resize(static_cast<Eigen::Index>(n));
  parallel_for(n, workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const Vector cx = op.c == 0.0 ? Vector::Zero(grid.dim()) : dilate(grid.node(i), op.c, grid.blocks());
      Complex acc = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) acc += std::polar(1.0, cx.dot(dual.values.row(j).transpose()));
      r.psi_tilde(static_cast<Eigen::Index>(i)) = acc / static_cast<double>(m);
    }
  });
  const double nrm = grid.norm(r.psi_tilde);
  r.residual = nrm == 0.0 ? 0.0 : grid.norm(op.apply(r.psi_tilde) - k * r.psi_tilde) / nrm;
  return r;
}

/// (P_{c,v}^n 1)(x0) for n = 1..n_max.
inline std::vector<Complex> iterate_constant(const DiscreteOperator& op, const Vector& x0, int n_max) {
  std::vector<Complex> out;
  ComplexVector f = ComplexVector::Ones(static_cast<Eigen::Index>(op.size()));
  for (int n = 1; n <= n_max; ++n) {
    f = op.apply(f);
    out.push_back(op.grid->interpolate(f, x0));
  }
  return out;
}

struct SumIdentityRow {
  long n = 0;
  Complex operator_value = 0.0;
  Complex monte_carlo = 0.0;
  double se = 0.0;
  bool within = false;
};

/// (P_{c,v}^n 1)(x0) against the empirical E chi_v(c S_n^{x0}).
inline std::vector<SumIdentityRow> sum_identity_check(const MuSpec& mu, const DiscreteOperator& op, const Vector& x0,
                                                      int n_max, Eigen::Index count, std::uint64_t seed,
                                                      double floor = 1e-3, unsigned workers = 1) {
  std::vector<long> ns;
  for (int n = 1; n <= n_max; ++n) ns.push_back(n);
  const auto sums = partial_sums(mu, x0, ns, count, seed, workers);
  const auto ops = iterate_constant(op, x0, n_max);
  std::vector<SumIdentityRow> out;
  const auto& blocks = op.grid->blocks();
  for (int n = 1; n <= n_max; ++n) {
    const auto& b = sums[static_cast<std::size_t>(n - 1)];
    ComplexSums acc;
    for (Eigen::Index i = 0; i < b.size(); ++i) acc.add(std::polar(1.0, scaled_pairing(op.v, op.c, b.row(i), blocks)));
    SumIdentityRow row;
    row.n = n;
    row.operator_value = ops[static_cast<std::size_t>(n - 1)];
    row.monte_carlo = acc.mean();
    row.se = acc.se();
    row.within = std::abs(row.operator_value - row.monte_carlo) <= 3.0 * row.se + floor;
    out.push_back(row);
  }
  return out;
}

/// Largest c on the grid (scanned upwards) where the power iteration still
/// converges with |k| <= 1 + slack. Empirical, not a certified bound.
inline double perturbation_radius(const MuSpec& mu, std::shared_ptr<const OperatorGrid> grid, const Vector& v,
                                  const std::vector<double>& c_grid, const EigenOptions& opt = {},
                                  double slack = 1e-6) {
  double last = 0.0;
  std::vector<double> cs = c_grid;
  std::sort(cs.begin(), cs.end());
  for (double c : cs) {
    try {
      const auto op = assemble(mu, grid, c, v);
      const auto e = dominant_eigenvalue(op, opt);
      if (!e.converged || std::abs(e.k) > 1.0 + slack) break;
      last = c;
    } catch (const NumericError&) {
      break;
    }
  }
  return last;
}

struct ExpansionPoint {
  double c = 0.0;
  Complex k = 0.0;
  Complex ratio = 0.0;
  double residual = 0.0;
};

struct ExpansionFit {
  std::vector<ExpansionPoint> points;
  Complex fitted = 0.0;
  double spread = 0.0;
  /// Points dropped below the eigen-solver floor.
  std::size_t truncated = 0;
  double floor = 0.0;
  std::optional<double> deviation;
  std::vector<std::string> warnings;
};

/// Normalizer of k - 1 - drift per regime.
inline double expansion_normalizer(Regime regime, double alpha, double c) {
  switch (regime) {
    case Regime::kAlphaEq2: return c * c * std::abs(std::log(c));
    case Regime::kAlphaGt2:
    case Regime::kMixedT3: return c * c;
    default: return std::pow(c, alpha);
  }
}

/// (k - 1 - i drift) / normalizer, with drift = <v, xi(c)> for alpha = 1,
/// <v, c m> for alpha > 1 and 0 below 1.
inline Complex compensated_ratio(Regime regime, double alpha, double c, Complex k, double drift) {
  if (c <= 0.0) return 0.0;
  const double d = regime == Regime::kAlphaLt1 ? 0.0 : drift;
  return (k - 1.0 - Complex(0.0, d)) / expansion_normalizer(regime, alpha, c);
}

enum class Extrapolation {
  /// A + B c^gamma with unknown gamma, from three geometric points.
  kAitken,
  /// A + B c^s log c + C c^s with s = alpha - 2 capped to 1.
  kLogLinear,
};

/// Extrapolates the ratios to c = 0 from the three smallest admissible c.
/// Points whose ratio error from the eigen-solver tolerance would exceed
/// 1e-2 |ratio| are dropped first.
inline ExpansionFit expansion_fit(std::vector<ExpansionPoint> pts, Regime regime, double alpha, Extrapolation method,
                                  std::optional<Complex> reference = std::nullopt, double solver_tol = 1e-9) {
  ExpansionFit fit;
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.c > b.c; });
  for (const auto& p : pts) {
    const double err = solver_tol / expansion_normalizer(regime, alpha, p.c);
    if (std::abs(p.ratio) > 0.0 && err > 1e-2 * std::abs(p.ratio)) {
      ++fit.truncated;
      fit.floor = std::max(fit.floor, p.c);
      continue;
    }
    fit.points.push_back(p);
  }
  if (fit.truncated > 0) fit.warnings.push_back("discretization floor reached; smallest scales dropped");
  const auto& P = fit.points;
  if (P.size() < 3) throw EstimationError("expansion fit needs three scales above the solver floor");
  bool all_zero = true;
  for (const auto& p : P) all_zero = all_zero && p.ratio == Complex(0.0);
  if (all_zero) {
    fit.fitted = 0.0;
    if (reference) fit.deviation = std::abs(*reference) == 0.0 ? 0.0 : 1.0;
    return fit;
  }
  auto solve = [&](std::size_t last) -> Complex {
    const auto& a = P[last - 2];
    const auto& b = P[last - 1];
    const auto& c = P[last];
    if (method == Extrapolation::kAitken) return aitken_limit(a.ratio, b.ratio, c.ratio);
    const double s = std::min(alpha - 2.0, 1.0);
    Eigen::MatrixXd basis(3, 3);
    const ExpansionPoint* row[3] = {&a, &b, &c};
    for (int i = 0; i < 3; ++i) {
      const double t = row[i]->c;
      basis(i, 0) = 1.0;
      basis(i, 1) = std::pow(t, s) * std::log(t);
      basis(i, 2) = std::pow(t, s);
    }
    const Complex vals[3] = {a.ratio, b.ratio, c.ratio};
    return complex_least_squares(basis, vals)[0];
  };
  const std::size_t last = P.size() - 1;
  fit.fitted = solve(last);
  fit.spread = P.size() >= 4 ? std::abs(fit.fitted - solve(last - 1)) : 0.0;
  if (reference) {
    const double r = std::abs(*reference);
    fit.deviation = r == 0.0 ? std::abs(fit.fitted) : std::abs(fit.fitted - *reference) / r;
  }
  for (std::size_t i = 2; i < P.size(); ++i) {
    const Complex d1 = P[i - 1].ratio - P[i - 2].ratio;
    const Complex d2 = P[i].ratio - P[i - 1].ratio;
    if (d1.real() * d2.real() < 0.0) {
      fit.warnings.push_back("real part of the ratio is not monotone in c");
      break;
    }
  }
  return fit;
}

/// Slope of log|k - 1| against log c.
inline double loglog_slope(const std::vector<ExpansionPoint>& pts) {
  std::vector<double> x, y;
  for (const auto& p : pts) {
    const double d = std::abs(p.k - 1.0);
    if (p.c > 0.0 && d > 0.0) {
      x.push_back(std::log(p.c));
      y.push_back(std::log(d));
    }
  }
  if (x.size() < 2) throw EstimationError("slope needs two scales with k != 1");
  return regression_slope(x, y);
}

/// Probe k(c, v) on a c-grid and attach the compensated ratio; `drift(c)`
/// supplies <v, xi(c)> or <v, c m>.
template <typename Drift>
std::vector<ExpansionPoint> probe_expansion(const MuSpec& mu, std::shared_ptr<const OperatorGrid> grid, const Vector& v,
                                            const std::vector<double>& c_grid, Regime regime, double alpha,
                                            Drift&& drift, const EigenOptions& opt = {},
                                            BoundaryPolicy policy = BoundaryPolicy::kClamp, unsigned workers = 1) {
  std::vector<ExpansionPoint> out(c_grid.size());
  for (std::size_t i = 0; i < c_grid.size(); ++i) {
    const double c = c_grid[i];
    const auto op = assemble(mu, grid, c, v, policy, workers);
    const auto e = dominant_eigenvalue(op, opt);
    out[i] = {c, e.k, compensated_ratio(regime, alpha, c, e.k, drift(c)), e.residual};
  }
  return out;
}

}  // namespace affrec
