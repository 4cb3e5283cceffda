// SPDX-License-Identifier: Apache-2.0
//
// tau-similarities: linear maps that scale the homogeneous norm
//   tau(x) = sum_j |x_j|^(1/lambda_j)
// by a single factor. With one block (lambda_1 = 1) these are the ordinary
// Euclidean similarities a*K with K orthogonal.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "affrec/error.hpp"

namespace affrec {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Orthogonal decomposition V = V_{lambda_1} + ... + V_{lambda_l} with
/// 1 = lambda_1 < lambda_2 < ... and block dimensions d_j.
class BlockStructure {
 public:
  BlockStructure(std::vector<double> exponents, std::vector<int> dims)
      : exponents_(std::move(exponents)), dims_(std::move(dims)) {
    if (exponents_.empty() || exponents_.size() != dims_.size())
      throw InputError("block structure needs matching, non-empty exponent and dimension lists");
    if (std::abs(exponents_.front() - 1.0) > 1e-12) throw InputError("the first block exponent must be 1");
    for (std::size_t j = 0; j < dims_.size(); ++j) {
      if (dims_[j] < 1) throw InputError("block dimensions must be at least 1");
      if (j > 0 && !(exponents_[j] > exponents_[j - 1]))
        throw InputError("block exponents must be strictly increasing");
    }
    offsets_.resize(dims_.size());
    int off = 0;
    for (std::size_t j = 0; j < dims_.size(); ++j) {
      offsets_[j] = off;
      off += dims_[j];
    }
    dim_ = off;
  }

  static BlockStructure euclidean(int d) { return BlockStructure({1.0}, {d}); }

  int dim() const { return dim_; }
  int blocks() const { return static_cast<int>(dims_.size()); }
  double exponent(int j) const { return exponents_[static_cast<std::size_t>(j)]; }
  int block_dim(int j) const { return dims_[static_cast<std::size_t>(j)]; }
  int offset(int j) const { return offsets_[static_cast<std::size_t>(j)]; }
  const std::vector<double>& exponents() const { return exponents_; }
  const std::vector<int>& dims() const { return dims_; }
  bool is_euclidean() const { return dims_.size() == 1; }

  /// Exponent of the block containing coordinate i.
  double coordinate_exponent(int i) const {
    for (int j = blocks() - 1; j >= 0; --j)
      if (i >= offset(j)) return exponent(j);
    return exponent(0);
  }

  bool operator==(const BlockStructure& o) const { return exponents_ == o.exponents_ && dims_ == o.dims_; }

 private:
  std::vector<double> exponents_;
  std::vector<int> dims_;
  std::vector<int> offsets_;
  int dim_ = 0;
};

inline void require_dim(const BlockStructure& blocks, Eigen::Index n, const char* what) {
  if (n != blocks.dim()) {
    std::ostringstream os;
    os << what << " has dimension " << n << " but the block structure has dimension " << blocks.dim();
    throw InputError(os.str());
  }
}

/// Homogeneous norm. For a single block this is the Euclidean norm.
inline double tau(const Eigen::Ref<const Vector>& x, const BlockStructure& blocks) {
  require_dim(blocks, x.size(), "vector");
  double s = 0.0;
  for (int j = 0; j < blocks.blocks(); ++j) {
    const double r = x.segment(blocks.offset(j), blocks.block_dim(j)).norm();
    s += blocks.exponent(j) == 1.0 ? r : std::pow(r, 1.0 / blocks.exponent(j));
  }
  return s;
}

/// The dilation gamma_a: block j is multiplied by a^{lambda_j}.
inline Vector dilate(const Eigen::Ref<const Vector>& x, double a, const BlockStructure& blocks) {
  require_dim(blocks, x.size(), "vector");
  Vector y = x;
  for (int j = 0; j < blocks.blocks(); ++j)
    y.segment(blocks.offset(j), blocks.block_dim(j)) *= std::pow(a, blocks.exponent(j));
  return y;
}

/// Projection onto the sum of blocks whose exponent satisfies `keep`.
template <typename Pred>
Vector project_blocks(const Eigen::Ref<const Vector>& x, const BlockStructure& blocks, Pred keep) {
  Vector y = Vector::Zero(x.size());
  for (int j = 0; j < blocks.blocks(); ++j)
    if (keep(blocks.exponent(j)))
      y.segment(blocks.offset(j), blocks.block_dim(j)) = x.segment(blocks.offset(j), blocks.block_dim(j));
  return y;
}

/// A tau-similarity in canonical form (a, K_1, ..., K_l): block j acts as
/// a^{lambda_j} K_j. Immutable.
class Similarity {
 public:
  Similarity(BlockStructure blocks, double scale, std::vector<Matrix> orthogonal)
      : blocks_(std::move(blocks)), scale_(scale), orth_(std::move(orthogonal)) {
    if (!(scale_ > 0.0) || !std::isfinite(scale_)) throw InputError("similarity scale must be positive and finite");
    if (static_cast<int>(orth_.size()) != blocks_.blocks())
      throw InputError("one orthogonal matrix per block is required");
    for (int j = 0; j < blocks_.blocks(); ++j) {
      const Matrix& k = orth_[static_cast<std::size_t>(j)];
      const int dj = blocks_.block_dim(j);
      if (k.rows() != dj || k.cols() != dj) throw InputError("orthogonal block has the wrong shape");
      if ((k.transpose() * k - Matrix::Identity(dj, dj)).cwiseAbs().maxCoeff() > 1e-12)
        throw InputError("block matrix is not orthogonal to 1e-12");
    }
  }

  /// Builds from user-supplied per-block scale factors; they must equal
  /// a^{lambda_j} for a = scales[0] to 1e-10 relative.
  static Similarity from_block_scales(BlockStructure blocks, const std::vector<double>& scales,
                                      std::vector<Matrix> orthogonal) {
    if (static_cast<int>(scales.size()) != blocks.blocks()) throw InputError("one scale per block is required");
    const double a = scales.front();
    if (!(a > 0.0)) throw InputError("similarity scale must be positive");
    for (int j = 1; j < blocks.blocks(); ++j) {
      const double expect = std::pow(a, blocks.exponent(j));
      if (std::abs(scales[static_cast<std::size_t>(j)] - expect) > 1e-10 * expect)
        throw InputError("per-block scales are not powers a^lambda_j of a common scale");
    }
    return Similarity(std::move(blocks), a, std::move(orthogonal));
  }

  static Similarity identity(const BlockStructure& blocks) { return dilation(blocks, 1.0); }

  static Similarity dilation(const BlockStructure& blocks, double a) {
    std::vector<Matrix> orth;
    for (int j = 0; j < blocks.blocks(); ++j) orth.push_back(Matrix::Identity(blocks.block_dim(j), blocks.block_dim(j)));
    return Similarity(blocks, a, std::move(orth));
  }

  /// d = 1: x -> sign * a * x.
  static Similarity scalar(double a, double sign = 1.0) {
    if (sign != 1.0 && sign != -1.0) throw InputError("sign must be +1 or -1");
    Matrix k(1, 1);
    k(0, 0) = sign;
    return Similarity(BlockStructure::euclidean(1), a, {k});
  }

  /// d = 2 Euclidean: scale times rotation by `angle` radians.
  static Similarity rotation2d(double a, double angle) {
    Matrix k(2, 2);
    k << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    return Similarity(BlockStructure::euclidean(2), a, {k});
  }

  const BlockStructure& blocks() const { return blocks_; }
  double scale() const { return scale_; }
  /// |g| = sup_{tau(x)=1} tau(gx).
  double norm() const { return scale_; }
  const Matrix& orthogonal(int j) const { return orth_[static_cast<std::size_t>(j)]; }

  Matrix matrix() const {
    Matrix m = Matrix::Zero(blocks_.dim(), blocks_.dim());
    for (int j = 0; j < blocks_.blocks(); ++j) {
      const int o = blocks_.offset(j);
      const int dj = blocks_.block_dim(j);
      m.block(o, o, dj, dj) = std::pow(scale_, blocks_.exponent(j)) * orth_[static_cast<std::size_t>(j)];
    }
    return m;
  }

  Vector apply(const Eigen::Ref<const Vector>& x) const {
    require_dim(blocks_, x.size(), "vector");
    Vector y(x.size());
    for (int j = 0; j < blocks_.blocks(); ++j) {
      const int o = blocks_.offset(j);
      const int dj = blocks_.block_dim(j);
      y.segment(o, dj) = std::pow(scale_, blocks_.exponent(j)) * (orth_[static_cast<std::size_t>(j)] * x.segment(o, dj));
    }
    return y;
  }

  /// (g h) x = g(h x).
  Similarity compose(const Similarity& h) const {
    if (!(blocks_ == h.blocks_)) throw InputError("composing similarities with different block structures");
    std::vector<Matrix> orth;
    for (int j = 0; j < blocks_.blocks(); ++j)
      orth.push_back(orth_[static_cast<std::size_t>(j)] * h.orth_[static_cast<std::size_t>(j)]);
    return Similarity(blocks_, scale_ * h.scale_, std::move(orth));
  }

  /// Adjoint with respect to the Euclidean inner product: a^{lambda_j} K_j^T.
  Similarity adjoint() const {
    std::vector<Matrix> orth;
    for (const auto& k : orth_) orth.push_back(k.transpose());
    return Similarity(blocks_, scale_, std::move(orth));
  }

 private:
  BlockStructure blocks_;
  double scale_;
  std::vector<Matrix> orth_;
};

/// Closed group generated by the scales |M|: all of R_+^* or a lattice <p>.
struct GroupStructure {
  enum class Kind { kDense, kLattice };
  Kind kind = Kind::kDense;
  double p = 0.0;  // generator, only for kLattice
  std::vector<double> generators;

  static GroupStructure dense(std::vector<double> gens = {}) { return {Kind::kDense, 0.0, std::move(gens)}; }
  static GroupStructure lattice(double p, std::vector<double> gens = {}) {
    if (!(p > 1.0)) throw InputError("lattice generator must exceed 1");
    return {Kind::kLattice, p, std::move(gens)};
  }
  bool is_lattice() const { return kind == Kind::kLattice; }
  std::string describe() const {
    if (!is_lattice()) return "Dense";
    std::ostringstream os;
    os.precision(10);
    os << "Lattice(" << p << ")";
    return os.str();
  }
};

namespace detail {

/// Continued-fraction search for P/Q with |r - P/Q| <= tol * max(1, r) and
/// Q <= max_den. Returns Q, or 0 when no such convergent appears within depth.
inline std::int64_t rational_denominator(double r, double tol, int depth, std::int64_t max_den) {
  double x = r;
  // convergents h/k
  double h_prev = 1, h = std::floor(x);
  double k_prev = 0, k = 1;
  const double thresh = tol * std::max(1.0, std::abs(r));
  for (int it = 0; it < depth; ++it) {
    if (std::abs(r - h / k) <= thresh) return static_cast<std::int64_t>(k);
    const double frac = x - std::floor(x);
    if (frac <= 0.0) return static_cast<std::int64_t>(k);
    x = 1.0 / frac;
    const double a = std::floor(x);
    const double h_next = a * h + h_prev;
    const double k_next = a * k + k_prev;
    h_prev = h;
    h = h_next;
    k_prev = k;
    k = k_next;
    if (k > static_cast<double>(max_den)) return 0;
  }
  return 0;
}

}  // namespace detail

/// Decides between a lattice <p> and a dense scale group by a real-GCD of
/// the log-scales. Denominators above 1/(10 sqrt(tol)) are treated as dense:
/// such a lattice cannot be told apart from a dense group in double precision.
inline GroupStructure detect_group_structure(const std::vector<double>& scales, double tol = 1e-9,
                                             int depth = 40) {
  std::vector<double> logs;
  for (double s : scales) {
    if (!(s > 0.0) || !std::isfinite(s)) throw InputError("scales must be positive and finite");
    const double l = std::log(s);
    if (std::abs(l) > 1e-14) logs.push_back(std::abs(l));
  }
  if (logs.empty()) throw StructureError("every scale equals 1; the scale group is trivial");
  std::sort(logs.begin(), logs.end());
  const auto max_den = static_cast<std::int64_t>(std::floor(1.0 / (10.0 * std::sqrt(tol))));
  double g = logs.front();
  for (std::size_t i = 1; i < logs.size(); ++i) {
    const std::int64_t q = detail::rational_denominator(logs[i] / g, tol, depth, max_den);
    if (q == 0) return GroupStructure::dense(scales);
    g /= static_cast<double>(q);
    if (static_cast<double>(q) > static_cast<double>(max_den) || g < logs.front() / static_cast<double>(max_den))
      return GroupStructure::dense(scales);
  }
  // refine g by least squares over the integer multiples
  double num = 0, den = 0;
  for (double l : logs) {
    const double n = std::round(l / g);
    num += n * l;
    den += n * n;
  }
  g = num / den;
  for (double l : logs)
    if (std::abs(l - std::round(l / g) * g) > tol * std::max(1.0, l) * 10.0) return GroupStructure::dense(scales);
  return GroupStructure::lattice(std::exp(g), scales);
}

struct NormalizerStep {
  double c_scale = 1.0;
  bool exact = true;
  long k = 0;  // lattice exponent: c_scale = p^{-k}
};

/// Normalizing dilation c_n with [|c_n|^{-alpha}] = n. For a lattice this
/// picks the largest k with floor(p^{k alpha}) <= n; `exact` marks the
/// subsequence where equality holds.
inline NormalizerStep normalizer_schedule(const GroupStructure& structure, double alpha, long n) {
  if (n < 1) throw InputError("normalizer schedule needs n >= 1");
  if (!(alpha > 0.0)) throw InputError("alpha must be positive");
  if (!structure.is_lattice()) return {std::pow(static_cast<double>(n), -1.0 / alpha), true, 0};
  const double lp = std::log(structure.p);
  auto level = [&](long k) { return std::floor(std::pow(structure.p, static_cast<double>(k) * alpha) * (1.0 + 1e-12)); };
  long k = static_cast<long>(std::floor(std::log(static_cast<double>(n)) / (alpha * lp)));
  k = std::max(0L, k);
  while (k > 0 && level(k) > static_cast<double>(n)) --k;
  while (level(k + 1) <= static_cast<double>(n)) ++k;
  return {std::pow(structure.p, -static_cast<double>(k)), level(k) == static_cast<double>(n), k};
}

}  // namespace affrec
