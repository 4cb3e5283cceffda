// SPDX-License-Identifier: Apache-2.0
//
// Simulation of X_n = M_n X_{n-1} + Q_n: forward paths, the backward series
// for the stationary law, the dual series Z* v and partial sums. Trajectory i
// always draws from RngStream(seed, i, purpose), so batches are identical for
// any worker count.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "affrec/error.hpp"
#include "affrec/group.hpp"
#include "affrec/measure.hpp"
#include "affrec/parallel.hpp"
#include "affrec/rng.hpp"

namespace affrec {

enum class ChainKind : std::uint32_t { kForward = 0, kStationary = 1, kDual = 2, kPartialSum = 3, kZSeries = 4 };

inline const char* chain_kind_name(ChainKind k) {
  switch (k) {
    case ChainKind::kForward: return "forward";
    case ChainKind::kStationary: return "stationary";
    case ChainKind::kDual: return "dual";
    case ChainKind::kPartialSum: return "partial_sum";
    case ChainKind::kZSeries: return "Z_series";
  }
  return "unknown";
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct TrajectoryBatch {
  RowMatrix values;  // N x d
  ChainKind kind = ChainKind::kStationary;
  long n = 0;
  std::uint64_t seed = 0;
  int truncation = 0;
  double truncation_bound = 0.0;
  bool truncation_warning = false;

  Eigen::Index size() const { return values.rows(); }
  int dim() const { return static_cast<int>(values.cols()); }
  Vector row(Eigen::Index i) const { return values.row(i).transpose(); }

  std::vector<double> column(int j) const {
    std::vector<double> c(static_cast<std::size_t>(size()));
    for (Eigen::Index i = 0; i < size(); ++i) c[static_cast<std::size_t>(i)] = values(i, j);
    return c;
  }

  std::vector<double> tau_values(const BlockStructure& blocks) const {
    std::vector<double> t(static_cast<std::size_t>(size()));
    if (blocks.is_euclidean()) {
      for (Eigen::Index i = 0; i < size(); ++i) t[static_cast<std::size_t>(i)] = values.row(i).norm();
    } else {
      for (Eigen::Index i = 0; i < size(); ++i) t[static_cast<std::size_t>(i)] = tau(row(i), blocks);
    }
    return t;
  }
};

/// Smallest N with kappa(0.8 alpha)^N < tol.
inline int default_truncation(const MuSpec& mu, double alpha, double tol = 1e-6) {
  const double k = kappa(mu, 0.8 * alpha);
  if (!(k < 1.0)) throw HypothesisError("kappa(0.8 alpha) >= 1");
  return std::max(1, static_cast<int>(std::ceil(std::log(tol) / std::log(k))));
}

/// Bound on E tau(tail of the series)^theta after N terms:
/// E tau(Q)^theta kappa(theta)^(N+1) / (1 - kappa(theta)).
inline double truncation_error_bound(const MuSpec& mu, double theta, int trunc) {
  const double k = kappa(mu, theta);
  double eq = 0.0;
  for (const auto& at : mu.atoms()) eq += at.prob * std::pow(tau(at.q, mu.blocks()), theta);
  if (mu.family()) eq += mu.family()->prob * std::pow(tau(mu.family()->q, mu.blocks()), theta);
  return eq * std::pow(k, trunc + 1) / (1.0 - k);
}

/// Path X_0 = x0, ..., X_n.
inline std::vector<Vector> simulate_forward(const MuSpec& mu, const Vector& x0, long n, RngStream& rng) {
  require_dim(mu.blocks(), x0.size(), "starting point");
  if (n < 0) throw InputError("path length must be non-negative");
  const AffineSampler sampler(mu);
  std::vector<Vector> path;
  path.reserve(static_cast<std::size_t>(n) + 1);
  path.push_back(x0);
  Matrix m;
  Vector q;
  for (long k = 1; k <= n; ++k) {
    sampler.draw(rng, m, q);
    path.push_back(m * path.back() + q);
  }
  return path;
}

/// Two paths from x and y driven by the same (M_k, Q_k).
inline std::pair<std::vector<Vector>, std::vector<Vector>> simulate_coupled(const MuSpec& mu, const Vector& x,
                                                                            const Vector& y, long n,
                                                                            RngStream& rng) {
  require_dim(mu.blocks(), x.size(), "starting point");
  require_dim(mu.blocks(), y.size(), "starting point");
  const AffineSampler sampler(mu);
  std::vector<Vector> px{x}, py{y};
  Matrix m;
  Vector q;
  for (long k = 1; k <= n; ++k) {
    sampler.draw(rng, m, q);
    px.push_back(m * px.back() + q);
    py.push_back(m * py.back() + q);
  }
  return {px, py};
}

/// N draws of R = Q_0 + sum_{k=1}^{trunc} M_0 ... M_{k-1} Q_k.
inline TrajectoryBatch sample_stationary(const MuSpec& mu, int trunc, Eigen::Index count, std::uint64_t seed,
                                         unsigned workers = 1, double tol = 1e-6) {
  if (trunc < 1) throw InputError("truncation must be at least 1");
  if (count < 1) throw InputError("batch size must be positive");
  const AffineSampler sampler(mu);
  const int d = mu.dim();
  TrajectoryBatch out;
  out.values.resize(count, d);
  out.kind = ChainKind::kStationary;
  out.seed = seed;
  out.truncation = trunc;
  const auto hyp = validate_hypothesis_H(mu);
  if (std::isfinite(hyp.alpha)) {
    const double theta = 0.8 * hyp.alpha;
    out.truncation_bound = std::pow(kappa(mu, theta), trunc);
    out.truncation_warning = out.truncation_bound >= tol;
  }
  parallel_for(static_cast<std::size_t>(count), workers, [&](std::size_t begin, std::size_t end) {
    Matrix m(d, d), p(d, d);
    Vector q(d), r(d);
    for (std::size_t i = begin; i < end; ++i) {
      RngStream rng(seed, i, StreamPurpose::kStationary);
      if (d == 1) {
        auto [m0, q0] = sampler.draw_scalar(rng);
        double rr = q0, pp = m0;
        for (int k = 1; k <= trunc; ++k) {
          const auto [mk, qk] = sampler.draw_scalar(rng);
          rr += pp * qk;
          pp *= mk;
        }
        out.values(static_cast<Eigen::Index>(i), 0) = rr;
      } else {
        sampler.draw(rng, p, r);
        for (int k = 1; k <= trunc; ++k) {
          sampler.draw(rng, m, q);
          r += p * q;
          p = p * m;
        }
        out.values.row(static_cast<Eigen::Index>(i)) = r.transpose();
      }
    }
  });
  return out;
}

/// Frozen samples of the matrix Z* = sum_{k=1}^{trunc} M_0^* ... M_{k-1}^*,
/// one d x d matrix per trajectory, so that W = Z* v is available for any v.
struct ZSeriesBatch {
  int dim = 1;
  int truncation = 0;
  std::uint64_t seed = 0;
  std::vector<double> data;  // count * d * d, row-major per matrix

  Eigen::Index size() const { return static_cast<Eigen::Index>(data.size() / static_cast<std::size_t>(dim * dim)); }

  Matrix matrix(Eigen::Index i) const {
    Matrix z(dim, dim);
    const double* p = data.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(dim * dim);
    for (int r = 0; r < dim; ++r)
      for (int c = 0; c < dim; ++c) z(r, c) = p[r * dim + c];
    return z;
  }

  /// W = Z* v for every trajectory.
  TrajectoryBatch apply(const Vector& v) const {
    if (v.size() != dim) throw InputError("dual direction has the wrong dimension");
    if (v.norm() == 0.0) throw InputError("the dual chain needs v != 0");
    TrajectoryBatch out;
    out.kind = ChainKind::kDual;
    out.seed = seed;
    out.truncation = truncation;
    out.values.resize(size(), dim);
    for (Eigen::Index i = 0; i < size(); ++i) {
      const double* p = data.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(dim * dim);
      for (int r = 0; r < dim; ++r) {
        double s = 0.0;
        for (int c = 0; c < dim; ++c) s += p[r * dim + c] * v(c);
        out.values(i, r) = s;
      }
    }
    return out;
  }
};

inline ZSeriesBatch sample_z_series(const MuSpec& mu, int trunc, Eigen::Index count, std::uint64_t seed,
                                    unsigned workers = 1) {
  if (trunc < 1) throw InputError("truncation must be at least 1");
  const AffineSampler sampler(mu);
  const int d = mu.dim();
  ZSeriesBatch out;
  out.dim = d;
  out.truncation = trunc;
  out.seed = seed;
  out.data.resize(static_cast<std::size_t>(count) * static_cast<std::size_t>(d * d));
  parallel_for(static_cast<std::size_t>(count), workers, [&](std::size_t begin, std::size_t end) {
    Matrix m(d, d), p(d, d), z(d, d);
    Vector q(d);
    for (std::size_t i = begin; i < end; ++i) {
      RngStream rng(seed, i, StreamPurpose::kDual);
      double* dst = out.data.data() + i * static_cast<std::size_t>(d * d);
      if (d == 1) {
        double pp = 1.0, zz = 0.0;
        for (int k = 1; k <= trunc; ++k) {
          pp *= sampler.draw_scalar(rng).first;
          zz += pp;
        }
        dst[0] = zz;
      } else {
        p.setIdentity();
        z.setZero();
        for (int k = 1; k <= trunc; ++k) {
          sampler.draw(rng, m, q);
          p = p * m.transpose();
          z += p;
        }
        for (int r = 0; r < d; ++r)
          for (int c = 0; c < d; ++c) dst[r * d + c] = z(r, c);
      }
    }
  });
  return out;
}

/// Samples of W = Z* v, the stationary law eta_v of the dual chain.
inline TrajectoryBatch sample_eta(const MuSpec& mu, const Vector& v, int trunc, Eigen::Index count,
                                  std::uint64_t seed, unsigned workers = 1) {
  require_dim(mu.blocks(), v.size(), "dual direction");
  if (v.norm() == 0.0) throw InputError("the dual chain needs v != 0");
  return sample_z_series(mu, trunc, count, seed, workers).apply(v);
}

/// S_n = X_1 + ... + X_n (X_0 excluded) for every n in n_list, from one pass
/// per trajectory.
inline std::vector<TrajectoryBatch> partial_sums(const MuSpec& mu, const Vector& x0, std::vector<long> n_list,
                                                 Eigen::Index count, std::uint64_t seed, unsigned workers = 1) {
  require_dim(mu.blocks(), x0.size(), "starting point");
  if (n_list.empty()) throw InputError("n_list is empty");
  for (long n : n_list)
    if (n < 0) throw InputError("partial-sum lengths must be non-negative");
  std::vector<long> sorted = n_list;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  const AffineSampler sampler(mu);
  const int d = mu.dim();
  std::vector<TrajectoryBatch> by_sorted(sorted.size());
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    by_sorted[j].values.resize(count, d);
    by_sorted[j].kind = ChainKind::kPartialSum;
    by_sorted[j].n = sorted[j];
    by_sorted[j].seed = seed;
  }
  parallel_for(static_cast<std::size_t>(count), workers, [&](std::size_t begin, std::size_t end) {
    Matrix m(d, d);
    Vector q(d), x(d), s(d);
    for (std::size_t i = begin; i < end; ++i) {
      RngStream rng(seed, i, StreamPurpose::kForward);
      const auto row = static_cast<Eigen::Index>(i);
      if (d == 1) {
        double xx = x0(0), ss = 0.0;
        long k = 0;
        for (std::size_t j = 0; j < sorted.size(); ++j) {
          for (; k < sorted[j]; ++k) {
            const auto [mk, qk] = sampler.draw_scalar(rng);
            xx = mk * xx + qk;
            ss += xx;
          }
          by_sorted[j].values(row, 0) = ss;
        }
      } else {
        x = x0;
        s.setZero();
        long k = 0;
        for (std::size_t j = 0; j < sorted.size(); ++j) {
          for (; k < sorted[j]; ++k) {
            sampler.draw(rng, m, q);
            x = m * x + q;
            s += x;
          }
          by_sorted[j].values.row(row) = s.transpose();
        }
      }
    }
  });
  std::vector<TrajectoryBatch> out;
  for (long n : n_list) {
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), n);
    out.push_back(by_sorted[static_cast<std::size_t>(it - sorted.begin())]);
  }
  return out;
}

/// X_n from x0 for N trajectories (forward chain, same streams as partial_sums).
inline TrajectoryBatch sample_forward_endpoint(const MuSpec& mu, const Vector& x0, long n, Eigen::Index count,
                                               std::uint64_t seed, unsigned workers = 1) {
  require_dim(mu.blocks(), x0.size(), "starting point");
  const AffineSampler sampler(mu);
  const int d = mu.dim();
  TrajectoryBatch out;
  out.values.resize(count, d);
  out.kind = ChainKind::kForward;
  out.n = n;
  out.seed = seed;
  parallel_for(static_cast<std::size_t>(count), workers, [&](std::size_t begin, std::size_t end) {
    Matrix m(d, d);
    Vector q(d), x(d);
    for (std::size_t i = begin; i < end; ++i) {
      RngStream rng(seed, i, StreamPurpose::kForward);
      x = x0;
      for (long k = 0; k < n; ++k) {
        sampler.draw(rng, m, q);
        x = m * x + q;
      }
      out.values.row(static_cast<Eigen::Index>(i)) = x.transpose();
    }
  });
  return out;
}

enum class BruteForceTarget { kX, kS };

/// Exact finite law: support points with probabilities.
struct DiscreteLaw {
  std::vector<Vector> support;
  std::vector<double> probs;

  double total() const {
    double s = 0.0;
    for (double p : probs) s += p;
    return s;
  }
};

/// Enumerates all atom sequences of length n (finite mixtures only).
/// Equal support points (to 1e-12 relative) are merged.
inline DiscreteLaw brute_force_distribution(const MuSpec& mu, const Vector& x0, int n, BruteForceTarget target,
                                            double max_paths = 1e7) {
  if (!mu.is_finite_mixture()) throw UnsupportedError("enumeration needs a finite mixture");
  require_dim(mu.blocks(), x0.size(), "starting point");
  if (n < 0 || n > 12) throw SizeError("enumeration supports 0 <= n <= 12");
  const auto atoms = mu.atoms().size();
  if (std::pow(static_cast<double>(atoms), n) > max_paths) throw SizeError("atom count^n exceeds the enumeration guard");
  const AffineSampler sampler(mu);
  const int d = mu.dim();
  struct State {
    Vector x, s;
    double p;
  };
  std::vector<State> layer{{x0, Vector::Zero(d), 1.0}};
  for (int k = 0; k < n; ++k) {
    std::vector<State> next;
    next.reserve(layer.size() * atoms);
    for (const auto& st : layer)
      for (std::size_t a = 0; a < atoms; ++a) {
        Vector x = sampler.atom_matrix(a) * st.x + sampler.atom_translation(a);
        Vector s = st.s + x;
        next.push_back({std::move(x), std::move(s), st.p * mu.atoms()[a].prob});
      }
    layer = std::move(next);
  }
  std::vector<std::pair<Vector, double>> pts;
  pts.reserve(layer.size());
  for (auto& st : layer) pts.emplace_back(target == BruteForceTarget::kX ? st.x : st.s, st.p);
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return std::lexicographical_compare(a.first.data(), a.first.data() + a.first.size(), b.first.data(),
                                        b.first.data() + b.first.size());
  });
  DiscreteLaw law;
  for (auto& [x, p] : pts) {
    if (!law.support.empty()) {
      const Vector& last = law.support.back();
      if ((x - last).norm() <= 1e-12 * std::max(1.0, last.norm())) {
        law.probs.back() += p;
        continue;
      }
    }
    law.support.push_back(x);
    law.probs.push_back(p);
  }
  return law;
}

/// Index of the support point nearest to x (relative tolerance 1e-9), or -1.
inline long match_support(const DiscreteLaw& law, const Vector& x) {
  long best = -1;
  double best_dist = 0.0;
  for (std::size_t i = 0; i < law.support.size(); ++i) {
    const double dist = (law.support[i] - x).norm();
    if (best < 0 || dist < best_dist) {
      best = static_cast<long>(i);
      best_dist = dist;
    }
  }
  if (best >= 0 && best_dist <= 1e-9 * std::max(1.0, x.norm())) return best;
  return -1;
}

inline void write_csv(std::ostream& os, const TrajectoryBatch& b) {
  for (int j = 0; j < b.dim(); ++j) os << (j ? "," : "") << "x" << j;
  os << "\n";
  os.precision(17);
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    for (int j = 0; j < b.dim(); ++j) os << (j ? "," : "") << b.values(i, j);
    os << "\n";
  }
}

/// Binary layout (little-endian): "AFRB", u32 version = 1, u64 N, u32 d,
/// u32 kind, then N*d doubles row by row.
inline void write_binary(std::ostream& os, const TrajectoryBatch& b) {
  const char magic[4] = {'A', 'F', 'R', 'B'};
  const std::uint32_t version = 1;
  const auto n = static_cast<std::uint64_t>(b.size());
  const auto d = static_cast<std::uint32_t>(b.dim());
  const auto kind = static_cast<std::uint32_t>(b.kind);
  os.write(magic, 4);
  os.write(reinterpret_cast<const char*>(&version), sizeof version);
  os.write(reinterpret_cast<const char*>(&n), sizeof n);
  os.write(reinterpret_cast<const char*>(&d), sizeof d);
  os.write(reinterpret_cast<const char*>(&kind), sizeof kind);
  os.write(reinterpret_cast<const char*>(b.values.data()), static_cast<std::streamsize>(n * d * sizeof(double)));
}

inline TrajectoryBatch read_binary(std::istream& is) {
  char magic[4];
  std::uint32_t version = 0, d = 0, kind = 0;
  std::uint64_t n = 0;
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "AFRB", 4) != 0) throw InputError("not an AFRB batch file");
  is.read(reinterpret_cast<char*>(&version), sizeof version);
  if (version != 1) throw InputError("unsupported AFRB version");
  is.read(reinterpret_cast<char*>(&n), sizeof n);
  is.read(reinterpret_cast<char*>(&d), sizeof d);
  is.read(reinterpret_cast<char*>(&kind), sizeof kind);
  if (!is || kind > 4 || d == 0) throw InputError("corrupt AFRB header");
  TrajectoryBatch b;
  b.kind = static_cast<ChainKind>(kind);
  b.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  is.read(reinterpret_cast<char*>(b.values.data()), static_cast<std::streamsize>(n * d * sizeof(double)));
  if (!is) throw InputError("truncated AFRB payload");
  return b;
}

}  // namespace affrec
