// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "affrec/limit_law.hpp"
#include "affrec/spectral.hpp"

using namespace affrec;

namespace {

Vector scalar(double x) {
  Vector v(1);
  v << x;
  return v;
}

MuSpec two_atom(double p_up) {
  return MuSpec(BlockStructure::euclidean(1), {AffineAtom{p_up, Similarity::scalar(2.0), scalar(1.0)},
                                               AffineAtom{1.0 - p_up, Similarity::scalar(0.5), scalar(1.0)}});
}

const double kHalf = std::sqrt(2.0) - 1;

MuSpec alpha3() { return two_atom(1.0 / 9); }
MuSpec half() { return two_atom(kHalf); }

std::shared_ptr<const OperatorGrid> uniform_grid(double L, double h, double alpha) {
  return std::make_shared<const OperatorGrid>(
      OperatorGrid::uniform(BlockStructure::euclidean(1), L, h, WeightExponents::defaults(alpha)));
}

std::shared_ptr<const OperatorGrid> wide_grid(double L, std::size_t n, double alpha) {
  return std::make_shared<const OperatorGrid>(
      OperatorGrid::asinh(BlockStructure::euclidean(1), L, n, WeightExponents::defaults(alpha)));
}

double max_abs_row_sum_deviation(const SparseOperator& m) {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
    double s = 0.0;
    for (SparseOperator::InnerIterator it(m, r); it; ++it) s += std::abs(it.value());
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

}  // namespace

TEST(Weights, DefaultsAreFeasible) {
  for (double a : {0.5, 1.0, 2.0, 3.0}) {
    const auto w = WeightExponents::defaults(a);
    EXPECT_TRUE(w.feasible(a)) << a;
    EXPECT_GT(w.theta, w.lambda + 3 * w.eps);
    EXPECT_LT(w.theta, 2 * w.lambda);
  }
}

TEST(Grid, CoversIntervalAndRejectsHighDimension) {
  const auto g = uniform_grid(60, 0.02, 3);
  EXPECT_EQ(g->size(), 6001u);
  EXPECT_EQ(g->axis().front(), -60.0);
  EXPECT_EQ(g->axis().back(), 60.0);
  EXPECT_NEAR(g->node(g->origin_index())(0), 0.0, 1e-12);
  EXPECT_GT(g->weights().minCoeff(), 0.0);
  const auto w = wide_grid(1e16, 101, 0.5);
  EXPECT_EQ(w->node(50)(0), 0.0);
  EXPECT_THROW(OperatorGrid::uniform(BlockStructure::euclidean(3), 1, 0.1, {}), UnsupportedError);
  EXPECT_THROW(OperatorGrid::uniform(BlockStructure::euclidean(1), 1, 2, {}), InputError);
}

TEST(Assemble, TransitionOperatorFixesConstants) {
  for (const auto& g : {uniform_grid(60, 0.02, 3), wide_grid(1e16, 2001, 3)}) {
    const auto op = assemble(alpha3(), g, 0.0, scalar(0.0));
    const ComplexVector one = ComplexVector::Ones(static_cast<Eigen::Index>(g->size()));
    EXPECT_LT((op.apply(one) - one).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Assemble, ZeroFrequencyIgnoresScale) {
  const auto g = uniform_grid(20, 0.05, 3);
  const auto a = assemble(alpha3(), g, 0.0, scalar(0.0));
  const auto b = assemble(alpha3(), g, 0.37, scalar(0.0));
  EXPECT_EQ((SparseOperator(a.matrix - b.matrix)).norm(), 0.0);
}

TEST(Assemble, UnimodularRowsUnderClamp) {
  const auto g = uniform_grid(60, 0.02, 3);
  const auto op = assemble(alpha3(), g, 0.07, scalar(1.3));
  EXPECT_LT(max_abs_row_sum_deviation(op.matrix), 1e-12);
  EXPECT_GT(op.clipped_fraction, 0.0);
  EXPECT_LT(op.clipped_fraction, 0.3);
}

TEST(Assemble, DampedLinearKeepsConstants) {
  const auto g = uniform_grid(20, 0.05, 3);
  const auto op = assemble(alpha3(), g, 0.0, scalar(0.0), BoundaryPolicy::kDampedLinear);
  const ComplexVector one = ComplexVector::Ones(static_cast<Eigen::Index>(g->size()));
  EXPECT_LT((op.apply(one) - one).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Assemble, RejectsContinuousFamily) {
  LogUniformFamily f;
  f.prob = 1.0;
  f.a = 0.5;
  f.b = 1.5;
  f.orthogonal = {Matrix::Identity(1, 1)};
  f.q = scalar(1.0);
  const MuSpec mu(BlockStructure::euclidean(1), {}, f);
  EXPECT_THROW(assemble(mu, uniform_grid(5, 0.1, 1), 0.1, scalar(1.0)), UnsupportedError);
}

TEST(Eigen, TrivialPairs) {
  const auto g = uniform_grid(60, 0.02, 3);
  const auto e = dominant_eigenvalue(assemble(alpha3(), g, 0.0, scalar(0.0)));
  EXPECT_TRUE(e.converged);
  EXPECT_NEAR(std::abs(e.k - 1.0), 0.0, 1e-12);
  EXPECT_LT((e.psi.array() - 1.0).abs().maxCoeff(), 1e-12);
  for (double c : {0.01, 0.3}) {
    const auto ec = dominant_eigenvalue(assemble(alpha3(), g, c, scalar(0.0)));
    EXPECT_NEAR(std::abs(ec.k - 1.0), 0.0, 1e-12);
  }
}

TEST(Eigen, FirstOrderDriftAndModulusBound) {
  const auto g = uniform_grid(60, 0.02, 3);
  double prev = 1e9;
  for (double t : {0.1, 0.05, 0.02, 0.01}) {
    const auto e = dominant_eigenvalue(assemble(alpha3(), g, t, scalar(1.0)));
    ASSERT_TRUE(e.converged);
    EXPECT_LE(std::abs(e.k), 1.0 + 1e-9);
    const double gap = std::abs((e.k - 1.0) / t - Complex(0.0, 3.0));
    EXPECT_LT(gap, prev);
    prev = gap;
  }
  EXPECT_LT(prev, 0.2);
}

TEST(Eigen, NonConvergenceIsReported) {
  const auto g = uniform_grid(20, 0.05, 3);
  EigenOptions opt;
  opt.max_iter = 3;
  const auto e = dominant_eigenvalue(assemble(alpha3(), g, 0.5, scalar(2.0)), opt);
  EXPECT_FALSE(e.converged);
  ASSERT_FALSE(e.warnings.empty());
  EXPECT_GT(e.radius, 0.0);
}

TEST(Identity, StationaryBalance) {
  const auto mu = alpha3();
  const auto samples = sample_stationary(mu, default_truncation(mu, 3.0), 100000, 11, 1);
  const auto g = uniform_grid(60, 0.02, 3);
  const auto op = assemble(mu, g, 0.05, scalar(1.0));
  const auto e = dominant_eigenvalue(op);
  const auto r = eigenvalue_identity_check(op, e, samples);
  EXPECT_LT(r.residual, 0.05);
  EXPECT_LT(r.clipped_fraction, 0.05);
  EXPECT_TRUE(r.warnings.empty());

  const auto op0 = assemble(mu, g, 0.0, scalar(1.0));
  const auto r0 = eigenvalue_identity_check(op0, dominant_eigenvalue(op0), samples);
  EXPECT_LT(std::abs(r0.lhs), 1e-12);
  EXPECT_LT(std::abs(r0.rhs), 1e-12);
}

TEST(Identity, MeshRefinement) {
  const auto mu = alpha3();
  const auto samples = sample_stationary(mu, default_truncation(mu, 3.0), 100000, 11, 1);
  double prev = 1e9;
  for (double h : {0.4, 0.1}) {
    const auto op = assemble(mu, uniform_grid(60, h, 3), 0.05, scalar(1.0));
    const auto r = eigenvalue_identity_check(op, dominant_eigenvalue(op), samples);
    EXPECT_LT(r.residual, prev) << h;
    prev = r.residual;
  }
}

TEST(Intertwining, TrivialCases) {
  const auto mu = half();
  const auto g = wide_grid(1e12, 801, 0.5);
  const auto dual = sample_eta(mu, scalar(1.0), 400, 2000, 3, 1);
  const auto op = assemble(mu, g, 0.0, scalar(1.0));
  const auto r = intertwining_check(op, dominant_eigenvalue(op).k, dual);
  EXPECT_LT(r.residual, 1e-12);
  const TrajectoryBatch zero{RowMatrix::Zero(10, 1)};
  const auto opv = assemble(mu, g, 0.01, scalar(0.0));
  EXPECT_LT(intertwining_check(opv, dominant_eigenvalue(opv).k, zero).residual, 1e-12);
}

TEST(Intertwining, ShrinksWithScale) {
  const auto mu = half();
  const auto g = wide_grid(1e16, 4001, 0.5);
  const auto dual = sample_eta(mu, scalar(1.0), default_truncation(mu, 0.5), 20000, 3, 1);
  double prev = 1e9;
  for (int j = 4; j <= 8; ++j) {
    const double c = std::ldexp(1.0, -j);
    const auto op = assemble(mu, g, c, scalar(1.0));
    const auto r = intertwining_check(op, dominant_eigenvalue(op).k, dual);
    EXPECT_LT(r.residual, prev) << j;
    prev = r.residual;
  }
}

TEST(SumIdentity, OperatorPowersMatchPartialSums) {
  const auto mu = alpha3();
  const auto op = assemble(mu, uniform_grid(60, 0.02, 3), 0.05, scalar(1.0));
  const auto rows = sum_identity_check(mu, op, scalar(0.0), 20, 100000, 13);
  ASSERT_EQ(rows.size(), 20u);
  for (const auto& r : rows) EXPECT_TRUE(r.within) << r.n << " " << r.operator_value << " " << r.monte_carlo;
}

TEST(Gap, SecondEigenvalueOfAlphaThreeChain) {
  const auto mu = alpha3();
  const auto g = uniform_grid(60, 0.05, 3);
  const auto op = assemble(mu, g, 0.0, scalar(0.0));
  const auto gap0 = spectral_gap(op, dominant_eigenvalue(op));
  // x - m is an eigenfunction with eigenvalue E M = 2/3.
  EXPECT_NEAR(gap0.second_modulus, 2.0 / 3.0, 0.03);
  for (double c : {0.02, 0.05, 0.1}) {
    const auto opc = assemble(mu, g, c, scalar(1.0));
    const auto gc = spectral_gap(opc, dominant_eigenvalue(opc));
    EXPECT_GT(gc.gap, 0.5 * gap0.gap) << c;
  }
}

TEST(Expansion, AlphaThreeLimitAtSmallScales) {
  const auto mu = alpha3();
  const auto g = wide_grid(1e8, 16001, 3);
  const std::vector<double> ts = {0.0004, 0.0002, 0.0001, 0.00005};
  EigenOptions opt;
  opt.tol = 1e-12;
  const auto pts =
      probe_expansion(mu, g, scalar(1.0), ts, Regime::kAlphaGt2, 3.0, [](double t) { return 3.0 * t; }, opt);
  const auto fit =
      expansion_fit(pts, Regime::kAlphaGt2, 3.0, Extrapolation::kLogLinear, Complex(-19.5, 0.0), opt.tol);
  ASSERT_TRUE(fit.deviation.has_value());
  EXPECT_LT(*fit.deviation, 0.02) << fit.fitted;
  EXPECT_GE(loglog_slope(pts), WeightExponents::defaults(3).eps);
}

TEST(Expansion, ZeroFrequencyGivesZeroRatio) {
  const auto g = uniform_grid(20, 0.05, 3);
  const auto pts = probe_expansion(alpha3(), g, scalar(0.0), {0.1, 0.05, 0.02}, Regime::kAlphaGt2, 3.0,
                                   [](double) { return 0.0; });
  for (const auto& p : pts) EXPECT_EQ(p.ratio, Complex(0.0));
  EXPECT_EQ(expansion_fit(pts, Regime::kAlphaGt2, 3.0, Extrapolation::kLogLinear).fitted, Complex(0.0));
}

TEST(Expansion, FloorTruncatesTinyScales) {
  std::vector<ExpansionPoint> pts;
  for (double c : {1e-1, 1e-2, 1e-3, 1e-4, 1e-16}) pts.push_back({c, 1.0, Complex(-1.0, 0.5), 0.0});
  const auto fit = expansion_fit(pts, Regime::kAlphaLt1, 0.5, Extrapolation::kAitken);
  EXPECT_EQ(fit.truncated, 1u);
  EXPECT_EQ(fit.points.size(), 4u);
  EXPECT_FALSE(fit.warnings.empty());
}

TEST(Expansion, HalfLatticeMatchesTailFormula) {
  const auto mu = half();
  const auto g = wide_grid(1e16, 8001, 0.5);
  std::vector<double> cs;
  for (int j = 8; j <= 32; j += 2) cs.push_back(std::ldexp(1.0, -j));
  const auto pts = probe_expansion(mu, g, scalar(1.0), cs, Regime::kAlphaLt1, 0.5, [](double) { return 0.0; });
  LawSampling s;
  s.count = 200000;
  s.seed = 5;
  const LimitLawEstimator est(mu, s);
  const auto ref = est.c_via_delta(scalar(1.0)).value;
  const auto fit = expansion_fit(pts, Regime::kAlphaLt1, 0.5, Extrapolation::kAitken, ref);
  EXPECT_LT(*fit.deviation, 0.2) << fit.fitted << " vs " << ref;
  for (const auto& p : pts) EXPECT_LE(std::abs(p.k), 1.0 + 1e-9);
}

TEST(Radius, DetectedOnGrid) {
  const auto g = uniform_grid(20, 0.05, 3);
  const double r = perturbation_radius(alpha3(), g, scalar(1.0), {0.01, 0.02, 0.05});
  EXPECT_GT(r, 0.0);
  EXPECT_LE(r, 0.05);
}

TEST(Planar, RotationSpec) {
  const BlockStructure b = BlockStructure::euclidean(2);
  Vector q(2);
  q << 1.0, 0.0;
  const MuSpec mu(b, {AffineAtom{1.0 / 9, Similarity::rotation2d(2.0, 1.0), q},
                      AffineAtom{8.0 / 9, Similarity::rotation2d(0.5, -0.5), q}});
  const auto g = std::make_shared<const OperatorGrid>(OperatorGrid::uniform(b, 12, 0.25, WeightExponents::defaults(3)));
  const auto op0 = assemble(mu, g, 0.0, Vector::Zero(2));
  const ComplexVector one = ComplexVector::Ones(static_cast<Eigen::Index>(g->size()));
  EXPECT_LT((op0.apply(one) - one).cwiseAbs().maxCoeff(), 1e-12);
  Vector v(2);
  v << 1.0, 0.5;
  const auto e = dominant_eigenvalue(assemble(mu, g, 0.05, v));
  EXPECT_TRUE(e.converged);
  EXPECT_LE(std::abs(e.k), 1.0 + 1e-9);
  EXPECT_LT(std::abs(e.k - 1.0), 0.1);
}
