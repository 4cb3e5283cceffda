// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "affrec/measure.hpp"
#include "affrec/recursion.hpp"
#include "affrec/stats.hpp"

using namespace affrec;

namespace {

MuSpec two_atom(double p_up, double up = 2.0, double down = 0.5, double q_up = 1.0, double q_down = 1.0) {
  Vector a(1), b(1);
  a << q_up;
  b << q_down;
  return MuSpec(BlockStructure::euclidean(1),
                {AffineAtom{p_up, Similarity::scalar(up), a}, AffineAtom{1.0 - p_up, Similarity::scalar(down), b}});
}

const double kLn2 = std::log(2.0);

}  // namespace

TEST(Kappa, ClosedForms) {
  EXPECT_NEAR(kappa(two_atom(0.2), 2.0), 0.2 * 4 + 0.8 * 0.25, 1e-15);
  EXPECT_NEAR(kappa(two_atom(1.0 / 9), 3.0), 1.0, 1e-15);
  EXPECT_EQ(kappa(two_atom(0.3), 0.0), 1.0);
}

TEST(Kappa, LogUniformFamily) {
  Vector q(1);
  q << 1.0;
  LogUniformFamily f{1.0, 0.25, 2.0, {Matrix::Identity(1, 1)}, q};
  const MuSpec mu(BlockStructure::euclidean(1), {}, f);
  const double s = 1.7;
  // trapezoid check of E a^s with log a uniform
  double acc = 0.0;
  const int n = 200000;
  const double la = std::log(0.25), lb = std::log(2.0);
  for (int i = 0; i < n; ++i) acc += std::exp(s * (la + (lb - la) * (i + 0.5) / n));
  EXPECT_NEAR(kappa(mu, s), acc / n, 1e-9);
  EXPECT_NEAR(kappa(mu, s), (std::pow(2.0, s) - std::pow(0.25, s)) / (s * (lb - la)), 1e-14);
  double acc2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = la + (lb - la) * (i + 0.5) / n;
    acc2 += std::exp(s * u) * u;
  }
  EXPECT_NEAR(log_moment(mu, s), acc2 / n, 1e-9);
}

TEST(SolveAlpha, KnownRoots) {
  EXPECT_NEAR(solve_alpha(two_atom(1.0 / 9)), 3.0, 1e-12);
  EXPECT_NEAR(solve_alpha(two_atom(1.0 / 3)), 1.0, 1e-12);
  EXPECT_NEAR(solve_alpha(two_atom(std::sqrt(2.0) - 1)), 0.5, 1e-12);
  EXPECT_NEAR(solve_alpha(two_atom(0.2)), 2.0, 1e-12);
}

TEST(SolveAlpha, RoundTrip) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.02, 0.3);
  for (int rep = 0; rep < 50; ++rep) {
    const auto mu = two_atom(u(gen), 2.0 + u(gen), 0.3 + u(gen));
    if (expected_log_scale(mu) >= 0) continue;
    const double a = solve_alpha(mu);
    EXPECT_LE(std::abs(kappa(mu, a) - 1.0), 1e-12);
  }
}

TEST(SolveAlpha, Failures) {
  // single contracting atom: kappa < 1 for all s > 0
  Vector q(1);
  q << 1.0;
  const MuSpec down(BlockStructure::euclidean(1), {AffineAtom{0.5, Similarity::scalar(0.5), q},
                                                   AffineAtom{0.5, Similarity::scalar(0.25), q}});
  EXPECT_THROW(solve_alpha(down), HypothesisError);
  EXPECT_THROW(solve_alpha(two_atom(0.5)), HypothesisError);  // E log|M| = 0
}

TEST(KappaProperties, ConvexAndBelowOneBeforeAlpha) {
  const auto mu = two_atom(1.0 / 9);
  const double a = solve_alpha(mu);
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.0, a);
  for (int rep = 0; rep < 200; ++rep) {
    double s[3] = {u(gen), u(gen), u(gen)};
    std::sort(s, s + 3);
    if (s[2] - s[0] < 1e-6) continue;
    const double w = (s[2] - s[1]) / (s[2] - s[0]);
    EXPECT_LE(std::log(kappa(mu, s[1])), w * std::log(kappa(mu, s[0])) + (1 - w) * std::log(kappa(mu, s[2])) + 1e-14);
  }
  for (int i = 1; i < 100; ++i) EXPECT_LT(kappa(mu, a * i / 100.0), 1.0);
}

TEST(MAlpha, ClosedForms) {
  EXPECT_NEAR(m_alpha(two_atom(1.0 / 9), 3.0), 7.0 / 9 * kLn2, 1e-12);
  EXPECT_NEAR(m_alpha(two_atom(0.2), 2.0), 3.0 / 5 * kLn2, 1e-12);
  EXPECT_NEAR(m_alpha(two_atom(1.0 / 3), 1.0), 1.0 / 3 * kLn2, 1e-12);
  EXPECT_THROW(m_alpha(two_atom(1.0 / 9), 0.1), HypothesisError);
}

TEST(MeanOperator, ClosedForms) {
  const auto a = mean_operator_and_mean(two_atom(1.0 / 9), 3.0);
  EXPECT_NEAR(a.z(0, 0), 2.0 / 3, 1e-15);
  EXPECT_NEAR(a.m(0), 3.0, 1e-14);
  const auto b = mean_operator_and_mean(two_atom(0.2), 2.0);
  EXPECT_NEAR(b.z(0, 0), 0.8, 1e-15);
  EXPECT_NEAR(b.m(0), 5.0, 1e-13);
  EXPECT_EQ(mean_operator_and_mean(two_atom(1.0 / 9, 2, 0.5, 0, 0), 3.0).m(0), 0.0);
  EXPECT_THROW(mean_operator_and_mean(two_atom(1.0 / 3), 1.0), RegimeError);
}

TEST(SecondMoment, ScalarClosedForm) {
  // E R^2 = (1 + 2 z m) / (1 - E M^2) with E M^2 = 2/3
  const auto mu = two_atom(1.0 / 9);
  EXPECT_NEAR(stationary_second_moment(mu, 3.0)(0, 0), 15.0, 1e-12);
  EXPECT_NEAR(stationary_covariance(mu, 3.0)(0, 0), 6.0, 1e-12);
}

TEST(SecondMoment, RotationSpecMatchesSimulation) {
  Vector q1(2), q2(2);
  q1 << 1.0, 0.0;
  q2 << 0.0, -1.0;
  const MuSpec mu(BlockStructure::euclidean(2), {AffineAtom{0.05, Similarity::rotation2d(2.0, 0.7), q1},
                                                 AffineAtom{0.95, Similarity::rotation2d(0.5, -1.3), q2}});
  const double a = solve_alpha(mu);
  ASSERT_GT(a, 2.0);
  const Matrix s = stationary_second_moment(mu, a);
  const auto batch = sample_stationary(mu, default_truncation(mu, a), 200000, 77);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      RunningStats st;
      for (Eigen::Index r = 0; r < batch.size(); ++r) st.add(batch.values(r, i) * batch.values(r, j));
      EXPECT_NEAR(st.mean(), s(i, j), 4 * st.se() + 1e-3) << i << j;
    }
}

TEST(Hypothesis, DistinctFixedPoints) {
  const auto r = validate_hypothesis_H(two_atom(1.0 / 9));
  EXPECT_TRUE(r.fixed_point_free);
  EXPECT_TRUE(r.ok());
  EXPECT_NEAR(r.alpha, 3.0, 1e-12);
  EXPECT_LT(r.e_log_m, 0.0);
  EXPECT_TRUE(r.structure.is_lattice());
  EXPECT_NEAR(r.moment_q_alpha, 1.0, 1e-15);
}

TEST(Hypothesis, NoRoot) {
  Vector q(1);
  q << 1.0;
  const MuSpec down(BlockStructure::euclidean(1), {AffineAtom{0.5, Similarity::scalar(0.5), q},
                                                   AffineAtom{0.5, Similarity::scalar(0.25), q}});
  const auto r = validate_hypothesis_H(down);
  EXPECT_FALSE(r.ok());
  EXPECT_THROW(require_hypothesis_H(down), HypothesisError);
}

TEST(Hypothesis, SharedFixedPoint) {
  const auto mu = two_atom(0.2, 2.0, 0.5, -1.0, 0.5);
  const auto r = validate_hypothesis_H(mu);
  EXPECT_FALSE(r.fixed_point_free);
  EXPECT_FALSE(r.ok());
}

TEST(MuSpecValidation, Rejections) {
  Vector q(1);
  q << 1.0;
  EXPECT_THROW(MuSpec(BlockStructure::euclidean(1), {AffineAtom{0.5, Similarity::scalar(2.0), q},
                                                     AffineAtom{0.4, Similarity::scalar(0.5), q}}),
               InputError);
  EXPECT_THROW(MuSpec(BlockStructure::euclidean(1), {AffineAtom{0.5, Similarity::scalar(2.0), q},
                                                     AffineAtom{0.5, Similarity::scalar(2.0), q}}),
               InputError);
}

TEST(Sampler, AtomFrequencies) {
  const auto mu = two_atom(0.3);
  const AffineSampler s(mu);
  RngStream rng(9, 0);
  int up = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) up += s.draw_scalar(rng).first > 1.0;
  EXPECT_NEAR(up / double(n), 0.3, 4 * std::sqrt(0.21 / n));
}
