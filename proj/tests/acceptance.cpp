// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one PASS/FAIL line per criterion, details indented below.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "affrec/affrec.hpp"

using namespace affrec;

namespace {

// Pinned tolerances.
constexpr double kKappaTol = 1e-12;
constexpr double kMAlphaTol = 1e-12;
constexpr double kSeMultiple = 3.0;
constexpr double kTruncTol = 1e-6;
constexpr double kCltVarianceRel = 0.05;
constexpr double kHillLo = 1.7, kHillHi = 2.3;
constexpr double kFlatFactor = 2.0;
constexpr double kCrossRel = 0.10;
constexpr double kAlpha2QLo = 0.999, kAlpha2QHi = 0.99995;
constexpr double kFinalDistance = 0.05;
constexpr double kExpansionAlpha3 = 0.15;
constexpr double kExpansionHalf = 0.20;
constexpr double kIdentityResidual = 0.05;
constexpr double kPlateau = 0.20;
constexpr double kChiP = 0.001;
constexpr int kChiAllowed = 2;

struct Outcome {
  bool pass = false;
  std::vector<std::string> details;
};

class Detail {
 public:
  explicit Detail(Outcome& o) : o_(o) {}
  template <typename... T>
  void operator()(const T&... parts) {
    std::ostringstream os;
    os.precision(6);
    (os << ... << parts);
    o_.details.push_back(os.str());
  }

 private:
  Outcome& o_;
};

Vector scalar(double x) {
  Vector v(1);
  v << x;
  return v;
}

MuSpec two_atom(double up, double p_up) {
  return MuSpec(BlockStructure::euclidean(1), {AffineAtom{p_up, Similarity::scalar(up), scalar(1.0)},
                                               AffineAtom{1.0 - p_up, Similarity::scalar(0.5), scalar(1.0)}});
}

const double kHalfWeight = std::sqrt(2.0) - 1.0;
MuSpec alpha3() { return two_atom(2.0, 1.0 / 9); }
MuSpec alpha2() { return two_atom(2.0, 1.0 / 5); }
MuSpec alpha1() { return two_atom(2.0, 1.0 / 3); }
MuSpec half() { return two_atom(2.0, kHalfWeight); }
MuSpec dense3() { return two_atom(3.0, 7.0 / 215); }

std::string cstr(Complex z) {
  std::ostringstream os;
  os.precision(5);
  os << z.real() << (z.imag() < 0 ? "" : "+") << z.imag() << "i";
  return os.str();
}

std::shared_ptr<const OperatorGrid> uniform_grid(double L, double h, double alpha) {
  return std::make_shared<const OperatorGrid>(
      OperatorGrid::uniform(BlockStructure::euclidean(1), L, h, WeightExponents::defaults(alpha)));
}

std::shared_ptr<const OperatorGrid> asinh_grid(double L, std::size_t n, double alpha) {
  return std::make_shared<const OperatorGrid>(
      OperatorGrid::asinh(BlockStructure::euclidean(1), L, n, WeightExponents::defaults(alpha)));
}

Estimate sample_variance(const TrajectoryBatch& b) {
  RunningStats m;
  for (Eigen::Index i = 0; i < b.size(); ++i) m.add(b.values(i, 0));
  RunningStats sq;
  for (Eigen::Index i = 0; i < b.size(); ++i) sq.add(std::pow(b.values(i, 0) - m.mean(), 2));
  return {sq.mean(), sq.se()};
}

// The alpha = 1/2 estimator is shared by criteria 5 and 7.
std::shared_ptr<const LimitLawEstimator> half_estimator() {
  static std::shared_ptr<const LimitLawEstimator> est = [] {
    LawSampling s;
    s.count = 1000000;
    s.seed = 5;
    return std::make_shared<const LimitLawEstimator>(half(), s);
  }();
  return est;
}

Outcome exponent_solver() {
  Outcome o;
  Detail d(o);
  o.pass = true;
  const double ln2 = std::numbers::ln2;
  struct Case {
    MuSpec mu;
    double alpha, m;
  };
  const std::vector<Case> cases = {{alpha3(), 3, 7 * ln2 / 9}, {alpha1(), 1, ln2 / 3}, {alpha2(), 2, 3 * ln2 / 5}};
  for (const auto& c : cases) {
    const double a = solve_alpha(c.mu);
    const double k = std::abs(kappa(c.mu, a) - 1.0);
    const double m = std::abs(m_alpha(c.mu, a) - c.m);
    const bool ok = k <= kKappaTol && m <= kMAlphaTol && std::abs(a - c.alpha) <= 1e-9;
    o.pass = o.pass && ok;
    d("alpha=", a, " |kappa-1|=", k, " |m_alpha-closed|=", m, ok ? "" : "  <-- out of tolerance");
  }
  return o;
}

Outcome stationary_moments() {
  Outcome o;
  Detail d(o);
  const auto mu = alpha3();
  const auto b = sample_stationary(mu, default_truncation(mu, 3.0), 100000, 2024);
  RunningStats m;
  for (Eigen::Index i = 0; i < b.size(); ++i) m.add(b.values(i, 0));
  const auto var = sample_variance(b);
  const bool mean_ok = std::abs(m.mean() - 3.0) <= kSeMultiple * m.se();
  const bool var_ok = std::abs(var.value - 6.0) <= kSeMultiple * var.se;
  const bool trunc_ok = b.truncation_bound < kTruncTol;
  d("mean=", m.mean(), " se=", m.se(), " (target 3)");
  d("variance=", var.value, " se=", var.se, " (target 6)");
  d("truncation terms=", b.truncation, " bound=", b.truncation_bound);
  o.pass = mean_ok && var_ok && trunc_ok;
  return o;
}

Outcome clt_regime() {
  Outcome o;
  Detail d(o);
  const auto mu = alpha3();
  const long n = 2000;
  auto s = partial_sums(mu, Vector::Zero(1), {n}, 50000, 2024).front();
  for (Eigen::Index i = 0; i < s.size(); ++i) s.values(i, 0) = (s.values(i, 0) - 3.0 * n) / std::sqrt(double(n));
  const auto var = sample_variance(s);
  const bool var_ok = std::abs(var.value - 30.0) <= kCltVarianceRel * 30.0;
  d("variance=", var.value, " (target 30, rel ", std::abs(var.value / 30.0 - 1.0), ")");
  std::vector<Vector> grid;
  for (double v : {0.1, 0.2, 0.3}) grid.push_back(scalar(v));
  const auto e = ecf(s, grid);
  bool ecf_ok = true;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double v = grid[j](0);
    const Complex phi = std::exp(-15.0 * v * v);
    const double dist = std::abs(e[j].value - phi);
    const bool ok = dist <= kSeMultiple * e[j].se;
    ecf_ok = ecf_ok && ok;
    d("v=", v, " ecf=", cstr(e[j].value), " phi=", phi.real(), " |diff|=", dist, " = ", dist / e[j].se, " SE");
  }
  o.pass = var_ok && ecf_ok;
  return o;
}

Outcome kesten_tail() {
  Outcome o;
  Detail d(o);
  const auto mu = alpha2();
  const auto b = sample_stationary(mu, default_truncation(mu, 2.0), 1000000, 7);
  const auto tau = b.tau_values(mu.blocks());
  const auto h = hill_alpha(tau, 0.05);
  const auto prof = tail_constant_profile(tau, 2.0, lattice_grid(10.0, 320.0, 2.0), GroupStructure::lattice(2.0));
  const bool hill_ok = h.alpha >= kHillLo && h.alpha <= kHillHi;
  bool positive = !prof.t.empty();
  for (std::size_t i = 0; i < prof.t.size(); ++i) positive = positive && prof.constant[i] > 0.0;
  const bool decade = !prof.t.empty() && prof.t.back() / prof.t.front() >= 10.0;
  const bool flat = prof.flatness() <= kFlatFactor;
  d("hill alpha=", h.alpha, " se=", h.se, " k=", h.k);
  for (std::size_t i = 0; i < prof.t.size(); ++i)
    d("t=", prof.t[i], " t^2 P[R>t]=", prof.constant[i], " se=", prof.se[i], " exceedances=", prof.exceedances[i]);
  d("flatness=", prof.flatness(), " span=", prof.t.empty() ? 0.0 : prof.t.back() / prof.t.front());
  o.pass = hill_ok && positive && decade && flat;
  return o;
}

Outcome cross_formula() {
  Outcome o;
  Detail d(o);
  o.pass = true;
  LawSampling s2;
  s2.count = 1000000;
  s2.seed = 6;
  // alpha = 2 tails settle only logarithmically; thresholds sit deeper.
  s2.q_lo = kAlpha2QLo;
  s2.q_hi = kAlpha2QHi;
  const LimitLawEstimator two(alpha2(), s2);
  const std::vector<std::pair<std::string, const LimitLawEstimator*>> specs = {{"alpha=1/2", half_estimator().get()},
                                                                                {"alpha=2", &two}};
  for (const auto& [name, est] : specs) {
    for (double v : {0.5, 0.75, 1.0, 1.5, 2.0}) {
      const auto a = est->c_direct(scalar(v));
      const auto b = est->c_via_delta(scalar(v));
      const double rel = std::abs(a.value - b.value) / std::abs(b.value);
      const double se = std::hypot(a.se, b.se) / std::abs(b.value);
      const bool ok = rel <= kCrossRel;
      o.pass = o.pass && ok;
      d(name, " v=", v, " direct=", cstr(a.value), " via_delta=", cstr(b.value), " rel=", rel, " combined rel se=", se,
        ok ? "" : "  <--");
    }
  }
  return o;
}

Outcome semistable_convergence() {
  Outcome o;
  Detail d(o);
  const auto mu = half();
  LawSampling s;
  s.count = 200000;
  s.seed = 5;
  auto est = std::make_shared<const LimitLawEstimator>(mu, s);
  const auto law = memoized(estimated_law(est, CMethod::kDirect));
  std::vector<long> ns;
  for (int k = 4; k <= 9; ++k) ns.push_back(1L << k);
  const auto steps = closed_form_centering(mu, ns);
  const auto grid = default_v_grid(law);
  VerificationTolerances tol;
  tol.final_distance = kFinalDistance;
  const auto r = verify_convergence(mu, law, steps, grid, 100000, 5, 1, std::nullopt, tol);
  for (const auto& row : r.rows)
    d("n=", row.n, " c_n=", row.c_scale, " exact=", row.exact, " sup distance=", row.sup_distance, " se=", row.se);
  d("monotone=", r.monotone, " grid points=", grid.size(), " max |v|=", grid.back()(0));
  o.pass = r.pass;
  return o;
}

Outcome spectral_expansions() {
  Outcome o;
  Detail d(o);
  const auto mu3 = alpha3();
  const std::vector<double> ts = {0.1, 0.08, 0.06, 0.04, 0.02};
  const auto pts3 = probe_expansion(mu3, uniform_grid(60, 0.02, 3), scalar(1.0), ts, Regime::kAlphaGt2, 3.0,
                                    [](double t) { return 3.0 * t; });
  const auto fit3 = expansion_fit(pts3, Regime::kAlphaGt2, 3.0, Extrapolation::kLogLinear, Complex(-19.5, 0.0));
  for (const auto& p : pts3) d("alpha=3 t=", p.c, " k=", cstr(p.k), " ratio=", cstr(p.ratio));
  d("alpha=3 fitted=", cstr(fit3.fitted), " vs -19.5, deviation=", *fit3.deviation);
  const bool ok3 = *fit3.deviation <= kExpansionAlpha3;

  EigenOptions fine;
  fine.tol = 1e-12;
  const std::vector<double> small = {4e-4, 2e-4, 1e-4, 5e-5};
  const auto ptsw = probe_expansion(mu3, asinh_grid(1e8, 16001, 3), scalar(1.0), small, Regime::kAlphaGt2, 3.0,
                                    [](double t) { return 3.0 * t; }, fine);
  const auto fitw = expansion_fit(ptsw, Regime::kAlphaGt2, 3.0, Extrapolation::kLogLinear, Complex(-19.5, 0.0), fine.tol);
  d("(info) alpha=3 on a wide asinh grid, t=4e-4..5e-5: fitted=", cstr(fitw.fitted), " deviation=", *fitw.deviation);

  std::vector<double> cs;
  for (int j = 8; j <= 32; j += 2) cs.push_back(std::ldexp(1.0, -j));
  const auto ptsh = probe_expansion(half(), asinh_grid(1e16, 8001, 0.5), scalar(1.0), cs, Regime::kAlphaLt1, 0.5,
                                    [](double) { return 0.0; });
  const auto ref = half_estimator()->c_via_delta(scalar(1.0));
  const auto fith = expansion_fit(ptsh, Regime::kAlphaLt1, 0.5, Extrapolation::kAitken, ref.value);
  d("alpha=1/2 fitted=", cstr(fith.fitted), " via_delta=", cstr(ref.value), " se=", ref.se,
    " deviation=", *fith.deviation);
  const bool okh = *fith.deviation <= kExpansionHalf;
  o.pass = ok3 && okh;
  return o;
}

Outcome identities() {
  Outcome o;
  Detail d(o);
  o.pass = true;
  struct Case {
    std::string name;
    MuSpec mu;
    double alpha;
    std::shared_ptr<const OperatorGrid> grid;
    std::vector<double> cs;
  };
  std::vector<double> half_cs;
  for (int j = 4; j <= 8; ++j) half_cs.push_back(std::ldexp(1.0, -j));
  const std::vector<Case> cases = {{"alpha=3", alpha3(), 3.0, uniform_grid(60, 0.02, 3), {0.2, 0.1, 0.05, 0.025}},
                                   {"alpha=1/2", half(), 0.5, asinh_grid(1e16, 4001, 0.5), half_cs}};
  for (const auto& c : cases) {
    const int trunc = default_truncation(c.mu, c.alpha);
    const auto stationary = sample_stationary(c.mu, trunc, 100000, 11);
    const auto dual = sample_eta(c.mu, scalar(1.0), trunc, 20000, 3);
    double prev = std::numeric_limits<double>::infinity();
    bool decreasing = true;
    for (double cc : c.cs) {
      const auto op = assemble(c.mu, c.grid, cc, scalar(1.0));
      const auto e = dominant_eigenvalue(op);
      const auto tw = intertwining_check(op, e.k, dual);
      decreasing = decreasing && tw.residual < prev;
      prev = tw.residual;
      d(c.name, " c=", cc, " k=", cstr(e.k), " intertwining residual=", tw.residual);
    }
    const double c_id = c.cs[c.cs.size() / 2];
    const auto op = assemble(c.mu, c.grid, c_id, scalar(1.0));
    const auto id = eigenvalue_identity_check(op, dominant_eigenvalue(op), stationary);
    d(c.name, " identity at c=", c_id, ": lhs=", cstr(id.lhs), " rhs=", cstr(id.rhs), " residual=", id.residual,
      " clipped=", id.clipped_fraction);
    const bool ok = decreasing && id.residual < kIdentityResidual;
    o.pass = o.pass && ok;
    d(c.name, decreasing ? " intertwining decreasing" : " intertwining NOT decreasing", ok ? "" : "  <--");
  }
  return o;
}

Outcome local_limit() {
  Outcome o;
  Detail d(o);
  const auto mu = dense3();
  const auto law = gaussian_law(mu);
  const Box box{scalar(-1.0), scalar(1.0)};
  const auto r = local_limit_check(mu, law, box, {250, 500, 1000, 2000, 4000}, 1000000, 9, 1, kPlateau);
  d("dense spec {3 w.p. 7/215, 1/2}: variance=", law.q(0, 0), " limit variance=",
    -2.0 * phi_2plus_exponent(scalar(1.0), law.q, law.z));
  d("target p(0) lambda(I)=", r.target, " +- ", r.target_error, " (literal variance-30 target ",
    2.0 / std::sqrt(60.0 * std::numbers::pi), ")");
  for (const auto& row : r.rows) d("n=", row.n, " ratio=", row.ratio, " se=", row.se, row.inconclusive ? " inconclusive" : "");
  o.pass = r.plateau && !r.inconclusive;
  return o;
}

Outcome oracle() {
  Outcome o;
  Detail d(o);
  const auto mu = alpha3();
  std::vector<Vector> grid;
  for (double v : {0.3, 1.0, 2.0}) grid.push_back(scalar(v));
  int low_p = 0, ecf_out = 0;
  std::size_t unmatched = 0;
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 1 + rep % 8;
    const auto r = oracle_check(mu, scalar(0.5), n, 20000, 5000 + static_cast<std::uint64_t>(rep), grid);
    if (r.chi.pvalue <= kChiP) ++low_p;
    if (!r.ecf_within) ++ecf_out;
    unmatched += r.unmatched;
    worst = std::max(worst, r.max_ecf_deviation / r.ecf_bound);
  }
  d("100 repetitions, n=1..8: chi-square p<=", kChiP, " in ", low_p, " (allowed ", kChiAllowed, ")");
  d("ECF outside 4/sqrt(N): ", ecf_out, ", worst deviation/bound=", worst, ", unmatched samples=", unmatched);
  o.pass = low_p <= kChiAllowed && ecf_out == 0 && unmatched == 0;
  return o;
}

Outcome determinism() {
  Outcome o;
  Detail d(o);
  o.pass = true;
  auto check = [&](const std::string& what, bool same) {
    o.pass = o.pass && same;
    d(what, same ? ": identical" : ": DIFFERENT");
  };
  const auto mu3 = alpha3();
  const int t3 = default_truncation(mu3, 3.0);
  {
    const auto a = sample_stationary(mu3, t3, 100000, 2024, 1);
    const auto b = sample_stationary(mu3, t3, 100000, 2024, 8);
    check("stationary sample (criterion 2)", a.values == b.values);
  }
  {
    const auto law = gaussian_law(mu3);
    const auto steps = closed_form_centering(mu3, {125, 500});
    const std::vector<Vector> grid = {scalar(0.1), scalar(0.2), scalar(0.3)};
    const auto a = verify_convergence(mu3, law, steps, grid, 20000, 2024, 1);
    const auto b = verify_convergence(mu3, law, steps, grid, 20000, 2024, 8);
    bool same = true;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      same = same && a.rows[i].sup_distance == b.rows[i].sup_distance;
      for (std::size_t j = 0; j < grid.size(); ++j) same = same && a.rows[i].ecf[j].value == b.rows[i].ecf[j].value;
    }
    check("convergence report (criterion 3)", same);
  }
  {
    const auto mu = alpha2();
    const auto a = sample_stationary(mu, default_truncation(mu, 2.0), 100000, 7, 1);
    const auto b = sample_stationary(mu, default_truncation(mu, 2.0), 100000, 7, 8);
    const auto ha = hill_alpha(a, mu.blocks()), hb = hill_alpha(b, mu.blocks());
    check("Hill estimate (criterion 4)", ha.alpha == hb.alpha && ha.se == hb.se);
  }
  {
    LawSampling s;
    s.count = 50000;
    s.seed = 5;
    const LimitLawEstimator a(half(), s);
    s.workers = 8;
    const LimitLawEstimator b(half(), s);
    const auto v = scalar(1.0);
    check("C direct and via delta (criterion 5)", a.c_direct(v).value == b.c_direct(v).value &&
                                                      a.c_direct(v).se == b.c_direct(v).se &&
                                                      a.c_via_delta(v).value == b.c_via_delta(v).value);
  }
  {
    const auto g = uniform_grid(60, 0.02, 3);
    const auto stationary = sample_stationary(mu3, t3, 20000, 11, 8);
    const auto op1 = assemble(mu3, g, 0.05, scalar(1.0), BoundaryPolicy::kClamp, 1);
    const auto op8 = assemble(mu3, g, 0.05, scalar(1.0), BoundaryPolicy::kClamp, 8);
    const auto e1 = dominant_eigenvalue(op1), e8 = dominant_eigenvalue(op8);
    const auto i1 = eigenvalue_identity_check(op1, e1, stationary, 1);
    const auto i8 = eigenvalue_identity_check(op8, e8, stationary, 8);
    check("eigenvalue and identity residual (criteria 7, 8)", e1.k == e8.k && i1.residual == i8.residual);
  }
  {
    const auto mu = dense3();
    const auto law = gaussian_law(mu);
    const Box box{scalar(-1.0), scalar(1.0)};
    const auto a = local_limit_check(mu, law, box, {250, 500}, 50000, 9, 1);
    const auto b = local_limit_check(mu, law, box, {250, 500}, 50000, 9, 8);
    bool same = true;
    for (std::size_t i = 0; i < a.rows.size(); ++i) same = same && a.rows[i].ratio == b.rows[i].ratio;
    check("local limit ratios (criterion 9)", same);
  }
  {
    const std::vector<Vector> grid = {scalar(0.3), scalar(1.0)};
    const auto a = oracle_check(mu3, scalar(0.5), 6, 20000, 77, grid, 1);
    const auto b = oracle_check(mu3, scalar(0.5), 6, 20000, 77, grid, 8);
    check("oracle check (criterion 10)", a.chi.statistic == b.chi.statistic && a.max_ecf_deviation == b.max_ecf_deviation);
  }
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "exponent solver", 1, exponent_solver},
      {2, "stationary moments", 30, stationary_moments},
      {3, "CLT regime", 300, clt_regime},
      {4, "Kesten tail", 300, kesten_tail},
      {5, "cross-formula consistency", 600, cross_formula},
      {6, "semistable convergence", 600, semistable_convergence},
      {7, "spectral expansions", 600, spectral_expansions},
      {8, "eigenvalue identity and intertwining", 0, identities},
      {9, "local limit", 1200, local_limit},
      {10, "oracle equivalence", 0, oracle},
      {11, "determinism across worker counts", 0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.details.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.limit_seconds <= 0 || secs < c.limit_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    char head[160];
    std::snprintf(head, sizeof head, "%s criterion %d: %s (%.1f s%s)", pass ? "PASS" : "FAIL", c.id, c.name, secs,
                  in_time ? "" : ", over the time limit");
    std::cout << head << "\n";
    for (const auto& line : o.details) std::cout << "    " << line << "\n";
    std::cout.flush();
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
