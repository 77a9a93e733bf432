#include <gtest/gtest.h>

#include <numbers>
#include <random>
#include <sstream>

#include "compmm/solver.hpp"

using namespace compmm;

namespace {

CompositeProblem identity_ls(const Vec& f, double lo = -5, double hi = 5) {
  const auto n = static_cast<std::size_t>(f.size());
  return CompositeProblem{SmoothOuter::least_squares(Mat::Identity(f.size(), f.size()), f), SeparableMap::identity(n),
                          Regularizer::none(), Box::uniform(n, lo, hi)};
}

/// A small nonconvex composite instance: G(v) = 1/2 ||A v - f||^2, rho = sin-ish, r = rational.
CompositeProblem small_composite(std::uint64_t seed, std::size_t n = 6) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Mat a = Mat::Identity(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] += 0.4 * nd(rng);
  const Vec f = Vec::Random(n);
  std::vector<ScalarFn> r(n, fns::scaled(fns::rational_square(), 0.3));
  return CompositeProblem{SmoothOuter::least_squares(a, f), SeparableMap::uniform(n, fns::rastrigin()),
                          Regularizer::separable(r), Box::uniform(n, -2, 2)};
}

Geometry diag_geometry(const CompositeProblem& p) { return Geometry::diag_quadratic(diag_dominant_weights(p.outer.matrix())); }

}  // namespace

TEST(Majorizer, TouchesAtAnchor) {
  const auto p = small_composite(1);
  const auto h = diag_geometry(p);
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const Vec uk = p.box.sample(rng);
    EXPECT_EQ(majorizer_value(p, h, 0.99, uk, uk), energy(p, uk));
  }
}

TEST(Majorizer, MajorizesOnSamples) {
  const auto p = small_composite(3);
  const auto h = diag_geometry(p);
  std::mt19937_64 rng(4);
  for (int t = 0; t < 1000; ++t) {
    const Vec uk = p.box.sample(rng), u = p.box.sample(rng);
    const double e = energy(p, u);
    EXPECT_GE(majorizer_value(p, h, 0.99, uk, u), e - 1e-9 * (1 + std::abs(e)));
  }
}

TEST(Majorizer, LinearGeometryHasNoDistanceTerm) {
  auto g = SmoothOuter::custom(
      2, [](const Vec& v) { return -std::log1p(v.squaredNorm()); },
      [](const Vec& v) { return Vec(-2.0 * v / (1.0 + v.squaredNorm())); });
  g.set_concave();
  CompositeProblem p{g, SeparableMap::uniform(2, fns::sine()), Regularizer::separable({fns::square(), fns::square()}),
                     Box::uniform(2, -2, 2)};
  const Vec uk{{0.3, -0.4}}, u{{1.0, 0.2}};
  const Vec zk = apply_inner(p, uk), z = apply_inner(p, u);
  const double direct = g.value(zk) + g.gradient(zk).dot(z - zk) + p.reg.evaluate(u);
  EXPECT_EQ(majorizer_value(p, Geometry::linear(), 123.0, uk, u), direct);
}

TEST(Majorizer, BoundaryAnchorIsDomainError) {
  CompositeProblem p{SmoothOuter::kl_divergence(Mat::Identity(2, 2), Vec::Ones(2)), SeparableMap::identity(2),
                     Regularizer::none(), Box::uniform(2, 0.0, 3)};
  EXPECT_THROW(majorizer_value(p, Geometry::burg_entropy(3), 0.1, Vec{{0.0, 1.0}}, Vec{{1.0, 1.0}}), DomainError);
}

TEST(MmStep, ReducesToForwardBackwardForIdentity) {
  const auto p = identity_ls(Vec{{1.0, 2.0}});
  const Vec u1 = mm_step(p, Geometry::quadratic(), 0.99, Vec::Zero(2));
  EXPECT_NEAR(u1[0], 0.99, 1e-12);
  EXPECT_NEAR(u1[1], 1.98, 1e-12);
}

TEST(MmStep, NonlinearJacobiOneStep) {
  // G(v) = 1/2 <v, D v> - <f, v> with diagonal D and h = 1/2 ||.||_D: one step solves D rho(u) = f
  const Vec d{{2.0, 3.0, 4.0}}, f{{0.5, -1.0, 2.0}};
  auto g = SmoothOuter::custom(
      3, [d, f](const Vec& v) { return 0.5 * v.dot(d.cwiseProduct(v)) - f.dot(v); },
      [d, f](const Vec& v) { return Vec(d.cwiseProduct(v) - f); });
  CompositeProblem p{g, SeparableMap::uniform(3, fns::arctan()), Regularizer::none(), Box::uniform(3, -1.4, 1.4)};
  const Vec u1 = mm_step(p, Geometry::diag_quadratic(d), 1.0, Vec::Zero(3));
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(std::atan(u1[i]), f[i] / d[i], 1e-8);
}

TEST(MmStep, MajorizerNotIncreased) {
  const auto p = small_composite(5);
  const auto h = diag_geometry(p);
  std::mt19937_64 rng(6);
  for (int t = 0; t < 20; ++t) {
    const Vec uk = p.box.sample(rng);
    const Vec un = mm_step(p, h, 0.99, uk);
    EXPECT_LE(majorizer_value(p, h, 0.99, uk, un), majorizer_value(p, h, 0.99, uk, uk) + 1e-12);
    // global per coordinate: compare against a dense scan of the full majorizer along each axis
    for (Eigen::Index i = 0; i < 6; ++i) {
      Vec probe = un;
      double best = kInfinity;
      for (int g = 0; g <= 4000; ++g) {
        probe[i] = -2 + 4.0 * g / 4000;
        best = std::min(best, majorizer_value(p, h, 0.99, uk, probe));
      }
      EXPECT_LE(majorizer_value(p, h, 0.99, uk, un), best + 1e-9);
    }
  }
}

TEST(Run, OptimalStartIsFixedPoint) {
  const auto p = identity_ls(Vec{{1.0, -2.0}});
  auto cfg = SolverConfig::make(Method::proposed, 1.0);
  const auto run1 = run(p, Geometry::quadratic(), cfg, Vec{{1.0, -2.0}});
  EXPECT_EQ(run1.termination, Termination::fixed_point);
  EXPECT_EQ(run1.iterations(), 1);
  EXPECT_EQ(run1.trace.back().dz, 0.0);
}

TEST(Run, TauAboveBoundRejected) {
  const auto p = identity_ls(Vec{{1.0}});
  SolverConfig cfg;
  cfg.tau = 1.0;
  EXPECT_THROW(run(p, Geometry::quadratic(), cfg, Vec::Zero(1)), ConfigurationError);
  cfg.beta = 0.6;
  cfg.method = Method::proposed_inertia;
  cfg.tau = 0.5;
  EXPECT_THROW(run(p, Geometry::quadratic(), cfg, Vec::Zero(1)), ConfigurationError);
  EXPECT_THROW(SolverConfig::make(Method::proposed, 1.0, 0.2), ConfigurationError);
}

TEST(Run, NonlinearJacobiMatchesClassicalRecursion) {
  // Example: strictly diagonally dominant A; h = 1/2 ||.||_D with D = diag(A), tau = 1.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> un(-1, 1);
  const int n = 20;
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = i == j ? 0.0 : un(rng);
  a = 0.5 * (a + a.transpose()).eval();
  for (int i = 0; i < n; ++i) a(i, i) = a.row(i).cwiseAbs().sum() + 1.0;
  Vec f(n);
  for (auto& x : f) x = un(rng) * 5;
  auto g = SmoothOuter::custom(
      n, [a, f](const Vec& v) { return 0.5 * v.dot(a * v) - f.dot(v); }, [a, f](const Vec& v) { return Vec(a * v - f); });
  const Vec d = a.diagonal();
  CompositeProblem p{g, SeparableMap::identity(n), Regularizer::none(), Box::uniform(n, -10, 10)};
  SolverConfig cfg;
  cfg.tau = 1.0;
  cfg.L = 1.0;
  cfg.allow_unsafe_step = true;
  cfg.guard = false;
  Vec u = Vec::Zero(n);
  for (int k = 0; k < 30; ++k) {
    const Vec next = mm_step(p, Geometry::diag_quadratic(d), cfg.tau, u);
    Vec jac(n);
    for (int i = 0; i < n; ++i) jac[i] = (f[i] - (a.row(i).dot(u) - a(i, i) * u[i])) / a(i, i);
    EXPECT_LE((next - jac).cwiseAbs().maxCoeff(), 1e-12) << "step " << k;
    u = next;
  }
}

TEST(Run, DescentInequalityAndRate) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto p = small_composite(seed, 8);
    const auto h = diag_geometry(p);
    auto cfg = SolverConfig::make(Method::proposed, 1.0);
    cfg.max_iter = 60;
    std::mt19937_64 rng(seed);
    const auto r = run(p, h, cfg, p.box.sample(rng));
    ASSERT_NE(r.termination, Termination::guard_violation);
    const double alpha = r.alpha();
    for (std::size_t k = 1; k < r.trace.size(); ++k) {
      const double e0 = r.trace[k - 1].E, e1 = r.trace[k].E;
      EXPECT_LE(e1 - e0, -alpha * r.trace[k].dz + 1e-9 * (1 + std::abs(e0)));
    }
    // min_{k<=N} dz <= (E(u^1) - min E) / (alpha N)
    double min_e = kInfinity;
    for (const auto& rec : r.trace) min_e = std::min(min_e, rec.E);
    double min_dz = kInfinity;
    double sum = 0;
    for (std::size_t k = 2; k < r.trace.size(); ++k) {
      const double N = double(k - 1);
      min_dz = std::min(min_dz, r.trace[k].dz);
      sum += r.trace[k].dz;
      EXPECT_LE(min_dz, (r.trace[1].E - min_e) / (alpha * N));
      EXPECT_LE(sum, (r.trace[1].E - r.trace[k].E) / alpha + 1e-9 * (1 + std::abs(r.trace[1].E)));
    }
  }
}

TEST(Inertia, ZeroBetaIsBitIdentical) {
  const auto p = small_composite(8);
  const auto h = diag_geometry(p);
  std::mt19937_64 rng(9);
  const Vec uk = p.box.sample(rng), ukm1 = p.box.sample(rng);
  EXPECT_EQ(inertial_mm_step(p, h, 0.99, 0.0, uk, ukm1), mm_step(p, h, 0.99, uk));
  EXPECT_EQ(inertial_mm_step(p, h, 0.99, 0.3, uk, uk), mm_step(p, h, 0.99, uk));
}

TEST(Inertia, QuadraticExpansion) {
  // for quadratic h the inertial term equals (beta/tau) <grad h(z_{k-1}) - grad h(z_k), rho(u)> + const
  const Geometry h = Geometry::diag_quadratic(Vec{{1.5, 2.5}});
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> un(-2, 2);
  for (int t = 0; t < 100; ++t) {
    const Vec z{{un(rng), un(rng)}}, zk{{un(rng), un(rng)}}, zp{{un(rng), un(rng)}};
    const double beta = 0.3, tau = 0.7;
    const double direct = beta / tau * (h.bregman(z, zk) - h.bregman(z, zp));
    const double lin = beta / tau * (h.gradient(zp) - h.gradient(zk)).dot(z);
    const double c = beta / tau * (h.bregman(Vec::Zero(2), zk) - h.bregman(Vec::Zero(2), zp));
    EXPECT_NEAR(direct, lin + c, 1e-12);
  }
}

TEST(Inertia, RunDescendsWithGuard) {
  const auto p = small_composite(11, 8);
  const auto h = diag_geometry(p);
  auto cfg = SolverConfig::make(Method::proposed_inertia, 1.0, 0.3);
  cfg.max_iter = 80;
  std::mt19937_64 rng(1);
  const auto r = run(p, h, cfg, p.box.sample(rng));
  for (std::size_t k = 1; k < r.trace.size(); ++k) EXPECT_LE(r.trace[k].E, r.trace[k - 1].E + 1e-9 * (1 + std::abs(r.trace[k - 1].E)));
}

TEST(Gd, ZeroGradientStays) {
  const auto p = identity_ls(Vec{{1.0, 2.0}});
  EXPECT_EQ(gd_step(p, 0.5, Vec{{1.0, 2.0}}), (Vec{{1.0, 2.0}}));
}

TEST(Gd, UnitStepOnQuadratic) {
  const auto p = identity_ls(Vec{{0.0}});
  EXPECT_EQ(gd_step(p, 1.0, Vec{{0.7}})[0], 0.0);
}

TEST(Gd, CompositeChainRule) {
  CompositeProblem p{SmoothOuter::least_squares(Mat::Identity(1, 1), Vec::Ones(1)), SeparableMap::uniform(1, fns::exp()),
                     Regularizer::none(), Box::uniform(1, -3, 3)};
  EXPECT_EQ(gd_step(p, 0.1, Vec::Zero(1))[0], 0.0);
  const Vec u1 = gd_step(p, 0.1, Vec{{0.5}});
  EXPECT_NEAR(u1[0], 0.5 - 0.1 * (std::exp(0.5) - 1) * std::exp(0.5), 1e-15);
}

TEST(Gd, NonsmoothRegularizerRejected) {
  CompositeProblem p = identity_ls(Vec{{0.0}});
  p.reg = Regularizer::separable({fns::abs_value()});
  EXPECT_THROW(gd_step(p, 0.1, Vec{{0.3}}), ConfigurationError);
}

TEST(Fbs, IdentityEqualsMm) {
  const auto p = small_composite(12);
  CompositeProblem q = p;
  q.inner = SeparableMap::identity(p.size());
  std::mt19937_64 rng(3);
  const Vec uk = q.box.sample(rng);
  EXPECT_EQ(fbs_step(q, Geometry::quadratic(), 0.3, uk), mm_step(q, Geometry::quadratic(), 0.3, uk));
}

TEST(Fbs, ClosedFormWithoutRegularizer) {
  CompositeProblem p{SmoothOuter::least_squares(Mat::Identity(2, 2), Vec{{1.0, 2.0}}), SeparableMap::uniform(2, fns::sine()),
                     Regularizer::none(), Box::uniform(2, -3, 3)};
  const Vec uk{{0.2, -0.5}};
  const double tau = 0.1;
  const Vec expect = p.box.clip(uk - tau * composite_gradient(p, uk));
  EXPECT_LE((fbs_step(p, Geometry::quadratic(), tau, uk) - expect).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Fbs, TinyStepStaysPut) {
  const auto p = small_composite(13);
  std::mt19937_64 rng(5);
  const Vec uk = p.box.sample(rng);
  EXPECT_LT((fbs_step(p, Geometry::quadratic(), 1e-8, uk) - uk).norm(), 1e-4);
}

TEST(ProxLinear, IdentityClosedForm) {
  const Vec f{{1.0, -2.0, 0.5}};
  const auto p = identity_ls(f);
  const Vec uk{{0.0, 1.0, 3.0}};
  const double tau = 0.4;
  bool warn = true;
  const Vec un = prox_linear_step(p, tau, uk, InnerConfig{}, nullptr, &warn);
  EXPECT_FALSE(warn);
  EXPECT_LE((un - (uk + tau * f) / (1 + tau)).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(ProxLinear, FlatPointStays) {
  // rho = rastrigin has zero derivative at 0
  CompositeProblem p{SmoothOuter::least_squares(Mat::Identity(1, 1), Vec::Ones(1)), SeparableMap::uniform(1, fns::rastrigin()),
                     Regularizer::none(), Box::uniform(1, -2, 2)};
  EXPECT_NEAR(prox_linear_step(p, 0.5, Vec::Zero(1), InnerConfig{})[0], 0.0, 1e-14);
}

TEST(ProxLinear, AbsRegularizerMatchesBruteForce) {
  const Vec f{{1.5}};
  CompositeProblem p = identity_ls(f, -3, 3);
  p.reg = Regularizer::separable({fns::abs_value()});
  const double tau = 0.5;
  const Vec uk{{0.2}};
  const Vec un = prox_linear_step(p, tau, uk, InnerConfig{});
  double best = 0, fb = kInfinity;
  for (int g = 0; g <= 600000; ++g) {
    const double x = -3 + 6.0 * g / 600000;
    const double v = 0.5 * (x - 1.5) * (x - 1.5) + std::abs(x) + (x - 0.2) * (x - 0.2) / (2 * tau);
    if (v < fb) fb = v, best = x;
  }
  EXPECT_NEAR(un[0], best, 1e-5);
}

TEST(ProxLinear, SubproblemObjectiveDecreases) {
  const auto p = small_composite(14);
  std::mt19937_64 rng(8);
  const Vec uk = p.box.sample(rng);
  const double tau = 0.01;
  const Vec un = prox_linear_step(p, tau, uk, InnerConfig{});
  const SeparableMap& m = p.separable_inner();
  const Vec z = m.apply(uk), d = m.derivative(uk);
  const auto model = [&](const Vec& u) {
    return p.outer.value(z + d.cwiseProduct(u - uk)) + p.reg.evaluate(u) + 0.5 / tau * (u - uk).squaredNorm();
  };
  EXPECT_LE(model(un), model(uk) + 1e-12);
}

TEST(OuterLinear, IdentityEqualsFbs) {
  const auto p = small_composite(15);
  CompositeProblem q = p;
  q.inner = SeparableMap::identity(p.size());
  std::mt19937_64 rng(2);
  const Vec uk = q.box.sample(rng);
  EXPECT_EQ(outer_linear_step(q, 0.2, uk), fbs_step(q, Geometry::quadratic(), 0.2, uk));
}

TEST(OuterLinear, ProximityInUKeepsIterateLocal) {
  // rho = sin, G with positive gradient at rho(u_k): the image-space step may jump a period
  CompositeProblem p{SmoothOuter::least_squares(Mat::Identity(1, 1), Vec{{-1.0}}), SeparableMap::uniform(1, fns::sine()),
                     Regularizer::none(), Box::uniform(1, -8, 8)};
  const Vec uk{{6.0}};
  ASSERT_GT(p.outer.gradient(apply_inner(p, uk))[0], 0.0);
  const double tau = 0.9;
  const Vec ol = outer_linear_step(p, tau, uk);
  const Vec mm = mm_step(p, Geometry::quadratic(), tau, uk);
  // brute-force oracles for both subproblems
  const double g = p.outer.gradient(apply_inner(p, uk))[0];
  double bo = 0, fo = kInfinity, bm = 0, fm = kInfinity;
  for (int k = 0; k <= 1600000; ++k) {
    const double x = -8 + 16.0 * k / 1600000;
    const double vo = g * std::sin(x) + (x - 6) * (x - 6) / (2 * tau);
    const double vm = g * std::sin(x) + (std::sin(x) - std::sin(6.0)) * (std::sin(x) - std::sin(6.0)) / (2 * tau);
    if (vo < fo) fo = vo, bo = x;
    if (vm < fm) fm = vm, bm = x;
  }
  EXPECT_NEAR(ol[0], bo, 1e-4);
  EXPECT_NEAR(std::sin(mm[0]), std::sin(bm), 1e-6);
  EXPECT_LT(std::abs(ol[0] - 6.0), 1.0);
  // the image-space subproblem is indifferent to a whole period, the u-space one is not
  const auto mm_obj = [&](double x) { return g * std::sin(x) + std::pow(std::sin(x) - std::sin(6.0), 2) / (2 * tau); };
  const auto ol_obj = [&](double x) { return g * std::sin(x) + (x - 6) * (x - 6) / (2 * tau); };
  const double period = 2 * std::numbers::pi;
  EXPECT_NEAR(mm_obj(mm[0] - period), mm_obj(mm[0]), 1e-12);
  EXPECT_GT(ol_obj(ol[0] - period) - ol_obj(ol[0]), 1.0);
}

TEST(OuterLinear, TinyStepStaysPut) {
  const auto p = small_composite(16);
  std::mt19937_64 rng(4);
  const Vec uk = p.box.sample(rng);
  EXPECT_LT((outer_linear_step(p, 1e-8, uk) - uk).norm(), 1e-4);
}

TEST(Adam, ZeroGradientConstant) {
  AdamState st;
  const Box box = Box::uniform(2, -1, 1);
  Vec u{{0.3, -0.2}};
  for (int k = 0; k < 10; ++k) u = adam_step(st, u, Vec::Zero(2), AdamConfig{}, box);
  EXPECT_EQ(u, (Vec{{0.3, -0.2}}));
}

TEST(Adam, FirstStepIsLearningRate) {
  for (double g : {1e-3, 1.0, 1e3}) {
    AdamState st;
    AdamConfig h;
    h.lr = 0.05;
    const Vec u = adam_step(st, Vec::Zero(1), Vec::Constant(1, g), h, Box::uniform(1, -1, 1));
    EXPECT_NEAR(u[0], -0.05, 1e-6);
  }
}

TEST(Adam, ReplayDeterminism) {
  const auto p = small_composite(17);
  std::mt19937_64 rng(3);
  const Vec u0 = p.box.sample(rng);
  const auto go = [&] {
    AdamState st;
    Vec u = u0;
    for (int k = 0; k < 50; ++k) u = adam_step(st, u, energy_gradient(p, u), AdamConfig{}, p.box);
    return u;
  };
  EXPECT_EQ(go(), go());
}

TEST(Equivalence, IdentityMethodsProduceIdenticalTraces) {
  std::mt19937_64 rng(21);
  const std::size_t n = 10;
  std::vector<ScalarFn> r;
  for (std::size_t i = 0; i < n; ++i) r.push_back(fns::shifted(fns::rastrigin(), 0.1 * double(i)));
  CompositeProblem p{SmoothOuter::least_squares(Mat::Identity(n, n) + 0.1 * Mat::Random(n, n), Vec::Random(n)),
                     SeparableMap::identity(n), Regularizer::separable(r), Box::uniform(n, -3, 3)};
  const Geometry h = Geometry::quadratic();
  const double L = smoothness_constant(p.outer, h).L;
  const Vec u0 = p.box.sample(rng);
  std::vector<SolverRun> runs;
  for (Method m : {Method::proposed, Method::fbs, Method::outer_linear}) {
    SolverConfig c = SolverConfig::make(Method::proposed, L);
    c.method = m;
    c.max_iter = 50;
    runs.push_back(run(p, h, c, u0));
  }
  for (std::size_t j = 1; j < runs.size(); ++j) {
    ASSERT_EQ(runs[j].trace.size(), runs[0].trace.size());
    for (std::size_t k = 0; k < runs[0].trace.size(); ++k) EXPECT_EQ(runs[j].trace[k].E, runs[0].trace[k].E);
    EXPECT_EQ(runs[j].u_final, runs[0].u_final);
  }
}

TEST(Run, ThreadCountDoesNotChangeResults) {
  const auto p = small_composite(22, 12);
  const auto h = diag_geometry(p);
  std::mt19937_64 rng(5);
  const Vec u0 = p.box.sample(rng);
  auto c1 = SolverConfig::make(Method::proposed, 1.0);
  c1.max_iter = 20;
  auto c4 = c1;
  c4.threads = 4;
  const auto r1 = run(p, h, c1, u0), r4 = run(p, h, c4, u0);
  EXPECT_EQ(r1.u_final, r4.u_final);
}

TEST(Run, GuardViolationIsRecorded) {
  // u - 3 (u - f) overshoots the minimizer and doubles the distance to it
  const auto p = identity_ls(Vec{{1.0, -1.0}}, -100, 100);
  SolverConfig cfg;
  cfg.method = Method::gd;
  cfg.tau = 3.0;
  cfg.max_iter = 200;
  const auto r = run(p, Geometry::quadratic(), cfg, Vec{{2.0, 0.0}});
  EXPECT_EQ(r.termination, Termination::guard_violation);
  EXPECT_FALSE(r.trace.back().accepted);
  EXPECT_EQ(r.trace.back().E, r.trace[r.trace.size() - 2].E);
}

TEST(Run, SeparableMmKeepsMajorizerBelowEnergyEvenForLargeSteps) {
  // the anchor is always a candidate, so the majorizer never exceeds E(u_k)
  const auto p = small_composite(24, 8);
  const auto h = diag_geometry(p);
  SolverConfig cfg;
  cfg.tau = 50.0;
  cfg.allow_unsafe_step = true;
  cfg.max_iter = 50;
  std::mt19937_64 rng(7);
  const auto r = run(p, h, cfg, p.box.sample(rng));
  EXPECT_NE(r.termination, Termination::guard_violation);
}

TEST(Trace, CsvFormat) {
  const auto p = identity_ls(Vec{{1.0, 2.0}});
  auto cfg = SolverConfig::make(Method::proposed, 1.0);
  cfg.max_iter = 3;
  const auto r = run(p, Geometry::quadratic(), cfg, Vec::Zero(2));
  std::ostringstream os;
  write_trace_csv(os, r);
  const std::string s = os.str();
  EXPECT_EQ(s.rfind("k,E,dz,accepted,wall_ms\r\n", 0), 0u);
  EXPECT_NE(s.find("\r\n1,"), std::string::npos);
  EXPECT_EQ(format_number(0.1), "0.10000000000000001");
}
