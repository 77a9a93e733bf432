#include <gtest/gtest.h>

#include <sstream>

#include "compmm/bench.hpp"

using namespace compmm;

namespace {

SuiteConfig small_suite(const std::string& name, std::size_t n, std::vector<Method> methods, int restarts) {
  SuiteConfig cfg;
  cfg.cases = {CaseSpec::parse(name, n, 11)};
  cfg.methods = std::move(methods);
  cfg.restarts = restarts;
  cfg.scale_samples = 2000;
  cfg.budget.max_iter = 150;
  cfg.budget.adam_pilot_iter = 30;
  return cfg;
}

}  // namespace

TEST(Nonlinearity, RastriginFamily) {
  const auto nl = make_nonlinearity(2, -3, 3, 1);
  EXPECT_EQ(nl.rho(0.0), -10.0);
  for (double x : {0.1, 0.77, 1.5, 2.9}) EXPECT_EQ(nl.rho(x), nl.rho(-x));
  EXPECT_EQ(nl.r(0.0), 0.0);
  for (int g = 0; g <= 1000; ++g) EXPECT_LT(nl.r(-50 + 0.1 * g), 1.0);
}

TEST(Nonlinearity, SimpleAndSincFamilies) {
  const auto one = make_nonlinearity(1, -3, 3, 1);
  EXPECT_EQ(one.rho(0.0), 1.0);
  EXPECT_EQ(one.r(0.0), 0.0);
  EXPECT_EQ(make_nonlinearity(3, -3, 3, 1).r(0.0), -1.0);
  EXPECT_EQ(make_nonlinearity(4, -3, 3, 1).r(0.0), -10.0);
  EXPECT_THROW(make_nonlinearity(5, -3, 3, 1), ConfigurationError);
}

TEST(Spline, InterpolatesNodesAndIsDeterministic) {
  const auto nl = make_nonlinearity(3, -3, 3, 7);
  ASSERT_EQ(nl.node_x.size(), 12u);
  for (std::size_t k = 0; k < 12; ++k) {
    EXPECT_NEAR(nl.rho(nl.node_x[k]), nl.node_y[k], 1e-12);
    EXPECT_GE(nl.node_y[k], -3.0);
    EXPECT_LE(nl.node_y[k], 3.0);
  }
  const auto again = make_nonlinearity(3, -3, 3, 7);
  EXPECT_EQ(again.node_y, nl.node_y);
  EXPECT_NE(make_nonlinearity(3, -3, 3, 8).node_y, nl.node_y);
}

TEST(Spline, SmoothAndNaturalByFiniteDifferences) {
  const auto nl = make_nonlinearity(4, -3, 3, 9);
  const auto second = [&](double x, double h) { return (nl.rho(x + h) - 2 * nl.rho(x) + nl.rho(x - h)) / (h * h); };
  const double h = 1e-5;
  for (std::size_t k = 1; k + 1 < 12; ++k) {
    const double x = nl.node_x[k];
    // first and second derivatives agree from both sides
    EXPECT_NEAR(nl.rho.deriv(x - 1e-9), nl.rho.deriv(x + 1e-9), 1e-6);
    EXPECT_NEAR(second(x - 2 * h, h), second(x + 2 * h, h), 5e-3);
  }
  // natural end conditions
  EXPECT_NEAR(second(-3 + h, h), 0.0, 5e-3);
  EXPECT_NEAR(second(3 - h, h), 0.0, 5e-3);
  // analytic derivative against central differences
  for (double x = -2.95; x < 3; x += 0.1)
    EXPECT_NEAR(nl.rho.deriv(x), (nl.rho(x + 1e-6) - nl.rho(x - 1e-6)) / 2e-6, 1e-5);
}

TEST(Spline, CoerciveOutsideTheBox) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto nl = make_nonlinearity(3, -3, 3, s);
    EXPECT_GT(nl.rho(60.0), nl.rho(3.0) + 1000);
    EXPECT_GT(nl.rho(-60.0), nl.rho(-3.0) + 1000);
  }
}

TEST(OuterMatrix, FullFamilySingularValues) {
  const Mat a = make_outer_matrix('c', 150, 3);
  EXPECT_EQ(a.rows(), 50);
  EXPECT_EQ(a.cols(), 150);
  const Vec s = Eigen::JacobiSVD<Mat>(a).singularValues();
  EXPECT_LE(s.maxCoeff(), 1.0 + 1e-10);
  EXPECT_GE(s.minCoeff(), 1.0 / std::log(150.0) - 1e-10);
}

TEST(OuterMatrix, LocalFamilyWeightsDominateGram) {
  const Mat a = make_outer_matrix('a', 40, 4);
  const Mat gap = Mat(diag_dominant_weights(a).asDiagonal()) - a.transpose() * a;
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Mat>(gap).eigenvalues().minCoeff(), -1e-10);
  EXPECT_TRUE((make_outer_matrix('b', 40, 4).array() >= 0.0).all());
}

TEST(MakeCase, OptimumIsExact) {
  for (const char* name : {"1a", "1b", "2c", "3a", "3d", "4b"}) {
    const auto inst = make_case(CaseSpec::parse(name, 24, 5));
    EXPECT_EQ(energy(inst.problem, inst.u_star), inst.E_star) << name;
    EXPECT_TRUE(inst.problem.box.contains(inst.u_star));
  }
  EXPECT_EQ(make_case(CaseSpec::parse("1a", 24, 5)).E_star, 0.0);
  EXPECT_EQ(make_case(CaseSpec::parse("3a", 24, 5)).E_star, -24.0);
  EXPECT_EQ(make_case(CaseSpec::parse("3c", 30, 5)).A.rows(), 10);
}

TEST(MakeCase, KlFamily) {
  const auto inst = make_case(CaseSpec::parse("2b", 30, 6));
  EXPECT_EQ(inst.spec.a, 1e-2);
  EXPECT_TRUE((inst.f.array() > 0.0).all());
  EXPECT_EQ(inst.L, inst.f.lpNorm<1>());
  EXPECT_GT(inst.rho_shift, 0.0);
  EXPECT_GE(sampled_range(inst.problem.separable_inner().fn(0), inst.spec.a, inst.spec.b).first, 0.1 - 1e-12);
  CaseSpec bad = inst.spec;
  bad.a = -1;
  EXPECT_THROW(make_case(bad), ConfigurationError);
}

TEST(MakeCase, Deterministic) {
  const auto s = CaseSpec::parse("4d", 30, 77);
  const auto x = make_case(s), y = make_case(s);
  EXPECT_EQ(x.A, y.A);
  EXPECT_EQ(x.f, y.f);
  EXPECT_EQ(x.u_star, y.u_star);
  EXPECT_NE(make_case(CaseSpec::parse("4d", 30, 78)).u_star, x.u_star);
}

TEST(MedianEnergy, QuadraticInOneDimension) {
  // E = u^2 / 2 on [-1, 1]: |u| is uniform, so the median of E is 0.125
  CompositeProblem p{SmoothOuter::least_squares(Mat::Identity(1, 1), Vec::Zero(1)), SeparableMap::identity(1),
                     Regularizer::none(), Box::uniform(1, -1, 1)};
  const double m = sampled_median_energy(p, 0.0, 100000, 3);
  EXPECT_NEAR(m, 0.125, 0.02 * 0.125);
  EXPECT_EQ(sampled_median_energy(p, 0.0, 100000, 3), m);
}

TEST(MedianEnergy, FlatLandscapeIsDegenerate) {
  CompositeProblem p{SmoothOuter::least_squares(Mat::Zero(1, 1), Vec::Zero(1)), SeparableMap::identity(1),
                     Regularizer::none(), Box::uniform(1, -1, 1)};
  const double m = sampled_median_energy(p, 0.0, 101, 3);
  EXPECT_EQ(m, 0.0);
  EXPECT_THROW(normalized_gap(0.0, 0.0, m), DegenerateScaleError);
}

TEST(NormalizedGap, Values) {
  EXPECT_EQ(normalized_gap(3.0, 3.0, 2.0), 0.0);
  EXPECT_EQ(normalized_gap(5.0, 3.0, 2.0), 1.0);
  EXPECT_THROW(normalized_gap(3.0 - 1e-5, 3.0, 2.0), IntegrityError);
  EXPECT_NO_THROW(normalized_gap(3.0 - 1e-7, 3.0, 2.0));
}

TEST(BaselineSteps, AreDescentSteps) {
  const auto inst = make_case(CaseSpec::parse("2a", 20, 8));
  const auto cb = curvature_bounds(inst, 1);
  std::mt19937_64 rng(2);
  const Vec u0 = inst.problem.box.sample(rng);
  for (Method m : {Method::gd, Method::fbs, Method::outer_linear, Method::prox_linear}) {
    BenchBudget budget;
    budget.max_iter = 40;
    const auto cfg = method_config(inst, m, budget, u0, cb);
    EXPECT_GT(cfg.tau, 0.0);
    const auto r = run(inst.problem, inst.geom, cfg, u0);
    EXPECT_NE(r.termination, Termination::guard_violation) << to_string(m);
    for (std::size_t k = 1; k < r.trace.size(); ++k) EXPECT_LE(r.trace[k].E, r.trace[k - 1].E + 1e-9) << to_string(m);
  }
}

TEST(Suite, SingleRestartIsTheRun) {
  auto cfg = small_suite("2a", 12, {Method::proposed}, 1);
  const auto res = run_suite(cfg);
  ASSERT_EQ(res.runs.size(), 1u);
  EXPECT_EQ(res.cells[0].median_gap, res.runs[0].gap);
  cfg.restarts = 2;
  EXPECT_THROW(run_suite(cfg), ConfigurationError);
}

TEST(Suite, EasyCaseSolvedByProposedAndFbs) {
  auto cfg = small_suite("1a", 20, {Method::proposed, Method::fbs}, 3);
  cfg.budget.max_iter = 6000;
  const auto res = run_suite(cfg);
  EXPECT_LT(res.cell("1a", Method::proposed).median_gap, 1e-3);
  EXPECT_LT(res.cell("1a", Method::fbs).median_gap, 1e-3);
  EXPECT_TRUE(res.errors.empty());
}

TEST(Suite, NoMethodBeatsTheOptimum) {
  SuiteConfig cfg = small_suite("3b", 15, {Method::proposed, Method::proposed_inertia, Method::gd, Method::fbs,
                                           Method::outer_linear, Method::prox_linear, Method::adam},
                                3);
  cfg.cases.push_back(CaseSpec::parse("4d", 15, 11));
  cfg.cases.push_back(CaseSpec::parse("2c", 15, 11));
  const auto res = run_suite(cfg);
  EXPECT_TRUE(res.errors.empty());
  for (const auto& r : res.runs) {
    EXPECT_GE(r.gap, -1e-9) << r.case_name << " " << to_string(r.method);
    EXPECT_TRUE(std::isfinite(r.E_final));
  }
}

TEST(Suite, ThreadCountDoesNotChangeSummary) {
  auto cfg = small_suite("2d", 12, {Method::proposed, Method::gd, Method::adam}, 3);
  cfg.cases.push_back(CaseSpec::parse("3b", 12, 11));
  std::ostringstream a, b;
  write_summary_csv(a, run_suite(cfg));
  cfg.threads = 3;
  write_summary_csv(b, run_suite(cfg));
  EXPECT_EQ(a.str(), b.str());
}

TEST(Output, CsvAndSvgShape) {
  const auto res = run_suite(small_suite("1c", 9, {Method::proposed}, 1));
  std::ostringstream runs, summary, svg;
  write_runs_csv(runs, res);
  write_summary_csv(summary, res);
  write_heatmap_svg(svg, res, {Method::proposed});
  EXPECT_EQ(runs.str().rfind("case,method,restart,gap,E_final,iters,wall_ms\r\n", 0), 0u);
  EXPECT_EQ(summary.str().rfind("case,method,restarts,median_gap,median_E,E_star,scale,step\r\n", 0), 0u);
  const std::string sum = summary.str();
  EXPECT_EQ(std::count(sum.begin(), sum.end(), '\n'), 2);
  EXPECT_NE(svg.str().find("<rect"), std::string::npos);
}
