#pragma once

#include <algorithm>
#include <atomic>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "compmm/solver.hpp"

namespace compmm {

// ---------------------------------------------------------------------------
// Instances
// ---------------------------------------------------------------------------

/// Synthetic case: nonlinearity family 1..4 and outer family 'a'..'d'.
struct CaseSpec {
  int inner_family = 1;
  char outer_family = 'a';
  std::size_t n = 30;
  double a = -3.0;
  double b = 3.0;
  std::uint64_t seed = 0;

  std::string name() const { return std::to_string(inner_family) + outer_family; }

  void validate() const {
    if (inner_family < 1 || inner_family > 4) throw ConfigurationError("case: nonlinearity family must be 1..4");
    if (outer_family < 'a' || outer_family > 'd') throw ConfigurationError("case: outer family must be a..d");
    if (n < 3) throw ConfigurationError("case: n must be at least 3");
    if (!(a < b)) throw ConfigurationError("case: empty interval");
    if (outer_family == 'b' && !(a > 0.0)) throw ConfigurationError("case: the KL family needs a positive lower bound");
  }

  /// Parses names like "3a"; the KL family gets the interval [eps, b].
  static CaseSpec parse(const std::string& s, std::size_t n, std::uint64_t master_seed, double lo = -3.0, double hi = 3.0,
                        double eps = 1e-2) {
    if (s.size() != 2 || s[0] < '1' || s[0] > '4' || s[1] < 'a' || s[1] > 'd')
      throw ConfigurationError("unknown case '" + s + "'");
    CaseSpec c;
    c.inner_family = s[0] - '0';
    c.outer_family = s[1];
    c.n = n;
    c.a = c.outer_family == 'b' ? eps : lo;
    c.b = hi;
    c.seed = derive_seed(master_seed, static_cast<std::uint64_t>(c.inner_family), static_cast<std::uint64_t>(c.outer_family));
    c.validate();
    return c;
  }
};

/// Natural cubic spline through (xs, ys) with a C1 quadratic extension
/// p(x_end) + p'(x_end) (x - x_end) + c (x - x_end)^2 outside the node range.
inline ScalarFn natural_cubic_spline(std::vector<double> xs, std::vector<double> ys, double extension = 1.0) {
  const std::size_t m = xs.size();
  if (m < 3 || ys.size() != m) throw ConfigurationError("spline needs at least three nodes");
  for (std::size_t i = 1; i < m; ++i)
    if (!(xs[i] > xs[i - 1])) throw ConfigurationError("spline nodes must increase");
  // second derivatives M with M_0 = M_{m-1} = 0 (tridiagonal solve)
  std::vector<double> M(m, 0.0), c(m, 0.0), d(m, 0.0);
  for (std::size_t i = 1; i + 1 < m; ++i) {
    const double h0 = xs[i] - xs[i - 1], h1 = xs[i + 1] - xs[i];
    const double diag = 2.0 * (h0 + h1) - h0 * c[i - 1];
    c[i] = h1 / diag;
    d[i] = (6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0) - h0 * d[i - 1]) / diag;
  }
  for (std::size_t i = m - 2; i >= 1; --i) {
    M[i] = d[i] - c[i] * M[i + 1];
    if (i == 1) break;
  }
  struct Data {
    std::vector<double> x, y, M;
    double ext;
    std::size_t seg(double t) const {
      const auto it = std::upper_bound(x.begin(), x.end(), t);
      const auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - x.begin()));
      return std::min(k, x.size() - 1) - 1;
    }
    double inside(double t, double& slope) const {
      const std::size_t k = seg(t);
      const double h = x[k + 1] - x[k];
      const double A = (x[k + 1] - t) / h, B = (t - x[k]) / h;
      slope = (y[k + 1] - y[k]) / h - (3 * A * A - 1) / 6 * h * M[k] + (3 * B * B - 1) / 6 * h * M[k + 1];
      return A * y[k] + B * y[k + 1] + ((A * A * A - A) * M[k] + (B * B * B - B) * M[k + 1]) * h * h / 6;
    }
    double eval(double t, double* deriv) const {
      double s = 0.0;
      double e = t < x.front() ? x.front() : (t > x.back() ? x.back() : t);
      const double v = inside(e, s);
      const double dt = t - e;
      if (deriv) *deriv = s + 2.0 * ext * dt;
      return v + s * dt + ext * dt * dt;
    }
  };
  auto data = std::make_shared<const Data>(Data{std::move(xs), std::move(ys), std::move(M), extension});
  ScalarFn f;
  f.value = [data](double t) { return data->eval(t, nullptr); };
  f.derivative = [data](double t) {
    double s;
    data->eval(t, &s);
    return s;
  };
  return f;
}

struct Nonlinearity {
  ScalarFn rho;
  ScalarFn r;
  std::vector<double> node_x;  // spline nodes (families 3, 4)
  std::vector<double> node_y;
};

/// rho and r for families 1..4; the spline draws 12 ordinates uniformly in [a, b].
inline Nonlinearity make_nonlinearity(int family, double a, double b, std::uint64_t seed) {
  Nonlinearity nl;
  switch (family) {
    case 1:
      nl.rho = fns::exp();
      nl.r = fns::square();
      return nl;
    case 2:
      nl.rho = fns::rastrigin();
      nl.r = fns::rational_square();
      return nl;
    case 3:
    case 4: {
      std::mt19937_64 rng(derive_seed(seed, 0x5111E));
      std::uniform_real_distribution<double> un(a, b);
      for (int k = 0; k < 12; ++k) {
        nl.node_x.push_back(k == 11 ? b : a + (b - a) * k / 11.0);
        nl.node_y.push_back(un(rng));
      }
      nl.rho = natural_cubic_spline(nl.node_x, nl.node_y);
      nl.r = family == 3 ? fns::neg_sinc() : fns::rastrigin();
      return nl;
    }
    default: throw ConfigurationError("nonlinearity family must be 1..4");
  }
}

/// Matrix for outer families: (a) I + N / sqrt(n); (b) |I + N / sqrt(n)|;
/// (c), (d) U diag(s) V^T with m = n / 3 rows and s uniform in [1 / log n, 1].
inline Mat make_outer_matrix(char family, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0x0A7E));
  std::normal_distribution<double> nd;
  const auto N = static_cast<Eigen::Index>(n);
  const auto gauss = [&](Eigen::Index r, Eigen::Index c) {
    Mat g(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) g(i, j) = nd(rng);
    return g;
  };
  switch (family) {
    case 'a':
    case 'b': {
      Mat a = Mat::Identity(N, N) + gauss(N, N) / std::sqrt(static_cast<double>(n));
      if (family == 'b') a = a.cwiseAbs();
      return a;
    }
    case 'c':
    case 'd': {
      const Eigen::Index m = std::max<Eigen::Index>(1, N / 3);
      const Mat u = Eigen::HouseholderQR<Mat>(gauss(m, m)).householderQ();
      const Mat v = Mat(Eigen::HouseholderQR<Mat>(gauss(N, m)).householderQ()).leftCols(m);
      const double lo = 1.0 / std::log(static_cast<double>(n));
      std::uniform_real_distribution<double> un(lo, 1.0);
      Vec s(m);
      for (auto& x : s) x = un(rng);
      return u * s.asDiagonal() * v.transpose();
    }
    default: throw ConfigurationError("outer family must be a..d");
  }
}

inline SmoothOuter make_outer(char family, Mat a, Vec f) {
  switch (family) {
    case 'a':
    case 'c': return SmoothOuter::least_squares(std::move(a), std::move(f));
    case 'b': return SmoothOuter::kl_divergence(std::move(a), std::move(f));
    case 'd': return SmoothOuter::truncated_quadratic(std::move(a), std::move(f));
    default: throw ConfigurationError("outer family must be a..d");
  }
}

/// min and max of a scalar function over [a, b] on a dense grid.
inline std::pair<double, double> sampled_range(const ScalarFn& f, double a, double b, int samples = 20001) {
  double lo = kInfinity, hi = -kInfinity;
  for (int g = 0; g < samples; ++g) {
    const double v = f(a + (b - a) * g / (samples - 1));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo, hi};
}

struct CaseInstance {
  CaseSpec spec;
  Mat A;
  Vec f;
  Vec u_star;
  Nonlinearity nl;
  CompositeProblem problem;
  Geometry geom = Geometry::quadratic();
  double L = 1.0;
  double E_star = 0.0;
  double rho_shift = 0.0;  // added to rho for the KL family
};

inline CaseInstance make_case(const CaseSpec& spec) {
  spec.validate();
  Nonlinearity nl = make_nonlinearity(spec.inner_family, spec.a, spec.b, spec.seed);
  const std::size_t n = spec.n;
  const auto N = static_cast<Eigen::Index>(n);

  ScalarFn rho = nl.rho;
  double shift = 0.0;
  if (spec.outer_family == 'b') {
    // KL needs rho > 0 on the box: lift the minimum to 0.1
    const double lo = sampled_range(rho, spec.a, spec.b).first;
    if (lo < 0.1) {
      shift = 0.1 - lo;
      rho = fns::offset(rho, shift);
    }
  }

  std::mt19937_64 rng(derive_seed(spec.seed, 0x57A2));
  const Box box = Box::uniform(n, spec.a, spec.b);
  Mat A;
  Vec f, u_star;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 100) throw GenerationError("case " + spec.name() + ": no strictly positive data after 100 draws");
    A = make_outer_matrix(spec.outer_family, n, derive_seed(spec.seed, static_cast<std::uint64_t>(attempt)));
    u_star = box.sample(rng);
    Vec z(N);
    for (Eigen::Index i = 0; i < N; ++i) z[i] = rho(u_star[i]);
    f = A * z;
    if (spec.outer_family != 'b' || (f.array() > 0.0).all()) break;
  }

  std::vector<ScalarFn> r;
  r.reserve(n);
  for (Eigen::Index i = 0; i < N; ++i) r.push_back(fns::shifted(nl.r, u_star[i]));
  CompositeProblem problem{make_outer(spec.outer_family, A, f), SeparableMap::uniform(n, rho),
                           Regularizer::separable(std::move(r)), box};
  Geometry geom = spec.outer_family == 'b' ? Geometry::burg_entropy(sampled_range(rho, spec.a, spec.b).second)
                                           : Geometry::diag_quadratic(diag_dominant_weights(A));
  const double L = smoothness_constant(problem.outer, geom).L;
  const double E_star = static_cast<double>(n) * nl.r(0.0);
  return CaseInstance{spec, std::move(A), std::move(f), std::move(u_star), std::move(nl), std::move(problem),
                      std::move(geom), L, E_star, shift};
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

/// Median energy over uniform box samples minus E_star.
inline double sampled_median_energy(const CompositeProblem& p, double E_star, int samples, std::uint64_t seed) {
  if (samples < 1) throw ConfigurationError("need at least one sample");
  std::mt19937_64 rng(seed);
  std::vector<double> e(static_cast<std::size_t>(samples));
  for (auto& v : e) v = energy(p, p.box.sample(rng));
  const auto mid = e.begin() + samples / 2;
  std::nth_element(e.begin(), mid, e.end());
  double med = *mid;
  if (samples % 2 == 0) med = 0.5 * (med + *std::max_element(e.begin(), mid));
  return med - E_star;
}

inline double sampled_median_energy(const CaseInstance& inst, int samples, std::uint64_t seed) {
  return sampled_median_energy(inst.problem, inst.E_star, samples, seed);
}

inline double normalized_gap(double E_final, double E_star, double scale) {
  if (!(scale > 0.0)) throw DegenerateScaleError("energy scale must be positive");
  if (E_final < E_star - 1e-6 * scale)
    throw IntegrityError("final energy " + format_number(E_final) + " is below the global minimum " + format_number(E_star));
  return (E_final - E_star) / scale;
}

// ---------------------------------------------------------------------------
// Method configuration
// ---------------------------------------------------------------------------

/// Curvature bounds of the composite smooth part over the box, from dense sampling.
struct CurvatureBounds {
  double outer_hessian = 0.0;  // ||Hess G|| on rho(box)
  double outer_gradient = 0.0; // max |dG/dv_i| over sampled iterates
  double rho_slope = 0.0;      // max |rho'|
  double rho_curvature = 0.0;  // max |rho''|
  double r_curvature = 0.0;    // max |r''|
};

inline double max_abs_second_derivative(const ScalarFn& f, double a, double b, int samples = 4001) {
  double m = 0.0;
  const double h = 1e-4 * (b - a);
  for (int g = 0; g < samples; ++g) {
    const double x = a + (b - a) * g / (samples - 1);
    m = std::max(m, std::abs((f.deriv(x + h) - f.deriv(x - h)) / (2 * h)));
  }
  return m;
}

inline CurvatureBounds curvature_bounds(const CaseInstance& inst, std::uint64_t seed, int samples = 200) {
  const auto& s = inst.spec;
  const ScalarFn& rho = inst.problem.separable_inner().fn(0);
  CurvatureBounds cb;
  double rmin = kInfinity;
  for (int g = 0; g <= 4000; ++g) {
    const double x = s.a + (s.b - s.a) * g / 4000;
    cb.rho_slope = std::max(cb.rho_slope, std::abs(rho.deriv(x)));
    rmin = std::min(rmin, rho(x));
  }
  cb.rho_curvature = max_abs_second_derivative(rho, s.a, s.b);
  cb.r_curvature = max_abs_second_derivative(inst.nl.r, s.a - s.b, s.b - s.a);
  const SmoothOuter& G = inst.problem.outer;
  cb.outer_hessian = G.matrix_norm_sq();
  if (G.kind() == OuterKind::kl_divergence) {
    // Hess = A^T diag(f / (Av)^2) A with Av >= rho_min * row sums
    const Vec lo = rmin * inst.A.rowwise().sum();
    cb.outer_hessian *= (inst.f.array() / lo.array().square()).maxCoeff();
  }
  std::mt19937_64 rng(seed);
  for (int t = 0; t < samples; ++t) {
    const Vec g = G.gradient(apply_inner(inst.problem, inst.problem.box.sample(rng)));
    cb.outer_gradient = std::max(cb.outer_gradient, g.cwiseAbs().maxCoeff());
  }
  return cb;
}

/// Step sizes that make each baseline a descent method under the sampled bounds.
inline double baseline_tau(Method m, const CurvatureBounds& cb) {
  const double outer = cb.outer_hessian * cb.rho_slope * cb.rho_slope;
  const double smooth = outer + cb.outer_gradient * cb.rho_curvature;
  switch (m) {
    case Method::gd: return 0.99 / (smooth + cb.r_curvature);
    case Method::fbs:
    case Method::prox_linear: return 0.99 / smooth;
    case Method::outer_linear: return 0.99 / outer;
    default: throw ConfigurationError(std::string("no baseline step for ") + to_string(m));
  }
}

struct BenchBudget {
  int max_iter = 2000;
  double tol_dz = 0.0;
  double beta = 0.4;
  std::vector<double> adam_rates{0.003, 0.01, 0.03, 0.1};
  int adam_pilot_iter = 300;
  SearchConfig search;
};

/// Solver settings for one method on one instance; Adam's rate is picked by a
/// short pilot run from u_pilot (lowest final energy, ties to the smaller rate).
inline SolverConfig method_config(const CaseInstance& inst, Method m, const BenchBudget& budget, const Vec& u_pilot,
                                  const CurvatureBounds& cb) {
  SolverConfig cfg;
  cfg.method = m;
  cfg.max_iter = budget.max_iter;
  cfg.tol_dz = budget.tol_dz;
  cfg.search = budget.search;
  cfg.L = inst.L;
  switch (m) {
    case Method::proposed: cfg.tau = 0.99 / inst.L; break;
    case Method::proposed_inertia:
      cfg.tau = 0.99 / inst.L;
      cfg.beta = budget.beta;
      break;
    case Method::adam: {
      double best = kInfinity;
      for (double lr : budget.adam_rates) {
        SolverConfig pilot = cfg;
        pilot.adam.lr = lr;
        pilot.max_iter = budget.adam_pilot_iter;
        pilot.guard = false;
        const double e = run(inst.problem, inst.geom, pilot, u_pilot).final_energy();
        if (e < best) {
          best = e;
          cfg.adam.lr = lr;
        }
      }
      cfg.guard = false;
      break;
    }
    default: cfg.tau = baseline_tau(m, cb);
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Suite
// ---------------------------------------------------------------------------

struct SuiteConfig {
  std::vector<CaseSpec> cases;
  std::vector<Method> methods;
  int restarts = 5;
  std::uint64_t seed = 0;
  int threads = 1;
  int scale_samples = 100000;
  BenchBudget budget;
  bool keep_traces = false;
};

struct RestartResult {
  std::string case_name;
  Method method = Method::proposed;
  int restart = 0;
  double gap = 0.0;
  double E_final = 0.0;
  int iterations = 0;
  double wall_ms = 0.0;
  Termination termination = Termination::max_iter;
  SolverRun run;  // trace kept when requested
};

struct CellSummary {
  std::string case_name;
  Method method = Method::proposed;
  int restarts = 0;
  double median_gap = 0.0;
  double median_E = 0.0;
  double E_star = 0.0;
  double scale = 0.0;
  double tau = 0.0;
};

struct SuiteResult {
  std::vector<RestartResult> runs;
  std::vector<CellSummary> cells;
  std::vector<std::string> errors;  // integrity failures, one line each

  const CellSummary& cell(const std::string& c, Method m) const {
    for (const auto& x : cells)
      if (x.case_name == c && x.method == m) return x;
    throw ConfigurationError("no result for " + c + " / " + to_string(m));
  }
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// Runs every (case, method, restart); restart r of a case starts from the same
/// point for all methods. Jobs run on cfg.threads workers and are collected in a
/// fixed order, so results do not depend on the thread count.
inline SuiteResult run_suite(const SuiteConfig& cfg) {
  if (cfg.restarts < 1 || cfg.restarts % 2 == 0) throw ConfigurationError("restarts must be odd");
  if (cfg.methods.empty() || cfg.cases.empty()) throw ConfigurationError("suite needs cases and methods");

  struct Prepared {
    explicit Prepared(CaseInstance i) : inst(std::move(i)) {}
    CaseInstance inst;
    double scale = 0.0;
    CurvatureBounds cb;
    std::vector<Vec> starts;
    std::vector<SolverConfig> configs;
  };
  std::vector<Prepared> prep;
  prep.reserve(cfg.cases.size());
  for (std::size_t c = 0; c < cfg.cases.size(); ++c) {
    Prepared& p = prep.emplace_back(make_case(cfg.cases[c]));
    p.scale = sampled_median_energy(p.inst, cfg.scale_samples, derive_seed(p.inst.spec.seed, 0x5CA1E));
    if (!(p.scale > 0.0)) throw DegenerateScaleError("case " + p.inst.spec.name() + ": sampled energy scale is not positive");
    p.cb = curvature_bounds(p.inst, derive_seed(p.inst.spec.seed, 0xC0B));
    for (int r = 0; r < cfg.restarts; ++r) {
      std::mt19937_64 rng(derive_seed(cfg.seed, p.inst.spec.seed, static_cast<std::uint64_t>(r)));
      p.starts.push_back(p.inst.problem.box.sample(rng));
    }
    for (Method m : cfg.methods) p.configs.push_back(method_config(p.inst, m, cfg.budget, p.starts[0], p.cb));
  }

  const std::size_t M = cfg.methods.size(), R = static_cast<std::size_t>(cfg.restarts);
  const std::size_t jobs = prep.size() * M * R;
  std::vector<RestartResult> out(jobs);
  std::vector<std::string> err(jobs);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs;) {
      const std::size_t c = j / (M * R), m = (j / R) % M, r = j % R;
      const Prepared& p = prep[c];
      RestartResult& res = out[j];
      res.case_name = p.inst.spec.name();
      res.method = cfg.methods[m];
      res.restart = static_cast<int>(r);
      try {
        SolverRun run_ = run(p.inst.problem, p.inst.geom, p.configs[m], p.starts[r]);
        res.E_final = run_.final_energy();
        res.iterations = run_.iterations();
        res.termination = run_.termination;
        for (const auto& rec : run_.trace) res.wall_ms += rec.wall_ms;
        if (res.E_final < p.inst.E_star - 1e-6 * (1.0 + std::abs(p.inst.E_star)))
          throw IntegrityError("final energy " + format_number(res.E_final) + " below the global minimum " +
                               format_number(p.inst.E_star));
        res.gap = normalized_gap(res.E_final, p.inst.E_star, p.scale);
        if (cfg.keep_traces) res.run = std::move(run_);
      } catch (const IntegrityError& e) {
        err[j] = res.case_name + " " + to_string(res.method) + " restart " + std::to_string(r) + ": " + e.what();
        res.gap = std::nan("");
      }
    }
  };
  const int nt = std::max(1, std::min<int>(cfg.threads, static_cast<int>(jobs)));
  std::vector<std::thread> pool;
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  SuiteResult sr;
  sr.runs = std::move(out);
  for (auto& e : err)
    if (!e.empty()) sr.errors.push_back(e);
  for (std::size_t c = 0; c < prep.size(); ++c)
    for (std::size_t m = 0; m < M; ++m) {
      std::vector<double> gaps, es;
      bool bad = false;
      for (std::size_t r = 0; r < R; ++r) {
        const auto& x = sr.runs[(c * M + m) * R + r];
        bad = bad || std::isnan(x.gap);
        gaps.push_back(x.gap);
        es.push_back(x.E_final);
      }
      CellSummary cell;
      cell.case_name = prep[c].inst.spec.name();
      cell.method = cfg.methods[m];
      cell.restarts = cfg.restarts;
      cell.median_gap = bad ? std::nan("") : median_of(gaps);
      cell.median_E = median_of(es);
      cell.E_star = prep[c].inst.E_star;
      cell.scale = prep[c].scale;
      cell.tau = prep[c].configs[m].method == Method::adam ? prep[c].configs[m].adam.lr : prep[c].configs[m].tau;
      sr.cells.push_back(cell);
    }
  return sr;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline void write_runs_csv(std::ostream& os, const SuiteResult& r) {
  os << "case,method,restart,gap,E_final,iters,wall_ms\r\n";
  for (const auto& x : r.runs)
    os << x.case_name << ',' << to_string(x.method) << ',' << x.restart << ',' << format_number(x.gap) << ','
       << format_number(x.E_final) << ',' << x.iterations << ',' << format_number(x.wall_ms) << "\r\n";
}

/// Medians only; no timings, so the file is reproducible byte for byte.
/// gap = (E - E_star) / scale with scale = sampled median energy - E_star.
inline void write_summary_csv(std::ostream& os, const SuiteResult& r) {
  os << "case,method,restarts,median_gap,median_E,E_star,scale,step\r\n";
  for (const auto& c : r.cells)
    os << c.case_name << ',' << to_string(c.method) << ',' << c.restarts << ',' << format_number(c.median_gap) << ','
       << format_number(c.median_E) << ',' << format_number(c.E_star) << ',' << format_number(c.scale) << ','
       << format_number(c.tau) << "\r\n";
}

/// One 4 x 4 grid per method (rows: nonlinearity family, columns: outer family),
/// colour on a log scale of the median gap.
inline void write_heatmap_svg(std::ostream& os, const SuiteResult& r, const std::vector<Method>& methods) {
  const int cell = 56, pad = 30, title = 24;
  const int grid = 4 * cell + pad;
  const int width = static_cast<int>(methods.size()) * (grid + pad) + pad;
  const int height = grid + title + pad;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  const auto colour = [](double g) {
    if (std::isnan(g)) return std::string("#999999");
    const double t = std::clamp((std::log10(std::max(g, 1e-6)) + 6.0) / 6.0, 0.0, 1.0);
    const int red = static_cast<int>(255 * t), blue = static_cast<int>(255 * (1 - t));
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x40%02x", red, blue);
    return std::string(buf);
  };
  for (std::size_t k = 0; k < methods.size(); ++k) {
    const int x0 = pad + static_cast<int>(k) * (grid + pad);
    os << "<text x=\"" << x0 + pad << "\" y=\"16\">" << to_string(methods[k]) << "</text>\n";
    for (int row = 0; row < 4; ++row) {
      os << "<text x=\"" << x0 << "\" y=\"" << title + pad + row * cell + cell / 2 << "\">" << row + 1 << "</text>\n";
      for (int col = 0; col < 4; ++col) {
        const std::string name = std::to_string(row + 1) + static_cast<char>('a' + col);
        if (row == 0)
          os << "<text x=\"" << x0 + pad + col * cell + cell / 2 << "\" y=\"" << title + pad - 6 << "\">"
             << static_cast<char>('a' + col) << "</text>\n";
        const int x = x0 + pad + col * cell, y = title + pad + row * cell;
        double g = std::nan("");
        bool present = false;
        for (const auto& c : r.cells)
          if (c.case_name == name && c.method == methods[k]) g = c.median_gap, present = true;
        if (!present) continue;
        os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell - 2 << "\" height=\"" << cell - 2
           << "\" fill=\"" << colour(g) << "\"/>\n";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", g);
        os << "<text x=\"" << x + 4 << "\" y=\"" << y + cell / 2 << "\" fill=\"white\">" << buf << "</text>\n";
      }
    }
  }
  os << "</svg>\n";
}

}  // namespace compmm
