#pragma once

#include <random>
#include <string>
#include <vector>

#include "compmm/bench.hpp"
#include "compmm/lifting.hpp"

namespace compmm {

struct CheckResult {
  std::string name;
  bool pass = true;
  std::string detail;
};

namespace detail {

inline Vec uniform_vec(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> un(lo, hi);
  Vec v(n);
  for (auto& x : v) x = un(rng);
  return v;
}

}  // namespace detail

/// E_{u^k}(u) >= E(u) on random (anchor, probe) pairs and E_{u^k}(u^k) = E(u^k).
inline CheckResult check_majorization(const std::vector<CaseInstance>& cases, double tau_factor, int pairs,
                                      std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0x3A1));
  long bad = 0, total = 0;
  double worst = 0.0;
  for (const auto& inst : cases) {
    const double tau = tau_factor / inst.L;
    for (int t = 0; t < pairs; ++t, total += 2) {
      const Vec uk = inst.problem.box.sample(rng), u = inst.problem.box.sample(rng);
      const Linearization lin = linearize(inst.problem, inst.geom, uk);
      const double E = energy(inst.problem, u), Ek = energy(inst.problem, uk);
      const double below = E - majorizer_value(inst.problem, inst.geom, tau, lin, u);
      worst = std::max(worst, below / (1 + std::abs(E)));
      if (below > 1e-9 * (1 + std::abs(E))) ++bad;
      if (std::abs(majorizer_value(inst.problem, inst.geom, tau, lin, uk) - Ek) > 1e-12 * (1 + std::abs(Ek))) ++bad;
    }
  }
  return {"majorization", bad == 0,
          std::to_string(bad) + " violations in " + std::to_string(total) + " checks, worst relative undershoot " +
              format_number(worst)};
}

/// E_{k+1} <= E_k - alpha D_h(z^{k+1}, z^k) with alpha = (1 - tau L) / tau > 0, on accepted steps.
inline CheckResult check_descent(const std::vector<const SolverRun*>& runs, double slack = 1e-9) {
  long bad = 0, steps = 0, unsafe = 0;
  for (const SolverRun* r : runs) {
    const double alpha = r->alpha();
    if (!(alpha > 0.0)) ++unsafe;
    for (std::size_t k = 1; k < r->trace.size(); ++k) {
      if (!r->trace[k].accepted) continue;
      ++steps;
      const double prev = r->trace[k - 1].E;
      if (r->trace[k].E > prev - alpha * r->trace[k].dz + slack * (1 + std::abs(prev))) ++bad;
    }
  }
  std::string d = std::to_string(bad) + " violations in " + std::to_string(steps) + " steps";
  if (unsafe) d += ", " + std::to_string(unsafe) + " runs with tau >= 1/L (no guaranteed decrease)";
  return {"descent", bad == 0 && unsafe == 0, d};
}

/// min_{k<=N} D_h(z^{k+1}, z^k) <= (E(u^1) - min E) / (alpha N) for every N, without tolerance.
inline CheckResult check_rate(const std::vector<const SolverRun*>& runs) {
  long bad = 0, checked = 0, unsafe = 0;
  for (const SolverRun* r : runs) {
    const double alpha = r->alpha();
    if (!(alpha > 0.0)) {
      ++unsafe;
      continue;
    }
    double lowest = kInfinity;
    for (const auto& x : r->trace) lowest = std::min(lowest, x.E);
    double best = kInfinity;
    for (std::size_t N = 1; N < r->trace.size(); ++N, ++checked) {
      best = std::min(best, r->trace[N].dz);
      if (best > (r->trace[0].E - lowest) / (alpha * static_cast<double>(N))) ++bad;
    }
  }
  std::string d = std::to_string(bad) + " violations in " + std::to_string(checked) + " prefixes";
  if (unsafe) d += ", " + std::to_string(unsafe) + " runs with tau >= 1/L (bound undefined)";
  return {"rate", bad == 0 && unsafe == 0, d};
}

/// Worst sampled D_G / D_h must stay below L (1 + 1e-8); D_h is nonnegative and vanishes on the diagonal.
inline CheckResult check_relative_smoothness(const std::vector<CaseInstance>& cases, int pairs, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0xB5E));
  long bad = 0;
  std::string d;
  for (const auto& inst : cases) {
    const auto m = static_cast<Eigen::Index>(inst.problem.outer.input_size());
    const bool pos = inst.geom.domain() == Domain::positive_orthant;
    for (int t = 0; t < 20; ++t) {
      const Vec x = detail::uniform_vec(rng, m, pos ? 0.01 : -1.0, pos ? 3.0 : 1.0);
      const Vec y = detail::uniform_vec(rng, m, pos ? 0.01 : -1.0, pos ? 3.0 : 1.0);
      if (inst.geom.bregman(x, y) < 0.0 || inst.geom.bregman(x, x) != 0.0) ++bad;
    }
    const double ratio =
        relative_smoothness_spotcheck(inst.problem.outer, inst.geom, inst.L, pairs, derive_seed(seed, inst.spec.seed));
    if (ratio > inst.L * (1 + 1e-8)) ++bad;
    d += (d.empty() ? "" : ", ") + inst.spec.name() + " " + format_number(ratio / inst.L);
  }
  return {"bregman", bad == 0, "D_G / (L D_h): " + d};
}

inline LabelGrid random_label_grid(std::mt19937_64& rng, std::size_t h, std::size_t w, std::size_t labels,
                                   double weight_max) {
  std::uniform_real_distribution<double> un(0, 1);
  LabelGrid g;
  g.height = h;
  g.width = w;
  g.labels = labels;
  g.a = -1;
  g.b = 1;
  g.unary.resize(h * w * labels);
  for (auto& v : g.unary) v = 3 * un(rng);
  g.wx = Vec(static_cast<Eigen::Index>(h * w));
  g.wy = g.wx;
  for (Eigen::Index i = 0; i < g.wx.size(); ++i) {
    g.wx[i] = weight_max * un(rng);
    g.wy[i] = weight_max * un(rng);
  }
  return g;
}

inline double enumerate_optimum(const LabelGrid& g) {
  const std::size_t n = g.pixels();
  std::vector<int> l(n, 0);
  double best = kInfinity;
  while (true) {
    best = std::min(best, discrete_energy(g, l));
    std::size_t i = 0;
    while (i < n && ++l[i] == static_cast<int>(g.labels)) l[i++] = 0;
    if (i == n) break;
  }
  return best;
}

/// solve_lifted against exhaustive enumeration on small random grids.
inline CheckResult check_lifting_oracle(int grids, std::size_t labels, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0x11F7));
  double worst = 0.0;
  for (int t = 0; t < grids; ++t) {
    const LabelGrid g = random_label_grid(rng, 2, 2, labels, 3.0);
    worst = std::max(worst, std::abs(solve_lifted(g).primal_energy - enumerate_optimum(g)));
  }
  return {"lifting-oracle", worst <= 1e-6, "worst |lifted - enumeration| " + format_number(worst)};
}

/// rho = identity with quadratic h: proposed, FBS and outer-linear share every iterate.
inline CheckResult check_reduction_identity(int steps, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0x1D));
  const int n = 8;
  std::normal_distribution<double> nd;
  Mat a(n, n);
  for (auto& x : a.reshaped()) x = nd(rng) / std::sqrt(n);
  a += Mat::Identity(n, n);
  const CompositeProblem p{SmoothOuter::least_squares(a, detail::uniform_vec(rng, n, -1, 1)), SeparableMap::identity(n),
                           Regularizer::none(), Box::uniform(n, -2, 2)};
  const double L = smoothness_constant(p.outer, Geometry::quadratic()).L;
  const double tau = 0.99 / L;
  const auto geom = Geometry::quadratic();
  Vec u = p.box.sample(rng);
  double worst = 0.0;
  for (int k = 0; k < steps; ++k) {
    const Vec a1 = mm_step(p, geom, tau, u);
    const Vec a2 = fbs_step(p, geom, tau, u);
    const Vec a3 = outer_linear_step(p, tau, u);
    worst = std::max({worst, (a1 - a2).lpNorm<Eigen::Infinity>(), (a1 - a3).lpNorm<Eigen::Infinity>()});
    u = a1;
  }
  return {"reduction-identity", worst <= 1e-12,
          "proposed / fbs / outer-linear max per-step difference " + format_number(worst)};
}

/// Quadratic G with diagonal geometry D = diag(A), tau = 1 and rho = identity: the step is a Jacobi sweep.
inline CheckResult check_reduction_jacobi(int n, int steps, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0x7AC0B1));
  std::uniform_real_distribution<double> un(-1, 1);
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = i == j ? 0.0 : un(rng);
  a = 0.5 * (a + a.transpose()).eval();
  for (int i = 0; i < n; ++i) a(i, i) = a.row(i).cwiseAbs().sum() + 1.0;
  Vec f(n);
  for (auto& x : f) x = 5 * un(rng);
  auto g = SmoothOuter::custom(
      static_cast<std::size_t>(n), [a, f](const Vec& v) { return 0.5 * v.dot(a * v) - f.dot(v); },
      [a, f](const Vec& v) { return Vec(a * v - f); });
  const CompositeProblem p{g, SeparableMap::identity(static_cast<std::size_t>(n)), Regularizer::none(),
                           Box::uniform(static_cast<std::size_t>(n), -10, 10)};
  const auto geom = Geometry::diag_quadratic(a.diagonal());
  Vec u = Vec::Zero(n);
  double worst = 0.0;
  for (int k = 0; k < steps; ++k) {
    const Vec next = mm_step(p, geom, 1.0, u);
    Vec jac(n);
    for (int i = 0; i < n; ++i) jac[i] = (f[i] - (a.row(i).dot(u) - a(i, i) * u[i])) / a(i, i);
    worst = std::max(worst, (next - jac).lpNorm<Eigen::Infinity>());
    u = next;
  }
  return {"reduction-jacobi", worst <= 1e-12, "max per-step difference from the Jacobi sweep " + format_number(worst)};
}

}  // namespace compmm
