#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "compmm/majorizer.hpp"

namespace compmm {

/// Discrete labeling energy on an H x W grid:
///   sum_i unary(i, l_i) + sum_i wx_i |lambda(l_{i+right}) - lambda(l_i)| + wy_i |lambda(l_{i+down}) - lambda(l_i)|
/// with ell uniformly spaced labels on [a, b].
struct LabelGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t labels = 0;
  double a = 0.0;
  double b = 1.0;
  std::vector<double> unary;  // unary[i * labels + k]
  Vec wx;                     // weight of the edge to the right neighbour
  Vec wy;                     // weight of the edge to the lower neighbour

  std::size_t pixels() const { return height * width; }
  double spacing() const { return (b - a) / static_cast<double>(labels - 1); }
  double label(std::size_t k) const {
    return k + 1 == labels ? b : a + (b - a) * static_cast<double>(k) / static_cast<double>(labels - 1);
  }
  double cost(std::size_t i, std::size_t k) const { return unary[i * labels + k]; }

  void validate() const {
    if (labels < 2) throw ConfigurationError("label grid needs at least two labels");
    if (!(a < b)) throw ConfigurationError("label grid: empty label range");
    if (unary.size() != pixels() * labels) throw StructuralError("label grid: unary table has the wrong size");
    if (static_cast<std::size_t>(wx.size()) != pixels() || static_cast<std::size_t>(wy.size()) != pixels())
      throw StructuralError("label grid: weight arrays have the wrong size");
    for (double v : unary)
      if (!std::isfinite(v)) throw NumericalError("label grid: non-finite unary cost", -1);
    if ((wx.array() < 0.0).any() || (wy.array() < 0.0).any()) throw ConfigurationError("label grid: negative weight");
  }
};

inline double discrete_energy(const LabelGrid& grid, const std::vector<int>& l) {
  double e = 0.0;
  for (std::size_t i = 0; i < grid.pixels(); ++i) e += grid.cost(i, static_cast<std::size_t>(l[i]));
  const double dl = grid.spacing();
  for (std::size_t r = 0; r < grid.height; ++r)
    for (std::size_t c = 0; c < grid.width; ++c) {
      const std::size_t i = r * grid.width + c;
      if (c + 1 < grid.width) e += grid.wx[i] * dl * std::abs(l[i + 1] - l[i]);
      if (r + 1 < grid.height) e += grid.wy[i] * dl * std::abs(l[i + grid.width] - l[i]);
    }
  return e;
}

struct PdhgConfig {
  int max_iter = 5000;
  int check_every = 50;
  /// Stop when (best discrete energy - dual bound) <= tol * (1 + |dual bound|).
  double tol = 1e-9;
};

/// Relaxed layer-cake field phi[i * K + k] ~ [l_i > k] (K = labels - 1) and the TV duals.
struct PdhgState {
  std::vector<double> phi;
  std::vector<double> px;
  std::vector<double> py;
  int iterations = 0;

  bool fits(const LabelGrid& g) const { return phi.size() == g.pixels() * (g.labels - 1); }
};

struct LiftedSolution {
  std::vector<int> labels;
  Vec u;               // label values
  Vec u_interpolated;  // sub-label crossing of the 0.5 level
  double primal_energy = kInfinity;
  double dual_bound = -kInfinity;
  double gap = kInfinity;
  int iterations = 0;
  bool warning = false;
};

namespace detail {

/// Euclidean projection onto {1 >= y_0 >= y_1 >= ... >= 0}: pool adjacent violators, then clip.
inline void project_monotone(double* y, std::size_t n, std::vector<double>& sums, std::vector<std::size_t>& counts) {
  sums.clear();
  counts.clear();
  for (std::size_t k = 0; k < n; ++k) {
    sums.push_back(y[k]);
    counts.push_back(1);
    while (sums.size() > 1) {
      const std::size_t m = sums.size();
      if (sums[m - 2] * static_cast<double>(counts[m - 1]) >= sums[m - 1] * static_cast<double>(counts[m - 2])) break;
      sums[m - 2] += sums[m - 1];
      counts[m - 2] += counts[m - 1];
      sums.pop_back();
      counts.pop_back();
    }
  }
  std::size_t k = 0;
  for (std::size_t b = 0; b < sums.size(); ++b) {
    const double v = std::clamp(sums[b] / static_cast<double>(counts[b]), 0.0, 1.0);
    for (std::size_t j = 0; j < counts[b]; ++j) y[k++] = v;
  }
}

}  // namespace detail

inline void project_monotone(std::vector<double>& y) {
  std::vector<double> s;
  std::vector<std::size_t> c;
  detail::project_monotone(y.data(), y.size(), s, c);
}

/// Solves the lifted relaxation of a LabelGrid by diagonally preconditioned PDHG and
/// thresholds the relaxed field. Passing a state warm-starts and updates it.
inline LiftedSolution solve_lifted(const LabelGrid& grid, const PdhgConfig& cfg = {}, PdhgState* state = nullptr) {
  grid.validate();
  const std::size_t n = grid.pixels();
  const std::size_t L = grid.labels;
  const std::size_t K = L - 1;
  const std::size_t W = grid.width;
  const std::size_t H = grid.height;
  const double dl = grid.spacing();

  PdhgState local;
  PdhgState& st = state ? *state : local;
  if (!st.fits(grid)) {
    st.phi.assign(n * K, 0.0);
    st.px.assign(n * K, 0.0);
    st.py.assign(n * K, 0.0);
    st.iterations = 0;
    // start from the per-pixel unary argmin
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < L; ++k)
        if (grid.cost(i, k) < grid.cost(i, best)) best = k;
      for (std::size_t k = 0; k < best; ++k) st.phi[i * K + k] = 1.0;
    }
  }

  // level costs c'_{i,k} = unary(i, k+1) - unary(i, k); base = sum_i unary(i, 0)
  std::vector<double> lc(n * K);
  double base = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    base += grid.cost(i, 0);
    for (std::size_t k = 0; k < K; ++k) lc[i * K + k] = grid.cost(i, k + 1) - grid.cost(i, k);
  }
  std::vector<double> bx(n), by(n), tau(n);
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      const std::size_t i = r * W + c;
      bx[i] = c + 1 < W ? dl * grid.wx[i] : 0.0;
      by[i] = r + 1 < H ? dl * grid.wy[i] : 0.0;
      int rows = 0;
      if (c + 1 < W) ++rows;
      if (c > 0) ++rows;
      if (r + 1 < H) ++rows;
      if (r > 0) ++rows;
      tau[i] = rows > 0 ? 1.0 / rows : 1.0;
    }
  const double sigma = 0.5;

  // D^T p at pixel i, level k (negative divergence)
  const auto dtp = [&](std::size_t i, std::size_t k) {
    const std::size_t r = i / W, c = i % W;
    double v = 0.0;
    const std::size_t j = i * K + k;
    if (c + 1 < W) v -= st.px[j];
    if (c > 0) v += st.px[j - K];
    if (r + 1 < H) v -= st.py[j];
    if (r > 0) v += st.py[j - W * K];
    return v;
  };

  LiftedSolution best;
  std::vector<int> lab(n);
  const auto threshold = [&](double s) {
    for (std::size_t i = 0; i < n; ++i) {
      int l = 0;
      while (static_cast<std::size_t>(l) < K && st.phi[i * K + static_cast<std::size_t>(l)] >= s) ++l;
      lab[i] = l;
    }
    return discrete_energy(grid, lab);
  };
  const auto interpolate = [&]() {
    Vec u(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const double* f = &st.phi[i * K];
      std::size_t l = 0;
      while (l < K && f[l] >= 0.5) ++l;
      const double above = l == 0 ? 1.0 : f[l - 1];
      const double below = l == K ? 0.0 : f[l];
      const double t = above > below ? (above - 0.5) / (above - below) : 0.5;
      u[static_cast<Eigen::Index>(i)] = std::clamp(grid.a + dl * (static_cast<double>(l) + t - 0.5), grid.a, grid.b);
    }
    return u;
  };
  const auto dual_value = [&]() {
    double d = base;
    for (std::size_t i = 0; i < n; ++i) {
      double run = 0.0, m = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        run += lc[i * K + k] + dtp(i, k);
        m = std::min(m, run);
      }
      d += m;
    }
    return d;
  };
  const auto checkpoint = [&](int it) {
    for (double s : {0.5, 0.25, 0.75, 0.1, 0.9}) {
      const double e = threshold(s);
      if (e < best.primal_energy || (s == 0.5 && e == best.primal_energy)) {
        best.primal_energy = e;
        best.labels = lab;
        if (s == 0.5) best.u_interpolated = interpolate();
        else best.u_interpolated = Vec();
      }
    }
    best.dual_bound = std::max(best.dual_bound, dual_value());
    best.gap = best.primal_energy - best.dual_bound;
    best.iterations = it;
    return best.gap <= cfg.tol * (1.0 + std::abs(best.dual_bound));
  };

  std::vector<double> phi_old(n * K), s_buf;
  std::vector<std::size_t> c_buf;
  bool done = checkpoint(0);
  int it = 0;
  while (!done && it < cfg.max_iter) {
    ++it;
    phi_old = st.phi;
    for (std::size_t i = 0; i < n; ++i) {
      double* f = &st.phi[i * K];
      for (std::size_t k = 0; k < K; ++k) f[k] -= tau[i] * (dtp(i, k) + lc[i * K + k]);
      detail::project_monotone(f, K, s_buf, c_buf);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r = i / W, c = i % W;
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t j = i * K + k;
        const double here = 2.0 * st.phi[j] - phi_old[j];
        if (c + 1 < W) {
          const double nb = 2.0 * st.phi[j + K] - phi_old[j + K];
          st.px[j] = std::clamp(st.px[j] + sigma * (nb - here), -bx[i], bx[i]);
        }
        if (r + 1 < H) {
          const double nb = 2.0 * st.phi[j + W * K] - phi_old[j + W * K];
          st.py[j] = std::clamp(st.py[j] + sigma * (nb - here), -by[i], by[i]);
        }
      }
    }
    if (it % cfg.check_every == 0 || it == cfg.max_iter) done = checkpoint(it);
  }
  st.iterations += it;
  best.iterations = it;
  best.warning = !done;
  best.u = Vec(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) best.u[static_cast<Eigen::Index>(i)] = grid.label(static_cast<std::size_t>(best.labels[i]));
  if (best.u_interpolated.size() == 0) best.u_interpolated = best.u;
  return best;
}

// ---------------------------------------------------------------------------
// Majorizer subproblems with a TV regularizer
// ---------------------------------------------------------------------------

struct LiftingConfig {
  std::size_t labels = 64;
  PdhgConfig pd;
  bool interpolate = true;  // also try the sub-label interpolated image
  int polish_sweeps = 0;    // coordinate sweeps on the continuous majorizer after lifting
};

/// Unary costs (1/tau) D_h(rho_i(label), rho_i(u_k,i)) + <grad G, rho_i(label)> per pixel,
/// plus TV weights (alpha, or reweighted for the concave penalty) of the majorizer around u_k.
inline LabelGrid build_lifted_majorizer(const CompositeProblem& p, const Geometry& geom, double tau,
                                        const Linearization& lin, std::size_t labels) {
  if (!p.reg.is_tv()) throw ConfigurationError("lifting requires a TV regularizer");
  const TvRegularizer& tv = p.reg.tv_params();
  if (tv.norm != TvNorm::anisotropic) throw ConfigurationError("lifting supports the anisotropic TV norm only");
  const SeparableMap& map = p.separable_inner();
  const std::size_t n = p.size();
  if (tv.height * tv.width != n) throw StructuralError("TV grid does not match the problem size");
  if (!((p.box.lower.array() == p.box.lower[0]).all() && (p.box.upper.array() == p.box.upper[0]).all()))
    throw ConfigurationError("lifting needs the same interval for every pixel");

  LabelGrid grid;
  grid.height = tv.height;
  grid.width = tv.width;
  grid.labels = labels;
  grid.a = p.box.lower[0];
  grid.b = p.box.upper[0];
  if (labels < 2) throw ConfigurationError("lifting needs at least two labels");
  grid.unary.resize(n * labels);
  const std::size_t C = map.channels();
  const double w = 1.0 / tau;
  std::vector<double> centers(C), coef(C);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      centers[c] = lin.z[static_cast<Eigen::Index>(c * n + i)];
      coef[c] = lin.g[static_cast<Eigen::Index>(c * n + i)];
    }
    CoordObjective phi;
    phi.i = i;
    phi.channels = C;
    phi.map = &map;
    phi.geom = &geom;
    phi.geom_stride = n;
    phi.terms[0] = {w, centers.data()};
    phi.coef = coef.data();
    for (std::size_t k = 0; k < labels; ++k) {
      const double v = phi(grid.label(k));
      if (!std::isfinite(v)) throw DomainError("majorizer is not finite at a label");
      grid.unary[i * labels + k] = v;
    }
  }
  p.reg.tv_weights(lin.u, grid.wx, grid.wy);
  return grid;
}

inline LabelGrid build_lifted_majorizer(const CompositeProblem& p, const Geometry& geom, double tau, const Vec& u_k,
                                        std::size_t labels) {
  return build_lifted_majorizer(p, geom, tau, linearize(p, geom, u_k), labels);
}

/// Coordinate descent on the continuous majorizer: each pixel moves to the best point of
/// [u_i - radius, u_i + radius] for its unary plus the TV edges to its current neighbours.
/// Raster order, strict decreases only, so the majorizer never increases.
inline Vec polish_lifted(const CompositeProblem& p, const Geometry& geom, double tau, const Linearization& lin,
                         const LabelGrid& grid, Vec u, int sweeps, double radius) {
  const SeparableMap& map = p.separable_inner();
  const std::size_t n = p.size(), C = map.channels(), W = grid.width, H = grid.height;
  const double w = 1.0 / tau;
  std::vector<double> centers(C), coef(C);
  for (int s = 0; s < sweeps; ++s) {
    bool moved = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < C; ++c) {
        centers[c] = lin.z[static_cast<Eigen::Index>(c * n + i)];
        coef[c] = lin.g[static_cast<Eigen::Index>(c * n + i)];
      }
      CoordObjective phi;
      phi.i = i;
      phi.channels = C;
      phi.map = &map;
      phi.geom = &geom;
      phi.geom_stride = n;
      phi.terms[0] = {w, centers.data()};
      phi.coef = coef.data();
      const std::size_t r = i / W, c = i % W;
      const auto local = [&](double t) {
        double v = phi(t);
        if (c + 1 < W) v += grid.wx[i] * std::abs(u[i + 1] - t);
        if (c > 0) v += grid.wx[i - 1] * std::abs(t - u[i - 1]);
        if (r + 1 < H) v += grid.wy[i] * std::abs(u[i + W] - t);
        if (r > 0) v += grid.wy[i - W] * std::abs(t - u[i - W]);
        return v;
      };
      const double lo = std::max(grid.a, u[i] - radius), hi = std::min(grid.b, u[i] + radius);
      if (!(lo < hi)) continue;
      const Minimum1d m = minimize_1d(local, lo, hi, 17, 8, 1e-12);
      if (m.f < local(u[i])) {
        u[i] = m.x;
        moved = true;
      }
    }
    if (!moved) break;
  }
  return u;
}

struct LiftedStep {
  Vec u_next;
  double majorizer = kInfinity;  // continuous majorizer at u_next
  double energy_k = kInfinity;   // E(u_k)
  bool guard_ok = false;
  bool warning = false;
  double gap = kInfinity;
};

/// One MM step whose majorizer is minimized by lifting. The lower of the label and
/// interpolated candidates (measured on the continuous majorizer) is returned; guard_ok
/// reports E_{u_k}(u_next) <= E(u_k) within the relative slack.
inline LiftedStep mm_step_lifted(const CompositeProblem& p, const Geometry& geom, double tau, const Vec& u_k,
                                 const LiftingConfig& cfg, PdhgState* state = nullptr, double slack = 1e-9) {
  const Linearization lin = linearize(p, geom, u_k);
  const LabelGrid grid = build_lifted_majorizer(p, geom, tau, lin, cfg.labels);
  const LiftedSolution sol = solve_lifted(grid, cfg.pd, state);
  LiftedStep step;
  step.energy_k = lin.G + p.reg.evaluate(u_k);
  step.u_next = sol.u;
  step.majorizer = majorizer_value(p, geom, tau, lin, sol.u);
  if (cfg.interpolate) {
    const double mi = majorizer_value(p, geom, tau, lin, sol.u_interpolated);
    if (mi < step.majorizer) {
      step.majorizer = mi;
      step.u_next = sol.u_interpolated;
    }
  }
  if (cfg.polish_sweeps > 0) {
    // polish the lifted image and the anchor; keep whichever lowers the majorizer most
    const Vec lifted = step.u_next;
    for (const Vec* start : {&lifted, &u_k}) {
      const Vec polished = polish_lifted(p, geom, tau, lin, grid, *start, cfg.polish_sweeps, grid.spacing());
      const double mp = majorizer_value(p, geom, tau, lin, polished);
      if (mp < step.majorizer) {
        step.majorizer = mp;
        step.u_next = polished;
      }
    }
  }
  step.warning = sol.warning;
  step.gap = sol.gap;
  step.guard_ok = step.majorizer <= step.energy_k + slack * (1.0 + std::abs(step.energy_k));
  return step;
}

}  // namespace compmm
