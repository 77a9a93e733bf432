#pragma once

#include <charconv>
#include <chrono>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "compmm/lifting.hpp"
#include "compmm/majorizer.hpp"

namespace compmm {

enum class Method { proposed, proposed_inertia, gd, fbs, prox_linear, outer_linear, adam };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::proposed: return "proposed";
    case Method::proposed_inertia: return "proposed-inertia";
    case Method::gd: return "gd";
    case Method::fbs: return "fbs";
    case Method::prox_linear: return "prox-linear";
    case Method::outer_linear: return "outer-linear";
    case Method::adam: return "adam";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view s) {
  for (Method m : {Method::proposed, Method::proposed_inertia, Method::gd, Method::fbs, Method::prox_linear,
                   Method::outer_linear, Method::adam})
    if (s == to_string(m)) return m;
  return std::nullopt;
}

inline bool is_mm(Method m) { return m == Method::proposed || m == Method::proposed_inertia; }

struct InnerConfig {
  int max_iter = 500;
  double tol = 1e-8;
};

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct SolverConfig {
  Method method = Method::proposed;
  double tau = 0.99;
  double beta = 0.0;
  int max_iter = 1000;
  double tol_dz = 0.0;
  bool guard = true;
  std::uint64_t seed = 0;
  int threads = 1;
  SearchConfig search;
  InnerConfig inner;
  AdamConfig adam;
  LiftingConfig lifting;
  Geometry u_geometry = Geometry::quadratic();  // proximity in u for fbs
  std::optional<double> L;                       // overrides smoothness_constant()
  bool allow_unsafe_step = false;                // debug: skip the tau < 1/L check
  double slack = 1e-9;

  /// tau = 0.99 / L for the MM methods.
  static SolverConfig make(Method m, double L, double beta = 0.0) {
    SolverConfig c;
    c.method = m;
    c.L = L;
    c.tau = 0.99 / L;
    c.beta = beta;
    c.validate(L);
    return c;
  }

  void validate(double L, bool linear_geometry = false) const {
    if (!(tau > 0.0)) throw ConfigurationError("tau must be positive");
    if (!(beta >= 0.0 && beta < 0.5)) throw ConfigurationError("beta must lie in [0, 0.5)");
    if (max_iter < 0) throw ConfigurationError("max_iter must be nonnegative");
    if (tol_dz < 0.0) throw ConfigurationError("tol_dz must be nonnegative");
    if (is_mm(method) && !linear_geometry && !allow_unsafe_step && !(tau * L < 1.0))
      throw ConfigurationError("tau must satisfy tau < 1/L");
    if (method == Method::proposed && beta != 0.0) throw ConfigurationError("beta requires the inertial method");
  }
};

struct IterationRecord {
  int k = 0;
  double E = 0.0;
  double dz = 0.0;
  bool accepted = true;
  double wall_ms = 0.0;
  bool inner_warning = false;
};

enum class Termination { tol, max_iter, guard_violation, fixed_point };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::tol: return "tol";
    case Termination::max_iter: return "max-iter";
    case Termination::guard_violation: return "guard-violation";
    case Termination::fixed_point: return "fixed-point";
  }
  return "?";
}

struct SolverRun {
  SolverConfig config;
  double L = 1.0;
  Vec u_final;
  std::vector<IterationRecord> trace;
  Termination termination = Termination::max_iter;
  std::string message;

  double alpha() const { return (1.0 - config.tau * L) / config.tau; }
  double final_energy() const { return trace.empty() ? kInfinity : trace.back().E; }
  int iterations() const { return trace.empty() ? 0 : trace.back().k; }
};

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

/// grad (G o rho)(u) = J_rho(u)^T grad G(rho(u)).
inline Vec composite_gradient(const CompositeProblem& p, const Vec& u) {
  const SeparableMap& map = p.separable_inner();
  return map.pullback(u, p.outer.gradient(map.apply(u)));
}

/// grad E(u); needs smooth separable r_i.
inline Vec energy_gradient(const CompositeProblem& p, const Vec& u) {
  if (p.reg.is_tv()) throw ConfigurationError("gradient methods need a separable regularizer");
  Vec g = composite_gradient(p, u);
  if (!p.reg.is_zero()) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      const ScalarFn& r = p.reg.terms()[i];
      if (!r.smooth) throw ConfigurationError("gradient methods need a differentiable regularizer");
      g[static_cast<Eigen::Index>(i)] += r.deriv(u[static_cast<Eigen::Index>(i)]);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Separable steps
// ---------------------------------------------------------------------------

namespace detail {

struct SeparableStepSpec {
  const Geometry* geom = nullptr;
  bool prox_in_image = true;
  bool linear_in_image = true;
  double w0 = 0.0;
  const Vec* center0 = nullptr;
  double w1 = 0.0;
  const Vec* center1 = nullptr;  // optional second proximity term
  double w_merged = 0.0;         // weight used where both centers coincide
  const Vec* coef = nullptr;
};

inline Vec separable_step(const CompositeProblem& p, const StepCache& cache, const SeparableStepSpec& s, const Vec& u_k,
                          int threads) {
  const SeparableMap& map = p.separable_inner();
  const std::size_t n = p.size();
  const std::size_t C = map.channels();
  Vec u_next(u_k.size());
  parallel_for(n, threads, [&](std::size_t i) {
    thread_local std::vector<double> buffer, c0, c1, coef;
    const std::size_t pc = s.prox_in_image ? C : 1;
    const std::size_t lc = s.linear_in_image ? C : 1;
    c0.resize(pc);
    c1.resize(pc);
    coef.resize(lc);
    bool distinct = false;
    for (std::size_t c = 0; c < pc; ++c) {
      const auto j = static_cast<Eigen::Index>(s.prox_in_image ? c * n + i : i);
      c0[c] = (*s.center0)[j];
      if (s.center1) {
        c1[c] = (*s.center1)[j];
        distinct = distinct || c1[c] != c0[c];
      }
    }
    for (std::size_t c = 0; c < lc; ++c) coef[c] = (*s.coef)[static_cast<Eigen::Index>(s.linear_in_image ? c * n + i : i)];
    CoordObjective phi;
    phi.i = i;
    phi.channels = C;
    phi.map = &map;
    phi.prox_in_image = s.prox_in_image;
    phi.linear_in_image = s.linear_in_image;
    phi.geom = s.geom;
    phi.geom_stride = n;
    phi.coef = coef.data();
    phi.reg = &p.reg;
    if (s.center1 && distinct && s.w1 != 0.0) {
      phi.terms[0] = {s.w0, c0.data()};
      phi.terms[1] = {s.w1, c1.data()};
      phi.term_count = 2;
    } else {
      phi.terms[0] = {s.center1 ? s.w_merged : s.w0, c0.data()};
    }
    u_next[static_cast<Eigen::Index>(i)] = minimize_coordinate(phi, cache, u_k[static_cast<Eigen::Index>(i)], buffer);
  });
  return u_next;
}

inline void require_separable(const CompositeProblem& p) {
  if (!p.has_separable_inner()) throw ConfigurationError("this step needs a separable inner map");
  if (p.reg.is_tv()) throw ConfigurationError("TV regularizers are handled by the lifting step");
}

}  // namespace detail

/// Minimizes the majorizer E_{u_k} coordinate-wise by global 1D search.
inline Vec mm_step(const CompositeProblem& p, const Geometry& geom, double tau, const Vec& u_k,
                   const StepCache* cache = nullptr, int threads = 1) {
  detail::require_separable(p);
  const Linearization lin = linearize(p, geom, u_k);
  std::optional<StepCache> local;
  if (!cache) cache = &local.emplace(p, SearchConfig{});
  detail::SeparableStepSpec s;
  s.geom = &geom;
  s.w0 = 1.0 / tau;
  s.center0 = &lin.z;
  s.coef = &lin.g;
  return detail::separable_step(p, *cache, s, u_k, threads);
}

/// Inertial variant: ((1 + beta)/tau) D(rho(u), z_k) - (beta/tau) D(rho(u), z_{k-1}) + linear part.
/// Coordinates whose previous and current images agree use the plain majorizer.
inline Vec inertial_mm_step(const CompositeProblem& p, const Geometry& geom, double tau, double beta, const Vec& u_k,
                            const Vec& u_km1, const StepCache* cache = nullptr, int threads = 1) {
  if (beta == 0.0) return mm_step(p, geom, tau, u_k, cache, threads);
  detail::require_separable(p);
  const Linearization lin = linearize(p, geom, u_k);
  const Vec z_prev = apply_inner(p, u_km1);
  std::optional<StepCache> local;
  if (!cache) cache = &local.emplace(p, SearchConfig{});
  detail::SeparableStepSpec s;
  s.geom = &geom;
  s.w0 = (1.0 + beta) / tau;
  s.center0 = &lin.z;
  s.w1 = -beta / tau;
  s.center1 = &z_prev;
  s.w_merged = 1.0 / tau;
  s.coef = &lin.g;
  return detail::separable_step(p, *cache, s, u_k, threads);
}

/// clip(u_k - tau grad E(u_k)) to the box.
inline Vec gd_step(const CompositeProblem& p, double tau, const Vec& u_k) {
  return p.box.clip(u_k - tau * energy_gradient(p, u_k));
}

/// <grad F(u_k), u> + R(u) + (1/tau) D_h(u, u_k), F = G o rho, solved coordinate-wise.
inline Vec fbs_step(const CompositeProblem& p, const Geometry& geom_on_u, double tau, const Vec& u_k,
                    const StepCache* cache = nullptr, int threads = 1) {
  detail::require_separable(p);
  const Vec grad = composite_gradient(p, u_k);
  std::optional<StepCache> local;
  if (!cache) cache = &local.emplace(p, SearchConfig{});
  detail::SeparableStepSpec s;
  s.geom = &geom_on_u;
  s.prox_in_image = false;
  s.linear_in_image = false;
  s.w0 = 1.0 / tau;
  s.center0 = &u_k;
  s.coef = &grad;
  return detail::separable_step(p, *cache, s, u_k, threads);
}

/// <grad G(rho(u_k)), rho(u)> + R(u) + (1/2 tau) ||u - u_k||^2, solved coordinate-wise.
inline Vec outer_linear_step(const CompositeProblem& p, double tau, const Vec& u_k, const StepCache* cache = nullptr,
                             int threads = 1) {
  detail::require_separable(p);
  const Vec z = apply_inner(p, u_k);
  const Vec g = p.outer.gradient(z);
  std::optional<StepCache> local;
  if (!cache) cache = &local.emplace(p, SearchConfig{});
  static const Geometry unit = Geometry::quadratic();
  detail::SeparableStepSpec s;
  s.geom = &unit;
  s.prox_in_image = false;
  s.linear_in_image = true;
  s.w0 = 1.0 / tau;
  s.center0 = &u_k;
  s.coef = &g;
  return detail::separable_step(p, *cache, s, u_k, threads);
}

/// Upper bound on the Hessian norm of G where one is known (0 if unknown).
inline double outer_curvature_bound(const SmoothOuter& outer) {
  switch (outer.kind()) {
    case OuterKind::least_squares:
    case OuterKind::truncated_quadratic: return outer.matrix_norm_sq();
    case OuterKind::custom: return outer.curvature_hint().value_or(0.0);
    case OuterKind::kl_divergence: return 0.0;
  }
  return 0.0;
}

/// Approximately minimizes G(rho(u_k) + J (u - u_k)) + R(u) + (1/2 tau) ||u - u_k||^2 over the box
/// with a backtracking proximal-gradient loop. Sets *warning when the loop hits its cap.
inline Vec prox_linear_step(const CompositeProblem& p, double tau, const Vec& u_k, const InnerConfig& inner,
                            const StepCache* cache = nullptr, bool* warning = nullptr, int threads = 1) {
  detail::require_separable(p);
  const SeparableMap& map = p.separable_inner();
  const std::size_t n = p.size();
  const std::size_t C = map.channels();
  const Vec z_k = map.apply(u_k);
  const Vec d = map.derivative(u_k);
  std::optional<StepCache> local;
  if (!cache) cache = &local.emplace(p, SearchConfig{});

  const auto model = [&](const Vec& y) {
    Vec v = z_k;
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < n; ++i) {
        const auto j = static_cast<Eigen::Index>(c * n + i);
        v[j] += d[j] * (y[static_cast<Eigen::Index>(i)] - u_k[static_cast<Eigen::Index>(i)]);
      }
    return v;
  };
  const auto smooth = [&](const Vec& y) {
    const double g = p.outer.value(model(y));
    return g + 0.5 / tau * (y - u_k).squaredNorm();
  };
  const auto smooth_grad = [&](const Vec& y) {
    const Vec gv = p.outer.gradient(model(y));
    Vec g = (y - u_k) / tau;
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < n; ++i) {
        const auto j = static_cast<Eigen::Index>(c * n + i);
        g[static_cast<Eigen::Index>(i)] += d[j] * gv[j];
      }
    return g;
  };
  const bool exact_prox = !p.reg.is_zero() &&
                          std::all_of(p.reg.terms().begin(), p.reg.terms().end(), [](const ScalarFn& r) { return static_cast<bool>(r.prox); });
  const auto prox = [&](const Vec& y, double t, const Vec& anchor) {
    if (p.reg.is_zero()) return p.box.clip(y);
    if (exact_prox) {
      Vec x(y.size());
      for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        x[ii] = std::clamp(p.reg.terms()[i].prox(y[ii], t), p.box.lower[ii], p.box.upper[ii]);
      }
      return x;
    }
    // the minimizer of r(x) + (x - y)^2 / 2t over the box lies within sqrt(2 t range(r)) of clip(y)
    Vec x(y.size());
    parallel_for(n, threads, [&](std::size_t i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const UniformGrid& full = cache->grid(i);
      const double yc = std::clamp(y[ii], full.a, full.b);
      const double w = std::sqrt(2.0 * t * cache->r_range(i)) + full.spacing();
      const double lo = std::max(full.a, yc - w), hi = std::min(full.b, yc + w);
      const ScalarFn& r = p.reg.terms()[i];
      const auto phi = [&](double v) { return r(v) + 0.5 / t * (v - y[ii]) * (v - y[ii]); };
      double best_x = anchor[ii];
      if (hi > lo) {
        const int pts = std::min(full.n, std::max(33, static_cast<int>(std::ceil((hi - lo) / full.spacing())) + 1));
        const Minimum1d m = minimize_1d(phi, lo, hi, pts, cache->search().refine_steps, cache->search().tol);
        if (m.f < phi(anchor[ii])) best_x = m.x;
      } else if (phi(lo) < phi(anchor[ii])) {
        best_x = lo;
      }
      x[ii] = best_x;
    });
    return x;
  };

  const double dmax = d.cwiseAbs().maxCoeff();
  double t = 1.0 / (1.0 / tau + outer_curvature_bound(p.outer) * dmax * dmax);
  Vec y = u_k;
  double sy = smooth(y);
  bool converged = false;
  for (int it = 0; it < inner.max_iter; ++it) {
    const Vec g = smooth_grad(y);
    Vec x;
    double sx = kInfinity;
    for (int bt = 0; bt < 60; ++bt) {
      x = prox(y - t * g, t, y);
      sx = smooth(x);
      const Vec dx = x - y;
      if (sx <= sy + g.dot(dx) + 0.5 / t * dx.squaredNorm()) break;
      t *= 0.5;
    }
    const double step = (x - y).cwiseAbs().maxCoeff();
    y = x;
    sy = sx;
    if (step <= inner.tol) {
      converged = true;
      break;
    }
  }
  if (warning) *warning = !converged;
  return y;
}

struct AdamState {
  Vec m;
  Vec v;
  int t = 0;
};

/// Bias-corrected Adam update followed by a box clip.
inline Vec adam_step(AdamState& st, const Vec& u, const Vec& grad, const AdamConfig& h, const Box& box) {
  if (st.m.size() != u.size()) {
    st.m = Vec::Zero(u.size());
    st.v = Vec::Zero(u.size());
    st.t = 0;
  }
  ++st.t;
  st.m = h.beta1 * st.m + (1.0 - h.beta1) * grad;
  st.v = h.beta2 * st.v + (1.0 - h.beta2) * grad.cwiseAbs2();
  const double b1 = 1.0 - std::pow(h.beta1, st.t);
  const double b2 = 1.0 - std::pow(h.beta2, st.t);
  Vec step(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) step[i] = h.lr * (st.m[i] / b1) / (std::sqrt(st.v[i] / b2) + h.eps);
  return box.clip(u - step);
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

/// Runs one method from u0 and records the full trace. Record k = 0 holds E(u0);
/// record k >= 1 holds E(u^k) and dz = D_h(rho(u^k), rho(u^{k-1})) in the problem geometry.
inline SolverRun run(const CompositeProblem& p, const Geometry& geom, const SolverConfig& cfg, const Vec& u0) {
  using clock = std::chrono::steady_clock;
  SolverRun res;
  res.config = cfg;
  const bool linear = geom.kind() == GeometryKind::linear;
  res.L = cfg.L ? *cfg.L : smoothness_constant(p.outer, geom).L;
  cfg.validate(res.L, linear);
  if (!p.box.contains(u0)) throw ConfigurationError("u0 must lie in the box");
  if (!geom.interior(apply_inner(p, u0))) throw DomainError("rho(u0) must lie inside the geometry domain");

  const bool tv = p.reg.is_tv();
  std::optional<StepCache> cache;
  if (!tv && p.has_separable_inner() && cfg.method != Method::gd && cfg.method != Method::adam)
    cache.emplace(p, cfg.search);
  PdhgState pd_state;
  AdamState adam;

  Vec u = u0;
  Vec u_prev = u0;
  double E = energy(p, u);
  res.trace.push_back({0, E, 0.0, true, 0.0, false});
  res.termination = Termination::max_iter;
  int small = 0;
  const auto slack = [&](double e) { return cfg.slack * (1.0 + std::abs(e)); };

  for (int k = 1; k <= cfg.max_iter; ++k) {
    const auto t0 = clock::now();
    Vec u_next;
    bool warning = false;
    bool guard_failed = false;
    const StepCache* cp = cache ? &*cache : nullptr;

    switch (cfg.method) {
      case Method::proposed:
      case Method::proposed_inertia: {
        if (tv) {
          const LiftedStep step = mm_step_lifted(p, geom, cfg.tau, u, cfg.lifting, &pd_state, cfg.slack);
          u_next = step.u_next;
          warning = step.warning;
          guard_failed = cfg.guard && !step.guard_ok;
          break;
        }
        const Linearization lin = linearize(p, geom, u);
        bool plain = true;
        if (cfg.method == Method::proposed_inertia && cfg.beta > 0.0) {
          // an inertial step is kept when it does not increase the energy
          u_next = inertial_mm_step(p, geom, cfg.tau, cfg.beta, u, u_prev, cp, cfg.threads);
          plain = cfg.guard && energy(p, u_next) > E + slack(E);
          if (plain) u_next = mm_step(p, geom, cfg.tau, u, cp, cfg.threads);
        } else {
          u_next = mm_step(p, geom, cfg.tau, u, cp, cfg.threads);
        }
        if (cfg.guard && plain && majorizer_value(p, geom, cfg.tau, lin, u_next) > E + slack(E)) guard_failed = true;
        break;
      }
      case Method::gd: u_next = gd_step(p, cfg.tau, u); break;
      case Method::fbs: u_next = fbs_step(p, cfg.u_geometry, cfg.tau, u, cp, cfg.threads); break;
      case Method::outer_linear: u_next = outer_linear_step(p, cfg.tau, u, cp, cfg.threads); break;
      case Method::prox_linear: u_next = prox_linear_step(p, cfg.tau, u, cfg.inner, cp, &warning, cfg.threads); break;
      case Method::adam: u_next = adam_step(adam, u, energy_gradient(p, u), cfg.adam, p.box); break;
    }

    double E_next = kInfinity;
    if (!guard_failed) {
      E_next = energy(p, u_next);
      if (cfg.guard && !is_mm(cfg.method) && !(E_next <= E + slack(E))) guard_failed = true;
    }
    const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    if (guard_failed) {
      res.trace.push_back({k, E, 0.0, false, ms, warning});
      res.termination = Termination::guard_violation;
      res.message = "step " + std::to_string(k) + " rejected: the majorizer was not decreased";
      break;
    }
    const double dz = geom.bregman(apply_inner(p, u_next), apply_inner(p, u));
    res.trace.push_back({k, E_next, dz, true, ms, warning});
    const bool same = u_next == u;
    u_prev = u;
    u = u_next;
    E = E_next;
    if (same || (!linear && dz == 0.0)) {
      res.termination = Termination::fixed_point;
      break;
    }
    small = (!linear && cfg.tol_dz > 0.0 && dz <= cfg.tol_dz) ? small + 1 : 0;
    if (small >= 3) {
      res.termination = Termination::tol;
      break;
    }
  }
  res.u_final = u;
  return res;
}

// ---------------------------------------------------------------------------
// Trace export
// ---------------------------------------------------------------------------

/// 17 significant digits, locale independent.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

inline void write_trace_csv(std::ostream& os, const SolverRun& run, bool with_time = true) {
  os << "k,E,dz,accepted,wall_ms\r\n";
  for (const auto& r : run.trace)
    os << r.k << ',' << format_number(r.E) << ',' << format_number(r.dz) << ',' << (r.accepted ? 1 : 0) << ','
       << (with_time ? format_number(r.wall_ms) : std::string("0")) << "\r\n";
}

}  // namespace compmm
