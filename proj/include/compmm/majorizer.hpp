#pragma once

#include <algorithm>
#include <array>
#include <thread>
#include <vector>

#include "compmm/geometry.hpp"
#include "compmm/problem.hpp"
#include "compmm/scalar.hpp"

namespace compmm {

/// Runs f(i) for i in [0, n), split into contiguous chunks over `threads` workers.
/// Every index is processed independently, so results do not depend on the split.
template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
  const std::size_t t = std::min<std::size_t>(n, threads > 1 ? static_cast<std::size_t>(threads) : 1);
  if (t <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(t);
  for (std::size_t w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w * n / t; i < (w + 1) * n / t; ++i) f(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Linear model pieces of G at the anchor: z_k = rho(u_k), g = grad G(z_k), G(z_k).
struct Linearization {
  Vec u;
  Vec z;
  Vec g;
  double G = 0.0;
};

inline Linearization linearize(const CompositeProblem& p, const Geometry& geom, const Vec& u_k) {
  Linearization lin;
  lin.u = u_k;
  lin.z = apply_inner(p, u_k);
  if (!geom.interior(lin.z)) throw DomainError("rho(u_k) is not inside the geometry domain");
  lin.G = p.outer.value(lin.z);
  if (is_infinite(lin.G)) throw DomainError("rho(u_k) is outside the domain of G");
  lin.g = p.outer.gradient(lin.z);
  return lin;
}

/// E_{u_k}(u) = (1/tau) D_h(rho(u), rho(u_k)) + G(rho(u_k)) + <grad G(rho(u_k)), rho(u) - rho(u_k)> + R(u).
/// With a concave TV penalty, R is replaced by its linearization around u_k.
inline double majorizer_value(const CompositeProblem& p, const Geometry& geom, double tau, const Linearization& lin,
                              const Vec& u) {
  const Vec z = apply_inner(p, u);
  const double d = geom.bregman(z, lin.z);
  if (is_infinite(d)) return kInfinity;
  double lin_term = 0.0;
  for (Eigen::Index j = 0; j < z.size(); ++j) lin_term += lin.g[j] * (z[j] - lin.z[j]);
  return lin.G + lin_term + d / tau + p.reg.majorant(lin.u, u);
}

inline double majorizer_value(const CompositeProblem& p, const Geometry& geom, double tau, const Vec& u_k,
                              const Vec& u) {
  return majorizer_value(p, geom, tau, linearize(p, geom, u_k), u);
}

// ---------------------------------------------------------------------------
// Coordinate subproblems
// ---------------------------------------------------------------------------

/// Grids and tabulated function values reused across the iterations of a run.
/// rho is tabulated once per channel when all coordinates share the map and the box;
/// otherwise per coordinate, or on demand when the tables would get too large.
class StepCache {
 public:
  StepCache(const CompositeProblem& p, SearchConfig search, std::size_t max_entries = std::size_t{1} << 23)
      : search_(search), n_(p.size()) {
    const auto& map = p.separable_inner();
    channels_ = map.channels();
    const bool uniform_box = (p.box.lower.array() == p.box.lower[0]).all() && (p.box.upper.array() == p.box.upper[0]).all();
    if (uniform_box) {
      grids_.emplace_back(p.box.lower[0], p.box.upper[0], search.grid_n);
    } else {
      for (std::size_t i = 0; i < n_; ++i) grids_.emplace_back(p.box.lower[i], p.box.upper[i], search.grid_n);
    }
    const std::size_t gn = static_cast<std::size_t>(search.grid_n);
    for (const auto& grid : grids_) points_.push_back(grid.points());

    shared_rho_ = uniform_box && map.shared();
    const std::size_t rho_entries = (shared_rho_ ? 1 : n_) * channels_ * gn;
    if (rho_entries <= max_entries) {
      const std::size_t rows = shared_rho_ ? 1 : n_;
      rho_.resize(rows * channels_);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t c = 0; c < channels_; ++c) rho_[i * channels_ + c] = tabulate(map.fn(i, c), grid(i));
    }
    if (!p.reg.is_tv() && !p.reg.is_zero() && n_ * gn <= max_entries) {
      r_.resize(n_);
      r_range_.resize(n_);
      for (std::size_t i = 0; i < n_; ++i) {
        r_[i] = tabulate(p.reg.terms()[i], grid(i));
        const auto [lo, hi] = std::minmax_element(r_[i].begin(), r_[i].end());
        r_range_[i] = *hi - *lo;
      }
    }
  }

  const SearchConfig& search() const { return search_; }
  const UniformGrid& grid(std::size_t i) const { return grids_.size() == 1 ? grids_[0] : grids_[i]; }
  const std::vector<double>& points(std::size_t i) const { return points_.size() == 1 ? points_[0] : points_[i]; }

  /// Tabulated rho_{i,c} on grid(i), or nullptr when not cached.
  const double* rho(std::size_t i, std::size_t c) const {
    if (rho_.empty()) return nullptr;
    return rho_[(shared_rho_ ? 0 : i) * channels_ + c].data();
  }
  const double* r(std::size_t i) const { return r_.empty() ? nullptr : r_[i].data(); }
  /// max - min of the tabulated r_i, or +infinity when not cached.
  double r_range(std::size_t i) const { return r_range_.empty() ? kInfinity : r_range_[i]; }

  static std::vector<double> tabulate(const ScalarFn& fn, const UniformGrid& grid) {
    std::vector<double> t(static_cast<std::size_t>(grid.n));
    for (int g = 0; g < grid.n; ++g) t[static_cast<std::size_t>(g)] = fn(grid[g]);
    return t;
  }

 private:
  SearchConfig search_;
  std::size_t n_;
  std::size_t channels_ = 1;
  bool shared_rho_ = false;
  std::vector<UniformGrid> grids_;
  std::vector<std::vector<double>> points_;
  std::vector<std::vector<double>> rho_;
  std::vector<std::vector<double>> r_;
  std::vector<double> r_range_;
};

/// One proximity term weight * D(P_c(x), center_c) for every channel c.
struct ProxTerm {
  double weight = 0.0;
  const double* centers = nullptr;  // one per channel
};

/// Per-coordinate objective
///   phi(x) = r(x) + sum_t sum_c w_t D_c(P_c(x), center_{t,c}) + sum_c coef_c Q_c(x),
/// shared by all separable methods so their evaluation order is identical.
/// P and Q are either the inner map (rho) or the identity.
struct CoordObjective {
  std::size_t i = 0;
  std::size_t channels = 1;
  const SeparableMap* map = nullptr;
  bool prox_in_image = true;    // P = rho, else P = id (single channel)
  bool linear_in_image = true;  // Q = rho, else Q = id (single channel)
  const Geometry* geom = nullptr;
  std::size_t geom_stride = 0;  // geometry coordinate of channel c is c * geom_stride + i
  std::array<ProxTerm, 2> terms{};
  int term_count = 1;
  const double* coef = nullptr;  // one per linear channel
  const Regularizer* reg = nullptr;

  std::size_t prox_channels() const { return prox_in_image ? channels : 1; }
  std::size_t linear_channels() const { return linear_in_image ? channels : 1; }

  double operator()(double x) const {
    double v = reg && !reg->is_zero() ? reg->term(i, x) : 0.0;
    for (int t = 0; t < term_count; ++t) {
      const ProxTerm& term = terms[static_cast<std::size_t>(t)];
      for (std::size_t c = 0; c < prox_channels(); ++c) {
        const double px = prox_in_image ? map->fn(i, c)(x) : x;
        const double d = geom->coord_bregman(c * geom_stride + i, px, term.centers[c]);
        if (is_infinite(d)) return kInfinity;
        v += term.weight * d;
      }
    }
    for (std::size_t c = 0; c < linear_channels(); ++c) v += coef[c] * (linear_in_image ? map->fn(i, c)(x) : x);
    return v;
  }

  /// Same sum as operator(), over the cached grid.
  void tabulate(const StepCache& cache, std::vector<double>& out) const {
    const UniformGrid& grid = cache.grid(i);
    const std::vector<double>& xs = cache.points(i);
    const std::size_t gn = static_cast<std::size_t>(grid.n);
    out.assign(gn, 0.0);
    const double* rt = cache.r(i);
    if (reg && !reg->is_zero()) {
      if (rt)
        std::copy(rt, rt + gn, out.begin());
      else
        for (std::size_t g = 0; g < gn; ++g) out[g] = reg->term(i, xs[g]);
    }
    std::vector<double> scratch;
    const auto channel_values = [&](std::size_t c) -> const double* {
      if (const double* t = cache.rho(i, c)) return t;
      scratch.resize(gn);
      const ScalarFn& fn = map->fn(i, c);
      for (std::size_t g = 0; g < gn; ++g) scratch[g] = fn(xs[g]);
      return scratch.data();
    };
    for (int t = 0; t < term_count; ++t) {
      const ProxTerm& term = terms[static_cast<std::size_t>(t)];
      for (std::size_t c = 0; c < prox_channels(); ++c) {
        const double* pv = prox_in_image ? channel_values(c) : xs.data();
        const std::size_t gi = c * geom_stride + i;
        const double center = term.centers[c];
        const double w = term.weight;
        for (std::size_t g = 0; g < gn; ++g) {
          const double d = geom->coord_bregman(gi, pv[g], center);
          out[g] = is_infinite(d) ? kInfinity : out[g] + w * d;
        }
      }
    }
    for (std::size_t c = 0; c < linear_channels(); ++c) {
      const double* qv = linear_in_image ? channel_values(c) : xs.data();
      const double k = coef[c];
      for (std::size_t g = 0; g < gn; ++g) out[g] += k * qv[g];
    }
  }
};

/// Global minimizer of phi over the coordinate's interval; the anchor x_k wins ties
/// (so phi(result) <= phi(x_k) always holds).
inline double minimize_coordinate(const CoordObjective& phi, const StepCache& cache, double x_k,
                                  std::vector<double>& buffer) {
  phi.tabulate(cache, buffer);
  const UniformGrid& grid = cache.grid(phi.i);
  Minimum1d best;
  try {
    best = minimize_tabulated(grid, buffer);
    best = refine_minimum(phi, grid, best, cache.search().refine_steps, cache.search().tol);
  } catch (const NumericalError& e) {
    throw StepError(std::string("coordinate subproblem failed: ") + e.what(), static_cast<std::ptrdiff_t>(phi.i));
  }
  const double f_anchor = phi(x_k);
  if (std::isnan(f_anchor)) throw StepError("coordinate subproblem is NaN at the anchor", static_cast<std::ptrdiff_t>(phi.i));
  return best.f < f_anchor ? best.x : x_k;
}

}  // namespace compmm
