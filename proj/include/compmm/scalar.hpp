#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "compmm/core.hpp"

namespace compmm {

struct Minimum1d {
  double x = 0.0;
  double f = kInfinity;
};

struct SearchConfig {
  int grid_n = 2048;
  int refine_steps = 8;
  double tol = 1e-10;
};

/// Evenly spaced abscissae x_g = a + (b - a) g / (n - 1).
struct UniformGrid {
  double a = 0.0;
  double b = 1.0;
  int n = 2;

  UniformGrid() = default;
  UniformGrid(double a_, double b_, int n_) : a(a_), b(b_), n(n_) {
    if (!(a < b)) throw ConfigurationError("grid: empty interval");
    if (n < 3) throw ConfigurationError("grid: need at least 3 points");
  }

  double spacing() const { return (b - a) / (n - 1); }
  double operator[](int g) const { return g == n - 1 ? b : a + (b - a) * g / (n - 1); }

  std::vector<double> points() const {
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int g = 0; g < n; ++g) x[static_cast<std::size_t>(g)] = (*this)[g];
    return x;
  }
};

/// Vertex of the parabola through three points, clamped to [x_left, x_right].
/// Returns x_mid when the points are collinear or the parabola opens downward.
inline double parabolic_refine(double x_left, double x_mid, double x_right, double f_left, double f_mid,
                               double f_right) {
  const double d1 = x_mid - x_left;
  const double d2 = x_mid - x_right;
  const double p = d1 * (f_mid - f_right);
  const double q = d2 * (f_mid - f_left);
  const double den = p - q;
  // curvature sign: den has the sign of (x_right - x_left) * second divided difference
  const double second = ((f_right - f_mid) / (x_right - x_mid) - (f_mid - f_left) / (x_mid - x_left)) / (x_right - x_left);
  if (!(second > 0.0) || den == 0.0) return x_mid;
  const double x = x_mid - 0.5 * (d1 * p - d2 * q) / den;
  if (!std::isfinite(x)) return x_mid;
  return std::clamp(x, x_left, x_right);
}

namespace detail {

inline void check_value(double v, double x) {
  if (std::isnan(v)) throw NumericalError("objective is NaN", -1, x);
}

}  // namespace detail

/// Refine an incumbent grid minimizer with successive parabolic steps on a shrinking bracket.
/// Candidates are accepted only when strictly better, so the result never gets worse.
template <class F>
Minimum1d refine_minimum(F&& f, const UniformGrid& grid, Minimum1d inc, int refine_steps, double tol) {
  if (refine_steps <= 0 || is_infinite(inc.f)) return inc;
  double w = grid.spacing();
  for (int s = 0; s < refine_steps; ++s) {
    if (w < tol) break;
    double xl = std::max(grid.a, inc.x - w);
    double xr = std::min(grid.b, inc.x + w);
    double xm = inc.x;
    double fm = inc.f;
    if (xm == xl || xm == xr) {
      // incumbent at the interval end: bracket the half-interval next to it
      xm = 0.5 * (xl + xr);
      fm = f(xm);
      detail::check_value(fm, xm);
    }
    const double fl = f(xl);
    const double fr = f(xr);
    detail::check_value(fl, xl);
    detail::check_value(fr, xr);
    for (auto [x, v] : {std::pair{xl, fl}, std::pair{xm, fm}, std::pair{xr, fr}})
      if (v < inc.f) inc = {x, v};
    if (!is_infinite(fl) && !is_infinite(fm) && !is_infinite(fr)) {
      const double xv = parabolic_refine(xl, xm, xr, fl, fm, fr);
      if (xv != inc.x) {
        const double fv = f(xv);
        detail::check_value(fv, xv);
        if (fv < inc.f) {
          const bool small = std::abs(xv - inc.x) < tol;
          inc = {xv, fv};
          if (small) break;
        }
      }
    }
    w *= 0.5;
  }
  return inc;
}

/// Global minimum of tabulated values f[g] = f(grid[g]); ties go to the smaller abscissa.
/// +infinity entries are skipped; the result has f = +infinity only if all entries are.
inline Minimum1d minimize_tabulated(const UniformGrid& grid, std::span<const double> values, int* index = nullptr) {
  int best = -1;
  double fb = kInfinity;
  for (int g = 0; g < grid.n; ++g) {
    const double v = values[static_cast<std::size_t>(g)];
    if (std::isnan(v)) throw NumericalError("objective is NaN on the grid", g, grid[g]);
    if (v < fb) {
      fb = v;
      best = g;
    }
  }
  if (index) *index = best;
  if (best < 0) return {grid.a, kInfinity};
  return {grid[best], fb};
}

/// Global minimization on [a, b] by exhaustive grid search plus parabolic refinement.
template <class F>
Minimum1d minimize_1d(F&& f, double a, double b, int grid_n = 2048, int refine_steps = 8, double tol = 1e-10) {
  const UniformGrid grid(a, b, grid_n);
  std::vector<double> values(static_cast<std::size_t>(grid_n));
  for (int g = 0; g < grid_n; ++g) values[static_cast<std::size_t>(g)] = f(grid[g]);
  const Minimum1d inc = minimize_tabulated(grid, values);
  return refine_minimum(f, grid, inc, refine_steps, tol);
}

}  // namespace compmm
