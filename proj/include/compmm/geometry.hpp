#pragma once

#include <algorithm>
#include <random>
#include <string>

#include "compmm/problem.hpp"

namespace compmm {

enum class GeometryKind { quadratic, diag_quadratic, burg_entropy, linear };

inline const char* to_string(GeometryKind k) {
  switch (k) {
    case GeometryKind::quadratic: return "quadratic";
    case GeometryKind::diag_quadratic: return "diag-quadratic";
    case GeometryKind::burg_entropy: return "burg-entropy";
    case GeometryKind::linear: return "linear";
  }
  return "?";
}

/// Separable Bregman generator h(v) = sum_i h_i(v_i).
///   quadratic:       h_i(x) = x^2 / 2
///   diag-quadratic:  h_i(x) = d_i x^2 / 2
///   burg-entropy:    h_i(x) = -log x, x > floor
///   linear:          h_i(x) = s_i x, so D_h = 0
class Geometry {
 public:
  static Geometry quadratic() { return Geometry(GeometryKind::quadratic); }

  static Geometry diag_quadratic(Vec d) {
    if ((d.array() <= 0.0).any()) throw DegenerateGeometryError("diag-quadratic weights must be positive");
    Geometry g(GeometryKind::diag_quadratic);
    g.weights_ = std::move(d);
    return g;
  }

  /// `upper` is the largest value iterates can take (for the strong-convexity modulus).
  static Geometry burg_entropy(double upper = 1.0, double floor = 1e-8) {
    if (!(upper > 0.0) || !(floor > 0.0)) throw ConfigurationError("burg-entropy needs positive bounds");
    Geometry g(GeometryKind::burg_entropy);
    g.upper_ = upper;
    g.floor_ = floor;
    return g;
  }

  static Geometry linear(Vec slope = Vec()) {
    Geometry g(GeometryKind::linear);
    g.weights_ = std::move(slope);
    return g;
  }

  GeometryKind kind() const { return kind_; }
  Domain domain() const { return kind_ == GeometryKind::burg_entropy ? Domain::positive_orthant : Domain::all_space; }
  const Vec& weights() const { return weights_; }
  double floor() const { return floor_; }

  double weight(std::size_t i) const {
    if (kind_ == GeometryKind::diag_quadratic) return weights_[static_cast<Eigen::Index>(i)];
    return 1.0;
  }

  /// Strong convexity modulus (w.r.t. the box upper bound for Burg's entropy).
  double strong_convexity() const {
    switch (kind_) {
      case GeometryKind::quadratic: return 1.0;
      case GeometryKind::diag_quadratic: return weights_.minCoeff();
      case GeometryKind::burg_entropy: return 1.0 / (upper_ * upper_);
      case GeometryKind::linear: return 0.0;
    }
    return 0.0;
  }

  bool coord_interior(double x) const { return kind_ != GeometryKind::burg_entropy || x >= floor_; }

  bool interior(const Vec& v) const {
    if (kind_ != GeometryKind::burg_entropy) return v.allFinite();
    return (v.array() >= floor_).all();
  }

  double coord_value(std::size_t i, double x) const {
    switch (kind_) {
      case GeometryKind::quadratic: return 0.5 * x * x;
      case GeometryKind::diag_quadratic: return 0.5 * weight(i) * x * x;
      case GeometryKind::burg_entropy: return x >= floor_ ? -std::log(x) : kInfinity;
      case GeometryKind::linear: return weights_.size() ? weights_[static_cast<Eigen::Index>(i)] * x : x;
    }
    return kInfinity;
  }

  double coord_gradient(std::size_t i, double x) const {
    switch (kind_) {
      case GeometryKind::quadratic: return x;
      case GeometryKind::diag_quadratic: return weight(i) * x;
      case GeometryKind::burg_entropy:
        if (!(x >= floor_)) throw DomainError("burg-entropy gradient outside domain");
        return -1.0 / x;
      case GeometryKind::linear: return weights_.size() ? weights_[static_cast<Eigen::Index>(i)] : 1.0;
    }
    return 0.0;
  }

  /// D_{h_i}(x, y). +infinity when either point leaves the (floored) domain.
  double coord_bregman(std::size_t i, double x, double y) const {
    switch (kind_) {
      case GeometryKind::quadratic: {
        const double e = x - y;
        return 0.5 * e * e;
      }
      case GeometryKind::diag_quadratic: {
        const double e = x - y;
        return 0.5 * weight(i) * e * e;
      }
      case GeometryKind::burg_entropy: {
        if (!(x >= floor_) || !(y >= floor_)) return kInfinity;
        const double r = x / y;
        return r - std::log(r) - 1.0;
      }
      case GeometryKind::linear: return 0.0;
    }
    return kInfinity;
  }

  double value(const Vec& v) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += coord_value(static_cast<std::size_t>(i), v[i]);
    return s;
  }

  Vec gradient(const Vec& v) const {
    Vec g(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) g[i] = coord_gradient(static_cast<std::size_t>(i), v[i]);
    return g;
  }

  /// D_h(u, v) = h(u) - h(v) - <grad h(v), u - v>.
  double bregman(const Vec& u, const Vec& v) const {
    if (u.size() != v.size()) throw StructuralError("bregman: dimension mismatch");
    if (kind_ == GeometryKind::diag_quadratic && weights_.size() != u.size())
      throw StructuralError("bregman: weight vector length mismatch");
    double s = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const double d = coord_bregman(static_cast<std::size_t>(i), u[i], v[i]);
      if (is_infinite(d)) return kInfinity;
      s += d;
    }
    return s;
  }

 private:
  explicit Geometry(GeometryKind k) : kind_(k) {}

  GeometryKind kind_;
  Vec weights_;
  double upper_ = 1.0;
  double floor_ = 1e-8;
};

inline double bregman(const Geometry& g, const Vec& u, const Vec& v) { return g.bregman(u, v); }

/// d_i = sum_j |(A^T A)_ij|, so diag(d) - A^T A is diagonally dominant.
inline Vec diag_dominant_weights(const Mat& a) {
  const Mat ata = a.transpose() * a;
  Vec d = ata.cwiseAbs().rowwise().sum();
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (d[i] == 0.0) throw DegenerateGeometryError("zero column " + std::to_string(i) + " gives a zero weight");
  return d;
}

enum class Certificate { analytic, spectral, supplied };

struct RelativeSmoothness {
  double L = 1.0;
  Certificate certificate = Certificate::analytic;
};

/// L such that L h - G is convex, for the supported (G, h) pairs.
inline RelativeSmoothness smoothness_constant(const SmoothOuter& outer, const Geometry& geom) {
  if (auto s = outer.supplied_constant()) return {*s, Certificate::supplied};
  const auto kind = outer.kind();
  if (geom.kind() == GeometryKind::linear) {
    if (outer.concave()) return {1.0, Certificate::analytic};
    throw ConfigurationError("linear geometry requires a concave outer function");
  }
  const bool quadratic_like = kind == OuterKind::least_squares || kind == OuterKind::truncated_quadratic;
  if (quadratic_like && geom.kind() == GeometryKind::diag_quadratic) {
    // The curvature of G is at most A^T A; the weights must dominate it.
    const Vec need = diag_dominant_weights(outer.matrix());
    if (geom.weights().size() != need.size()) throw StructuralError("geometry weights do not match the matrix");
    if (((geom.weights() - need).array() >= -1e-12 * need.array()).all()) return {1.0, Certificate::analytic};
    throw ConfigurationError("diag-quadratic weights do not dominate A^T A; supply L");
  }
  if (quadratic_like && geom.kind() == GeometryKind::quadratic) return {outer.matrix_norm_sq(), Certificate::spectral};
  if (kind == OuterKind::kl_divergence && geom.kind() == GeometryKind::burg_entropy)
    return {outer.data().lpNorm<1>(), Certificate::analytic};
  if (kind == OuterKind::custom && geom.kind() == GeometryKind::quadratic && outer.curvature_hint())
    return {*outer.curvature_hint(), Certificate::supplied};
  throw ConfigurationError(std::string("no known smoothness constant for this outer function with ") +
                           to_string(geom.kind()) + " geometry; supply L");
}

/// D_G(z, w) = G(z) - G(w) - <grad G(w), z - w>.
inline double outer_bregman(const SmoothOuter& outer, const Vec& z, const Vec& w) {
  return outer.value(z) - outer.value(w) - outer.gradient(w).dot(z - w);
}

/// Worst ratio D_G / D_h over random pairs drawn uniformly from [lo, hi].
/// Pairs with D_h = 0 count only when D_G > 0 (then the ratio is +infinity).
inline double relative_smoothness_spotcheck(const SmoothOuter& outer, const Geometry& geom, double L, int trials,
                                            std::uint64_t seed, const Vec& lo, const Vec& hi) {
  (void)L;
  if (trials < 1) throw ConfigurationError("spotcheck needs at least one trial");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto draw = [&] {
    Vec v(lo.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = lo[i] + (hi[i] - lo[i]) * unit(rng);
    return v;
  };
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Vec z = draw();
    const Vec w = draw();
    if (!outer.in_domain(z) || !outer.in_domain(w) || !geom.interior(z) || !geom.interior(w)) continue;
    const double dg = outer_bregman(outer, z, w);
    const double dh = geom.bregman(z, w);
    if (dh > 0.0)
      worst = std::max(worst, dg / dh);
    else if (dg > 0.0)
      worst = kInfinity;
  }
  return worst;
}

/// Default sampling box: [-1, 1] on all-space domains, [0.01, 3] on the positive orthant.
inline double relative_smoothness_spotcheck(const SmoothOuter& outer, const Geometry& geom, double L, int trials,
                                            std::uint64_t seed) {
  const auto m = static_cast<Eigen::Index>(outer.input_size());
  const bool pos = geom.domain() == Domain::positive_orthant || outer.domain() == Domain::positive_orthant ||
                   outer.kind() == OuterKind::kl_divergence;
  const Vec lo = Vec::Constant(m, pos ? 0.01 : -1.0);
  const Vec hi = Vec::Constant(m, pos ? 3.0 : 1.0);
  return relative_smoothness_spotcheck(outer, geom, L, trials, seed, lo, hi);
}

}  // namespace compmm
