#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <utility>
#include <variant>
#include <vector>

#include "compmm/core.hpp"

namespace compmm {

// ---------------------------------------------------------------------------
// ScalarFn
// ---------------------------------------------------------------------------

/// A univariate function with an optional analytic derivative and an optional
/// exact proximal map argmin_x f(x) + (x - y)^2 / (2 t).
struct ScalarFn {
  std::function<double(double)> value;
  std::function<double(double)> derivative;
  std::optional<double> lipschitz_hint;
  std::function<double(double, double)> prox;
  bool smooth = true;

  double operator()(double x) const { return value(x); }

  bool has_derivative() const { return static_cast<bool>(derivative); }

  /// Analytic derivative if present, central differences otherwise.
  double deriv(double x) const {
    if (derivative) return derivative(x);
    const double h = 1e-6 * (1.0 + std::abs(x));
    return (value(x + h) - value(x - h)) / (2.0 * h);
  }
};

namespace fns {

inline ScalarFn identity() {
  ScalarFn f;
  f.value = [](double x) { return x; };
  f.derivative = [](double) { return 1.0; };
  f.lipschitz_hint = 1.0;
  return f;
}

inline ScalarFn zero() {
  ScalarFn f;
  f.value = [](double) { return 0.0; };
  f.derivative = [](double) { return 0.0; };
  f.lipschitz_hint = 0.0;
  f.prox = [](double y, double) { return y; };
  return f;
}

inline ScalarFn exp() {
  ScalarFn f;
  f.value = [](double x) { return std::exp(x); };
  f.derivative = [](double x) { return std::exp(x); };
  return f;
}

inline ScalarFn square() {
  ScalarFn f;
  f.value = [](double x) { return x * x; };
  f.derivative = [](double x) { return 2.0 * x; };
  f.prox = [](double y, double t) { return y / (1.0 + 2.0 * t); };
  return f;
}

inline ScalarFn sine() {
  ScalarFn f;
  f.value = [](double x) { return std::sin(x); };
  f.derivative = [](double x) { return std::cos(x); };
  f.lipschitz_hint = 1.0;
  return f;
}

inline ScalarFn arctan() {
  ScalarFn f;
  f.value = [](double x) { return std::atan(x); };
  f.derivative = [](double x) { return 1.0 / (1.0 + x * x); };
  f.lipschitz_hint = 1.0;
  return f;
}

/// x^2 - 10 cos(2 pi x)
inline ScalarFn rastrigin() {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  ScalarFn f;
  f.value = [](double x) { return x * x - 10.0 * std::cos(two_pi * x); };
  f.derivative = [](double x) { return 2.0 * x + 10.0 * two_pi * std::sin(two_pi * x); };
  return f;
}

/// x^2 / (1 + x^2)
inline ScalarFn rational_square() {
  ScalarFn f;
  f.value = [](double x) { return x * x / (1.0 + x * x); };
  f.derivative = [](double x) {
    const double d = 1.0 + x * x;
    return 2.0 * x / (d * d);
  };
  return f;
}

/// -sin(pi x) / (pi x), continuous at 0 with value -1.
inline ScalarFn neg_sinc() {
  constexpr double pi = std::numbers::pi;
  ScalarFn f;
  f.value = [](double x) {
    const double a = pi * x;
    if (std::abs(a) < 1e-8) return -1.0 + a * a / 6.0;
    return -std::sin(a) / a;
  };
  f.derivative = [](double x) {
    const double a = pi * x;
    if (std::abs(a) < 1e-6) return pi * a / 3.0;
    return -pi * (a * std::cos(a) - std::sin(a)) / (a * a);
  };
  return f;
}

inline ScalarFn abs_value() {
  ScalarFn f;
  f.value = [](double x) { return std::abs(x); };
  f.smooth = false;
  f.lipschitz_hint = 1.0;
  f.prox = [](double y, double t) {
    if (y > t) return y - t;
    if (y < -t) return y + t;
    return 0.0;
  };
  return f;
}

/// x -> g(x - c)
inline ScalarFn shifted(ScalarFn g, double c) {
  ScalarFn f;
  f.value = [v = g.value, c](double x) { return v(x - c); };
  if (g.derivative) f.derivative = [d = g.derivative, c](double x) { return d(x - c); };
  if (g.prox) f.prox = [p = g.prox, c](double y, double t) { return p(y - c, t) + c; };
  f.lipschitz_hint = g.lipschitz_hint;
  f.smooth = g.smooth;
  return f;
}

/// x -> g(x) + c
inline ScalarFn offset(ScalarFn g, double c) {
  ScalarFn f = std::move(g);
  f.value = [v = f.value, c](double x) { return v(x) + c; };
  return f;
}

/// x -> s * g(x)
inline ScalarFn scaled(ScalarFn g, double s) {
  ScalarFn f;
  f.value = [v = g.value, s](double x) { return s * v(x); };
  if (g.derivative) f.derivative = [d = g.derivative, s](double x) { return s * d(x); };
  if (g.lipschitz_hint) f.lipschitz_hint = std::abs(s) * *g.lipschitz_hint;
  f.smooth = g.smooth;
  return f;
}

}  // namespace fns

// ---------------------------------------------------------------------------
// Inner maps
// ---------------------------------------------------------------------------

/// rho(u) with rho_{i,c}(u_i): every coordinate i feeds `channels` outputs.
/// The output vector is laid out channel-major: v[c * n + i].
/// With one channel this is the usual coordinate-wise map.
class SeparableMap {
 public:
  SeparableMap() = default;

  /// Same function(s) for every coordinate; one entry per channel.
  SeparableMap(std::size_t n, std::vector<ScalarFn> channel_fns)
      : n_(n), channels_(channel_fns.size()), shared_(true), fns_(std::move(channel_fns)) {
    if (channels_ == 0) throw StructuralError("SeparableMap needs at least one channel");
  }

  /// Individual functions: fns[c * n + i].
  SeparableMap(std::size_t n, std::size_t channels, std::vector<ScalarFn> fns)
      : n_(n), channels_(channels), shared_(false), fns_(std::move(fns)) {
    if (fns_.size() != n * channels) throw StructuralError("SeparableMap: expected n*channels functions");
  }

  static SeparableMap uniform(std::size_t n, ScalarFn fn) { return SeparableMap(n, std::vector<ScalarFn>{std::move(fn)}); }
  static SeparableMap identity(std::size_t n) { return uniform(n, fns::identity()); }

  std::size_t size() const { return n_; }
  std::size_t channels() const { return channels_; }
  std::size_t output_size() const { return n_ * channels_; }
  bool shared() const { return shared_; }

  const ScalarFn& fn(std::size_t i, std::size_t c = 0) const { return shared_ ? fns_[c] : fns_[c * n_ + i]; }

  Vec apply(const Vec& u) const {
    check(u);
    Vec v(output_size());
    for (std::size_t c = 0; c < channels_; ++c)
      for (std::size_t i = 0; i < n_; ++i) v[c * n_ + i] = fn(i, c)(u[i]);
    return v;
  }

  /// Diagonal Jacobian blocks d rho_{i,c} / d u_i, same layout as apply().
  Vec derivative(const Vec& u) const {
    check(u);
    Vec d(output_size());
    for (std::size_t c = 0; c < channels_; ++c)
      for (std::size_t i = 0; i < n_; ++i) d[c * n_ + i] = fn(i, c).deriv(u[i]);
    return d;
  }

  /// J^T g.
  Vec pullback(const Vec& u, const Vec& g) const {
    if (static_cast<std::size_t>(g.size()) != output_size()) throw StructuralError("pullback: gradient size mismatch");
    const Vec d = derivative(u);
    Vec out = Vec::Zero(n_);
    for (std::size_t c = 0; c < channels_; ++c)
      for (std::size_t i = 0; i < n_; ++i) out[i] += d[c * n_ + i] * g[c * n_ + i];
    return out;
  }

 private:
  void check(const Vec& u) const {
    if (static_cast<std::size_t>(u.size()) != n_) throw StructuralError("SeparableMap: input dimension mismatch");
  }

  std::size_t n_ = 0;
  std::size_t channels_ = 1;
  bool shared_ = true;
  std::vector<ScalarFn> fns_;
};

/// Row sums sum_j rho_ij(u_j). Either a full m x n table of functions or the
/// rank-1 form rho_ij(u_j) = a_ij * rho_j(u_j).
class SumCompositionMap {
 public:
  static SumCompositionMap rank_one(Mat a, std::vector<ScalarFn> column_fns) {
    if (static_cast<std::size_t>(a.cols()) != column_fns.size())
      throw StructuralError("SumCompositionMap: one function per column required");
    SumCompositionMap m;
    m.rows_ = static_cast<std::size_t>(a.rows());
    m.cols_ = static_cast<std::size_t>(a.cols());
    m.a_ = std::move(a);
    m.column_fns_ = std::move(column_fns);
    return m;
  }

  /// fns[i * n + j] = rho_ij.
  static SumCompositionMap general(std::size_t m, std::size_t n, std::vector<ScalarFn> fns) {
    if (fns.size() != m * n) throw StructuralError("SumCompositionMap: expected m*n functions");
    SumCompositionMap s;
    s.rows_ = m;
    s.cols_ = n;
    s.table_ = std::move(fns);
    return s;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool is_rank_one() const { return table_.empty(); }
  const Mat& matrix() const { return a_; }

  /// rho_ij as a function (materialised for the rank-1 form).
  ScalarFn entry(std::size_t i, std::size_t j) const {
    if (!is_rank_one()) return table_[i * cols_ + j];
    return fns::scaled(column_fns_[j], a_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  }

  Vec apply(const Vec& u) const {
    if (static_cast<std::size_t>(u.size()) != cols_) throw StructuralError("SumCompositionMap: input dimension mismatch");
    if (is_rank_one()) {
      Vec r(cols_);
      for (std::size_t j = 0; j < cols_; ++j) r[j] = column_fns_[j](u[j]);
      return a_ * r;
    }
    Vec out = Vec::Zero(rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) out[i] += table_[i * cols_ + j](u[j]);
    return out;
  }

  /// The same model written as a separable map with one channel per row:
  /// v[i * n + j] = rho_ij(u_j). Pair with row_sum_outer() to recover G(apply(u)).
  SeparableMap as_separable() const {
    std::vector<ScalarFn> fns;
    fns.reserve(rows_ * cols_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) fns.push_back(entry(i, j));
    return SeparableMap(cols_, rows_, std::move(fns));
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Mat a_;
  std::vector<ScalarFn> column_fns_;
  std::vector<ScalarFn> table_;
};

// ---------------------------------------------------------------------------
// Outer function
// ---------------------------------------------------------------------------

enum class Domain { all_space, positive_orthant };
enum class OuterKind { least_squares, kl_divergence, truncated_quadratic, custom };

/// Smoothed min(t^2, lambda) / 2: t^2/2 up to |t| = s, then a concave quadratic
/// blend over [s, s + delta] matching value and slope, then constant lambda/2.
/// The blend reaches lambda/2 when s^2 + s * delta = lambda.
struct TruncationParams {
  double lambda = 1.0;
  double delta = 0.25;

  double knee() const { return 0.5 * (-delta + std::sqrt(delta * delta + 4.0 * lambda)); }

  double value(double t) const {
    const double a = std::abs(t);
    const double s = knee();
    if (a <= s) return 0.5 * a * a;
    if (a >= s + delta) return 0.5 * lambda;
    const double e = a - s;
    return 0.5 * s * s + s * e - 0.5 * (s / delta) * e * e;
  }

  double slope(double t) const {
    const double a = std::abs(t);
    const double s = knee();
    double g;
    if (a <= s)
      g = a;
    else if (a >= s + delta)
      g = 0.0;
    else
      g = s * (1.0 - (a - s) / delta);
    return t < 0 ? -g : g;
  }
};

class SmoothOuter {
 public:
  using ValueFn = std::function<double(const Vec&)>;
  using GradientFn = std::function<Vec(const Vec&)>;

  /// 1/2 ||A v - f||^2
  static SmoothOuter least_squares(Mat a, Vec f) {
    SmoothOuter g(OuterKind::least_squares, Domain::all_space);
    check_shapes(a, f);
    g.a_ = std::move(a);
    g.f_ = std::move(f);
    g.a_norm2_ = spectral_norm_sq(g.a_);
    return g;
  }

  /// sum_i (Av)_i - f_i + f_i log(f_i / (Av)_i); +inf unless Av > 0.
  static SmoothOuter kl_divergence(Mat a, Vec f) {
    SmoothOuter g(OuterKind::kl_divergence, Domain::positive_orthant);
    check_shapes(a, f);
    if ((f.array() <= 0.0).any()) throw ConfigurationError("kl_divergence: data must be strictly positive");
    if ((a.array() < 0.0).any()) throw ConfigurationError("kl_divergence: matrix must be nonnegative");
    g.a_ = std::move(a);
    g.f_ = std::move(f);
    g.a_norm2_ = spectral_norm_sq(g.a_);
    return g;
  }

  /// sum_i q((A v - f)_i) with q from TruncationParams.
  static SmoothOuter truncated_quadratic(Mat a, Vec f, TruncationParams params = {}) {
    SmoothOuter g(OuterKind::truncated_quadratic, Domain::all_space);
    check_shapes(a, f);
    if (params.lambda <= 0.0 || params.delta <= 0.0) throw ConfigurationError("truncated_quadratic: lambda and delta must be positive");
    g.a_ = std::move(a);
    g.f_ = std::move(f);
    g.trunc_ = params;
    g.a_norm2_ = spectral_norm_sq(g.a_);
    return g;
  }

  static SmoothOuter custom(std::size_t dim, ValueFn value, GradientFn gradient, Domain domain = Domain::all_space) {
    SmoothOuter g(OuterKind::custom, domain);
    g.dim_ = dim;
    g.value_fn_ = std::move(value);
    g.gradient_fn_ = std::move(gradient);
    return g;
  }

  /// Mark a custom outer function as concave (pairs with the linear geometry).
  SmoothOuter& set_concave(bool c = true) {
    concave_ = c;
    return *this;
  }
  /// A relative-smoothness constant certified by the caller.
  SmoothOuter& set_supplied_constant(double l) {
    supplied_l_ = l;
    return *this;
  }
  /// Upper bound on the spectral norm of the Hessian, for custom kinds.
  SmoothOuter& set_curvature_hint(double c) {
    curvature_hint_ = c;
    return *this;
  }

  OuterKind kind() const { return kind_; }
  Domain domain() const { return domain_; }
  bool concave() const { return concave_; }
  std::optional<double> supplied_constant() const { return supplied_l_; }
  const Mat& matrix() const { return a_; }
  const Vec& data() const { return f_; }
  const TruncationParams& truncation() const { return trunc_; }
  /// ||A||_2^2 for matrix kinds.
  double matrix_norm_sq() const { return a_norm2_; }
  std::optional<double> curvature_hint() const { return curvature_hint_; }

  std::size_t input_size() const { return kind_ == OuterKind::custom ? dim_ : static_cast<std::size_t>(a_.cols()); }

  /// True when v lies in the open domain of G.
  bool in_domain(const Vec& v) const {
    if (kind_ == OuterKind::kl_divergence) return ((a_ * v).array() > 0.0).all();
    if (domain_ == Domain::positive_orthant) return (v.array() > 0.0).all();
    return true;
  }

  double value(const Vec& v) const {
    check_input(v);
    switch (kind_) {
      case OuterKind::least_squares:
        return 0.5 * (a_ * v - f_).squaredNorm();
      case OuterKind::kl_divergence: {
        const Vec av = a_ * v;
        double s = 0.0;
        for (Eigen::Index i = 0; i < av.size(); ++i) {
          if (!(av[i] > 0.0)) return kInfinity;
          s += av[i] - f_[i] + f_[i] * std::log(f_[i] / av[i]);
        }
        return s;
      }
      case OuterKind::truncated_quadratic: {
        const Vec r = a_ * v - f_;
        double s = 0.0;
        for (Eigen::Index i = 0; i < r.size(); ++i) s += trunc_.value(r[i]);
        return s;
      }
      case OuterKind::custom:
        if (domain_ == Domain::positive_orthant && !(v.array() > 0.0).all()) return kInfinity;
        return value_fn_(v);
    }
    return kInfinity;
  }

  Vec gradient(const Vec& v) const {
    check_input(v);
    switch (kind_) {
      case OuterKind::least_squares:
        return a_.transpose() * (a_ * v - f_);
      case OuterKind::kl_divergence: {
        const Vec av = a_ * v;
        if (!(av.array() > 0.0).all()) throw DomainError("kl_divergence gradient outside domain");
        return a_.transpose() * (Vec::Ones(av.size()) - f_.cwiseQuotient(av));
      }
      case OuterKind::truncated_quadratic: {
        Vec r = a_ * v - f_;
        for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = trunc_.slope(r[i]);
        return a_.transpose() * r;
      }
      case OuterKind::custom:
        return gradient_fn_(v);
    }
    return Vec();
  }

 private:
  SmoothOuter(OuterKind kind, Domain domain) : kind_(kind), domain_(domain) {}

  static void check_shapes(const Mat& a, const Vec& f) {
    if (a.rows() != f.size()) throw StructuralError("SmoothOuter: rows of A must match data length");
    if (a.size() == 0) throw StructuralError("SmoothOuter: empty matrix");
  }

  static double spectral_norm_sq(const Mat& a) {
    Eigen::JacobiSVD<Mat> svd(a);
    const double s = svd.singularValues()(0);
    return s * s;
  }

  void check_input(const Vec& v) const {
    if (static_cast<std::size_t>(v.size()) != input_size()) throw StructuralError("SmoothOuter: input dimension mismatch");
  }

  OuterKind kind_;
  Domain domain_;
  Mat a_;
  Vec f_;
  TruncationParams trunc_;
  std::size_t dim_ = 0;
  ValueFn value_fn_;
  GradientFn gradient_fn_;
  bool concave_ = false;
  std::optional<double> supplied_l_;
  std::optional<double> curvature_hint_;
  double a_norm2_ = 0.0;
};

/// G(v) = outer(sum over channels), for use with SumCompositionMap::as_separable():
/// v has rows*cols entries (v[i * cols + j]) and outer sees the m row sums.
inline SmoothOuter row_sum_outer(SmoothOuter outer, std::size_t rows, std::size_t cols) {
  auto shared = std::make_shared<const SmoothOuter>(std::move(outer));
  if (shared->input_size() != rows) throw StructuralError("row_sum_outer: outer input must have one entry per row");
  auto collapse = [rows, cols](const Vec& v) {
    Vec s = Vec::Zero(rows);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) s[i] += v[i * cols + j];
    return s;
  };
  auto value = [shared, collapse](const Vec& v) { return shared->value(collapse(v)); };
  auto gradient = [shared, collapse, rows, cols](const Vec& v) {
    const Vec g = shared->gradient(collapse(v));
    Vec out(rows * cols);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = g[i];
    return out;
  };
  return SmoothOuter::custom(rows * cols, value, gradient, Domain::all_space);
}

// ---------------------------------------------------------------------------
// Regularizer
// ---------------------------------------------------------------------------

enum class TvNorm { anisotropic, isotropic };
enum class TvPenalty { convex, concave_reweighted };

/// alpha * sum over pixels of ||(Du)_i|| with forward differences and Neumann
/// boundary on a row-major height x width grid. The concave variant applies
/// gamma(t) = eps * log(1 + t / eps) per edge (anisotropic) or per pixel (isotropic).
struct TvRegularizer {
  std::size_t height = 0;
  std::size_t width = 0;
  double alpha = 0.0;
  TvNorm norm = TvNorm::anisotropic;
  TvPenalty penalty = TvPenalty::convex;
  double concave_scale = 1.0;

  double gamma(double t) const {
    return penalty == TvPenalty::convex ? t : concave_scale * std::log1p(t / concave_scale);
  }
  double gamma_slope(double t) const { return penalty == TvPenalty::convex ? 1.0 : 1.0 / (1.0 + t / concave_scale); }
};

/// Forward differences (dx, dy) with Neumann boundary; row-major layout.
inline void forward_differences(const Vec& u, std::size_t height, std::size_t width, Vec& dx, Vec& dy) {
  dx = Vec::Zero(u.size());
  dy = Vec::Zero(u.size());
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t i = r * width + c;
      if (c + 1 < width) dx[i] = u[i + 1] - u[i];
      if (r + 1 < height) dy[i] = u[i + width] - u[i];
    }
}

class Regularizer {
 public:
  struct Separable {
    std::vector<ScalarFn> terms;  // empty means R = 0
  };

  Regularizer() = default;

  static Regularizer none() { return Regularizer(); }
  static Regularizer separable(std::vector<ScalarFn> terms) {
    Regularizer r;
    r.variant_ = Separable{std::move(terms)};
    return r;
  }
  static Regularizer tv(TvRegularizer tv) {
    if (tv.height == 0 || tv.width == 0) throw StructuralError("tv regularizer needs a nonempty grid");
    if (tv.alpha < 0.0) throw ConfigurationError("tv weight must be nonnegative");
    Regularizer r;
    r.variant_ = tv;
    return r;
  }

  bool is_tv() const { return std::holds_alternative<TvRegularizer>(variant_); }
  bool is_zero() const { return !is_tv() && std::get<Separable>(variant_).terms.empty(); }
  const TvRegularizer& tv_params() const { return std::get<TvRegularizer>(variant_); }
  const std::vector<ScalarFn>& terms() const { return std::get<Separable>(variant_).terms; }

  /// Per-coordinate term; zero function when R = 0.
  double term(std::size_t i, double x) const {
    const auto& t = std::get<Separable>(variant_).terms;
    return t.empty() ? 0.0 : t[i](x);
  }

  double evaluate(const Vec& u) const {
    if (const auto* s = std::get_if<Separable>(&variant_)) {
      if (s->terms.empty()) return 0.0;
      if (s->terms.size() != static_cast<std::size_t>(u.size())) throw StructuralError("regularizer: dimension mismatch");
      double acc = 0.0;
      for (std::size_t i = 0; i < s->terms.size(); ++i) {
        const double v = s->terms[i](u[i]);
        if (std::isnan(v)) throw NumericalError("regularizer evaluated to NaN", static_cast<std::ptrdiff_t>(i), u[i]);
        acc += v;
      }
      return acc;
    }
    return tv_value(tv_params(), u, nullptr);
  }

  /// The convex-majorized regularizer around u_k: identical to evaluate() except
  /// for the concave TV variant, whose penalty is linearized at the edges of u_k.
  double majorant(const Vec& u_k, const Vec& u) const {
    if (!is_tv() || tv_params().penalty == TvPenalty::convex) return evaluate(u);
    return tv_value(tv_params(), u, &u_k);
  }

  /// Per-pixel, per-direction TV weights (including alpha) of the majorant around u_k.
  void tv_weights(const Vec& u_k, Vec& wx, Vec& wy) const {
    const auto& p = tv_params();
    const std::size_t n = p.height * p.width;
    wx = Vec::Constant(static_cast<Eigen::Index>(n), p.alpha);
    wy = wx;
    if (p.penalty == TvPenalty::convex) return;
    Vec dx, dy;
    forward_differences(u_k, p.height, p.width, dx, dy);
    for (std::size_t i = 0; i < n; ++i) {
      if (p.norm == TvNorm::anisotropic) {
        wx[i] = p.alpha * p.gamma_slope(std::abs(dx[i]));
        wy[i] = p.alpha * p.gamma_slope(std::abs(dy[i]));
      } else {
        const double w = p.alpha * p.gamma_slope(std::hypot(dx[i], dy[i]));
        wx[i] = w;
        wy[i] = w;
      }
    }
  }

 private:
  static double tv_value(const TvRegularizer& p, const Vec& u, const Vec* anchor) {
    if (static_cast<std::size_t>(u.size()) != p.height * p.width) throw StructuralError("tv: image size mismatch");
    Vec dx, dy, ax, ay;
    forward_differences(u, p.height, p.width, dx, dy);
    if (anchor) forward_differences(*anchor, p.height, p.width, ax, ay);
    auto pen = [&](double t, double t_k) {
      if (!anchor) return p.gamma(t);
      return p.gamma(t_k) + p.gamma_slope(t_k) * (t - t_k);
    };
    double acc = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      if (p.norm == TvNorm::anisotropic) {
        acc += pen(std::abs(dx[i]), anchor ? std::abs(ax[i]) : 0.0);
        acc += pen(std::abs(dy[i]), anchor ? std::abs(ay[i]) : 0.0);
      } else {
        acc += pen(std::hypot(dx[i], dy[i]), anchor ? std::hypot(ax[i], ay[i]) : 0.0);
      }
    }
    return p.alpha * acc;
  }

  std::variant<Separable, TvRegularizer> variant_;
};

// ---------------------------------------------------------------------------
// Problem
// ---------------------------------------------------------------------------

struct Box {
  Vec lower;
  Vec upper;

  static Box uniform(std::size_t n, double a, double b) {
    if (!(a < b)) throw StructuralError("box: empty interval");
    return Box{Vec::Constant(static_cast<Eigen::Index>(n), a), Vec::Constant(static_cast<Eigen::Index>(n), b)};
  }

  std::size_t size() const { return static_cast<std::size_t>(lower.size()); }
  bool contains(const Vec& u) const {
    return u.size() == lower.size() && (u.array() >= lower.array()).all() && (u.array() <= upper.array()).all();
  }
  Vec clip(const Vec& u) const { return u.cwiseMax(lower).cwiseMin(upper); }

  template <class Rng>
  Vec sample(Rng& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vec u(lower.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = lower[i] + (upper[i] - lower[i]) * unit(rng);
    return u;
  }
};

/// E(u) = G(rho(u)) + R(u) over a box.
struct CompositeProblem {
  SmoothOuter outer;
  std::variant<SeparableMap, SumCompositionMap> inner;
  Regularizer reg;
  Box box;

  std::size_t size() const { return box.size(); }

  bool has_separable_inner() const { return std::holds_alternative<SeparableMap>(inner); }
  const SeparableMap& separable_inner() const {
    if (const auto* m = std::get_if<SeparableMap>(&inner)) return *m;
    throw ConfigurationError("operation requires a separable inner map");
  }
};

inline Vec apply_inner(const SeparableMap& map, const Vec& u) { return map.apply(u); }
inline Vec apply_inner(const SumCompositionMap& map, const Vec& u) { return map.apply(u); }
inline Vec apply_inner(const CompositeProblem& p, const Vec& u) {
  return std::visit([&](const auto& m) { return m.apply(u); }, p.inner);
}

/// Rewrites a problem with a SumCompositionMap into the equivalent separable
/// form (one channel per row plus a row-sum outer function).
inline CompositeProblem to_separable_form(const CompositeProblem& p) {
  if (p.has_separable_inner()) return p;
  const auto& s = std::get<SumCompositionMap>(p.inner);
  return CompositeProblem{row_sum_outer(p.outer, s.rows(), s.cols()), s.as_separable(), p.reg, p.box};
}

/// E(u). +infinity when rho(u) leaves the domain of G.
inline double energy(const CompositeProblem& p, const Vec& u) {
  if (static_cast<std::size_t>(u.size()) != p.size()) throw StructuralError("energy: dimension mismatch");
  const Vec v = apply_inner(p, u);
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::isnan(v[i])) throw NumericalError("inner map evaluated to NaN", i % static_cast<Eigen::Index>(u.size()), u[i % u.size()]);
  const double g = p.outer.value(v);
  if (std::isnan(g)) throw NumericalError("outer function evaluated to NaN", -1);
  if (is_infinite(g)) return kInfinity;
  return g + p.reg.evaluate(u);
}

/// Max over coordinates of |analytic - central difference| / (1 + |analytic|).
inline double check_gradient(const SmoothOuter& outer, const Vec& v, double h_fd) {
  if (!(h_fd > 0.0)) throw ConfigurationError("check_gradient: step must be positive");
  if (!outer.in_domain(v)) throw DomainError("check_gradient: point outside the open domain");
  Vec lo = v, hi = v;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    lo[i] -= h_fd;
    if (!outer.in_domain(lo)) throw DomainError("check_gradient: point too close to the domain boundary");
    lo[i] = v[i];
  }
  const Vec g = outer.gradient(v);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    lo[i] = v[i] - h_fd;
    hi[i] = v[i] + h_fd;
    const double fd = (outer.value(hi) - outer.value(lo)) / (2.0 * h_fd);
    lo[i] = v[i];
    hi[i] = v[i];
    worst = std::max(worst, std::abs(g[i] - fd) / (1.0 + std::abs(g[i])));
  }
  return worst;
}

}  // namespace compmm
