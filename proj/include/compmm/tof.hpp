#pragma once

#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "compmm/solver.hpp"

namespace compmm::tof {

inline constexpr double kSpeedOfLight = 299792458.0;

// ---------------------------------------------------------------------------
// Autocorrelation
// ---------------------------------------------------------------------------

enum class AutocorrKind { cosine, trapezoid };

/// 2pi-periodic, even correlation curve with peak 1 at phase 0.
/// The trapezoid kind correlates a trapezoid wave (ramps of total length p*pi per
/// half period) with the square reference: the triangle wave of a square signal,
/// box-averaged over [phi - w, phi + w] with w = p*pi/2. p = 0 is the triangle itself.
struct Autocorr {
  AutocorrKind kind = AutocorrKind::cosine;
  double p = 0.5;

  static Autocorr cosine() { return {AutocorrKind::cosine, 0.0}; }
  static Autocorr trapezoid(double p = 0.5) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigurationError("trapezoid ramp fraction must lie in [0, 1)");
    return {AutocorrKind::trapezoid, p};
  }

  double operator()(double phi) const {
    if (kind == AutocorrKind::cosine) return std::cos(phi);
    const double w = half_width();
    if (w == 0.0) return triangle(phi);
    return (antiderivative(phi + w) - antiderivative(phi - w)) / (2.0 * w * (1.0 - w / std::numbers::pi));
  }

  double deriv(double phi) const {
    if (kind == AutocorrKind::cosine) return -std::sin(phi);
    const double w = half_width();
    if (w == 0.0) {
      const double x = wrap(phi);
      return x == 0.0 ? 0.0 : (x > 0.0 ? -2.0 : 2.0) / std::numbers::pi;
    }
    return (triangle(phi + w) - triangle(phi - w)) / (2.0 * w * (1.0 - w / std::numbers::pi));
  }

  double half_width() const { return kind == AutocorrKind::trapezoid ? 0.5 * p * std::numbers::pi : 0.0; }

  /// Wraps to [-pi, pi).
  static double wrap(double x) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double y = std::fmod(x + std::numbers::pi, two_pi);
    if (y < 0.0) y += two_pi;
    return y - std::numbers::pi;
  }
  static double triangle(double phi) { return 1.0 - 2.0 * std::abs(wrap(phi)) / std::numbers::pi; }
  // periodic antiderivative of the triangle wave (it integrates to zero over a period)
  static double antiderivative(double phi) {
    const double x = wrap(phi), a = std::abs(x);
    const double v = a - a * a / std::numbers::pi;
    return x < 0.0 ? -v : v;
  }
};

// ---------------------------------------------------------------------------
// Scene and measurements
// ---------------------------------------------------------------------------

/// Row-major H x W image.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  Vec data;

  Image() = default;
  Image(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), data(Vec::Constant(static_cast<Eigen::Index>(h * w), fill)) {}
  std::size_t size() const { return height * width; }
  double& operator()(std::size_t r, std::size_t c) { return data[static_cast<Eigen::Index>(r * width + c)]; }
  double operator()(std::size_t r, std::size_t c) const { return data[static_cast<Eigen::Index>(r * width + c)]; }
};

struct ToFScene {
  Image depth;                      // meters
  std::vector<double> frequencies;  // Hz
  std::vector<double> amplitudes;
  std::vector<double> background;
  int n_steps = 4;
  Autocorr g = Autocorr::trapezoid();

  std::size_t num_frequencies() const { return frequencies.size(); }

  void validate() const {
    if (frequencies.empty()) throw ConfigurationError("tof: at least one frequency is required");
    if (amplitudes.size() != frequencies.size() || background.size() != frequencies.size())
      throw ConfigurationError("tof: amplitudes and backgrounds need one entry per frequency");
    for (double a : amplitudes)
      if (!(a > 0.0)) throw ConfigurationError("tof: amplitudes must be positive");
    for (double f : frequencies)
      if (!(f > 0.0)) throw ConfigurationError("tof: frequencies must be positive");
    if (n_steps < 2 || n_steps % 2 != 0) throw ConfigurationError("tof: the phase-step count must be even");
  }

  /// Depth period lambda / (2 f_i).
  double unambiguous_range(std::size_t i) const { return kSpeedOfLight / (2.0 * frequencies[i]); }
};

/// The model parameters needed for inversion (no depth, no background).
struct ToFModel {
  std::vector<double> frequencies;
  std::vector<double> amplitudes;
  int n_steps = 4;
  Autocorr g;

  static ToFModel of(const ToFScene& s) { return {s.frequencies, s.amplitudes, s.n_steps, s.g}; }
  std::size_t differences() const { return static_cast<std::size_t>(n_steps / 2); }
  std::size_t channels() const { return frequencies.size() * differences(); }

  /// rho_ij(u) = a_i (g(phi) - g(phi + pi)), phi = 4 pi f_i u / lambda + 2 pi j / n.
  double phase(std::size_t i, std::size_t j, double u) const {
    return 4.0 * std::numbers::pi * frequencies[i] * u / kSpeedOfLight +
           2.0 * std::numbers::pi * static_cast<double>(j) / n_steps;
  }
  double rho(std::size_t i, std::size_t j, double u) const {
    const double phi = phase(i, j, u);
    return amplitudes[i] * (g(phi) - g(phi + std::numbers::pi));
  }
  double rho_deriv(std::size_t i, std::size_t j, double u) const {
    const double phi = phase(i, j, u);
    return amplitudes[i] * (g.deriv(phi) - g.deriv(phi + std::numbers::pi)) * 4.0 * std::numbers::pi * frequencies[i] /
           kSpeedOfLight;
  }
  ScalarFn rho_fn(std::size_t i, std::size_t j) const {
    const ToFModel self = *this;
    ScalarFn f;
    f.value = [self, i, j](double u) { return self.rho(i, j, u); };
    f.derivative = [self, i, j](double u) { return self.rho_deriv(i, j, u); };
    return f;
  }
};

struct ToFMeasurements {
  std::vector<Image> y;  // y[i * n_steps/2 + j], low resolution
  std::size_t downsample = 1;
  double sigma = 0.0;
  std::size_t height = 0;  // high-resolution size
  std::size_t width = 0;
};

/// Block average by factor s.
inline Image downsample(const Image& x, std::size_t s) {
  if (s == 0 || x.height % s != 0 || x.width % s != 0) throw ConfigurationError("downsample factor must divide the image size");
  Image out(x.height / s, x.width / s);
  const double w = 1.0 / static_cast<double>(s * s);
  for (std::size_t r = 0; r < x.height; ++r)
    for (std::size_t c = 0; c < x.width; ++c) out(r / s, c / s) += w * x(r, c);
  return out;
}

/// Adjoint of downsample.
inline Image downsample_adjoint(const Image& y, std::size_t s) {
  Image out(y.height * s, y.width * s);
  const double w = 1.0 / static_cast<double>(s * s);
  for (std::size_t r = 0; r < out.height; ++r)
    for (std::size_t c = 0; c < out.width; ++c) out(r, c) = w * y(r / s, c / s);
  return out;
}

inline Image upsample_nearest(const Image& y, std::size_t s) {
  Image out(y.height * s, y.width * s);
  for (std::size_t r = 0; r < out.height; ++r)
    for (std::size_t c = 0; c < out.width; ++c) out(r, c) = y(r / s, c / s);
  return out;
}

/// Difference measurements y_ij = k_ij(u) - k_{i,j+n/2}(u), block averaged and with
/// Gaussian noise of standard deviation sigma. The background cancels analytically.
inline ToFMeasurements forward(const ToFScene& scene, std::size_t factor, double sigma, std::uint64_t seed) {
  scene.validate();
  if (!(sigma >= 0.0)) throw ConfigurationError("tof: noise level must be nonnegative");
  const ToFModel model = ToFModel::of(scene);
  ToFMeasurements m;
  m.downsample = factor;
  m.sigma = sigma;
  m.height = scene.depth.height;
  m.width = scene.depth.width;
  std::mt19937_64 rng(derive_seed(seed, 0x70F));
  std::normal_distribution<double> nd(0.0, 1.0);
  for (std::size_t i = 0; i < scene.num_frequencies(); ++i)
    for (std::size_t j = 0; j < model.differences(); ++j) {
      Image hi(m.height, m.width);
      for (std::size_t p = 0; p < hi.size(); ++p) hi.data[static_cast<Eigen::Index>(p)] = model.rho(i, j, scene.depth.data[static_cast<Eigen::Index>(p)]);
      Image lo = downsample(hi, factor);
      if (sigma > 0.0)
        for (auto& v : lo.data) v += sigma * nd(rng);
      m.y.push_back(std::move(lo));
    }
  return m;
}

struct ClosedForm {
  Image depth;
  std::vector<bool> valid;
};

/// Per-pixel inversion for sinusoidal four-step data:
/// d = lambda / (4 pi f_i) * wrap_[0, 2pi)(atan2(-y_i1, y_i0)).
inline ClosedForm closed_form_depth(const ToFMeasurements& m, std::size_t i, int n_steps, double frequency,
                                    double eps = 1e-12) {
  if (n_steps != 4) throw ConfigurationError("closed form needs four phase steps");
  const std::size_t base = i * 2;
  if (base + 1 >= m.y.size()) throw ConfigurationError("closed form: frequency index out of range");
  const Image& y0 = m.y[base];
  const Image& y1 = m.y[base + 1];
  ClosedForm out{Image(y0.height, y0.width), std::vector<bool>(y0.size(), true)};
  const double scale = kSpeedOfLight / (4.0 * std::numbers::pi * frequency);
  for (std::size_t p = 0; p < y0.size(); ++p) {
    const auto k = static_cast<Eigen::Index>(p);
    if (std::hypot(y0.data[k], y1.data[k]) <= eps) {
      out.valid[p] = false;
      out.depth.data[k] = 0.0;
      continue;
    }
    double phi = std::atan2(-y1.data[k], y0.data[k]);
    if (phi < 0.0) phi += 2.0 * std::numbers::pi;
    if (phi >= 2.0 * std::numbers::pi) phi = 0.0;
    out.depth.data[k] = scale * phi;
  }
  return out;
}

inline ClosedForm closed_form_depth(const ToFMeasurements& m, const ToFModel& model, std::size_t i) {
  return closed_form_depth(m, i, model.n_steps, model.frequencies[i]);
}

// ---------------------------------------------------------------------------
// Energy and reconstruction
// ---------------------------------------------------------------------------

/// E(u) = sum_ij ||y_ij - K rho_ij(u)||^2 + alpha ||grad u||_1 as a composite problem over the depth box.
inline CompositeProblem make_problem(const ToFMeasurements& m, const ToFModel& model, double alpha, double depth_min,
                                     double depth_max) {
  if (m.y.size() != model.channels()) throw StructuralError("tof: measurement count does not match the model");
  if (!(depth_min < depth_max)) throw ConfigurationError("tof: empty depth range");
  if (!(alpha >= 0.0)) throw ConfigurationError("tof: alpha must be nonnegative");
  const std::size_t H = m.height, W = m.width, n = H * W, C = model.channels(), s = m.downsample;
  std::vector<ScalarFn> fns;
  for (std::size_t i = 0; i < model.frequencies.size(); ++i)
    for (std::size_t j = 0; j < model.differences(); ++j) fns.push_back(model.rho_fn(i, j));
  auto y = std::make_shared<const std::vector<Image>>(m.y);
  const auto channel = [H, W, n](const Vec& v, std::size_t c) {
    Image x(H, W);
    x.data = v.segment(static_cast<Eigen::Index>(c * n), static_cast<Eigen::Index>(n));
    return x;
  };
  auto value = [y, channel, C, s](const Vec& v) {
    double e = 0.0;
    for (std::size_t c = 0; c < C; ++c) e += ((*y)[c].data - downsample(channel(v, c), s).data).squaredNorm();
    return e;
  };
  auto gradient = [y, channel, C, s, n](const Vec& v) {
    Vec g(static_cast<Eigen::Index>(C * n));
    for (std::size_t c = 0; c < C; ++c) {
      Image r = downsample(channel(v, c), s);
      r.data -= (*y)[c].data;
      g.segment(static_cast<Eigen::Index>(c * n), static_cast<Eigen::Index>(n)) = 2.0 * downsample_adjoint(r, s).data;
    }
    return g;
  };
  SmoothOuter outer = SmoothOuter::custom(C * n, value, gradient);
  outer.set_curvature_hint(2.0 / static_cast<double>(s * s));  // ||2 K^T K|| for block averaging
  TvRegularizer tv;
  tv.height = H;
  tv.width = W;
  tv.alpha = alpha;
  return CompositeProblem{std::move(outer), SeparableMap(n, fns), Regularizer::tv(tv), Box::uniform(n, depth_min, depth_max)};
}

inline double tof_energy(const Image& u, const ToFMeasurements& m, const ToFModel& model, double alpha) {
  if (u.height != m.height || u.width != m.width) throw StructuralError("tof: depth image size does not match");
  const CompositeProblem p = make_problem(m, model, alpha, -kInfinity, kInfinity);
  return energy(p, u.data);
}

struct ReconstructConfig {
  double alpha = 0.1;
  double depth_min = 0.5;
  double depth_max = 6.0;
  std::size_t labels = 128;
  double init_depth = 1.0;
  int max_iter = 30;
  double tol_dz = 1e-10;
  PdhgConfig pd{3000, 50, 1e-7};
  int polish_sweeps = 5;
  int threads = 1;
};

struct Reconstruction {
  Image depth;
  SolverRun run;
  bool guard_violation = false;
};

/// MM with lifted majorizers, started from a constant depth (or from `init` when given).
inline Reconstruction reconstruct(const ToFMeasurements& m, const ToFModel& model, const ReconstructConfig& cfg,
                                  const Image* init = nullptr) {
  const CompositeProblem p = make_problem(m, model, cfg.alpha, cfg.depth_min, cfg.depth_max);
  const Geometry geom = Geometry::quadratic();
  const double L = smoothness_constant(p.outer, geom).L;
  SolverConfig sc = SolverConfig::make(Method::proposed, L);
  sc.max_iter = cfg.max_iter;
  sc.tol_dz = cfg.tol_dz;
  sc.lifting.labels = cfg.labels;
  sc.lifting.pd = cfg.pd;
  sc.lifting.polish_sweeps = cfg.polish_sweeps;
  sc.threads = cfg.threads;
  Vec u0 = init ? init->data : Vec::Constant(static_cast<Eigen::Index>(m.height * m.width), cfg.init_depth);
  u0 = p.box.clip(u0);
  Reconstruction r;
  r.run = run(p, geom, sc, u0);
  r.depth = Image(m.height, m.width);
  r.depth.data = r.run.u_final;
  r.guard_violation = r.run.termination == Termination::guard_violation;
  return r;
}

// ---------------------------------------------------------------------------
// Scenes and metrics
// ---------------------------------------------------------------------------

/// Piecewise-constant desk scene in [1.45, 4.3] m: back wall, desk top, a monitor,
/// a chair and a round near object. Depths sit away from the 90/120 MHz period boundaries.
/// Rectangle edges fall on even pixel coordinates; the disk edge does not.
inline Image desk_scene(std::size_t height = 48, std::size_t width = 48) {
  Image d(height, width, 4.3);
  const auto even = [](double frac, std::size_t n) { return 2 * static_cast<std::size_t>(std::lround(frac * n / 2.0)); };
  const auto rect = [&](double x0, double x1, double y0, double y1, double v) {
    for (std::size_t r = even(y0, height); r < even(y1, height); ++r)
      for (std::size_t c = even(x0, width); c < even(x1, width); ++c) d(r, c) = v;
  };
  rect(0.0, 1.0, 0.55, 1.0, 2.9);    // desk
  rect(0.15, 0.5, 0.2, 0.55, 3.55);  // monitor
  rect(0.6, 0.85, 0.35, 0.9, 2.1);   // chair
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c)
      if (std::hypot((c + 0.5) / width - 0.3, (r + 0.5) / height - 0.78) < 0.12) d(r, c) = 1.45;
  return d;
}

/// Two-frequency scene with the given depth image (unit amplitudes, trapezoid correlation).
inline ToFScene default_scene(Image depth, Autocorr g = Autocorr::trapezoid()) {
  ToFScene s;
  s.depth = std::move(depth);
  s.frequencies = {90e6, 120e6};
  s.amplitudes = {1.0, 1.0};
  s.background = {0.3, 0.2};
  s.n_steps = 4;
  s.g = g;
  return s;
}

/// Noise level as a fraction of the peak difference signal 2 max_i a_i.
inline double noise_sigma(const ToFScene& s, double fraction) {
  return fraction * 2.0 * *std::max_element(s.amplitudes.begin(), s.amplitudes.end());
}

inline double rmse(const Image& a, const Image& b) {
  if (a.size() != b.size() || a.size() == 0) throw StructuralError("rmse: image size mismatch");
  return std::sqrt((a.data - b.data).squaredNorm() / static_cast<double>(a.size()));
}

/// Fraction of pixels whose period index floor(2 f_i u / lambda) matches the truth for every frequency.
inline double period_index_rate(const Image& u, const Image& truth, const std::vector<double>& frequencies) {
  if (u.size() != truth.size() || u.size() == 0) throw StructuralError("period index: image size mismatch");
  std::size_t ok = 0;
  for (std::size_t p = 0; p < u.size(); ++p) {
    bool all = true;
    for (double f : frequencies) {
      const double T = kSpeedOfLight / (2.0 * f);
      all = all && std::floor(u.data[static_cast<Eigen::Index>(p)] / T) == std::floor(truth.data[static_cast<Eigen::Index>(p)] / T);
    }
    ok += all ? 1 : 0;
  }
  return static_cast<double>(ok) / static_cast<double>(u.size());
}

// ---------------------------------------------------------------------------
// PGM (P5, 16 bit)
// ---------------------------------------------------------------------------

/// Writes x linearly mapped from [lo, hi] to [0, 65535] (clamped), big-endian samples.
inline void write_pgm16(const std::string& path, const Image& x, double lo, double hi) {
  if (!(lo < hi)) throw ConfigurationError("pgm: empty value range");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigurationError("cannot open '" + path + "' for writing");
  os << "P5\n" << x.width << ' ' << x.height << "\n65535\n";
  for (std::size_t p = 0; p < x.size(); ++p) {
    const double t = std::clamp((x.data[static_cast<Eigen::Index>(p)] - lo) / (hi - lo), 0.0, 1.0);
    const auto v = static_cast<std::uint16_t>(std::lround(t * 65535.0));
    const char b[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xFF)};
    os.write(b, 2);
  }
  if (!os) throw ConfigurationError("failed writing '" + path + "'");
}

/// Reads a P5 image (8 or 16 bit) and maps [0, maxval] back to [lo, hi].
inline Image read_pgm16(const std::string& path, double lo, double hi) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigurationError("cannot open '" + path + "'");
  std::string magic;
  is >> magic;
  if (magic != "P5") throw ConfigurationError("'" + path + "' is not a binary PGM");
  const auto next = [&]() {
    is >> std::ws;
    while (is.peek() == '#') {
      std::string skip;
      std::getline(is, skip);
      is >> std::ws;
    }
    long v = -1;
    is >> v;
    return v;
  };
  const long w = next(), h = next(), maxval = next();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw ConfigurationError("'" + path + "': bad PGM header");
  is.get();
  Image x(static_cast<std::size_t>(h), static_cast<std::size_t>(w));
  const int bytes = maxval > 255 ? 2 : 1;
  for (std::size_t p = 0; p < x.size(); ++p) {
    unsigned char b[2] = {0, 0};
    is.read(reinterpret_cast<char*>(b), bytes);
    if (!is) throw ConfigurationError("'" + path + "': truncated PGM data");
    const double v = bytes == 2 ? (b[0] << 8 | b[1]) : b[0];
    x.data[static_cast<Eigen::Index>(p)] = lo + (hi - lo) * v / static_cast<double>(maxval);
  }
  return x;
}

}  // namespace compmm::tof
