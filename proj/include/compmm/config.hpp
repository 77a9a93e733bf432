#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "compmm/bench.hpp"
#include "compmm/tof.hpp"

namespace compmm {

/// Schema or syntax problem in a configuration file.
class ConfigFileError : public Error {
 public:
  using Error::Error;
};

struct RunOptions {
  std::uint64_t seed = 42;
  int threads = 1;
  std::string out_dir = "out";
  std::string profile = "desk";
};

struct BenchOptions {
  std::vector<std::string> cases;
  std::vector<Method> methods;
  std::size_t n = 30;
  int restarts = 5;
  int scale_samples = 100000;
  double lo = -3.0;
  double hi = 3.0;
  double kl_lower = 1e-2;
  BenchBudget budget;
  bool heatmap = true;
  bool traces = true;
};

struct TofOptions {
  std::size_t height = 48;
  std::size_t width = 48;
  std::string scene = "desk";  // desk | pgm
  double scene_scale = 1.0;
  std::string depth_pgm;
  double pgm_max = 6.5535;  // depth of the largest PGM sample (0.1 mm steps)
  std::vector<double> frequencies{90e6, 120e6};
  std::vector<double> amplitudes{1.0, 1.0};
  std::vector<double> background{0.3, 0.2};
  tof::Autocorr g = tof::Autocorr::trapezoid(0.5);
  double noise = 0.05;  // fraction of the peak difference signal
  std::size_t downsample = 2;
  tof::ReconstructConfig reconstruct;
};

struct AppConfig {
  RunOptions run;
  BenchOptions bench;
  TofOptions tof;

  static AppConfig defaults(const std::string& profile) {
    AppConfig c;
    c.run.profile = profile;
    for (int f = 1; f <= 4; ++f)
      for (char o = 'a'; o <= 'd'; ++o) c.bench.cases.push_back(std::to_string(f) + o);
    c.bench.methods = {Method::proposed, Method::proposed_inertia, Method::gd,  Method::fbs,
                       Method::prox_linear, Method::outer_linear,    Method::adam};
    if (profile == "desk") {
      c.bench.n = 30;
      c.bench.restarts = 5;
      c.bench.budget.max_iter = 500;
    } else if (profile == "paper") {
      c.bench.n = 150;
      c.bench.restarts = 25;
      c.bench.budget.max_iter = 2000;
      c.tof.height = c.tof.width = 96;
    } else {
      throw ConfigFileError("unknown profile '" + profile + "' (expected desk or paper)");
    }
    return c;
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Reads typed values out of a parsed INI tree and reports the offending field and line.
class Reader {
 public:
  Reader(const boost::property_tree::ptree& tree, std::string text) : tree_(tree) {
    std::stringstream ss(text);
    std::string section;
    int line = 0;
    for (std::string raw; std::getline(ss, raw);) {
      ++line;
      const std::string t = trim(raw);
      if (t.empty() || t[0] == ';' || t[0] == '#') continue;
      if (t.front() == '[' && t.back() == ']') {
        section = trim(t.substr(1, t.size() - 2));
        continue;
      }
      const auto eq = t.find('=');
      if (eq != std::string::npos) lines_[section + "." + trim(t.substr(0, eq))] = line;
    }
  }

  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    const auto it = lines_.find(field);
    const std::string where = it == lines_.end() ? "" : "line " + std::to_string(it->second) + ": ";
    throw ConfigFileError(where + "field '" + field + "': " + what);
  }

  /// Rejects unknown sections and keys.
  void check_schema(const std::map<std::string, std::set<std::string>>& schema) const {
    for (const auto& [section, body] : tree_) {
      const auto s = schema.find(section);
      if (s == schema.end()) throw ConfigFileError("unknown section [" + section + "]");
      for (const auto& kv : body) {
        if (!s->second.count(kv.first)) fail(section + "." + kv.first, "unknown key");
      }
    }
  }

  const std::string* raw(const std::string& field) const {
    const auto node = tree_.get_child_optional(boost::property_tree::ptree::path_type(field, '.'));
    return node ? &node->data() : nullptr;
  }

  template <class T>
  void number(const std::string& field, T& out) const {
    const std::string* s = raw(field);
    if (!s) return;
    const std::string v = trim(*s);
    T x{};
    const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) fail(field, "expected a number, got '" + v + "'");
    out = x;
  }

  template <class T>
  void positive(const std::string& field, T& out) const {
    T x = out;
    number(field, x);
    if (!(x > T{})) fail(field, "must be positive");
    out = x;
  }

  void text(const std::string& field, std::string& out) const {
    if (const std::string* s = raw(field)) out = trim(*s);
  }

  void boolean(const std::string& field, bool& out) const {
    const std::string* s = raw(field);
    if (!s) return;
    const std::string v = trim(*s);
    if (v == "true" || v == "1" || v == "yes") out = true;
    else if (v == "false" || v == "0" || v == "no") out = false;
    else fail(field, "expected true or false, got '" + v + "'");
  }

  void numbers(const std::string& field, std::vector<double>& out) const {
    const std::string* s = raw(field);
    if (!s) return;
    std::vector<double> xs;
    for (const auto& item : split_list(*s)) {
      double x = 0;
      const auto r = std::from_chars(item.data(), item.data() + item.size(), x);
      if (r.ec != std::errc() || r.ptr != item.data() + item.size()) fail(field, "expected numbers, got '" + item + "'");
      xs.push_back(x);
    }
    if (xs.empty()) fail(field, "empty list");
    out = std::move(xs);
  }

 private:
  const boost::property_tree::ptree& tree_;
  std::map<std::string, int> lines_;
};

}  // namespace detail

/// Parses an INI configuration on top of the profile defaults. `profile_override`
/// (from the command line) wins over the [run] profile key.
inline AppConfig parse_config(const std::string& text, const std::string& profile_override = "") {
  boost::property_tree::ptree tree;
  std::istringstream is(text);
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigFileError("line " + std::to_string(e.line()) + ": " + e.message());
  }
  const detail::Reader in(tree, text);
  in.check_schema({
      {"run", {"seed", "threads", "out_dir", "profile"}},
      {"bench",
       {"cases", "methods", "n", "restarts", "max_iter", "tol_dz", "beta", "scale_samples", "adam_pilot_iter", "lo",
        "hi", "kl_lower", "grid_n", "heatmap", "traces"}},
      {"tof",
       {"height", "width", "scene", "scene_scale", "depth_pgm", "pgm_max", "frequencies", "amplitudes", "background",
        "autocorr", "ramp", "noise", "downsample", "labels", "alpha", "depth_min", "depth_max", "init_depth", "max_iter",
        "pdhg_iter", "polish_sweeps"}},
  });

  std::string profile = "desk";
  in.text("run.profile", profile);
  if (!profile_override.empty()) profile = profile_override;
  AppConfig c;
  try {
    c = AppConfig::defaults(profile);
  } catch (const ConfigFileError& e) {
    in.fail("run.profile", e.what());
  }

  in.number("run.seed", c.run.seed);
  in.positive("run.threads", c.run.threads);
  in.text("run.out_dir", c.run.out_dir);

  BenchOptions& b = c.bench;
  if (const std::string* s = in.raw("bench.cases"); s && detail::trim(*s) != "all") {
    b.cases = detail::split_list(*s);
    if (b.cases.empty()) in.fail("bench.cases", "empty list");
    for (const auto& name : b.cases)
      if (name.size() != 2 || name[0] < '1' || name[0] > '4' || name[1] < 'a' || name[1] > 'd')
        in.fail("bench.cases", "unknown case '" + name + "' (expected 1a .. 4d)");
  }
  if (const std::string* s = in.raw("bench.methods"); s && detail::trim(*s) != "all") {
    b.methods.clear();
    for (const auto& name : detail::split_list(*s)) {
      const auto m = parse_method(name);
      if (!m) in.fail("bench.methods", "unknown method '" + name + "'");
      b.methods.push_back(*m);
    }
    if (b.methods.empty()) in.fail("bench.methods", "empty list");
  }
  in.positive("bench.n", b.n);
  if (b.n < 3) in.fail("bench.n", "must be at least 3");
  in.positive("bench.restarts", b.restarts);
  if (b.restarts % 2 == 0) in.fail("bench.restarts", "must be odd so the median is a run");
  in.positive("bench.max_iter", b.budget.max_iter);
  in.number("bench.tol_dz", b.budget.tol_dz);
  if (b.budget.tol_dz < 0) in.fail("bench.tol_dz", "must be nonnegative");
  in.number("bench.beta", b.budget.beta);
  if (!(b.budget.beta >= 0 && b.budget.beta < 0.5)) in.fail("bench.beta", "must lie in [0, 0.5)");
  in.positive("bench.scale_samples", b.scale_samples);
  in.positive("bench.adam_pilot_iter", b.budget.adam_pilot_iter);
  in.number("bench.lo", b.lo);
  in.number("bench.hi", b.hi);
  if (!(b.lo < b.hi)) in.fail("bench.hi", "must exceed bench.lo");
  in.positive("bench.kl_lower", b.kl_lower);
  in.positive("bench.grid_n", b.budget.search.grid_n);
  if (b.budget.search.grid_n < 3) in.fail("bench.grid_n", "must be at least 3");
  in.boolean("bench.heatmap", b.heatmap);
  in.boolean("bench.traces", b.traces);

  TofOptions& t = c.tof;
  in.positive("tof.height", t.height);
  in.positive("tof.width", t.width);
  in.text("tof.scene", t.scene);
  if (t.scene != "desk" && t.scene != "pgm") in.fail("tof.scene", "expected desk or pgm");
  in.positive("tof.scene_scale", t.scene_scale);
  in.text("tof.depth_pgm", t.depth_pgm);
  if (t.scene == "pgm" && t.depth_pgm.empty()) in.fail("tof.depth_pgm", "required when scene = pgm");
  in.positive("tof.pgm_max", t.pgm_max);
  in.numbers("tof.frequencies", t.frequencies);
  t.amplitudes.assign(t.frequencies.size(), 1.0);
  t.background.assign(t.frequencies.size(), 0.0);
  in.numbers("tof.amplitudes", t.amplitudes);
  in.numbers("tof.background", t.background);
  if (t.amplitudes.size() != t.frequencies.size()) in.fail("tof.amplitudes", "needs one entry per frequency");
  if (t.background.size() != t.frequencies.size()) in.fail("tof.background", "needs one entry per frequency");
  for (double f : t.frequencies)
    if (!(f > 0)) in.fail("tof.frequencies", "must be positive");
  for (double a : t.amplitudes)
    if (!(a > 0)) in.fail("tof.amplitudes", "must be positive");
  std::string kind = t.g.kind == tof::AutocorrKind::cosine ? "cosine" : "trapezoid";
  double ramp = t.g.p;
  in.text("tof.autocorr", kind);
  in.number("tof.ramp", ramp);
  if (kind == "cosine") t.g = tof::Autocorr::cosine();
  else if (kind == "trapezoid") {
    if (!(ramp >= 0 && ramp < 1)) in.fail("tof.ramp", "must lie in [0, 1)");
    t.g = tof::Autocorr::trapezoid(ramp);
  } else in.fail("tof.autocorr", "expected cosine or trapezoid");
  in.number("tof.noise", t.noise);
  if (t.noise < 0) in.fail("tof.noise", "must be nonnegative");
  in.positive("tof.downsample", t.downsample);
  if (t.height % t.downsample || t.width % t.downsample) in.fail("tof.downsample", "must divide the image size");
  tof::ReconstructConfig& r = t.reconstruct;
  in.positive("tof.labels", r.labels);
  if (r.labels < 2) in.fail("tof.labels", "must be at least 2");
  in.number("tof.alpha", r.alpha);
  if (r.alpha < 0) in.fail("tof.alpha", "must be nonnegative");
  in.number("tof.depth_min", r.depth_min);
  in.number("tof.depth_max", r.depth_max);
  if (!(r.depth_min < r.depth_max)) in.fail("tof.depth_max", "must exceed tof.depth_min");
  in.number("tof.init_depth", r.init_depth);
  in.positive("tof.max_iter", r.max_iter);
  in.positive("tof.pdhg_iter", r.pd.max_iter);
  in.number("tof.polish_sweeps", r.polish_sweeps);
  if (r.polish_sweeps < 0) in.fail("tof.polish_sweeps", "must be nonnegative");
  return c;
}

inline AppConfig load_config(const std::string& path, const std::string& profile_override = "") {
  std::ifstream f(path);
  if (!f) throw ConfigFileError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), profile_override);
}

}  // namespace compmm
