#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "compmm/bench.hpp"
#include "compmm/config.hpp"
#include "compmm/invariants.hpp"
#include "compmm/tof.hpp"

namespace compmm::cli {

enum ExitCode : int { ok = 0, config_error = 1, integrity_error = 2 };

/// Command-line values that override the configuration file.
struct Overrides {
  std::string config_path;
  std::string out_dir;
  std::string profile;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

inline AppConfig resolve(const Overrides& o) {
  AppConfig c = o.config_path.empty() ? AppConfig::defaults(o.profile.empty() ? "desk" : o.profile)
                                      : load_config(o.config_path, o.profile);
  if (!o.out_dir.empty()) c.run.out_dir = o.out_dir;
  if (o.seed) c.run.seed = *o.seed;
  if (o.threads) {
    if (*o.threads < 1) throw ConfigFileError("--threads must be positive");
    c.run.threads = *o.threads;
  }
  return c;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw ConfigFileError("cannot write '" + p.string() + "'");
  return os;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

inline SuiteConfig suite_config(const AppConfig& c) {
  SuiteConfig s;
  for (const auto& name : c.bench.cases)
    s.cases.push_back(CaseSpec::parse(name, c.bench.n, c.run.seed, c.bench.lo, c.bench.hi, c.bench.kl_lower));
  s.methods = c.bench.methods;
  s.restarts = c.bench.restarts;
  s.seed = c.run.seed;
  s.threads = c.run.threads;
  s.scale_samples = c.bench.scale_samples;
  s.budget = c.bench.budget;
  s.keep_traces = c.bench.traces;
  return s;
}

/// Writes summary.csv, runs.csv, heatmap.svg and traces/ under <out_dir>/bench.
inline int cmd_bench(const AppConfig& c, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  SuiteResult res;
  try {
    res = run_suite(suite_config(c));
  } catch (const DegenerateScaleError& e) {
    err << "error: " << e.what() << "\n";
    return integrity_error;
  }
  const std::filesystem::path dir = std::filesystem::path(c.run.out_dir) / "bench";
  std::filesystem::create_directories(dir);
  {
    auto os = detail::open_out(dir / "summary.csv");
    write_summary_csv(os, res);
  }
  {
    auto os = detail::open_out(dir / "runs.csv");
    write_runs_csv(os, res);
  }
  if (c.bench.heatmap) {
    auto os = detail::open_out(dir / "heatmap.svg");
    write_heatmap_svg(os, res, c.bench.methods);
  }
  if (c.bench.traces) {
    std::filesystem::create_directories(dir / "traces");
    for (const auto& r : res.runs) {
      if (r.run.trace.empty()) continue;
      auto os = detail::open_out(dir / "traces" /
                                 (r.case_name + "_" + to_string(r.method) + "_r" + std::to_string(r.restart) + ".csv"));
      write_trace_csv(os, r.run);
    }
  }
  for (const auto& cell : res.cells)
    log << cell.case_name << "  " << to_string(cell.method) << "  median gap " << format_number(cell.median_gap) << "\n";
  for (const auto& e : res.errors) err << "integrity: " << e << "\n";
  log << "wrote " << dir.string() << "\n";
  return res.errors.empty() ? ok : integrity_error;
}

// ---------------------------------------------------------------------------
// tof
// ---------------------------------------------------------------------------

inline tof::ToFScene tof_scene(const TofOptions& t) {
  tof::Image depth;
  if (t.scene == "pgm") {
    depth = tof::read_pgm16(t.depth_pgm, 0.0, t.pgm_max);
  } else {
    depth = tof::desk_scene(t.height, t.width);
    depth.data *= t.scene_scale;
  }
  tof::ToFScene s;
  s.depth = std::move(depth);
  s.frequencies = t.frequencies;
  s.amplitudes = t.amplitudes;
  s.background = t.background;
  s.n_steps = 4;
  s.g = t.g;
  return s;
}

struct TofReport {
  std::vector<double> closed_form_rmse;
  double reconstruction_rmse = 0.0;
  double period_rate = 0.0;
  double energy_truth = 0.0;
  double energy_final = 0.0;
  tof::Reconstruction rec;
};

inline tof::ToFMeasurements tof_measurements(const AppConfig& c, const tof::ToFScene& scene) {
  return tof::forward(scene, c.tof.downsample, tof::noise_sigma(scene, c.tof.noise), c.run.seed);
}

inline TofReport run_tof(const AppConfig& c, const tof::ToFScene& scene, const tof::ToFMeasurements& m) {
  const TofOptions& t = c.tof;
  const auto model = tof::ToFModel::of(scene);
  TofReport r;
  for (std::size_t i = 0; i < scene.num_frequencies(); ++i) {
    const auto cf = tof::closed_form_depth(m, model, i);
    r.closed_form_rmse.push_back(tof::rmse(tof::upsample_nearest(cf.depth, t.downsample), scene.depth));
  }
  tof::ReconstructConfig rc = t.reconstruct;
  rc.threads = c.run.threads;
  r.rec = tof::reconstruct(m, model, rc);
  r.reconstruction_rmse = tof::rmse(r.rec.depth, scene.depth);
  r.period_rate = tof::period_index_rate(r.rec.depth, scene.depth, scene.frequencies);
  r.energy_truth = tof::tof_energy(scene.depth, m, model, rc.alpha);
  r.energy_final = r.rec.run.final_energy();
  return r;
}

/// Writes ground truth, measurements, closed-form depths and the reconstruction as PGM,
/// plus metrics.csv and energy_trace.csv under <out_dir>/tof.
inline int cmd_tof(const AppConfig& c, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  const TofOptions& t = c.tof;
  const tof::ToFScene scene = tof_scene(t);
  scene.validate();
  if (scene.depth.height % t.downsample || scene.depth.width % t.downsample)
    throw ConfigFileError("field 'tof.downsample': must divide the image size");
  const auto m = tof_measurements(c, scene);
  const auto model = tof::ToFModel::of(scene);
  const TofReport r = run_tof(c, scene, m);

  const std::filesystem::path dir = std::filesystem::path(c.run.out_dir) / "tof";
  std::filesystem::create_directories(dir);
  const double depth_max = std::max(t.pgm_max, scene.depth.data.maxCoeff());
  tof::write_pgm16((dir / "truth.pgm").string(), scene.depth, 0.0, depth_max);
  tof::write_pgm16((dir / "reconstruction.pgm").string(), r.rec.depth, 0.0, depth_max);
  const double span = 2.0 * *std::max_element(scene.amplitudes.begin(), scene.amplitudes.end()) + 4.0 * m.sigma;
  for (std::size_t i = 0; i < scene.num_frequencies(); ++i) {
    for (std::size_t j = 0; j < model.differences(); ++j)
      tof::write_pgm16((dir / ("y_" + std::to_string(i) + "_" + std::to_string(j) + ".pgm")).string(),
                       m.y[i * model.differences() + j], -span, span);
    tof::write_pgm16((dir / ("closed_form_" + std::to_string(i) + ".pgm")).string(),
                     tof::closed_form_depth(m, model, i).depth, 0.0, depth_max);
  }
  {
    auto os = detail::open_out(dir / "metrics.csv");
    os << "metric,value\r\n";
    for (std::size_t i = 0; i < r.closed_form_rmse.size(); ++i)
      os << "closed_form_rmse_" << i << ',' << format_number(r.closed_form_rmse[i]) << "\r\n";
    os << "reconstruction_rmse," << format_number(r.reconstruction_rmse) << "\r\n";
    os << "period_index_rate," << format_number(r.period_rate) << "\r\n";
    os << "energy_truth," << format_number(r.energy_truth) << "\r\n";
    os << "energy_final," << format_number(r.energy_final) << "\r\n";
    os << "iterations," << r.rec.run.iterations() << "\r\n";
    os << "termination," << to_string(r.rec.run.termination) << "\r\n";
  }
  {
    auto os = detail::open_out(dir / "energy_trace.csv");
    write_trace_csv(os, r.rec.run);
  }
  for (std::size_t i = 0; i < r.closed_form_rmse.size(); ++i)
    log << "closed form " << i << " rmse " << format_number(r.closed_form_rmse[i]) << " m\n";
  log << "reconstruction rmse " << format_number(r.reconstruction_rmse) << " m, period index rate "
      << format_number(r.period_rate) << "\n";
  if (r.rec.guard_violation) err << "warning: " << r.rec.run.message << "\n";
  log << "wrote " << dir.string() << "\n";
  return ok;
}


// ---------------------------------------------------------------------------
// selftest
// ---------------------------------------------------------------------------

struct SelftestOptions {
  double tau_factor = 0.99;  // tau = factor / L
  std::uint64_t seed = 42;
};

/// Invariant suites at desk scale: four family pairs at n = 10, short proposed runs.
inline std::vector<CheckResult> selftest(const SelftestOptions& o) {
  std::vector<CaseInstance> cases;
  for (const char* name : {"1a", "2b", "3c", "4d"}) cases.push_back(make_case(CaseSpec::parse(name, 10, o.seed)));
  std::vector<SolverRun> runs;
  std::mt19937_64 rng(derive_seed(o.seed, 0x5E1F));
  for (const auto& inst : cases) {
    SolverConfig cfg;
    cfg.L = inst.L;
    cfg.tau = o.tau_factor / inst.L;
    cfg.allow_unsafe_step = true;
    cfg.guard = false;
    cfg.max_iter = 40;
    runs.push_back(run(inst.problem, inst.geom, cfg, inst.problem.box.sample(rng)));
  }
  std::vector<const SolverRun*> ptrs;
  for (const auto& r : runs) ptrs.push_back(&r);
  return {check_majorization(cases, o.tau_factor, 200, o.seed),
          check_descent(ptrs),
          check_rate(ptrs),
          check_relative_smoothness(cases, 200, o.seed),
          check_lifting_oracle(20, 4, o.seed),
          check_reduction_identity(20, o.seed),
          check_reduction_jacobi(20, 20, o.seed)};
}

inline int cmd_selftest(const SelftestOptions& o, std::ostream& log = std::cout) {
  bool all = true;
  for (const auto& c : selftest(o)) {
    log << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
    all = all && c.pass;
  }
  return all ? ok : integrity_error;
}

}  // namespace compmm::cli
