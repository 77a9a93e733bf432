#include <CLI11.hpp>

#include <iostream>

#include "compmm/cli.hpp"

int main(int argc, char** argv) {
  using namespace compmm;
  CLI::App app{"Composite MM solvers: synthetic benchmark, ToF depth reconstruction and self-checks"};
  app.require_subcommand(1);

  cli::Overrides o;
  std::uint64_t seed = 0;
  int threads = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out-dir", o.out_dir, "output directory (created if missing)");
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--profile", o.profile, "default sizes")->check(CLI::IsMember({"desk", "paper"}));
  };

  auto* bench = app.add_subcommand("bench", "run the synthetic benchmark suite");
  add_common(bench);
  auto* tof_cmd = app.add_subcommand("tof", "simulate and reconstruct a multi-frequency ToF scene");
  add_common(tof_cmd);
  auto* self = app.add_subcommand("selftest", "check the solver invariants on small instances");
  cli::SelftestOptions so;
  self->add_option("--seed", so.seed, "master seed");
  self->add_option("--debug-tau-factor", so.tau_factor, "tau = factor / L; values >= 1 are unsafe on purpose")
      ->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (self->parsed()) return cli::cmd_selftest(so);
    for (auto* sub : {bench, tof_cmd}) {
      if (!sub->parsed()) continue;
      if (sub->count("--seed")) o.seed = seed;
      if (sub->count("--threads")) o.threads = threads;
    }
    const AppConfig cfg = cli::resolve(o);
    if (bench->parsed()) return cli::cmd_bench(cfg);
    return cli::cmd_tof(cfg);
  } catch (const ConfigFileError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cli::config_error;
  } catch (const ConfigurationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cli::config_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::integrity_error;
  }
}
