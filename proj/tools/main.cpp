#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "malstein/common.hpp"
#include "malstein/config.hpp"
#include "malstein/harness.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int workers = 0;
  bool resume = false;
  CLI::Option *seed_opt = nullptr;
  CLI::Option *workers_opt = nullptr;
  CLI::Option *out_opt = nullptr;
};

void add_common(CLI::App *cmd, CommonFlags &f) {
  cmd->add_option("--config", f.config_path,
                  "Config file ([section] headers, key = value lines)");
  f.seed_opt = cmd->add_option("--seed", f.seed, "Master seed (overrides config)");
  f.workers_opt = cmd->add_option(
      "--workers", f.workers,
      "Worker threads (overrides MALSTEIN_WORKERS and config)");
  f.out_opt = cmd->add_option("--out", f.out_dir,
                              "Output directory (overrides config)");
  cmd->add_flag("--resume", f.resume,
                "Reuse completed n-points from an existing results.csv");
}

malstein::RunConfig load(const CommonFlags &f) {
  malstein::Config cfg = f.config_path.empty()
                             ? malstein::Config()
                             : malstein::Config::parse_file(f.config_path);
  malstein::RunConfig rc = malstein::RunConfig::from_config(cfg);
  if (f.seed_opt->count() > 0) rc.seed = f.seed;
  if (f.workers_opt->count() > 0) {
    rc.workers = f.workers;
  } else if (const char *env = std::getenv("MALSTEIN_WORKERS")) {
    rc.workers = std::atoi(env);
  }
  if (f.out_opt->count() > 0) rc.out_dir = f.out_dir;
  rc.resume = f.resume;
  return rc;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{
      "Normal-approximation rate experiments for vectors of Gaussian-path "
      "functionals: sampling, bound evaluation, distance estimation, "
      "smoothing diagnostics and exact-inequality verification."};
  app.require_subcommand(1);

  CommonFlags sim_f, bounds_f, rates_f, dist_f, verify_f, stein_f;
  CLI::App *sim = app.add_subcommand(
      "simulate", "Sample the configured functional and report column stats");
  add_common(sim, sim_f);
  CLI::App *bounds = app.add_subcommand(
      "bounds", "Evaluate every bound report across the configured n grid");
  add_common(bounds, bounds_f);
  CLI::App *rates = app.add_subcommand(
      "rates", "Run the configured rate experiment and fit the decay slope");
  add_common(rates, rates_f);
  CLI::App *dist = app.add_subcommand(
      "distances", "Estimate convex, transport and smooth-class distances");
  add_common(dist, dist_f);
  CLI::App *verify = app.add_subcommand(
      "verify",
      "Exact inequality suite plus the recursion-constant and sup audits");
  add_common(verify, verify_f);
  CLI::App *stein = app.add_subcommand(
      "stein-diag", "Smoothing-inequality and Hessian-probe diagnostics");
  add_common(stein, stein_f);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      malstein::RunConfig rc = load(sim_f);
      malstein::RunOutput out = malstein::run_simulate(rc);
      int code = out.report.write_all(rc.out_dir);
      out.samples.save_csv(rc.out_dir + "/samples.csv");
      return code;
    }
    if (bounds->parsed()) {
      malstein::RunConfig rc = load(bounds_f);
      return malstein::run_bounds(rc).report.write_all(rc.out_dir);
    }
    if (rates->parsed()) {
      malstein::RunConfig rc = load(rates_f);
      if (rc.kind != "breuer-major-rate" && rc.kind != "fourth-moment")
        rc.kind = "breuer-major-rate";
      return malstein::run_to_dir(rc);
    }
    if (dist->parsed()) {
      malstein::RunConfig rc = load(dist_f);
      return malstein::run_distances(rc).report.write_all(rc.out_dir);
    }
    if (verify->parsed()) {
      malstein::RunConfig rc = load(verify_f);
      return malstein::run_verify(rc).report.write_all(rc.out_dir);
    }
    malstein::RunConfig rc = load(stein_f);
    rc.kind = "stein-diagnostic";
    return malstein::run_to_dir(rc);
  } catch (const malstein::config_error &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
