#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "malstein/autocovariance.hpp"
#include "malstein/config.hpp"
#include "malstein/functionals.hpp"
#include "malstein/hermite.hpp"
#include "malstein/report.hpp"

namespace malstein {

// Fully resolved experiment description. Parsed from the structured config
// with CLI flags already applied; content_hash() covers every field that
// influences results (not workers/out/resume), so resumed outputs can be
// matched to the config that produced them.
struct RunConfig {
  std::string kind = "breuer-major-rate";
  std::uint64_t seed = 1;
  int workers = 0;  // 0 keeps the library default
  std::string out_dir = "out";
  bool resume = false;

  HermiteExpansion phi;
  AutocovarianceModel model = AutocovarianceModel::iid();
  std::vector<double> partition{0.0, 0.5, 1.0};
  std::vector<long long> n_grid;
  std::size_t replicates = 100000;
  std::vector<double> b_grid{1.0, 1.25, 1.5, 2.0};

  std::size_t dc_directions = 50;
  std::size_t dc_thresholds = 40;
  std::size_t bootstrap = 200;
  std::size_t dw_rows = 1024;
  std::size_t d2_directions = 16;
  std::size_t d2_shifts = 5;
  std::size_t gamma_replicates = 512;

  std::vector<double> t_grid{0.1, 0.01, 0.001};
  std::size_t stein_budget = 20000;
  std::size_t stein_points = 3;
  std::size_t stein_grid = 64;
  double stein_offset = 0.25;

  std::size_t suite_tables = 50;
  long long suite_max_n = 64;

  static RunConfig from_config(const Config &cfg);
  BreuerMajorSpec spec_at(long long n) const;
  std::uint64_t content_hash() const;
  void validate() const;
};

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t used = 0;
};

// OLS of log d against log n with a row-resampling bootstrap CI.
// Nonpositive entries are dropped; fewer than 4 left is a numeric_error.
FitResult fit_rate(const std::vector<double> &n, const std::vector<double> &d,
                   std::size_t bootstrap = 400,
                   std::uint64_t seed = 0x66697472);

// One n-point of a rate experiment. Each instance is standardized by
// Sigma_exact^{-1/2} before any distance or bound is computed, so the
// reference law is always N(0, I_m); gamma_sq is measured in the same
// standardized coordinates and theorem1 is evaluated at the identity.
struct RateRow {
  long long n = 0;
  std::size_t replicates = 0;
  double dc = 0.0, dc_se = 0.0, dc_env = 0.0;
  double dw = 0.0, dw_ci = 0.0;
  double thm1 = 0.0, thm1_clipped = 0.0;
  double gamma_sq = 0.0, gamma_se = 0.0;
  double cor2_i = 0.0, cor2_ii = 0.0;
  double q1 = 0.0, q2 = 0.0;
  double d2 = 0.0, d2_se = 0.0;
  double bridge = 0.0;
  double sandwich_margin = 0.0;
  bool sandwich_ok = true;
  bool bridge_ok = true;
};

struct RateTable {
  std::vector<RateRow> rows;  // sorted by n
  bool fit_ok = false;
  FitResult fit;
  std::string fit_message;
};

// Computes one fresh rate row; the heart of the breuer-major-rate kind,
// exposed for the acceptance suite.
RateRow rate_point(const RunConfig &cfg, long long n);

struct RunOutput {
  RunReport report;
  RateTable table;      // populated by the breuer-major-rate kind
  SampleBatch samples;  // populated by run_simulate
};

// Executes the configured experiment. With cfg.resume, rows found in
// cfg.out_dir/results.csv under a matching content hash are reused instead
// of recomputed. Does not write anything.
RunOutput run(const RunConfig &cfg);

// run() plus artifact emission into cfg.out_dir; returns the exit code
// (nonzero when any hard failure was recorded).
int run_to_dir(const RunConfig &cfg);

// Utility views used by the simulate / bounds / distances subcommands.
RunOutput run_simulate(const RunConfig &cfg);
RunOutput run_bounds(const RunConfig &cfg);
RunOutput run_distances(const RunConfig &cfg);

// Inequality suite plus the constant-chain audit: the recursion coefficient
// over m in [1,8], ||Sigma^{-1}|| in [0.1,10], and the sup of
// x^{1/2}|log x|^{3/2} on (0, 1/e]. Any violation is a hard failure.
RunOutput run_verify(const RunConfig &cfg);

}  // namespace malstein
