#include "malstein/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <thread>

#include <Eigen/Dense>

#include "malstein/bounds.hpp"
#include "malstein/common.hpp"
#include "malstein/covariance.hpp"
#include "malstein/distances.hpp"
#include "malstein/gausssim.hpp"
#include "malstein/parallel.hpp"
#include "malstein/rng.hpp"
#include "malstein/stein.hpp"

namespace malstein {

namespace {

const std::set<std::string> kKinds = {"breuer-major-rate", "fourth-moment",
                                      "inequality-suite", "stein-diagnostic"};

std::string fmt_u(std::uint64_t v) { return std::to_string(v); }
std::string fmt_i(long long v) { return std::to_string(v); }

double cell_d(const std::vector<std::string> &c, std::size_t i) {
  return std::strtod(c[i].c_str(), nullptr);
}
long long cell_i(const std::vector<std::string> &c, std::size_t i) {
  return std::strtoll(c[i].c_str(), nullptr, 10);
}

std::string join_map(const std::map<std::string, double> &kv) {
  std::string out;
  for (const auto &[k, v] : kv) {
    if (!out.empty()) out += ';';
    out += k + "=" + format_double(v);
  }
  return out;
}

std::string join_flags(const std::vector<std::string> &flags) {
  std::string out;
  for (const auto &f : flags) {
    if (!out.empty()) out += ';';
    out += f;
  }
  return out;
}

[[noreturn]] void rethrow_with_context(const std::string &ctx) {
  try {
    throw;
  } catch (const contract_error &e) {
    throw contract_error(ctx + e.what());
  } catch (const model_error &e) {
    throw model_error(ctx + e.what());
  } catch (const config_error &e) {
    throw config_error(ctx + e.what());
  } catch (const resource_error &e) {
    throw resource_error(ctx + e.what());
  } catch (const numeric_error &e) {
    throw numeric_error(ctx + e.what());
  } catch (const std::exception &e) {
    throw std::runtime_error(ctx + e.what());
  }
}

// Runs body(i) for i in [0, count) on up to `workers` threads. Results go
// into caller-owned slots, so the schedule does not affect output. The
// first failing index's exception is rethrown with its context label.
void for_points(std::size_t count, int workers,
                const std::function<std::string(std::size_t)> &label,
                const std::function<void(std::size_t)> &body) {
  std::vector<std::exception_ptr> errors(count);
  auto guarded = [&](std::size_t i) {
    try {
      body(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  int w = workers > 0 ? workers : 1;
  if (w <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) guarded(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(w), count);
    for (std::size_t t = 0; t < nthreads; ++t)
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i = next.fetch_add(1);
          if (i >= count) return;
          guarded(i);
        }
      });
    for (auto &th : pool) th.join();
  }
  for (std::size_t i = 0; i < count; ++i)
    if (errors[i]) {
      try {
        std::rethrow_exception(errors[i]);
      } catch (...) {
        rethrow_with_context(label(i) + ": ");
      }
    }
}

Eigen::MatrixXd inv_sqrt_psd(const Eigen::MatrixXd &s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  if (es.info() != Eigen::Success)
    throw numeric_error("standardization: eigendecomposition failed");
  Eigen::VectorXd lam = es.eigenvalues();
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam[i] <= 0.0)
      throw model_error("standardization: covariance not positive definite");
    lam[i] = 1.0 / std::sqrt(lam[i]);
  }
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

SampleBatch apply_map(const SampleBatch &b, const Eigen::MatrixXd &A) {
  const std::size_t m = b.m;
  SampleBatch out;
  out.m = m;
  out.R = b.R;
  out.provenance = b.provenance;
  out.provenance.generator += " | standardized";
  out.data.resize(b.data.size());
  parallel_for(static_cast<std::ptrdiff_t>(b.R), [&](std::ptrdiff_t r) {
    const double *src = b.data.data() + static_cast<std::size_t>(r) * m;
    double *dst = out.data.data() + static_cast<std::size_t>(r) * m;
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += A(i, j) * src[j];
      dst[i] = acc;
    }
  });
  return out;
}

SampleBatch sub_batch(const SampleBatch &b, std::size_t begin,
                      std::size_t count) {
  SampleBatch out;
  out.m = b.m;
  out.R = count;
  out.provenance = b.provenance;
  out.data.assign(b.data.begin() + begin * b.m,
                  b.data.begin() + (begin + count) * b.m);
  return out;
}

struct DwCi {
  double value = 0.0;
  double ci = 0.0;
  double se = 0.0;
};

// Full-sample transport value plus a confidence width. In one dimension the
// rearrangement is exact and the width comes from the weighted bootstrap;
// in higher dimensions it comes from the spread of four disjoint-quarter
// solves, which overestimates the full-solve error (small-sample empirical
// dW is biased upward, so the width is conservative).
DwCi dw_with_ci(const SampleBatch &f, const RunConfig &cfg,
                std::uint64_t point_seed) {
  std::size_t rw = std::min<std::size_t>(cfg.dw_rows, f.R);
  SampleBatch fs = sub_batch(f, 0, rw);
  CovarianceMatrix eye = CovarianceMatrix::identity(f.m);
  SampleBatch g = sample_normal(eye, rw, mix64(point_seed ^ derive_stream("dw-ref")));
  TransportOptions topt;
  if (f.m == 1) {
    topt.bootstrap = cfg.bootstrap;
    topt.bootstrap_seed = mix64(point_seed ^ derive_stream("dw-boot"));
    DistanceEstimate est = dW_estimate(fs, g, topt);
    double ci = 1.96 * est.se;
    if (est.envelope95 > est.value) ci = std::max(ci, est.envelope95 - est.value);
    return {est.value, ci, est.se};
  }
  topt.method = TransportOptions::Method::exact;
  DistanceEstimate full = dW_estimate(fs, g, topt);
  std::size_t quarter = rw / 4;
  double se = 0.0;
  if (quarter >= 2) {
    std::vector<double> qs;
    for (std::size_t q = 0; q < 4; ++q) {
      SampleBatch fq = sub_batch(fs, q * quarter, quarter);
      SampleBatch gq = sub_batch(g, q * quarter, quarter);
      qs.push_back(dW_estimate(fq, gq, topt).value);
    }
    se = mean_se(qs).se;
  }
  return {full.value, 1.96 * se, se};
}

const std::vector<std::string> kRateColumns = {
    "schema_version", "kind",        "n",
    "replicates",     "dc_lower",    "dc_se",
    "dc_envelope95",  "dw",          "dw_ci",
    "theorem1",       "theorem1_clipped", "gamma_sq",
    "gamma_sq_se",    "corollary2_i", "corollary2_ii",
    "q1",             "q2",          "d2",
    "d2_se",          "bridge",      "sandwich_margin",
    "sandwich_ok",    "bridge_ok"};

std::vector<std::string> rate_cells(const std::string &kind, const RateRow &r) {
  return {fmt_i(kSchemaVersion),
          kind,
          fmt_i(r.n),
          fmt_u(r.replicates),
          format_double(r.dc),
          format_double(r.dc_se),
          format_double(r.dc_env),
          format_double(r.dw),
          format_double(r.dw_ci),
          format_double(r.thm1),
          format_double(r.thm1_clipped),
          format_double(r.gamma_sq),
          format_double(r.gamma_se),
          format_double(r.cor2_i),
          format_double(r.cor2_ii),
          format_double(r.q1),
          format_double(r.q2),
          format_double(r.d2),
          format_double(r.d2_se),
          format_double(r.bridge),
          format_double(r.sandwich_margin),
          r.sandwich_ok ? "1" : "0",
          r.bridge_ok ? "1" : "0"};
}

RateRow rate_from_cells(const std::vector<std::string> &c) {
  RateRow r;
  r.n = cell_i(c, 2);
  r.replicates = static_cast<std::size_t>(cell_i(c, 3));
  r.dc = cell_d(c, 4);
  r.dc_se = cell_d(c, 5);
  r.dc_env = cell_d(c, 6);
  r.dw = cell_d(c, 7);
  r.dw_ci = cell_d(c, 8);
  r.thm1 = cell_d(c, 9);
  r.thm1_clipped = cell_d(c, 10);
  r.gamma_sq = cell_d(c, 11);
  r.gamma_se = cell_d(c, 12);
  r.cor2_i = cell_d(c, 13);
  r.cor2_ii = cell_d(c, 14);
  r.q1 = cell_d(c, 15);
  r.q2 = cell_d(c, 16);
  r.d2 = cell_d(c, 17);
  r.d2_se = cell_d(c, 18);
  r.bridge = cell_d(c, 19);
  r.sandwich_margin = cell_d(c, 20);
  r.sandwich_ok = c[21] == "1";
  r.bridge_ok = c[22] == "1";
  return r;
}

std::uint64_t point_seed_for(const RunConfig &cfg, long long n) {
  return mix64(cfg.seed ^ derive_stream("n-point", static_cast<std::uint64_t>(n)));
}

// Sorted, deduplicated n grid with resumed rows split out.
struct ResumePlan {
  std::vector<long long> grid;
  std::vector<long long> todo;
  std::map<long long, std::vector<std::string>> done;
};

ResumePlan plan_points(const RunConfig &cfg, const RunReport &report,
                       std::vector<std::string> *warnings) {
  ResumePlan plan;
  std::set<long long> uniq(cfg.n_grid.begin(), cfg.n_grid.end());
  plan.grid.assign(uniq.begin(), uniq.end());
  if (cfg.resume) {
    auto prev = read_results_csv(cfg.out_dir + "/results.csv");
    if (prev && prev->config_hash == report.config_hash &&
        prev->columns == report.columns) {
      for (auto &row : prev->rows) {
        long long n = cell_i(row, 2);
        if (uniq.count(n)) plan.done[n] = std::move(row);
      }
    } else if (prev) {
      warnings->push_back(
          "resume: existing results.csv was produced by a different config; "
          "recomputing all points");
    }
  }
  for (long long n : plan.grid)
    if (!plan.done.count(n)) plan.todo.push_back(n);
  return plan;
}

ConvexTestClass shared_halfspace_class(const RunConfig &cfg, std::size_t m) {
  return ConvexTestClass::half_spaces(
      m, cfg.dc_directions, cfg.dc_thresholds,
      mix64(cfg.seed ^ derive_stream("dc-class")));
}

DcOptions dc_options_for(const RunConfig &cfg, std::uint64_t point_seed) {
  DcOptions opts;
  opts.bootstrap = cfg.bootstrap;
  opts.bootstrap_seed = mix64(point_seed ^ derive_stream("dc-boot"));
  opts.mc_seed = mix64(point_seed ^ derive_stream("dc-ref"));
  return opts;
}

RunOutput run_rates_kind(const RunConfig &cfg);
RunOutput run_fourth_kind(const RunConfig &cfg);
RunOutput run_suite_kind(const RunConfig &cfg, const std::string &kind_label);
RunOutput run_stein_kind(const RunConfig &cfg);

}  // namespace

RunConfig RunConfig::from_config(const Config &cfg) {
  RunConfig rc;
  rc.kind = cfg.get_string("run", "kind", rc.kind);
  rc.seed = cfg.get_u64("run", "seed", rc.seed);
  rc.workers = static_cast<int>(cfg.get_u64("run", "workers", 0));
  rc.out_dir = cfg.get_string("run", "out", rc.out_dir);

  if (cfg.has("phi", "coeffs"))
    rc.phi = HermiteExpansion::from_coeffs(cfg.get_doubles("phi", "coeffs"));
  else
    rc.phi = HermiteExpansion::from_coeffs({0.0, 0.0, 1.0});

  std::string mk = cfg.get_string("model", "kind", "iid");
  if (mk == "iid") {
    rc.model = AutocovarianceModel::iid();
  } else if (mk == "ar1") {
    rc.model = AutocovarianceModel::ar1(cfg.get_double("model", "param"));
  } else if (mk == "fgn") {
    rc.model = AutocovarianceModel::fgn(cfg.get_double("model", "param"));
  } else if (mk == "table") {
    rc.model = AutocovarianceModel::table(cfg.get_doubles("model", "table"));
  } else {
    throw config_error("[model] kind: unknown value '" + mk + "'");
  }

  if (cfg.has("partition", "points"))
    rc.partition = cfg.get_doubles("partition", "points");

  if (cfg.has("grid", "n")) {
    rc.n_grid = cfg.get_ints("grid", "n");
  } else {
    for (long long n = 64; n <= 4096; n *= 2) rc.n_grid.push_back(n);
  }
  rc.replicates = cfg.get_u64("grid", "replicates", rc.replicates);
  if (cfg.has("grid", "b")) rc.b_grid = cfg.get_doubles("grid", "b");

  rc.dc_directions = cfg.get_u64("distances", "directions", rc.dc_directions);
  rc.dc_thresholds = cfg.get_u64("distances", "thresholds", rc.dc_thresholds);
  rc.bootstrap = cfg.get_u64("distances", "bootstrap", rc.bootstrap);
  rc.dw_rows = cfg.get_u64("distances", "dw_rows", rc.dw_rows);
  rc.d2_directions = cfg.get_u64("distances", "d2_directions", rc.d2_directions);
  rc.d2_shifts = cfg.get_u64("distances", "d2_shifts", rc.d2_shifts);
  rc.gamma_replicates =
      cfg.get_u64("distances", "gamma_replicates", rc.gamma_replicates);

  if (cfg.has("stein", "t")) rc.t_grid = cfg.get_doubles("stein", "t");
  rc.stein_budget = cfg.get_u64("stein", "budget", rc.stein_budget);
  rc.stein_points = cfg.get_u64("stein", "points", rc.stein_points);
  rc.stein_grid = cfg.get_u64("stein", "grid", rc.stein_grid);
  rc.stein_offset = cfg.get_double("stein", "halfspace_offset", rc.stein_offset);

  rc.suite_tables = cfg.get_u64("suite", "tables", rc.suite_tables);
  rc.suite_max_n =
      static_cast<long long>(cfg.get_u64("suite", "max_n",
                                         static_cast<std::uint64_t>(rc.suite_max_n)));
  return rc;
}

BreuerMajorSpec RunConfig::spec_at(long long n) const {
  BreuerMajorSpec spec;
  spec.phi = phi;
  spec.model = model;
  spec.partition = partition;
  spec.n = static_cast<std::size_t>(n);
  return spec;
}

std::uint64_t RunConfig::content_hash() const {
  std::string blob = "kind=" + kind + ";seed=" + fmt_u(seed) + ";phi=";
  for (double c : phi.coeff) blob += format_double(c) + " ";
  blob += ";model=" + model.id() + ";partition=";
  for (double t : partition) blob += format_double(t) + " ";
  blob += ";n=";
  for (long long n : n_grid) blob += fmt_i(n) + " ";
  blob += ";R=" + fmt_u(replicates) + ";b=";
  for (double b : b_grid) blob += format_double(b) + " ";
  blob += ";dc=" + fmt_u(dc_directions) + "x" + fmt_u(dc_thresholds) +
          ";boot=" + fmt_u(bootstrap) + ";dw=" + fmt_u(dw_rows) +
          ";d2=" + fmt_u(d2_directions) + "x" + fmt_u(d2_shifts) +
          ";gamma=" + fmt_u(gamma_replicates) + ";t=";
  for (double t : t_grid) blob += format_double(t) + " ";
  blob += ";stein=" + fmt_u(stein_budget) + "," + fmt_u(stein_points) + "," +
          fmt_u(stein_grid) + "," + format_double(stein_offset) +
          ";suite=" + fmt_u(suite_tables) + "," + fmt_i(suite_max_n);
  return fnv1a64(blob);
}

void RunConfig::validate() const {
  if (!kKinds.count(kind))
    throw config_error("[run] kind: unknown experiment kind '" + kind + "'");
  if (n_grid.empty()) throw config_error("[grid] n: empty n grid");
  for (long long n : n_grid)
    if (n < 2) throw config_error("[grid] n: values must be >= 2");
  if (replicates < 8) throw config_error("[grid] replicates: need at least 8");
  for (double b : b_grid)
    if (!(b >= 1.0 && b <= 2.0))
      throw config_error("[grid] b: values must lie in [1, 2]");
  if (dc_directions == 0 || dc_thresholds == 0)
    throw config_error("[distances] directions/thresholds must be positive");
  if (dw_rows < 8 || dw_rows > 4096)
    throw config_error("[distances] dw_rows must lie in [8, 4096]");
  if (d2_directions == 0 || d2_shifts == 0)
    throw config_error("[distances] d2_directions/d2_shifts must be positive");
  if (gamma_replicates < 2)
    throw config_error("[distances] gamma_replicates: need at least 2");
  for (double t : t_grid)
    if (!(t > 0.0 && t < 1.0))
      throw config_error("[stein] t: values must lie in (0, 1)");
  if (stein_grid < 32) throw config_error("[stein] grid: need at least 32 nodes");
  if (stein_points == 0) throw config_error("[stein] points: need at least 1");
  if (suite_tables == 0) throw config_error("[suite] tables: need at least 1");
  if (suite_max_n < 8) throw config_error("[suite] max_n: need at least 8");

  bool instance_kind = kind == "breuer-major-rate" || kind == "fourth-moment" ||
                       kind == "stein-diagnostic";
  if (instance_kind) {
    for (long long n : n_grid) {
      try {
        spec_at(n).validate();
      } catch (const std::exception &e) {
        throw config_error("instance at n=" + fmt_i(n) + ": " + e.what());
      }
    }
  }
  if (kind == "fourth-moment" && phi.max_index() > 2)
    throw config_error(
        "[phi] coeffs: fourth-moment runs need Hermite degree <= 2 for the "
        "exact quadratic-form representation");
}

FitResult fit_rate(const std::vector<double> &n, const std::vector<double> &d,
                   std::size_t bootstrap, std::uint64_t seed) {
  if (n.size() != d.size()) throw contract_error("fit_rate: length mismatch");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < n.size(); ++i)
    if (n[i] > 0.0 && d[i] > 0.0) {
      x.push_back(std::log(n[i]));
      y.push_back(std::log(d[i]));
    }
  if (x.size() < 4)
    throw numeric_error("fit_rate: only " + std::to_string(x.size()) +
                        " positive entries, need at least 4");
  auto ols = [](const std::vector<double> &xs, const std::vector<double> &ys,
                double &slope, double &intercept) {
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(xs.size());
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx <= 0.0) return false;
    slope = sxy / sxx;
    intercept = my - slope * mx;
    return true;
  };
  FitResult fit;
  fit.used = x.size();
  if (!ols(x, y, fit.slope, fit.intercept))
    throw numeric_error("fit_rate: degenerate abscissa (all n equal)");

  NormalStream u(seed, derive_stream("fit-bootstrap"));
  std::vector<double> slopes;
  slopes.reserve(bootstrap);
  std::uint64_t ctr = 0;
  std::vector<double> bx(x.size()), by(x.size());
  for (std::size_t b = 0; b < bootstrap; ++b) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      std::size_t idx = u.index(ctr++, x.size());
      bx[j] = x[idx];
      by[j] = y[idx];
    }
    double s = 0.0, i0 = 0.0;
    if (ols(bx, by, s, i0)) slopes.push_back(s);
  }
  if (slopes.size() >= 16) {
    std::sort(slopes.begin(), slopes.end());
    auto pct = [&](double p) {
      double pos = p * static_cast<double>(slopes.size() - 1);
      std::size_t lo = static_cast<std::size_t>(pos);
      std::size_t hi = std::min(lo + 1, slopes.size() - 1);
      double w = pos - static_cast<double>(lo);
      return slopes[lo] * (1.0 - w) + slopes[hi] * w;
    };
    fit.ci_lo = pct(0.025);
    fit.ci_hi = pct(0.975);
  } else {
    fit.ci_lo = fit.ci_hi = fit.slope;
  }
  return fit;
}

RateRow rate_point(const RunConfig &cfg, long long n) {
  BreuerMajorSpec spec = cfg.spec_at(n);
  spec.validate();
  const std::size_t m = spec.dim();
  const std::uint64_t pseed = point_seed_for(cfg, n);

  Eigen::MatrixXd sig = exact_covariance(spec);
  CovarianceMatrix cov(sig);
  Eigen::MatrixXd A = inv_sqrt_psd(cov.matrix());
  CovarianceMatrix eye = CovarianceMatrix::identity(m);

  SampleBatch F = breuer_major_sample(spec, cfg.replicates, pseed);
  SampleBatch Fs = apply_map(F, A);

  MeanSe g2 = estimate_gamma_sq(spec, sig, cfg.gamma_replicates,
                                mix64(pseed ^ derive_stream("gamma-sq")), A);
  BoundReport thm1 = theorem1_bound(eye, m, g2.mean);

  ConvexTestClass cls = shared_halfspace_class(cfg, m);
  DistanceEstimate dc = dc_lower(Fs, eye, cls, dc_options_for(cfg, pseed));

  DwCi dw = dw_with_ci(Fs, cfg, pseed);

  auto family = default_d2_family(m, cfg.d2_directions, cfg.d2_shifts,
                                  mix64(cfg.seed ^ derive_stream("d2-family")));
  DistanceEstimate d2 = d2_estimate(Fs, eye, family);

  const bool two_sparse = spec.phi.is_two_sparse();
  RateRow row;
  row.n = n;
  row.replicates = cfg.replicates;
  row.dc = dc.value;
  row.dc_se = dc.se;
  row.dc_env = dc.envelope95;
  row.dw = dw.value;
  row.dw_ci = dw.ci;
  row.thm1 = thm1.value;
  row.thm1_clipped = thm1.clipped;
  row.gamma_sq = g2.mean;
  row.gamma_se = g2.se;
  double best_ii = 0.0;
  for (double b : cfg.b_grid) {
    BoundReport rep = corollary2_rates(spec.model, n, b, two_sparse);
    row.cor2_i = rep.terms.at("rate_i");
    if (two_sparse) {
      double rii = rep.terms.at("rate_ii");
      if (best_ii == 0.0 || rii < best_ii) best_ii = rii;
    }
  }
  row.cor2_ii = best_ii;
  QuadSums qs = quad_sums_exact(spec.model, n);
  row.q1 = qs.q1;
  row.q2 = qs.q2;
  row.d2 = d2.value;
  row.d2_se = d2.se;
  BoundReport bridge = conwass_bridge(eye, m, dw.value + dw.ci);
  row.bridge = bridge.value;
  SandwichResult sw = sandwich_check(dc, thm1, 3.0);
  row.sandwich_margin = sw.margin;
  row.sandwich_ok = sw.ok;
  row.bridge_ok = dc.value <= bridge.value;
  return row;
}

namespace {

RunOutput run_rates_kind(const RunConfig &cfg) {
  RunOutput out;
  out.report.run_kind = cfg.kind;
  out.report.config_hash = cfg.content_hash();
  out.report.columns = kRateColumns;

  ResumePlan plan = plan_points(cfg, out.report, &out.report.warnings);
  std::vector<RateRow> fresh(plan.todo.size());
  for_points(
      plan.todo.size(), cfg.workers,
      [&](std::size_t i) { return "n=" + fmt_i(plan.todo[i]); },
      [&](std::size_t i) { fresh[i] = rate_point(cfg, plan.todo[i]); });
  for (const RateRow &r : fresh) plan.done[r.n] = rate_cells(cfg.kind, r);

  const std::size_t m = cfg.partition.size() - 1;
  std::size_t sandwich_ok = 0, bridge_ok = 0;
  std::vector<double> ns, ds;
  for (auto &[n, cells] : plan.done) {
    RateRow r = rate_from_cells(cells);
    out.table.rows.push_back(r);
    out.report.rows.push_back(cells);
    ns.push_back(static_cast<double>(r.n));
    ds.push_back(r.dc);
    if (r.sandwich_ok) {
      ++sandwich_ok;
      if (r.dc > r.thm1_clipped)
        out.report.warnings.push_back(
            "n=" + fmt_i(r.n) +
            ": dc_lower exceeds the clipped bound but stays within 3 SE");
    } else {
      out.report.failures.push_back(
          {"sandwich-violation", "n=" + fmt_i(r.n),
           "dc_lower exceeds the clipped bound by more than 3 bootstrap SE",
           {{"dc_lower", r.dc},
            {"bound_clipped", r.thm1_clipped},
            {"dc_se", r.dc_se}}});
    }
    if (r.bridge_ok) {
      ++bridge_ok;
      double tight = 2.0 * std::sqrt(2.0) *
                     std::sqrt(gamma_identity_bound(m)) * std::sqrt(r.dw);
      if (r.dc > tight)
        out.report.warnings.push_back(
            "n=" + fmt_i(r.n) +
            ": dc_lower above the transport bridge at the point estimate; "
            "covered by the dW confidence width");
    } else {
      out.report.failures.push_back(
          {"bridge-violation", "n=" + fmt_i(r.n),
           "dc_lower exceeds 2 sqrt(2) gamma^(1/2) (dW + CI)^(1/2)",
           {{"dc_lower", r.dc}, {"bridge", r.bridge}, {"dw", r.dw},
            {"dw_ci", r.dw_ci}}});
    }
  }

  out.report.summary_lines.push_back(
      "instance: m=" + fmt_u(m) + ", model=" + cfg.model.id() +
      ", phi degree " + std::to_string(cfg.phi.max_index()) +
      ", R=" + fmt_u(cfg.replicates));
  try {
    out.table.fit = fit_rate(ns, ds, 400, mix64(cfg.seed ^ derive_stream("fit")));
    out.table.fit_ok = true;
    out.report.summary_lines.push_back(
        "dc_lower log-log slope: " + format_double(out.table.fit.slope) +
        " (95% CI [" + format_double(out.table.fit.ci_lo) + ", " +
        format_double(out.table.fit.ci_hi) + "], " +
        std::to_string(out.table.fit.used) + " points)");
  } catch (const std::exception &e) {
    out.table.fit_message = e.what();
    out.report.summary_lines.push_back(std::string("rate fit unavailable: ") +
                                       e.what());
  }
  out.report.summary_lines.push_back(
      "sandwich: " + std::to_string(sandwich_ok) + "/" +
      std::to_string(out.table.rows.size()) + " rows ok");
  out.report.summary_lines.push_back(
      "bridge: " + std::to_string(bridge_ok) + "/" +
      std::to_string(out.table.rows.size()) + " rows ok");
  return out;
}

const std::vector<std::string> kFourthColumns = {
    "schema_version", "kind",    "n",
    "replicates",     "method",  "gap",
    "gap_se",         "corollary1", "corollary1_clipped",
    "dc_lower",       "dc_se",   "sandwich_margin",
    "sandwich_ok"};

struct FourthRow {
  long long n = 0;
  std::string method;
  double gap = 0.0, gap_se = 0.0;
  double c1 = 0.0, c1_clipped = 0.0;
  double dc = 0.0, dc_se = 0.0;
  double margin = 0.0;
  bool ok = true;
};

QuadraticFormVector qf_from_spec(const BreuerMajorSpec &spec) {
  const std::size_t n = spec.n;
  const std::size_t m = spec.dim();
  const double a1 =
      spec.phi.coeff.size() > 1 ? spec.phi.coeff[1] : 0.0;
  const double a2 =
      spec.phi.coeff.size() > 2 ? spec.phi.coeff[2] : 0.0;
  Eigen::MatrixXd T = toeplitz(spec.model, n);
  Eigen::LLT<Eigen::MatrixXd> llt(T);
  if (llt.info() != Eigen::Success)
    throw model_error("fourth-moment: path covariance not positive definite");
  Eigen::MatrixXd L = llt.matrixL();
  double scale = 1.0 / std::sqrt(static_cast<double>(n));
  QuadraticFormVector v;
  v.N = n;
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t beg = spec.block_begin(i), end = spec.block_end(i);
    Eigen::MatrixXd Li = L.middleRows(static_cast<Eigen::Index>(beg),
                                      static_cast<Eigen::Index>(end - beg));
    v.A.push_back(a2 * scale * (Li.transpose() * Li));
    if (a1 != 0.0)
      v.b.push_back(a1 * scale * Li.colwise().sum().transpose());
  }
  v.validate();
  return v;
}

FourthRow fourth_point(const RunConfig &cfg, long long n) {
  BreuerMajorSpec spec = cfg.spec_at(n);
  spec.validate();
  const std::size_t m = spec.dim();
  const std::uint64_t pseed = point_seed_for(cfg, n);

  Eigen::MatrixXd sig = exact_covariance(spec);
  CovarianceMatrix cov(sig);
  Eigen::MatrixXd A = inv_sqrt_psd(cov.matrix());
  CovarianceMatrix eye = CovarianceMatrix::identity(m);

  SampleBatch F = breuer_major_sample(spec, cfg.replicates, pseed);
  SampleBatch Fs = apply_map(F, A);

  const bool has_linear = spec.phi.coeff.size() > 1 && spec.phi.coeff[1] != 0.0;
  const bool exact = has_linear ? spec.n <= 128 : spec.n <= 512;

  FourthRow row;
  row.n = n;
  double neg_tol = 1e-9;
  if (exact) {
    QuadraticFormVector v = qf_from_spec(spec);
    QuadraticFormVector vs;
    vs.N = v.N;
    for (std::size_t i = 0; i < m; ++i) {
      Eigen::MatrixXd Ai = Eigen::MatrixXd::Zero(v.N, v.N);
      Eigen::VectorXd bi = Eigen::VectorXd::Zero(v.N);
      for (std::size_t j = 0; j < m; ++j) {
        Ai += A(i, j) * v.A[j];
        if (!v.b.empty()) bi += A(i, j) * v.b[j];
      }
      vs.A.push_back(std::move(Ai));
      if (!v.b.empty()) vs.b.push_back(std::move(bi));
    }
    QfMoments mom = qf_exact_moments(vs);
    row.gap = mom.gap;
    row.method = "exact";
  } else {
    std::vector<double> s4(Fs.R);
    parallel_for(static_cast<std::ptrdiff_t>(Fs.R), [&](std::ptrdiff_t r) {
      double sq = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        double x = Fs.at(static_cast<std::size_t>(r), i);
        sq += x * x;
      }
      s4[static_cast<std::size_t>(r)] = sq * sq;
    });
    MeanSe ms = mean_se(s4);
    double md = static_cast<double>(m);
    row.gap = ms.mean - (md * md + 2.0 * md);
    row.gap_se = ms.se;
    row.method = "mc";
    neg_tol = 5.0 * ms.se + 1e-12;
  }

  BoundReport c1 = corollary1_bound(eye, m, row.gap, neg_tol);
  row.c1 = c1.value;
  row.c1_clipped = c1.clipped;

  ConvexTestClass cls = shared_halfspace_class(cfg, m);
  DistanceEstimate dc = dc_lower(Fs, eye, cls, dc_options_for(cfg, pseed));
  row.dc = dc.value;
  row.dc_se = dc.se;
  SandwichResult sw = sandwich_check(dc, c1, 3.0);
  row.margin = sw.margin;
  row.ok = sw.ok;
  return row;
}

std::vector<std::string> fourth_cells(const std::string &kind,
                                      const RunConfig &cfg,
                                      const FourthRow &r) {
  return {fmt_i(kSchemaVersion), kind, fmt_i(r.n), fmt_u(cfg.replicates),
          r.method, format_double(r.gap), format_double(r.gap_se),
          format_double(r.c1), format_double(r.c1_clipped),
          format_double(r.dc), format_double(r.dc_se),
          format_double(r.margin), r.ok ? "1" : "0"};
}

RunOutput run_fourth_kind(const RunConfig &cfg) {
  RunOutput out;
  out.report.run_kind = cfg.kind;
  out.report.config_hash = cfg.content_hash();
  out.report.columns = kFourthColumns;

  ResumePlan plan = plan_points(cfg, out.report, &out.report.warnings);
  std::vector<FourthRow> fresh(plan.todo.size());
  for_points(
      plan.todo.size(), cfg.workers,
      [&](std::size_t i) { return "n=" + fmt_i(plan.todo[i]); },
      [&](std::size_t i) { fresh[i] = fourth_point(cfg, plan.todo[i]); });
  for (const FourthRow &r : fresh) plan.done[r.n] = fourth_cells(cfg.kind, cfg, r);

  std::size_t ok_rows = 0;
  for (auto &[n, cells] : plan.done) {
    bool ok = cells[12] == "1";
    double dc = cell_d(cells, 9), clipped = cell_d(cells, 8);
    if (ok) {
      ++ok_rows;
      if (dc > clipped)
        out.report.warnings.push_back(
            "n=" + fmt_i(n) +
            ": dc_lower exceeds the clipped fourth-moment bound but stays "
            "within 3 SE");
    } else {
      out.report.failures.push_back(
          {"sandwich-violation", "n=" + fmt_i(n),
           "dc_lower exceeds the clipped fourth-moment bound by more than 3 "
           "bootstrap SE",
           {{"dc_lower", dc}, {"bound_clipped", clipped}}});
    }
    out.report.rows.push_back(cells);
  }
  out.report.summary_lines.push_back(
      "fourth-moment sandwich: " + std::to_string(ok_rows) + "/" +
      std::to_string(plan.done.size()) + " rows ok");
  return out;
}

const std::vector<std::string> kSuiteColumns = {
    "schema_version", "kind", "table_id", "n",  "b",     "q1",
    "young_majorant", "q2",   "holder_majorant", "brute_rel_err", "ok"};

RunOutput run_suite_kind(const RunConfig &cfg, const std::string &kind_label) {
  RunOutput out;
  out.report.run_kind = kind_label;
  out.report.config_hash = cfg.content_hash();
  out.report.columns = kSuiteColumns;

  const double rel_tol = 1e-10;
  const double conv_tol = 1e-12;
  std::size_t violations = 0;

  for (std::size_t i = 0; i < cfg.suite_tables; ++i) {
    NormalStream u(cfg.seed, derive_stream("suite-table", i));
    std::size_t len = 1 + u.index(0, 8);
    std::vector<double> rho(len + 1, 0.0);
    rho[0] = 1.0;
    for (std::size_t k = 1; k <= len; ++k)
      rho[k] = (2.0 * u.uniform(10 + k) - 1.0) * 0.9 /
               static_cast<double>(k);
    AutocovarianceModel model = AutocovarianceModel::table(rho);
    long long n = 8 + static_cast<long long>(
                          u.index(1, static_cast<std::size_t>(cfg.suite_max_n - 7)));

    QuadSums brute = quad_sums_exact(model, std::min<long long>(n, 64));
    QuadSums conv = quad_sums_convolution(model, std::min<long long>(n, 64));
    double rel_err = std::max(
        std::abs(brute.q1 - conv.q1) / std::max(brute.q1, 1e-300),
        std::abs(brute.q2 - conv.q2) / std::max(brute.q2, 1e-300));
    if (rel_err > conv_tol) {
      ++violations;
      out.report.failures.push_back(
          {"convolution-mismatch", "table " + fmt_u(i),
           "windowed convolution disagrees with the brute quadruple sums",
           {{"rel_err", rel_err}, {"n", static_cast<double>(n)}}});
    }

    for (double b : cfg.b_grid) {
      BoundReport rep = corollary2_rates(model, n, b, true);
      double q1 = rep.terms.at("q1");
      double young = rep.terms.at("young_majorant_q1");
      double q2 = rep.terms.at("q2");
      double holder = rep.terms.at("holder_majorant_q2");
      bool ok_young = q1 <= young * (1.0 + rel_tol) + 1e-300;
      bool ok_holder = q2 <= holder * (1.0 + rel_tol) + 1e-300;
      bool ok = ok_young && ok_holder && rel_err <= conv_tol;
      if (!ok_young || !ok_holder) {
        ++violations;
        out.report.failures.push_back(
            {"inequality-violation", "table " + fmt_u(i) + ", b=" + format_double(b),
             ok_young ? "q2 exceeds its Holder majorant"
                      : "q1 exceeds its Young majorant",
             {{"q1", q1},
              {"young_majorant", young},
              {"q2", q2},
              {"holder_majorant", holder},
              {"n", static_cast<double>(n)}}});
      }
      out.report.add_row({fmt_i(kSchemaVersion), kind_label, fmt_u(i), fmt_i(n),
                          format_double(b), format_double(q1),
                          format_double(young), format_double(q2),
                          format_double(holder), format_double(rel_err),
                          ok ? "1" : "0"});
    }
  }
  out.report.summary_lines.push_back(
      "inequality suite: " + fmt_u(cfg.suite_tables) + " tables x " +
      std::to_string(cfg.b_grid.size()) + " exponents, " +
      std::to_string(violations) + " violations");
  return out;
}

const std::vector<std::string> kSteinColumns = {
    "schema_version", "kind",          "n",
    "t",              "lhs",           "mollified_diff",
    "slack",          "rhs",           "se",
    "smoothing_ok",   "probe_max",     "probe_mean",
    "probe_usable",   "probe_total",   "lemma_rhs",
    "contradiction"};

RunOutput run_stein_kind(const RunConfig &cfg) {
  RunOutput out;
  out.report.run_kind = cfg.kind;
  out.report.config_hash = cfg.content_hash();
  out.report.columns = kSteinColumns;

  long long n = cfg.n_grid.front();
  BreuerMajorSpec spec = cfg.spec_at(n);
  spec.validate();
  const std::size_t m = spec.dim();
  const std::uint64_t pseed = point_seed_for(cfg, n);

  Eigen::MatrixXd sig = exact_covariance(spec);
  CovarianceMatrix cov(sig);
  Eigen::MatrixXd A = inv_sqrt_psd(cov.matrix());
  CovarianceMatrix eye = CovarianceMatrix::identity(m);
  SampleBatch Fs = apply_map(breuer_major_sample(spec, cfg.replicates, pseed), A);

  ConvexSet q;
  q.family = ConvexFamily::half_space;
  q.normals = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(m));
  q.normals(0, 0) = 1.0;
  q.offsets = Eigen::VectorXd::Constant(1, cfg.stein_offset);

  ConvexTestClass cls = shared_halfspace_class(cfg, m);
  DistanceEstimate dc = dc_lower(Fs, eye, cls, dc_options_for(cfg, pseed));

  SampleBatch points = sample_normal(eye, cfg.stein_points,
                                     mix64(pseed ^ derive_stream("probe-points")));

  std::vector<double> log_abs_t, log_pmax;
  std::size_t ok_rows = 0;
  for (std::size_t ti = 0; ti < cfg.t_grid.size(); ++ti) {
    double t = cfg.t_grid[ti];
    SmoothingCheck sc =
        smoothing_check(q, eye, t, Fs, cfg.stein_budget,
                        mix64(pseed ^ derive_stream("smooth", ti)));
    HessianProbe hp =
        hessian_probe(q, eye, t, points, cfg.stein_grid, cfg.stein_budget,
                      mix64(pseed ^ derive_stream("probe", ti)), dc.value);
    if (sc.ok) {
      ++ok_rows;
    } else {
      out.report.failures.push_back(
          {"smoothing-violation", "t=" + format_double(t),
           "|E h(F) - E h(N)| exceeds the mollified bound by more than 3 "
           "combined SE",
           {{"lhs", sc.lhs}, {"rhs", sc.rhs}, {"se", sc.se}}});
    }
    if (hp.contradiction)
      out.report.failures.push_back(
          {"hessian-contradiction", "t=" + format_double(t),
           "Hessian probe exceeds the second-derivative bound",
           {{"probe_max", hp.probe_max}, {"lemma_rhs", hp.lemma_rhs}}});
    if (hp.usable > 0 && hp.probe_max > 0.0) {
      log_abs_t.push_back(std::log(std::abs(std::log(t))));
      log_pmax.push_back(std::log(hp.probe_max));
    }
    out.report.add_row(
        {fmt_i(kSchemaVersion), cfg.kind, fmt_i(n), format_double(t),
         format_double(sc.lhs), format_double(sc.mollified_diff),
         format_double(sc.slack), format_double(sc.rhs), format_double(sc.se),
         sc.ok ? "1" : "0", format_double(hp.probe_max),
         format_double(hp.probe_mean), fmt_u(hp.usable), fmt_u(hp.total),
         format_double(hp.lemma_rhs), hp.contradiction ? "1" : "0"});
  }
  out.report.summary_lines.push_back(
      "smoothing inequality: " + std::to_string(ok_rows) + "/" +
      std::to_string(cfg.t_grid.size()) + " levels ok");
  if (log_abs_t.size() >= 2) {
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < log_abs_t.size(); ++i) {
      mx += log_abs_t[i];
      my += log_pmax[i];
    }
    mx /= static_cast<double>(log_abs_t.size());
    my /= static_cast<double>(log_abs_t.size());
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < log_abs_t.size(); ++i) {
      sxx += (log_abs_t[i] - mx) * (log_abs_t[i] - mx);
      sxy += (log_abs_t[i] - mx) * (log_pmax[i] - my);
    }
    if (sxx > 0.0)
      out.report.summary_lines.push_back(
          "probe growth in |log t|: fitted exponent " +
          format_double(sxy / sxx) + " over " +
          std::to_string(log_abs_t.size()) + " levels");
  }
  return out;
}

}  // namespace

RunOutput run(const RunConfig &cfg) {
  cfg.validate();
  if (cfg.workers > 0) set_threads(cfg.workers);
  if (cfg.kind == "breuer-major-rate") return run_rates_kind(cfg);
  if (cfg.kind == "fourth-moment") return run_fourth_kind(cfg);
  if (cfg.kind == "inequality-suite") return run_suite_kind(cfg, cfg.kind);
  return run_stein_kind(cfg);
}

int run_to_dir(const RunConfig &cfg) {
  RunOutput out = run(cfg);
  return out.report.write_all(cfg.out_dir);
}

RunOutput run_simulate(const RunConfig &cfg) {
  RunConfig c = cfg;
  if (!kKinds.count(c.kind)) c.kind = "breuer-major-rate";
  c.validate();
  if (c.workers > 0) set_threads(c.workers);
  long long n = c.n_grid.front();
  BreuerMajorSpec spec = c.spec_at(n);
  spec.validate();
  const std::uint64_t pseed = point_seed_for(c, n);

  RunOutput out;
  out.samples = breuer_major_sample(spec, c.replicates, pseed);
  out.report.run_kind = "simulate";
  out.report.config_hash = c.content_hash();
  out.report.columns = {"schema_version", "kind", "n",  "coordinate",
                        "mean",           "se",   "variance"};
  std::vector<double> means = out.samples.col_means();
  std::vector<double> second = out.samples.second_moment();
  const std::size_t m = out.samples.m;
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> col(out.samples.R);
    for (std::size_t r = 0; r < out.samples.R; ++r)
      col[r] = out.samples.at(r, i);
    MeanSe ms = mean_se(col);
    double var = second[i * m + i] - means[i] * means[i];
    out.report.add_row({fmt_i(kSchemaVersion), "simulate", fmt_i(n), fmt_u(i),
                        format_double(ms.mean), format_double(ms.se),
                        format_double(var)});
  }
  out.report.summary_lines.push_back("generator: " +
                                     out.samples.provenance.generator);
  out.report.summary_lines.push_back("replicates: " + fmt_u(out.samples.R));
  return out;
}

RunOutput run_bounds(const RunConfig &cfg) {
  RunConfig c = cfg;
  if (!kKinds.count(c.kind)) c.kind = "breuer-major-rate";
  c.validate();
  if (c.workers > 0) set_threads(c.workers);

  RunOutput out;
  out.report.run_kind = "bounds";
  out.report.config_hash = c.content_hash();
  out.report.columns = {"schema_version", "kind",  "n",       "bound_id",
                        "value",          "clipped", "constant", "flags",
                        "inputs",         "terms"};
  auto emit = [&](long long n, const BoundReport &r) {
    out.report.add_row(
        {fmt_i(kSchemaVersion), "bounds", fmt_i(n), r.id,
         format_double(r.value), format_double(r.clipped),
         r.constant == ConstantKind::explicit_constant ? "explicit"
                                                       : "shape-only",
         join_flags(r.flags), join_map(r.inputs), join_map(r.terms)});
  };

  std::set<long long> uniq(c.n_grid.begin(), c.n_grid.end());
  for (long long n : uniq) {
    BreuerMajorSpec spec = c.spec_at(n);
    spec.validate();
    const std::size_t m = spec.dim();
    const std::uint64_t pseed = point_seed_for(c, n);
    Eigen::MatrixXd sig = exact_covariance(spec);
    CovarianceMatrix cov(sig);
    Eigen::MatrixXd A = inv_sqrt_psd(cov.matrix());
    CovarianceMatrix eye = CovarianceMatrix::identity(m);
    MeanSe g2 = estimate_gamma_sq(spec, sig, c.gamma_replicates,
                                  mix64(pseed ^ derive_stream("gamma-sq")), A);
    emit(n, theorem1_bound(eye, m, g2.mean));
    double mean_hs = std::sqrt(g2.mean);
    emit(n, logfactor_bound(eye, m, mean_hs));
    emit(n, d2_bound(mean_hs));
    emit(n, dW_bound(eye, m, mean_hs));
    for (double b : c.b_grid)
      emit(n, corollary2_rates(spec.model, n, b, spec.phi.is_two_sparse()));
  }
  out.report.summary_lines.push_back(
      "bound reports for " + std::to_string(uniq.size()) +
      " instance sizes; mean_hs entries use sqrt(E gamma^2), an upper proxy "
      "for E ||M - Sigma||_HS");
  return out;
}

RunOutput run_distances(const RunConfig &cfg) {
  RunConfig c = cfg;
  if (!kKinds.count(c.kind)) c.kind = "breuer-major-rate";
  c.validate();
  if (c.workers > 0) set_threads(c.workers);

  RunOutput out;
  out.report.run_kind = "distances";
  out.report.config_hash = c.content_hash();
  out.report.columns = {"schema_version", "kind", "n",  "estimator", "family",
                        "value",          "se",   "envelope95", "classes"};
  auto emit = [&](long long n, const DistanceEstimate &e) {
    out.report.add_row({fmt_i(kSchemaVersion), "distances", fmt_i(n), e.kind,
                        e.family, format_double(e.value), format_double(e.se),
                        format_double(e.envelope95), fmt_u(e.class_count)});
  };

  std::set<long long> uniq(c.n_grid.begin(), c.n_grid.end());
  for (long long n : uniq) {
    BreuerMajorSpec spec = c.spec_at(n);
    spec.validate();
    const std::size_t m = spec.dim();
    const std::uint64_t pseed = point_seed_for(c, n);
    Eigen::MatrixXd sig = exact_covariance(spec);
    CovarianceMatrix cov(sig);
    Eigen::MatrixXd A = inv_sqrt_psd(cov.matrix());
    CovarianceMatrix eye = CovarianceMatrix::identity(m);
    SampleBatch Fs = apply_map(breuer_major_sample(spec, c.replicates, pseed), A);
    DcOptions dopt = dc_options_for(c, pseed);

    emit(n, dc_lower(Fs, eye, shared_halfspace_class(c, m), dopt));
    emit(n, dc_lower(Fs, eye,
                     ConvexTestClass::axis_boxes(
                         m, 500, eye, mix64(c.seed ^ derive_stream("boxes"))),
                     dopt));
    emit(n, dc_lower(Fs, eye,
                     ConvexTestClass::balls(
                         m, 500, eye, mix64(c.seed ^ derive_stream("balls"))),
                     dopt));
    emit(n, dc_lower(Fs, eye,
                     ConvexTestClass::polytopes(
                         m, 200, 2 * m, eye,
                         mix64(c.seed ^ derive_stream("polytopes"))),
                     dopt));
    DwCi dw = dw_with_ci(Fs, c, pseed);
    DistanceEstimate dwe;
    dwe.kind = "dW";
    dwe.family = m == 1 ? "rearrangement" : "assignment";
    dwe.value = dw.value;
    dwe.se = dw.se;
    dwe.envelope95 = dw.value + dw.ci;
    dwe.r_f = std::min<std::size_t>(c.dw_rows, Fs.R);
    dwe.r_g = dwe.r_f;
    emit(n, dwe);
    emit(n, d2_estimate(Fs, eye,
                        default_d2_family(m, c.d2_directions, c.d2_shifts,
                                          mix64(c.seed ^ derive_stream("d2-family")))));
  }
  return out;
}

RunOutput run_verify(const RunConfig &cfg) {
  RunConfig c = cfg;
  c.kind = "inequality-suite";
  c.validate();
  if (c.workers > 0) set_threads(c.workers);
  RunOutput out = run_suite_kind(c, "verify");
  out.report.run_kind = "verify";

  const double s_values[] = {0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0};
  double max_coeff = 0.0;
  std::size_t worst_m = 0;
  double worst_s = 0.0;
  std::size_t grid_points = 0;
  for (std::size_t m = 1; m <= 8; ++m) {
    for (double s : s_values) {
      CovarianceMatrix sigma = CovarianceMatrix::diagonal(
          Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m), 1.0 / s));
      RecursionAudit audit = recursion_check(sigma, m, 0.01, 1e-4);
      ++grid_points;
      if (audit.final_coeff > max_coeff) {
        max_coeff = audit.final_coeff;
        worst_m = m;
        worst_s = s;
      }
      if (audit.final_coeff > audit.final_cap)
        out.report.failures.push_back(
            {"constant-chain-violation",
             "m=" + fmt_u(m) + ", inv_op=" + format_double(s),
             "recursion coefficient exceeds 402",
             {{"final_coeff", audit.final_coeff}}});
    }
  }
  out.report.summary_lines.push_back(
      "constant chain: max recursion coefficient " + format_double(max_coeff) +
      " at m=" + fmt_u(worst_m) + ", inv_op=" + format_double(worst_s) +
      " over " + std::to_string(grid_points) + " grid points (cap 402)");

  double sup = sup_sqrt_log_check();
  if (sup > 4.0)
    out.report.failures.push_back(
        {"constant-chain-violation", "sup x^(1/2)|log x|^(3/2)",
         "optimizer exceeds the cap 4",
         {{"sup", sup}}});
  out.report.summary_lines.push_back(
      "sup of x^(1/2)|log x|^(3/2) on (0, 1/e]: " + format_double(sup) +
      " (cap 4)");
  return out;
}

}  // namespace malstein
