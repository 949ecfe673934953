#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "malstein/common.hpp"
#include "malstein/config.hpp"
#include "malstein/harness.hpp"
#include "malstein/report.hpp"
#include "malstein/rng.hpp"

using namespace malstein;

namespace {

const char *kSampleConfig = R"(# demo configuration
[run]
kind = breuer-major-rate
seed = 7

[phi]
coeffs = 0 0 1

[model]
kind = ar1
param = 0.5

[grid]
n = 48 96
replicates = 1500

[distances]
directions = 6
thresholds = 6
bootstrap = 24
dw_rows = 32
d2_directions = 3
d2_shifts = 2
gamma_replicates = 48
)";

RunConfig tiny_rate_config() {
  auto cfg = RunConfig::from_config(Config::parse_string(kSampleConfig));
  return cfg;
}

std::filesystem::path fresh_dir(const std::string &name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config parses sections, comments and typed values") {
  auto cfg = Config::parse_string(
      "# top comment\n[alpha]\nx = 1.5  # trailing\nname = fgn\n"
      "list = 1 2 3\n\n[beta]\nx = 2\n",
      "demo.cfg");
  CHECK(cfg.has("alpha", "x"));
  CHECK_FALSE(cfg.has("alpha", "missing"));
  CHECK(cfg.get_double("alpha", "x") == 1.5);
  CHECK(cfg.get_string("alpha", "name") == "fgn");
  CHECK(cfg.get_u64("beta", "x") == 2);
  CHECK(cfg.get_double("gamma", "x", 9.0) == 9.0);
  auto xs = cfg.get_ints("alpha", "list");
  REQUIRE(xs.size() == 3);
  CHECK(xs[2] == 3);
  auto sections = cfg.sections();
  CHECK(sections.size() == 2);
}

TEST_CASE("config errors carry origin, line and key") {
  auto cfg = Config::parse_string("[s]\nx = abc\nempty = \n", "bad.cfg");
  try {
    cfg.get_double("s", "x");
    FAIL("expected config_error");
  } catch (const config_error &e) {
    std::string msg = e.what();
    CHECK(msg.find("bad.cfg") != std::string::npos);
    CHECK(msg.find(":2") != std::string::npos);
    CHECK(msg.find("x") != std::string::npos);
  }
  CHECK_THROWS_AS((void)cfg.get_doubles("s", "empty"), config_error);
  CHECK_THROWS_AS((void)cfg.get_double("s", "nope"), config_error);
  CHECK_THROWS_AS((void)cfg.get_double("other", "x"), config_error);
  CHECK_THROWS_AS(Config::parse_string("x = 1\n", "o"), config_error);
  CHECK_THROWS_AS(Config::parse_string("[open\n", "o"), config_error);
  CHECK_THROWS_AS(Config::parse_string("[s]\njust a token\n", "o"),
                  config_error);
}

TEST_CASE("section hash ignores order and comments but not values") {
  auto a = Config::parse_string("[s]\nx = 1\ny = 2\n");
  auto b = Config::parse_string("# c\n[s]\ny = 2\n# d\nx = 1\n");
  auto c = Config::parse_string("[s]\nx = 1\ny = 3\n");
  CHECK(a.section_hash("s") == b.section_hash("s"));
  CHECK(a.section_hash("s") != c.section_hash("s"));
  CHECK(a.full_hash() == b.full_hash());
}

TEST_CASE("rate fit recovers exact and noisy slopes") {
  std::vector<double> n{16, 32, 64, 128, 256, 512};
  std::vector<double> exact, flat;
  for (double v : n) {
    exact.push_back(std::pow(v, -0.5));
    flat.push_back(0.25);
  }
  auto f = fit_rate(n, exact, 64, 1);
  CHECK(f.slope == doctest::Approx(-0.5).epsilon(1e-10));
  CHECK(f.used == n.size());
  CHECK(f.ci_lo <= -0.5 + 1e-12);
  CHECK(f.ci_hi >= -0.5 - 1e-12);
  auto g = fit_rate(n, flat, 64, 1);
  CHECK(g.slope == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));

  std::vector<double> few{0.0, -1.0, 0.5, 0.25, 0.1, 0.0};
  CHECK_THROWS_AS(fit_rate(n, few, 64, 1), numeric_error);

  std::size_t hits = 0;
  const std::size_t trials = 40;
  for (std::uint64_t s = 0; s < trials; ++s) {
    NormalStream noise(900 + s, 0);
    std::vector<double> noisy;
    for (std::size_t i = 0; i < n.size(); ++i)
      noisy.push_back(std::pow(n[i], -0.5) *
                      std::exp(0.02 * noise.normal(i)));
    auto fit = fit_rate(n, noisy, 64, s);
    if (std::abs(fit.slope + 0.5) < 0.05) ++hits;
  }
  CHECK(hits >= 36);
}

TEST_CASE("run config reads the structured file and validates") {
  auto cfg = tiny_rate_config();
  CHECK(cfg.kind == "breuer-major-rate");
  CHECK(cfg.seed == 7);
  CHECK(cfg.model.kind() == AcvKind::ar1);
  CHECK(cfg.model.param() == 0.5);
  REQUIRE(cfg.n_grid.size() == 2);
  CHECK(cfg.n_grid[1] == 96);
  CHECK(cfg.replicates == 1500);
  CHECK(cfg.dw_rows == 32);
  CHECK_NOTHROW(cfg.validate());

  auto spec = cfg.spec_at(48);
  CHECK(spec.n == 48);
  CHECK(spec.dim() == 2);

  auto bad_kind = cfg;
  bad_kind.kind = "mystery";
  CHECK_THROWS_AS(bad_kind.validate(), config_error);
  auto bad_b = cfg;
  bad_b.b_grid = {0.5};
  CHECK_THROWS_AS(bad_b.validate(), config_error);
  auto no_grid = cfg;
  no_grid.n_grid.clear();
  CHECK_THROWS_AS(no_grid.validate(), config_error);
  auto bad_rows = cfg;
  bad_rows.dw_rows = 4;
  CHECK_THROWS_AS(bad_rows.validate(), config_error);
  auto bad_phi = cfg;
  bad_phi.kind = "fourth-moment";
  bad_phi.phi = HermiteExpansion::from_coeffs({0.0, 0.0, 0.0, 1.0});
  CHECK_THROWS_AS(bad_phi.validate(), config_error);

  CHECK_THROWS_AS(
      RunConfig::from_config(Config::parse_string("[model]\nkind = wavelet\n")),
      config_error);
}

TEST_CASE("content hash tracks result-relevant fields only") {
  auto a = tiny_rate_config();
  auto b = a;
  b.workers = 3;
  b.out_dir = "elsewhere";
  b.resume = true;
  CHECK(a.content_hash() == b.content_hash());
  auto c = a;
  c.seed = 8;
  CHECK(a.content_hash() != c.content_hash());
  auto d = a;
  d.replicates = 1501;
  CHECK(a.content_hash() != d.content_hash());
}

TEST_CASE("identical configurations produce byte-identical reports") {
  auto cfg = tiny_rate_config();
  auto r1 = run(cfg);
  auto r2 = run(cfg);
  CHECK(r1.report.csv_body() == r2.report.csv_body());
  REQUIRE(r1.table.rows.size() == 2);
  for (const auto &row : r1.table.rows) {
    CHECK(row.dc >= 0.0);
    CHECK(row.dc <= 1.0);
    CHECK(row.thm1_clipped <= 1.0);
    CHECK(row.gamma_sq > 0.0);
    CHECK(row.sandwich_ok);
    CHECK(row.bridge_ok);
  }
}

TEST_CASE("resumed runs reuse rows and append new points") {
  auto dir = fresh_dir("malstein-test-resume");
  auto cfg = tiny_rate_config();
  cfg.out_dir = dir.string();
  int rc = run_to_dir(cfg);
  CHECK(rc == 0);
  auto first = read_results_csv((dir / "results.csv").string());
  REQUIRE(first.has_value());
  CHECK(first->config_hash == cfg.content_hash());
  REQUIRE(first->rows.size() == 2);

  auto extended = cfg;
  extended.n_grid = {48, 96, 144};
  extended.resume = true;
  auto out = run(extended);
  REQUIRE(out.table.rows.size() == 3);
  REQUIRE_FALSE(out.report.warnings.empty());
  CHECK(out.report.warnings.front().find("different config") !=
        std::string::npos);
  // Hash differs (the grid grew), so nothing can be reused; now rerun the
  // original config with resume on and confirm bit-identical reuse.
  auto again = cfg;
  again.resume = true;
  auto reused = run(again);
  CHECK(reused.report.csv_body().find("config_hash") != std::string::npos);
  auto body_cells = reused.report.rows;
  REQUIRE(body_cells.size() == 2);
  CHECK(body_cells == first->rows);

  std::filesystem::remove_all(dir);
}

TEST_CASE("report artifacts round trip through the csv reader") {
  auto dir = fresh_dir("malstein-test-report");
  RunReport rep;
  rep.run_kind = "demo";
  rep.config_hash = 0xabcdef0123456789ULL;
  rep.columns = {"a", "b"};
  rep.add_row({"1", "x,y"});
  rep.add_row({"2", "line\"quoted\""});
  rep.summary_lines.push_back("two rows");
  int rc = rep.write_all(dir.string());
  CHECK(rc == 0);
  auto back = read_results_csv((dir / "results.csv").string());
  REQUIRE(back.has_value());
  CHECK(back->config_hash == rep.config_hash);
  REQUIRE(back->columns == rep.columns);
  REQUIRE(back->rows.size() == 2);
  CHECK(back->rows[0][1] == "x,y");
  CHECK(back->rows[1][1] == "line\"quoted\"");
  CHECK_FALSE(read_results_csv((dir / "missing.csv").string()).has_value());

  CHECK_THROWS_AS(rep.add_row({"only-one"}), contract_error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("failures flip the exit code and land in failures.json") {
  auto dir = fresh_dir("malstein-test-fail");
  RunReport rep;
  rep.run_kind = "demo";
  rep.columns = {"a"};
  Failure f;
  f.kind = "demo-violation";
  f.where = "row 0";
  f.message = "intentional";
  rep.failures.push_back(f);
  int rc = rep.write_all(dir.string());
  CHECK(rc == 1);
  CHECK(std::filesystem::exists(dir / "failures.json"));
  std::ifstream in(dir / "summary.txt");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("demo-violation") != std::string::npos);
  CHECK(text.find("status: failed") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("verify kind runs the inequality suite clean on a small budget") {
  RunConfig cfg;
  cfg.kind = "inequality-suite";
  cfg.seed = 5;
  cfg.phi = HermiteExpansion::from_coeffs({0.0, 0.0, 1.0});
  cfg.n_grid = {32};
  cfg.suite_tables = 4;
  cfg.suite_max_n = 24;
  cfg.b_grid = {1.0, 2.0};
  auto out = run_verify(cfg);
  CHECK(out.report.failures.empty());
  CHECK(out.report.rows.size() >= 8);
  bool has_audit_line = false;
  for (const auto &line : out.report.summary_lines)
    if (line.find("402") != std::string::npos) has_audit_line = true;
  CHECK(has_audit_line);
}

TEST_CASE("fourth-moment kind produces a clean single row") {
  RunConfig cfg;
  cfg.kind = "fourth-moment";
  cfg.seed = 11;
  cfg.phi = HermiteExpansion::from_coeffs({0.0, 0.0, 1.0});
  cfg.model = AutocovarianceModel::ar1(0.3);
  cfg.partition = {0.0, 0.5, 1.0};
  cfg.n_grid = {24};
  cfg.replicates = 1200;
  cfg.bootstrap = 24;
  cfg.dc_directions = 6;
  cfg.dc_thresholds = 6;
  cfg.dw_rows = 32;
  cfg.gamma_replicates = 32;
  auto out = run(cfg);
  CHECK(out.report.failures.empty());
  REQUIRE(out.report.rows.size() == 1);
  CHECK(out.report.run_kind == "fourth-moment");
}

TEST_CASE("diagnostic kind emits one row per smoothing level") {
  RunConfig cfg;
  cfg.kind = "stein-diagnostic";
  cfg.seed = 13;
  cfg.phi = HermiteExpansion::from_coeffs({0.0, 0.0, 1.0});
  cfg.model = AutocovarianceModel::iid();
  cfg.partition = {0.0, 0.5, 1.0};
  cfg.n_grid = {32};
  cfg.replicates = 2000;
  cfg.bootstrap = 24;
  cfg.dc_directions = 6;
  cfg.dc_thresholds = 6;
  cfg.dw_rows = 32;
  cfg.gamma_replicates = 32;
  cfg.t_grid = {0.1, 0.01};
  cfg.stein_budget = 3000;
  cfg.stein_points = 2;
  cfg.stein_grid = 48;
  auto out = run(cfg);
  CHECK(out.report.failures.empty());
  CHECK(out.report.rows.size() == 2);
}

TEST_CASE("utility views emit their documented shapes") {
  auto cfg = tiny_rate_config();
  cfg.n_grid = {48};
  cfg.replicates = 800;

  auto sim = run_simulate(cfg);
  CHECK(sim.samples.R == 800);
  CHECK(sim.samples.m == 2);
  CHECK(sim.report.rows.size() == 2);

  auto bounds = run_bounds(cfg);
  CHECK(bounds.report.rows.size() >= 1);
  CHECK(bounds.report.failures.empty());

  auto dist = run_distances(cfg);
  CHECK(dist.report.rows.size() == 6);
  for (const auto &row : dist.report.rows) {
    double v = std::stod(row[5]);
    CHECK(v >= 0.0);
  }
}
