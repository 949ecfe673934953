#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include <json.hpp>

#include "malstein/bounds.hpp"
#include "malstein/common.hpp"
#include "malstein/gausssim.hpp"
#include "malstein/rng.hpp"
#include "support/oracles.hpp"

using namespace malstein;

namespace {

AutocovarianceModel random_table(std::uint64_t stream, std::size_t len) {
  NormalStream s(6007, stream);
  std::vector<double> rho{1.0};
  for (std::size_t k = 1; k <= len; ++k)
    rho.push_back((2.0 * s.uniform(k) - 1.0) * 0.9 / static_cast<double>(k));
  return AutocovarianceModel::table(std::move(rho));
}

}  // namespace

TEST_CASE("main bound evaluates its explicit product") {
  auto id1 = CovarianceMatrix::identity(1);
  auto r = theorem1_bound(id1, 1, 1e-4);
  CHECK(r.value == doctest::Approx(8.04).epsilon(1e-12));
  CHECK(r.clipped == 1.0);
  CHECK(r.constant == ConstantKind::explicit_constant);

  auto id2 = CovarianceMatrix::identity(2);
  auto r2 = theorem1_bound(id2, 2, 1e-6);
  CHECK(r2.value == doctest::Approx(2.627336048811688).epsilon(1e-12));
  CHECK(r2.clipped == 1.0);

  auto tiny = theorem1_bound(id2, 2, 1e-12);
  CHECK(tiny.value == doctest::Approx(2.627336048811688e-3).epsilon(1e-12));
  CHECK(tiny.clipped == tiny.value);

  // Scaling: quadrupling gamma^2 doubles the bound.
  auto twice = theorem1_bound(id2, 2, 4e-6);
  CHECK(twice.value == doctest::Approx(2.0 * r2.value).epsilon(1e-12));
}

TEST_CASE("fourth-moment variant uses the gap under a square root") {
  Eigen::MatrixXd s(1, 1);
  s << 4.0;
  CovarianceMatrix sigma(s);
  auto r = corollary1_bound(sigma, 1, 1e-4);
  // ||Sigma^{-1}|| = 1/4, so the prefactor is 402 (0.125 + 1).
  CHECK(r.value == doctest::Approx(4.5225).epsilon(1e-12));

  auto clamped = corollary1_bound(sigma, 1, -1e-12, 1e-9);
  CHECK(clamped.value == 0.0);
  CHECK(clamped.has_flag("negative-gap-clamped"));
  CHECK_THROWS_AS(corollary1_bound(sigma, 1, -1e-6, 1e-9), numeric_error);
}

TEST_CASE("auxiliary bounds match their formulas") {
  auto id2 = CovarianceMatrix::identity(2);
  auto lf = logfactor_bound(id2, 2, 0.01);
  CHECK(lf.value == doctest::Approx(0.04605170185988091).epsilon(1e-12));
  CHECK(lf.constant == ConstantKind::shape_only);
  auto big = logfactor_bound(id2, 2, 1.5);
  CHECK(big.has_flag("out-of-regime"));
  CHECK_THROWS_AS(logfactor_bound(id2, 2, 0.0), contract_error);

  CHECK(d2_bound(0.4).value == doctest::Approx(0.2).epsilon(1e-14));

  auto dw = dW_bound(id2, 2, 0.2);
  CHECK(dw.value == doctest::Approx(std::sqrt(2.0) * 0.2).epsilon(1e-12));
  Eigen::MatrixXd d(2, 2);
  d << 4.0, 0.0, 0.0, 1.0;
  CovarianceMatrix diag(d);
  // sqrt(m) ||Sigma^{-1}|| ||Sigma||^{1/2}: 1/lambda_min = 1, ||Sigma|| = 4.
  auto dw2 = dW_bound(diag, 2, 0.1);
  CHECK(dw2.value == doctest::Approx(std::sqrt(2.0) * 1.0 * 2.0 * 0.1).epsilon(1e-12));
}

TEST_CASE("quadruple sums: independent case has the closed form 1/n") {
  auto iid = AutocovarianceModel::iid();
  for (long long n : {4LL, 16LL, 64LL}) {
    auto q = quad_sums_exact(iid, n);
    CHECK(q.q1 == doctest::Approx(1.0 / static_cast<double>(n)).epsilon(1e-13));
    CHECK(q.q2 == doctest::Approx(1.0 / static_cast<double>(n)).epsilon(1e-13));
  }
}

TEST_CASE("brute and convolution quadruple sums agree exactly") {
  auto model = AutocovarianceModel::table({1.0, 0.5});
  for (long long n : {8LL, 23LL}) {
    auto brute = quad_sums_exact(model, n);
    auto conv = quad_sums_convolution(model, n);
    CHECK(std::abs(brute.q1 - conv.q1) < 1e-12 * std::max(1.0, brute.q1));
    CHECK(std::abs(brute.q2 - conv.q2) < 1e-12 * std::max(1.0, brute.q2));
    CHECK(brute.q1 ==
          doctest::Approx(testoracle::brute_quad_sum(model, n, false))
              .epsilon(1e-12));
    CHECK(brute.q2 ==
          doctest::Approx(testoracle::brute_quad_sum(model, n, true))
              .epsilon(1e-12));
  }
  auto fg = AutocovarianceModel::fgn(0.7);
  auto brute = quad_sums_exact(fg, 20);
  CHECK(brute.q1 == doctest::Approx(testoracle::brute_quad_sum(fg, 20, false))
                        .epsilon(1e-11));
  auto conv = quad_sums_convolution(fg, 20);
  CHECK(brute.q1 == doctest::Approx(conv.q1).epsilon(1e-11));
  CHECK(brute.q2 == doctest::Approx(conv.q2).epsilon(1e-11));
}

TEST_CASE("rate majorants dominate the exact sums across random tables") {
  for (std::uint64_t t = 0; t < 20; ++t) {
    auto model = random_table(t, 1 + t % 6);
    long long n = 8 + static_cast<long long>((t * 7) % 40);
    for (double b : {1.0, 1.25, 1.5, 2.0}) {
      auto rep = corollary2_rates(model, n, b, true);
      double q1 = rep.terms.at("q1");
      double young = rep.terms.at("young_majorant_q1");
      double q2 = rep.terms.at("q2");
      double holder = rep.terms.at("holder_majorant_q2");
      CHECK(q1 <= young * (1.0 + 1e-10) + 1e-300);
      CHECK(q2 <= holder * (1.0 + 1e-10) + 1e-300);
    }
  }
}

TEST_CASE("independent-case rate is exactly n^{-1/2}") {
  auto iid = AutocovarianceModel::iid();
  for (long long n : {16LL, 256LL}) {
    auto rep = corollary2_rates(iid, n, 2.0, true);
    CHECK(rep.terms.at("rate_i") ==
          doctest::Approx(1.0 / std::sqrt(static_cast<double>(n))).epsilon(1e-12));
  }
}

TEST_CASE("second rate needs a two-sparse expansion") {
  auto model = AutocovarianceModel::ar1(0.3);
  auto with = corollary2_rates(model, 32, 1.5, true);
  CHECK(with.terms.count("rate_ii") == 1);
  auto without = corollary2_rates(model, 32, 1.5, false);
  CHECK(without.terms.count("rate_ii") == 0);
  CHECK_THROWS_AS(corollary2_rates(model, 32, 0.5, true), contract_error);
  CHECK_THROWS_AS(corollary2_rates(model, 32, 2.5, true), contract_error);
}

TEST_CASE("variance split: independent case concentrates in the head") {
  auto iid = AutocovarianceModel::iid();
  auto sp = item_iii_split(iid, 9, 1);
  CHECK(sp.tail == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
  CHECK(sp.head == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(sp.total == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(sp.best_total <= sp.total + 1e-13);
  CHECK(sp.best_split == 1);
}

TEST_CASE("variance split arithmetic for a finite table") {
  auto model = AutocovarianceModel::table({1.0, 0.5, 0.25, 0.125});
  const long long n = 16;
  auto sp = item_iii_split(model, n, 2);
  double tail = std::sqrt(2.0 * (0.25 * 0.25 + 0.125 * 0.125));
  double head = 5.0 / std::sqrt(16.0);
  CHECK(sp.tail == doctest::Approx(tail).epsilon(1e-12));
  CHECK(sp.head == doctest::Approx(head).epsilon(1e-12));
  CHECK(sp.total == doctest::Approx(tail + head).epsilon(1e-12));
  CHECK(sp.best_total <= sp.total + 1e-13);
  for (long long alt : {1LL, 3LL, 5LL}) {
    auto other = item_iii_split(model, n, alt);
    CHECK(sp.best_total <= other.total + 1e-13);
  }
  CHECK_THROWS_AS(item_iii_split(model, n, 0), contract_error);
}

TEST_CASE("convex-to-wasserstein bridge constant") {
  auto id4 = CovarianceMatrix::identity(4);
  auto b = conwass_bridge(id4, 4, 0.01);
  CHECK(b.value == doctest::Approx(0.6727171322029717).epsilon(1e-12));
  CHECK(b.constant == ConstantKind::explicit_constant);
  CHECK(gamma_identity_bound(4) == doctest::Approx(4.0 * std::pow(4.0, 0.25)).epsilon(1e-14));

  Eigen::MatrixXd s(2, 2);
  s << 2.0, 0.3, 0.3, 1.0;
  auto gen = conwass_bridge(CovarianceMatrix(s), 2, 0.01);
  CHECK(gen.constant == ConstantKind::shape_only);
}

TEST_CASE("constant chain stays below its cap across a parameter grid") {
  double worst = 0.0;
  for (std::size_t m = 1; m <= 8; ++m) {
    for (double s : {0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0}) {
      // ||Sigma^{-1}|| = s via Sigma = (1/s) I.
      auto sigma = CovarianceMatrix::diagonal(
          Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m), 1.0 / s));
      auto a = recursion_check(sigma, m, 0.01, 1e-4);
      CHECK(a.final_coeff <= a.final_cap);
      CHECK(a.step3_value <= a.step3_cap * (1.0 + 1e-12));
      CHECK(a.rhs_at_kappa1 > 0.0);
      worst = std::max(worst, a.final_coeff);
    }
  }
  CHECK(worst > 100.0);  // the audit is not vacuous
}

TEST_CASE("constant chain spot values") {
  auto id1 = CovarianceMatrix::identity(1);
  auto a = recursion_check(id1, 1, 0.1, 0.25);
  CHECK(a.final_coeff == doctest::Approx(184.8088022903976).epsilon(1e-12));
  double expect_rhs = (4.0 / 3.0) * (std::abs(std::log(0.25)) + 24.0) * 0.1 +
                      (20.0 / std::sqrt(2.0)) * 0.5 / 0.75;
  CHECK(a.rhs_at_kappa1 == doctest::Approx(expect_rhs).epsilon(1e-12));
  CHECK(a.in_regime);
  auto out = recursion_check(id1, 1, 0.5, 0.25);
  CHECK_FALSE(out.in_regime);
  CHECK_THROWS_AS(recursion_check(id1, 1, 0.0, 0.25), contract_error);
  CHECK_THROWS_AS(recursion_check(id1, 1, 0.1, 1.0), contract_error);
}

TEST_CASE("scalar sup used by the proof is certified below 4") {
  double s = sup_sqrt_log_check();
  CHECK(s == doctest::Approx(std::exp(-1.5) * std::pow(3.0, 1.5)).epsilon(1e-6));
  CHECK(s <= 4.0);
}

TEST_CASE("reports serialize to parseable json and csv") {
  auto id2 = CovarianceMatrix::identity(2);
  auto r = theorem1_bound(id2, 2, 1e-6);
  auto j = nlohmann::json::parse(r.to_json_text());
  CHECK(j.at("bound_id").get<std::string>() == r.id);
  CHECK(j.at("value").get<double>() == doctest::Approx(r.value));
  auto header = BoundReport::csv_header();
  auto row = r.csv_row();
  CHECK(std::count(header.begin(), header.end(), ',') ==
        std::count(row.begin(), row.end(), ','));
}
