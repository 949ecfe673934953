#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <sstream>
#include <vector>

#include "malstein/common.hpp"
#include "malstein/functionals.hpp"
#include "malstein/gausssim.hpp"
#include "malstein/rng.hpp"
#include "support/oracles.hpp"

using namespace malstein;

namespace {

BreuerMajorSpec h2_spec(AutocovarianceModel model, std::vector<double> part,
                        std::size_t n) {
  BreuerMajorSpec spec;
  spec.phi = HermiteExpansion::from_coeffs({0.0, 0.0, 1.0});
  spec.model = std::move(model);
  spec.partition = std::move(part);
  spec.n = n;
  return spec;
}

Eigen::VectorXd random_vec(std::uint64_t stream, std::size_t n) {
  NormalStream s(8891, stream);
  Eigen::VectorXd v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = s.normal(i);
  return v;
}

Eigen::MatrixXd random_sym(std::uint64_t stream, std::size_t n) {
  NormalStream s(4417, stream);
  Eigen::MatrixXd a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = s.normal(i * n + j);
  return 0.5 * (a + a.transpose());
}

}  // namespace

TEST_CASE("spec validation rejects malformed inputs") {
  auto ok = h2_spec(AutocovarianceModel::iid(), {0.0, 0.5, 1.0}, 4);
  CHECK_NOTHROW(ok.validate());
  CHECK(ok.dim() == 2);

  auto bad_part = ok;
  bad_part.partition = {0.0, 0.7, 0.3};
  CHECK_THROWS_AS(bad_part.validate(), contract_error);

  auto not_centered = ok;
  not_centered.phi = HermiteExpansion::from_coeffs({1.0, 0.0, 1.0});
  CHECK_THROWS_AS(not_centered.validate(), model_error);

  auto empty_block = ok;
  empty_block.partition = {0.0, 0.01, 1.0};
  empty_block.n = 4;  // first cell rounds to no indices
  CHECK_THROWS_AS(empty_block.validate(), model_error);
}

TEST_CASE("functional of a fixed path matches hand arithmetic") {
  auto spec = h2_spec(AutocovarianceModel::iid(), {0.0, 0.5, 1.0}, 4);
  std::vector<double> path{1.0, -1.0, 2.0, 0.0};
  auto f = breuer_major_from_path(spec, path);
  REQUIRE(f.size() == 2);
  // F_0 = (phi(1) + phi(-1)) / 2 = 0, F_1 = (phi(2) + phi(0)) / 2 = 1.
  CHECK(f[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK(f[1] == doctest::Approx(1.0).epsilon(1e-15));

  auto m = malliavin_matrix(spec, path);
  REQUIRE(m.rows() == 2);
  // iid model: M(i,i) = (1/n) sum_{k in block} 2 G_k^2, off-diagonal 0.
  CHECK(m(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(m(1, 1) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(m(0, 1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK(m(1, 0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
}

TEST_CASE("independent-blocks covariance is the identity") {
  auto spec = h2_spec(AutocovarianceModel::iid(), {0.0, 0.5, 1.0}, 64);
  auto sigma = exact_covariance(spec);
  REQUIRE(sigma.rows() == 2);
  CHECK(sigma(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(sigma(1, 1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(sigma(0, 1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
}

TEST_CASE("exact covariance matches a two-point quadrature oracle") {
  BreuerMajorSpec spec;
  spec.phi = HermiteExpansion::from_coeffs({0.0, 1.0, 1.0});
  spec.model = AutocovarianceModel::ar1(0.6);
  spec.partition = {0.0, 0.25, 1.0};
  spec.n = 12;
  auto sigma = exact_covariance(spec);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double acc = 0.0;
      for (std::size_t k = spec.block_begin(i); k < spec.block_end(i); ++k)
        for (std::size_t l = spec.block_begin(j); l < spec.block_end(j); ++l)
          acc += testoracle::joint_phi_moment(
              spec.phi, spec.model(static_cast<long long>(k) -
                                   static_cast<long long>(l)));
      acc /= static_cast<double>(spec.n);
      CHECK(sigma(i, j) == doctest::Approx(acc).epsilon(1e-10));
    }
}

TEST_CASE("limit variance truncation converges for summable correlations") {
  auto phi = HermiteExpansion::from_coeffs({0.0, 0.0, 1.0});
  auto model = AutocovarianceModel::ar1(0.5);
  // sum_j rho(j)^2 = (1 + r^2) / (1 - r^2) at r = 0.5, times a_2^2 2!.
  double expect = 2.0 * (1.0 + 0.25) / (1.0 - 0.25);
  CHECK(sigma_sq_limit(phi, model, 200) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("sampled functionals match their exact covariance") {
  auto spec = h2_spec(AutocovarianceModel::fgn(0.7), {0.0, 0.5, 1.0}, 64);
  const std::size_t R = 30000;
  auto batch = breuer_major_sample(spec, R, 90210);
  auto serial = breuer_major_sample_serial(spec, R, 90210);
  REQUIRE(batch.data.size() == serial.data.size());
  CHECK(std::memcmp(batch.data.data(), serial.data.data(),
                    batch.data.size() * sizeof(double)) == 0);

  auto mu = batch.col_means();
  auto sigma = exact_covariance(spec);
  auto mom = batch.second_moment();
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(std::abs(mu[i]) < 5.0 * std::sqrt(sigma(i, i) / R));
    for (std::size_t j = 0; j < 2; ++j) {
      double se = std::sqrt(2.0 * sigma(i, i) * sigma(j, j) / R);
      CHECK(std::abs(mom[i * 2 + j] - sigma(i, j)) < 5.0 * se);
    }
  }
}

TEST_CASE("functional batch agrees with per-path evaluation") {
  auto spec = h2_spec(AutocovarianceModel::ar1(0.4), {0.0, 1.0}, 16);
  auto batch = breuer_major_sample(spec, 8, 3333);
  auto paths = sample_stationary(spec.model, spec.n, 8, 3333);
  for (std::size_t r = 0; r < 8; ++r) {
    auto f = breuer_major_from_path(
        spec, std::span<const double>(paths.data() + r * spec.n, spec.n));
    CHECK(batch.at(r, 0) == doctest::Approx(f[0]).epsilon(1e-13));
  }
}

TEST_CASE("fast and literal derivative-matrix paths agree") {
  std::vector<BreuerMajorSpec> specs;
  specs.push_back(h2_spec(AutocovarianceModel::fgn(0.7), {0.0, 0.5, 1.0}, 64));
  specs.push_back(h2_spec(AutocovarianceModel::iid(), {0.0, 0.3, 1.0}, 20));
  specs.push_back(h2_spec(AutocovarianceModel::ar1(0.5), {0.0, 0.5, 1.0}, 48));
  specs.push_back(
      h2_spec(AutocovarianceModel::table({1.0, 0.3, -0.2}), {0.0, 1.0}, 32));
  BreuerMajorSpec mixed;
  mixed.phi = HermiteExpansion::from_coeffs({0.0, 0.5, 1.0, 0.25});
  mixed.model = AutocovarianceModel::fgn(0.6);
  mixed.partition = {0.0, 0.4, 0.7, 1.0};
  mixed.n = 40;
  specs.push_back(mixed);

  for (std::size_t t = 0; t < specs.size(); ++t) {
    const auto &spec = specs[t];
    auto v = random_vec(t, spec.n);
    std::span<const double> path(v.data(), spec.n);
    auto fast = malliavin_matrix(spec, path);
    auto slow = malliavin_matrix_serial(spec, path);
    REQUIRE(fast.rows() == slow.rows());
    CHECK((fast - slow).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("derivative-matrix fluctuation matches the closed form") {
  // m = 1, H_2, iid: gamma^2 = Var((2/n) sum G_k^2) = 8/n.
  auto spec = h2_spec(AutocovarianceModel::iid(), {0.0, 1.0}, 16);
  auto sigma = exact_covariance(spec);
  CHECK(sigma(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  auto est = estimate_gamma_sq(spec, sigma, 20000, 555);
  CHECK(std::abs(est.mean - 0.5) < 5.0 * est.se + 1e-12);
  CHECK(est.se > 0.0);
  CHECK(est.se < 0.02);
}

TEST_CASE("a linear map scales the fluctuation estimate exactly") {
  auto spec = h2_spec(AutocovarianceModel::iid(), {0.0, 1.0}, 16);
  auto sigma = exact_covariance(spec);
  Eigen::MatrixXd half = 0.5 * Eigen::MatrixXd::Identity(1, 1);
  auto raw = estimate_gamma_sq(spec, sigma, 4000, 555);
  auto mapped = estimate_gamma_sq(spec, sigma, 4000, 555, half);
  // Same seed, same replicates; ||T d T^T||^2 = d^2 / 16 per replicate.
  CHECK(mapped.mean == doctest::Approx(raw.mean / 16.0).epsilon(1e-12));
}

TEST_CASE("variance bound is exact for independent entries and safe otherwise") {
  auto one_block = h2_spec(AutocovarianceModel::iid(), {0.0, 1.0}, 8);
  CHECK(malliavin_variance_bound(one_block, 0, 0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  auto two_block = h2_spec(AutocovarianceModel::iid(), {0.0, 0.5, 1.0}, 8);
  CHECK(malliavin_variance_bound(two_block, 0, 0) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(malliavin_variance_bound(two_block, 0, 1) ==
        doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

  // Correlated model: the absolute sum dominates the MC variance.
  auto ar = h2_spec(AutocovarianceModel::ar1(0.5), {0.0, 1.0}, 8);
  double bound = malliavin_variance_bound(ar, 0, 0);
  const std::size_t R = 20000;
  auto paths = sample_stationary(ar.model, ar.n, R, 4242);
  std::vector<double> vals(R);
  for (std::size_t r = 0; r < R; ++r) {
    auto m = malliavin_matrix(
        ar, std::span<const double>(paths.data() + r * ar.n, ar.n));
    vals[r] = m(0, 0);
  }
  auto ms = mean_se(vals);
  double mean = ms.mean;
  double var = 0.0;
  for (double v : vals) var += (v - mean) * (v - mean);
  var /= static_cast<double>(R - 1);
  CHECK(var < bound * 1.05);
}

TEST_CASE("chi-square quadratic form reproduces textbook moments") {
  QuadraticFormVector v;
  v.N = 2;
  v.A.push_back(Eigen::MatrixXd::Identity(2, 2));
  auto mom = qf_exact_moments(v);
  CHECK(mom.cov(0, 0) == doctest::Approx(4.0).epsilon(1e-13));
  CHECK(mom.cov_sq(0, 0) == doctest::Approx(128.0).epsilon(1e-13));
  CHECK(mom.fourth == doctest::Approx(144.0).epsilon(1e-13));
  CHECK(mom.gauss_fourth == doctest::Approx(48.0).epsilon(1e-13));
  CHECK(mom.gap == doctest::Approx(96.0).epsilon(1e-13));
}

TEST_CASE("pure quadratic moments match the polynomial oracle") {
  QuadraticFormVector v;
  v.N = 4;
  v.A.push_back(random_sym(1, 4));
  v.A.push_back(random_sym(2, 4));
  auto mom = qf_exact_moments(v);
  auto ref = testoracle::qf_oracle(v);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      CHECK(mom.cov(i, j) == doctest::Approx(ref.cov(i, j)).epsilon(1e-9));
      CHECK(mom.cov_sq(i, j) ==
            doctest::Approx(ref.cov_sq(i, j)).epsilon(1e-9));
    }
  CHECK(mom.fourth == doctest::Approx(ref.fourth).epsilon(1e-9));
  CHECK(mom.gauss_fourth ==
        doctest::Approx(ref.gauss_fourth).epsilon(1e-9));
  CHECK(mom.gap == doctest::Approx(ref.gap).epsilon(1e-8).scale(1.0));
}

TEST_CASE("mixed quadratic-plus-linear moments match the polynomial oracle") {
  QuadraticFormVector v;
  v.N = 3;
  v.A.push_back(random_sym(5, 3));
  v.A.push_back(random_sym(6, 3));
  v.b.push_back(random_vec(7, 3));
  v.b.push_back(random_vec(8, 3));
  CHECK_FALSE(v.pure_quadratic());
  auto mom = qf_exact_moments(v);
  auto ref = testoracle::qf_oracle(v);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      CHECK(mom.cov(i, j) == doctest::Approx(ref.cov(i, j)).epsilon(1e-9));
      CHECK(mom.cov_sq(i, j) ==
            doctest::Approx(ref.cov_sq(i, j)).epsilon(1e-9));
    }
  CHECK(mom.fourth == doctest::Approx(ref.fourth).epsilon(1e-9));
  CHECK(mom.gap == doctest::Approx(ref.gap).epsilon(1e-8).scale(1.0));
}

TEST_CASE("sampled quadratic forms match their exact moments") {
  QuadraticFormVector v;
  v.N = 3;
  v.A.push_back(random_sym(11, 3));
  v.A.push_back(random_sym(12, 3));
  v.b.push_back(random_vec(13, 3));
  v.b.push_back(random_vec(14, 3));
  auto mom = qf_exact_moments(v);
  const std::size_t R = 60000;
  auto batch = qf_sample(v, R, 77);
  REQUIRE(batch.m == 2);
  std::vector<double> q4(R);
  for (std::size_t r = 0; r < R; ++r) {
    double q = batch.at(r, 0) * batch.at(r, 0) + batch.at(r, 1) * batch.at(r, 1);
    q4[r] = q * q;
  }
  auto ms = mean_se(q4);
  CHECK(std::abs(ms.mean - mom.fourth) < 6.0 * ms.se);
  auto mu = batch.col_means();
  CHECK(std::abs(mu[0]) < 5.0 * std::sqrt(mom.cov(0, 0) / R));
  auto sm = batch.second_moment();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double se = std::sqrt(2.0 * mom.cov(i, i) * mom.cov(j, j) / R) +
                  std::abs(mom.cov(i, j)) / std::sqrt(double(R));
      CHECK(std::abs(sm[i * 2 + j] - mom.cov(i, j)) < 6.0 * se);
    }
}

TEST_CASE("quadratic form text round trip and validation") {
  QuadraticFormVector v;
  v.N = 3;
  v.A.push_back(random_sym(21, 3));
  v.b.push_back(random_vec(22, 3));
  std::istringstream in(v.to_text());
  auto back = QuadraticFormVector::from_text(in);
  REQUIRE(back.N == 3);
  REQUIRE(back.dim() == 1);
  CHECK((back.A[0] - v.A[0]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.b[0] - v.b[0]).cwiseAbs().maxCoeff() == 0.0);

  QuadraticFormVector bad = v;
  bad.A[0](0, 1) += 1.0;  // asymmetric
  CHECK_THROWS_AS(bad.validate(), contract_error);
  QuadraticFormVector empty;
  empty.N = 2;
  CHECK_THROWS_AS(empty.validate(), contract_error);
}
