#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "malstein/common.hpp"
#include "malstein/distances.hpp"
#include "malstein/gausssim.hpp"
#include "malstein/stein.hpp"

using namespace malstein;

namespace {

ConvexSet half_space_1d(double c) {
  ConvexSet q;
  q.family = ConvexFamily::half_space;
  q.normals.resize(1, 1);
  q.normals(0, 0) = 1.0;
  q.offsets.resize(1);
  q.offsets[0] = c;
  return q;
}

Eigen::VectorXd point1(double x) {
  Eigen::VectorXd v(1);
  v << x;
  return v;
}

}  // namespace

TEST_CASE("smoothed indicator of the whole space is one") {
  auto q = ConvexTestClass::whole(2).sets[0];
  auto sigma = CovarianceMatrix::identity(2);
  Eigen::VectorXd x = Eigen::VectorXd::Constant(2, 3.0);
  auto r = mollify(q, sigma, 0.3, x, 10, 1);
  CHECK(r.value == 1.0);
  CHECK(r.se == 0.0);
  CHECK(r.closed_form);
  CHECK_FALSE(r.low_budget);
}

TEST_CASE("smoothed half-space indicator has the gaussian closed form") {
  auto sigma = CovarianceMatrix::identity(1);
  auto q = half_space_1d(0.0);
  auto center = mollify(q, sigma, 0.37, point1(0.0), 10, 1);
  CHECK(center.value == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(center.closed_form);

  // t = 1/4, x = 1: Phi((0 - sqrt(3)/2) / (1/2)) = Phi(-sqrt(3)).
  auto off = mollify(q, sigma, 0.25, point1(1.0), 10, 1);
  CHECK(off.value == doctest::Approx(0.041632258331775196).epsilon(1e-12));

  // t -> 0 recovers the indicator on both sides.
  CHECK(mollify(q, sigma, 1e-4, point1(-1.0), 10, 1).value > 0.999);
  CHECK(mollify(q, sigma, 1e-4, point1(1.0), 10, 1).value < 0.001);
  // t -> 1 forgets the point at rate sqrt(1-t)*|x|:
  // Phi(-sqrt(1e-9) * 5 / sqrt(1 - 1e-9)).
  auto late = mollify(q, sigma, 1.0 - 1e-9, point1(5.0), 10, 1);
  CHECK(late.value == doctest::Approx(0.4999369216871808).epsilon(1e-12));

  CHECK_THROWS_AS(mollify(q, sigma, 0.0, point1(0.0), 10, 1), contract_error);
  CHECK_THROWS_AS(mollify(q, sigma, 1.0, point1(0.0), 10, 1), contract_error);
}

TEST_CASE("monte carlo smoothing matches a product closed form for boxes") {
  auto sigma = CovarianceMatrix::identity(2);
  ConvexSet box;
  box.family = ConvexFamily::axis_box;
  box.lo = Eigen::VectorXd::Constant(2, -1.0);
  box.hi = Eigen::VectorXd::Constant(2, 0.8);
  Eigen::VectorXd x(2);
  x << 0.2, -0.4;
  const double t = 0.3;
  auto r = mollify(box, sigma, t, x, 200000, 99);
  CHECK_FALSE(r.closed_form);
  CHECK(r.se > 0.0);
  CHECK(r.value >= 0.0);
  CHECK(r.value <= 1.0);
  double expect = 1.0;
  for (int i = 0; i < 2; ++i) {
    double lo = (box.lo[i] - std::sqrt(1.0 - t) * x[i]) / std::sqrt(t);
    double hi = (box.hi[i] - std::sqrt(1.0 - t) * x[i]) / std::sqrt(t);
    expect *= normal_cdf(hi) - normal_cdf(lo);
  }
  CHECK(std::abs(r.value - expect) < 4.0 * r.se + 1e-6);

  auto tiny = mollify(box, sigma, t, x, 200, 99);
  CHECK(tiny.low_budget);
}

TEST_CASE("equation solution vanishes on the whole space and by symmetry") {
  auto sigma = CovarianceMatrix::identity(1);
  auto whole = ConvexTestClass::whole(1).sets[0];
  auto r = stein_solution(whole, sigma, 0.1, point1(2.0), 64, 10, 1);
  CHECK(r.value == 0.0);
  CHECK(r.se == 0.0);

  auto q = half_space_1d(0.0);
  auto at_zero = stein_solution(q, sigma, 0.1, point1(0.0), 64, 10, 1);
  CHECK(at_zero.closed_form);
  CHECK(at_zero.value == doctest::Approx(0.0).scale(1.0).epsilon(1e-13));

  auto plus = stein_solution(q, sigma, 0.05, point1(0.9), 128, 10, 1);
  auto minus = stein_solution(q, sigma, 0.05, point1(-0.9), 128, 10, 1);
  CHECK(plus.value == doctest::Approx(-minus.value).epsilon(1e-10));
  CHECK(plus.value != 0.0);
  CHECK(plus.nodes == 128);
  CHECK(plus.u_max > -std::log(1.0 - 0.05));

  CHECK_THROWS_AS(stein_solution(q, sigma, 0.1, point1(0.0), 16, 10, 1),
                  contract_error);
}

TEST_CASE("equation solution shrinks as t approaches one") {
  auto sigma = CovarianceMatrix::identity(1);
  auto q = half_space_1d(0.3);
  double prev = std::abs(stein_solution(q, sigma, 0.1, point1(1.0), 96, 10, 1).value);
  for (double t : {0.9, 0.999999}) {
    double cur = std::abs(stein_solution(q, sigma, t, point1(1.0), 96, 10, 1).value);
    CHECK(cur < prev + 1e-12);
    prev = cur;
  }
  CHECK(prev < 0.01);
}

TEST_CASE("derivative probe finds nothing on the whole space") {
  auto sigma = CovarianceMatrix::identity(2);
  auto whole = ConvexTestClass::whole(2).sets[0];
  auto points = sample_normal(sigma, 3, 44);
  auto probe = hessian_probe(whole, sigma, 0.1, points, 48, 2000, 7, 0.0);
  CHECK(probe.probe_max == 0.0);
  CHECK_FALSE(probe.contradiction);
  CHECK(probe.lemma_rhs >= 530.0);
  CHECK(probe.total == 3);
}

TEST_CASE("derivative probe stays below the lemma cap for half-spaces") {
  auto sigma = CovarianceMatrix::identity(1);
  auto q = half_space_1d(0.25);
  auto points = sample_normal(sigma, 4, 202);
  for (double t : {0.1, 0.01}) {
    auto probe = hessian_probe(q, sigma, t, points, 64, 4000, 11, 0.05);
    CHECK(probe.usable >= 1);
    CHECK(probe.point_values.size() == 4);
    CHECK_FALSE(probe.contradiction);
    CHECK(probe.probe_max <= probe.lemma_rhs);
    CHECK(probe.step > 0.0);
  }
}

TEST_CASE("smoothing inequality holds for a shifted sample") {
  auto sigma = CovarianceMatrix::identity(1);
  auto q = half_space_1d(0.5);
  const std::size_t R = 20000;
  auto batch = sample_normal(sigma, R, 3141);
  for (auto &v : batch.data) v += 0.3;
  for (double t : {0.1, 0.01, 0.001}) {
    auto chk = smoothing_check(q, sigma, t, batch, 20000, 17, 1u << 16);
    CHECK(chk.ok);
    CHECK(chk.rhs >= chk.lhs - 3.0 * chk.se);
    CHECK(chk.slack > 0.0);
    // lhs approximates |Phi(0.2) - Phi(0.5)|.
    double expect = std::abs(normal_cdf(0.2) - normal_cdf(0.5));
    CHECK(std::abs(chk.lhs - expect) < 0.02);
  }
}

TEST_CASE("smoothing check validates its inputs") {
  auto sigma = CovarianceMatrix::identity(2);
  auto q = ConvexTestClass::whole(2).sets[0];
  auto batch = sample_normal(sigma, 16, 5);
  CHECK_NOTHROW(smoothing_check(q, sigma, 0.1, batch, 2000, 1, 1u << 12));
  auto wrong = sample_normal(CovarianceMatrix::identity(1), 16, 5);
  CHECK_THROWS_AS(smoothing_check(q, sigma, 0.1, wrong, 2000, 1, 1u << 12),
                  contract_error);
}
