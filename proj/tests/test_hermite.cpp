#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "malstein/common.hpp"
#include "malstein/hermite.hpp"

using namespace malstein;

TEST_CASE("low-order polynomial values match closed forms") {
  const double x = 1.7;
  CHECK(hermite_value(0, x) == 1.0);
  CHECK(hermite_value(1, x) == x);
  CHECK(hermite_value(2, x) == doctest::Approx(x * x - 1.0).epsilon(1e-15));
  CHECK(hermite_value(3, x) ==
        doctest::Approx(x * x * x - 3.0 * x).epsilon(1e-15));
  CHECK(hermite_value(4, x) ==
        doctest::Approx(x * x * x * x - 6.0 * x * x + 3.0).epsilon(1e-15));
  std::vector<double> v;
  hermite_values(6, x, v);
  REQUIRE(v.size() == 7);
  bool equal = true;
  for (int k = 0; k <= 6; ++k) equal = equal && v[k] == hermite_value(k, x);
  CHECK(equal);
}

TEST_CASE("factorials and norms agree") {
  CHECK(factorial_d(0) == 1.0);
  CHECK(factorial_d(5) == 120.0);
  auto h2 = HermiteExpansion::from_coeffs({0.0, 0.0, 1.0});
  CHECK(h2.sq_norm() == doctest::Approx(2.0).epsilon(1e-15));
  auto mix = HermiteExpansion::from_coeffs({0.0, 3.0, 0.0, 1.0});
  CHECK(mix.sq_norm() == doctest::Approx(9.0 + 6.0).epsilon(1e-15));
}

TEST_CASE("quadrature integrates gaussian moments exactly") {
  const auto& rule = gauss_hermite(10);
  double m2 = 0.0, m4 = 0.0, m6 = 0.0, mass = 0.0;
  for (auto [x, w] : rule) {
    mass += w;
    m2 += w * x * x;
    m4 += w * x * x * x * x;
    m6 += w * std::pow(x, 6);
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(m2 == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(m4 == doctest::Approx(3.0).epsilon(1e-13));
  CHECK(m6 == doctest::Approx(15.0).epsilon(1e-12));
}

TEST_CASE("orthogonality under the quadrature rule") {
  const auto& rule = gauss_hermite(40);
  for (int j = 0; j <= 6; ++j) {
    for (int k = j; k <= 6; ++k) {
      double s = 0.0;
      for (auto [x, w] : rule) s += w * hermite_value(j, x) * hermite_value(k, x);
      double expect = (j == k) ? factorial_d(j) : 0.0;
      CHECK(s == doctest::Approx(expect).epsilon(1e-10).scale(1.0));
    }
  }
}

TEST_CASE("expansion of a cubic recovers its exact coefficients") {
  // x^3 = H_3 + 3 H_1.
  auto e = expand([](double x) { return x * x * x; }, 8);
  REQUIRE(e.max_index() >= 3);
  CHECK(e.coeff[1] == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(e.coeff[3] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(e.coeff[0]) == 0.0);
  CHECK(std::abs(e.coeff[2]) == 0.0);
  CHECK(e.tail_sq < 1e-10);
  CHECK(e.centered());
  CHECK(e.hermite_rank() == 1);
}

TEST_CASE("expansion of a square is H_2 plus the mean term") {
  auto e = expand([](double x) { return x * x; }, 6);
  CHECK(e.coeff[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e.coeff[2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(e.centered());
}

TEST_CASE("derivative and shift act on coefficients as documented") {
  auto h3 = HermiteExpansion::from_coeffs({0.0, 0.0, 0.0, 1.0});
  auto d = h3.derivative();  // H_3' = 3 H_2
  REQUIRE(d.max_index() == 2);
  CHECK(d.coeff[2] == 3.0);
  auto s = h3.shift();  // slot l -> l-1
  REQUIRE(s.max_index() == 2);
  CHECK(s.coeff[2] == 1.0);
  const double x = 0.83;
  CHECK(d.evaluate(x) ==
        doctest::Approx(3.0 * hermite_value(2, x)).epsilon(1e-14));
}

TEST_CASE("evaluate matches the coefficient sum") {
  auto e = HermiteExpansion::from_coeffs({0.0, 2.0, -1.0, 0.5});
  const double x = -1.31;
  double direct = 2.0 * hermite_value(1, x) - hermite_value(2, x) +
                  0.5 * hermite_value(3, x);
  CHECK(e.evaluate(x) == doctest::Approx(direct).epsilon(1e-14));
}

TEST_CASE("rank and sparsity predicates") {
  auto h2 = HermiteExpansion::from_coeffs({0.0, 0.0, 1.0});
  CHECK(h2.hermite_rank() == 2);
  CHECK(h2.is_two_sparse());
  auto h13 = HermiteExpansion::from_coeffs({0.0, 1.0, 0.0, 0.25});
  CHECK(h13.hermite_rank() == 1);
  CHECK(h13.is_two_sparse());
  auto h12 = HermiteExpansion::from_coeffs({0.0, 1.0, 1.0});
  CHECK_FALSE(h12.is_two_sparse());
  auto zero = HermiteExpansion::from_coeffs({0.0});
  CHECK_THROWS_AS((void)zero.hermite_rank(), model_error);
}

TEST_CASE("text round trip preserves coefficients") {
  auto e = HermiteExpansion::from_coeffs({0.0, 0.5, 0.0, -0.125});
  std::istringstream in(e.to_text());
  auto back = HermiteExpansion::from_text(in);
  REQUIRE(back.coeff.size() == e.coeff.size());
  bool equal = true;
  for (std::size_t k = 0; k < e.coeff.size(); ++k)
    equal = equal && back.coeff[k] == e.coeff[k];
  CHECK(equal);
}
