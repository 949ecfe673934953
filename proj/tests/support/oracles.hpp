#pragma once

// Reference implementations for tests, deliberately written along different
// computational paths than the library code they check. Everything here is
// brute force and only feasible at test sizes.

#include <cmath>
#include <cstddef>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "malstein/autocovariance.hpp"
#include "malstein/functionals.hpp"
#include "malstein/hermite.hpp"
#include "malstein/isserlis.hpp"

namespace malstein::testoracle {

// Polynomial in z_0..z_{N-1}: monomial power vector -> coefficient.
using Poly = std::map<std::vector<int>, double>;

inline Poly qf_poly(const QuadraticFormVector &v, std::size_t i) {
  const auto N = static_cast<std::size_t>(v.N);
  Poly p;
  auto add = [&](std::vector<int> powers, double c) {
    if (c == 0.0) return;
    p[std::move(powers)] += c;
  };
  std::vector<int> zero(N, 0);
  // b[i] of size zero means no linear part for that coordinate.
  if (i < v.b.size() && v.b[i].size() > 0)
    for (std::size_t k = 0; k < N; ++k) {
      std::vector<int> mono = zero;
      mono[k] = 1;
      add(std::move(mono), v.b[i][static_cast<Eigen::Index>(k)]);
    }
  const Eigen::MatrixXd &A = v.A[i];
  for (std::size_t k = 0; k < N; ++k)
    for (std::size_t l = k; l < N; ++l) {
      std::vector<int> mono = zero;
      mono[k] += 1;
      mono[l] += 1;
      double c = k == l ? A(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k))
                        : 2.0 * A(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
      add(std::move(mono), c);
    }
  add(zero, -A.trace());
  return p;
}

inline Poly poly_mul(const Poly &a, const Poly &b) {
  Poly out;
  for (const auto &[pa, ca] : a)
    for (const auto &[pb, cb] : b) {
      std::vector<int> powers(pa.size());
      for (std::size_t k = 0; k < pa.size(); ++k) powers[k] = pa[k] + pb[k];
      out[std::move(powers)] += ca * cb;
    }
  return out;
}

inline double poly_gauss_mean(const Poly &p, const GaussianMomentTable &tbl) {
  double acc = 0.0;
  for (const auto &[powers, c] : p) acc += c * tbl.monomial(powers);
  return acc;
}

struct QfOracle {
  Eigen::MatrixXd cov;
  Eigen::MatrixXd cov_sq;
  double fourth = 0.0;
  double gauss_fourth = 0.0;
  double gap = 0.0;
};

// Exact moments by monomial expansion over Z ~ N(0, I_N) and pair-partition
// reduction of every monomial. Exponential in N; keep N <= 6.
inline QfOracle qf_oracle(const QuadraticFormVector &v) {
  const std::size_t m = v.dim();
  GaussianMomentTable tbl(
      Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(v.N),
                                static_cast<Eigen::Index>(v.N)));
  std::vector<Poly> f(m), f2(m);
  for (std::size_t i = 0; i < m; ++i) {
    f[i] = qf_poly(v, i);
    f2[i] = poly_mul(f[i], f[i]);
  }
  QfOracle out;
  out.cov.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  out.cov_sq.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  Eigen::MatrixXd second(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      auto I = static_cast<Eigen::Index>(i), J = static_cast<Eigen::Index>(j);
      out.cov(I, J) = poly_gauss_mean(poly_mul(f[i], f[j]), tbl);
      second(I, J) = poly_gauss_mean(poly_mul(f2[i], f2[j]), tbl);
    }
  out.fourth = second.sum();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      auto I = static_cast<Eigen::Index>(i), J = static_cast<Eigen::Index>(j);
      out.cov_sq(I, J) = second(I, J) - out.cov(I, I) * out.cov(J, J);
    }
  double tr = out.cov.trace();
  out.gauss_fourth = tr * tr + 2.0 * (out.cov * out.cov).trace();
  out.gap = out.fourth - out.gauss_fourth;
  return out;
}

// E[phi(X) phi(Y)] for jointly standard (X, Y) with correlation rho, by
// substituting Y = rho X + sqrt(1-rho^2) Z and double Gauss-Hermite
// quadrature. Exact for polynomial phi once q exceeds the degree.
inline double joint_phi_moment(const HermiteExpansion &phi, double rho,
                               int q = 64) {
  const auto &rule = gauss_hermite(q);
  double s = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  double acc = 0.0;
  for (const auto &[x, wx] : rule)
    for (const auto &[z, wz] : rule)
      acc += wx * wz * phi.evaluate(x) * phi.evaluate(rho * x + s * z);
  return acc;
}

// Literal full convolution, quadratic cost.
inline std::vector<double> naive_convolve(const std::vector<double> &a,
                                          const std::vector<double> &b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

// Literal quadruple sums over [0,n)^4; the independent check for both the
// kernel loop and the windowed-convolution identity.
inline double brute_quad_sum(const AutocovarianceModel &model, long long n,
                             bool square_mid) {
  double acc = 0.0;
  for (long long i = 0; i < n; ++i)
    for (long long j = 0; j < n; ++j) {
      double mid = square_mid ? model(i - j) * model(i - j)
                              : std::abs(model(i - j));
      if (mid == 0.0) continue;
      for (long long k = 0; k < n; ++k) {
        double left = std::abs(model(k - i));
        if (left == 0.0) continue;
        for (long long l = 0; l < n; ++l)
          acc += left * mid * std::abs(model(j - l));
      }
    }
  return acc / (static_cast<double>(n) * static_cast<double>(n));
}

}  // namespace malstein::testoracle
