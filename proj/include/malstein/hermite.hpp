#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace malstein {

// Probabilists' Hermite polynomials with leading coefficient 1:
// H_0 = 1, H_1 = x, H_{k+1} = x H_k - k H_{k-1}, ||H_k||^2_{L2(gamma)} = k!.
double hermite_value(int k, double x);
void hermite_values(int kmax, double x, std::vector<double>& out);
double factorial_d(int k);

// Quadrature rule for the standard Gaussian weight: E[f(Z)] ~ sum w_i f(x_i),
// exact for polynomials of degree <= 2Q-1. Nodes/weights cached per Q.
const std::vector<std::pair<double, double>>& gauss_hermite(int q);

struct HermiteExpansion {
  std::vector<double> coeff;  // coeff[k] multiplies H_k
  double tol = 0.0;           // zero threshold applied at construction
  double l2_sq = 0.0;         // ||phi||^2_{L2(gamma)} (quadrature estimate)
  double tail_sq = 0.0;       // l2_sq minus the retained sum a_k^2 k!

  static HermiteExpansion from_coeffs(std::vector<double> a);

  int max_index() const;
  bool centered() const;       // a_0 == 0 after thresholding
  int hermite_rank() const;    // smallest k >= 1 with a_k != 0; throws if none
  bool is_two_sparse() const;  // no two consecutive nonzero coefficients

  double evaluate(double x) const;
  HermiteExpansion derivative() const;  // coeffs k*a_k shifted down one slot
  HermiteExpansion shift() const;       // coeffs a_{l} moved to slot l-1
  double sq_norm() const;               // sum a_k^2 k!

  std::string to_text() const;
  static HermiteExpansion from_text(std::istream& in);
};

// Projection coefficients a_k = <phi, H_k>/k! by Gauss-Hermite quadrature.
// Coefficients with |a_k| <= 1e-10 * max(1, ||phi||_{L2}) are zeroed.
HermiteExpansion expand(const std::function<double(double)>& phi, int kmax,
                        int q = 200);

}  // namespace malstein
