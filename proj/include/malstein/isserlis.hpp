#pragma once

#include <Eigen/Dense>
#include <map>
#include <span>
#include <vector>

namespace malstein {

// Exact moments of centered jointly Gaussian vectors by pair-partition
// reduction: E[X_a * rest] = sum_b C(a,b) E[rest without one X_b].
// Memoized on the power multi-index, so repeated queries are cheap.
class GaussianMomentTable {
 public:
  explicit GaussianMomentTable(Eigen::MatrixXd cov);

  // E[prod_i X_i^{powers[i]}]; powers.size() must equal the dimension.
  double monomial(const std::vector<int> &powers) const;

  // E[prod_t P_t(X_{var[t]})] with P_t given by monomial coefficients
  // (poly[t][p] multiplies x^p).
  double polynomial_product(const std::vector<int> &var,
                            const std::vector<std::vector<double>> &poly) const;

 private:
  Eigen::MatrixXd cov_;
  mutable std::map<std::vector<int>, double> memo_;
  double monomial_rec(std::vector<int> &powers) const;
};

// One factor of the form b . Z + Z^T A Z - tr A for Z ~ N(0, I_N).
// Either part may be absent (zero size).
struct GaussianFormNode {
  Eigen::VectorXd b;
  Eigen::MatrixXd A;
};

// E[prod of nodes] by enumerating perfect matchings of the legs (one leg
// per linear part, two per quadratic part; the two legs of one quadratic
// node are never paired together, which implements the -tr A centering).
// Closed chains give traces tr(A_{i1} A_{i2} ...); open chains give
// b_u^T A ... A b_v.
double gaussian_form_moment(std::span<const GaussianFormNode> nodes);

}  // namespace malstein
