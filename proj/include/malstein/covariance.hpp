#pragma once

#include <Eigen/Dense>
#include <cstddef>

namespace malstein {

// Symmetric positive-definite target covariance with eagerly computed
// spectral data. Construction validates symmetry (contract_error on a
// relative asymmetry above 1e-12) and positive definiteness (model_error
// when the smallest eigenvalue is <= 0).
class CovarianceMatrix {
 public:
  explicit CovarianceMatrix(Eigen::MatrixXd sigma);

  static CovarianceMatrix identity(std::size_t m);
  static CovarianceMatrix diagonal(const Eigen::VectorXd &d);

  std::size_t dim() const { return static_cast<std::size_t>(sigma_.rows()); }
  const Eigen::MatrixXd &matrix() const { return sigma_; }
  const Eigen::MatrixXd &cholesky() const { return chol_; }  // lower factor
  const Eigen::MatrixXd &inverse() const { return inv_; }

  double op_norm() const { return lambda_max_; }
  double inv_op_norm() const { return 1.0 / lambda_min_; }
  double lambda_min() const { return lambda_min_; }
  double hs_norm() const { return hs_norm_; }
  double trace() const { return trace_; }
  double trace_sq() const { return trace_sq_; }  // tr(Sigma^2)

  // E||N(0,Sigma)||^4 = (tr Sigma)^2 + 2 tr(Sigma^2).
  double gaussian_fourth_moment() const { return trace_ * trace_ + 2.0 * trace_sq_; }

  bool is_identity() const { return is_identity_; }

 private:
  Eigen::MatrixXd sigma_, chol_, inv_;
  double lambda_min_ = 0.0, lambda_max_ = 0.0;
  double hs_norm_ = 0.0, trace_ = 0.0, trace_sq_ = 0.0;
  bool is_identity_ = false;
};

}  // namespace malstein
