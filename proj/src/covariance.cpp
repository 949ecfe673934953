#include "malstein/covariance.hpp"

#include <cmath>
#include <sstream>

#include "malstein/common.hpp"

namespace malstein {

CovarianceMatrix::CovarianceMatrix(Eigen::MatrixXd sigma) : sigma_(std::move(sigma)) {
  if (sigma_.rows() == 0 || sigma_.rows() != sigma_.cols())
    throw contract_error("covariance: matrix must be square and nonempty");
  double scale = std::max(1.0, sigma_.cwiseAbs().maxCoeff());
  double asym = (sigma_ - sigma_.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale)
    throw contract_error("covariance: matrix is not symmetric");
  sigma_ = 0.5 * (sigma_ + sigma_.transpose().eval());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma_);
  lambda_min_ = es.eigenvalues().minCoeff();
  lambda_max_ = es.eigenvalues().maxCoeff();
  if (lambda_min_ <= 0.0) {
    std::ostringstream os;
    os << "covariance: not positive definite (lambda_min = " << lambda_min_ << ")";
    throw model_error(os.str());
  }
  inv_ = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
  chol_ = Eigen::LLT<Eigen::MatrixXd>(sigma_).matrixL();
  trace_ = sigma_.trace();
  trace_sq_ = (sigma_ * sigma_).trace();
  hs_norm_ = sigma_.norm();
  is_identity_ = (sigma_ - Eigen::MatrixXd::Identity(sigma_.rows(), sigma_.cols()))
                     .cwiseAbs()
                     .maxCoeff() < 1e-14;
}

CovarianceMatrix CovarianceMatrix::identity(std::size_t m) {
  return CovarianceMatrix(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(m),
                                                    static_cast<Eigen::Index>(m)));
}

CovarianceMatrix CovarianceMatrix::diagonal(const Eigen::VectorXd &d) {
  Eigen::MatrixXd s = d.asDiagonal();
  return CovarianceMatrix(std::move(s));
}

}  // namespace malstein
