#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "malstein/autocovariance.hpp"
#include "malstein/batch.hpp"
#include "malstein/common.hpp"
#include "malstein/covariance.hpp"
#include "malstein/hermite.hpp"

namespace malstein {

// Vector of normalized partial sums F_i = n^{-1/2} sum_{k in block i}
// phi(G_k), where block i covers the path indices determined by the
// partition cell (t_{i-1}, t_i]. A partition ending at T != 1 is rescaled
// by 1/T; blocks must be nonempty at the given n.
struct BreuerMajorSpec {
  HermiteExpansion phi;
  AutocovarianceModel model = AutocovarianceModel::iid();
  std::vector<double> partition;  // t_0 = 0 < t_1 < ... < t_m
  std::size_t n = 0;

  std::size_t dim() const { return partition.empty() ? 0 : partition.size() - 1; }
  // Path index range [begin, end) of block i (0-based).
  std::size_t block_begin(std::size_t i) const;
  std::size_t block_end(std::size_t i) const;
  void validate() const;
};

SampleBatch breuer_major_sample(const BreuerMajorSpec &spec, std::size_t R,
                                std::uint64_t seed);
SampleBatch breuer_major_sample_serial(const BreuerMajorSpec &spec, std::size_t R,
                                       std::uint64_t seed);

// Deterministic evaluation of F on a given path (length n).
std::vector<double> breuer_major_from_path(const BreuerMajorSpec &spec,
                                           std::span<const double> path);

// <DF_i, u_j> = (1/n) sum_{k in block i} sum_{l in block j}
// phi'(G_k) phi1(G_l) rho(k-l), with phi1 the coefficient shift of phi.
// The fast version uses a banded sum for finitely supported rho and block
// convolutions otherwise; the serial version is the literal double sum.
Eigen::MatrixXd malliavin_matrix(const BreuerMajorSpec &spec,
                                 std::span<const double> path);
Eigen::MatrixXd malliavin_matrix_serial(const BreuerMajorSpec &spec,
                                        std::span<const double> path);

// MC estimate of E || M_F - Sigma ||_HS^2 with standard error. A nonempty
// map T measures || T (M_F - Sigma) T^T ||_HS^2 instead, which is the
// gamma^2 of the linearly transformed vector T F against T Sigma T^T.
MeanSe estimate_gamma_sq(const BreuerMajorSpec &spec,
                         const Eigen::MatrixXd &sigma_target, std::size_t R,
                         std::uint64_t seed,
                         const Eigen::MatrixXd &map = Eigen::MatrixXd());
inline MeanSe estimate_gamma_sq(const BreuerMajorSpec &spec,
                                const CovarianceMatrix &sigma_target,
                                std::size_t R, std::uint64_t seed) {
  return estimate_gamma_sq(spec, sigma_target.matrix(), R, seed);
}

// Exact Cov(F_i, F_j) from E[phi(X)phi(Y)] = sum_q a_q^2 q! rho^q for
// jointly standard (X, Y) with correlation rho.
Eigen::MatrixXd exact_covariance(const BreuerMajorSpec &spec);

// Limit variance sigma^2 = sum_q a_q^2 q! sum_{|j| <= terms} rho(j)^q.
double sigma_sq_limit(const HermiteExpansion &phi, const AutocovarianceModel &model,
                      long long terms);

// Exact upper bound on Var(<DF_i, u_j>): the absolute quadruple sum
// (1/n^2) sum |Cov(phi'(X_k)phi1(X_l), phi'(X_k')phi1(X_l'))
// rho(k-l) rho(k'-l')| over the blocks of i and j, with joint moments by
// pair-partition enumeration. Feasible for n <= 32 and polynomial phi.
double malliavin_variance_bound(const BreuerMajorSpec &spec, std::size_t i,
                                std::size_t j);

// F_i = b_i . Z + Z^T A_i Z - tr A_i for Z ~ N(0, I_N); A_i symmetric.
// b_i may be empty (pure second-order case).
struct QuadraticFormVector {
  std::size_t N = 0;
  std::vector<Eigen::MatrixXd> A;
  std::vector<Eigen::VectorXd> b;

  std::size_t dim() const { return A.size(); }
  bool pure_quadratic() const;
  void validate() const;

  std::string to_text() const;
  static QuadraticFormVector from_text(std::istream &in);
};

struct QfMoments {
  Eigen::MatrixXd cov;      // E[F_i F_j]
  Eigen::MatrixXd cov_sq;   // Cov(F_i^2, F_j^2)
  double fourth = 0.0;      // E ||F||^4
  double gauss_fourth = 0.0;  // E ||N_Sigma||^4 for Sigma = cov
  double gap = 0.0;         // fourth - gauss_fourth
};

// Exact moments via trace identities in the pure second-order case and
// matching enumeration when linear parts are present.
QfMoments qf_exact_moments(const QuadraticFormVector &v);

SampleBatch qf_sample(const QuadraticFormVector &v, std::size_t R,
                      std::uint64_t seed);

}  // namespace malstein
