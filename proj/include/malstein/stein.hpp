#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "malstein/batch.hpp"
#include "malstein/covariance.hpp"
#include "malstein/distances.hpp"

namespace malstein {

// Gaussian smoothing of the indicator of a convex set:
// h_t(x) = E 1_Q(sqrt(t) N_Sigma + sqrt(1-t) x). Closed form for half-spaces
// and the whole space, Monte Carlo otherwise. se is 0 on the closed-form
// path; low_budget is a precision warning, not an error.
struct MollifyResult {
  double value = 0.0;
  double se = 0.0;
  bool closed_form = false;
  bool low_budget = false;
};

MollifyResult mollify(const ConvexSet &q, const CovarianceMatrix &sigma,
                      double t, const Eigen::VectorXd &x, std::size_t budget,
                      std::uint64_t seed);

// f_t(x) = -(1/2) int_t^1 (1/(1-s)) (E 1_Q(sqrt(s) N + sqrt(1-s) x) - P(N in Q)) ds
// evaluated with the substitution s = 1 - e^{-u}, which absorbs the
// integrable 1/(1-s) singularity; the u-grid is log spaced. Monte Carlo
// draws are shared across all quadrature nodes (common random numbers), so
// se comes from the per-draw path integrals.
struct SteinEval {
  double value = 0.0;
  double se = 0.0;
  std::size_t nodes = 0;
  double u_max = 0.0;
  bool closed_form = false;
};

SteinEval stein_solution(const ConvexSet &q, const CovarianceMatrix &sigma,
                         double t, const Eigen::VectorXd &x, std::size_t grid,
                         std::size_t budget, std::uint64_t seed);

// Central-difference probe of sum_ij (d^2_ij f_t)^2 over a set of points,
// sharing random draws across the whole stencil. Points whose differences
// are dominated by Monte Carlo noise are flagged unusable and excluded from
// the summary statistics. lemma_rhs is the derivative bound
// |Sigma^{-1}|^2 (m^2 (log t)^2 dc + 530 m^{17/6}) evaluated with the
// caller's convex-distance estimate; the probe lower-estimates its LHS, so
// only probe > rhs would be a contradiction.
struct HessianProbe {
  double probe_max = 0.0;
  double probe_mean = 0.0;
  std::size_t usable = 0;
  std::size_t total = 0;
  double step = 0.0;
  double lemma_rhs = 0.0;
  bool contradiction = false;
  std::vector<double> point_values;
  std::vector<std::uint8_t> point_usable;
};

HessianProbe hessian_probe(const ConvexSet &q, const CovarianceMatrix &sigma,
                           double t, const SampleBatch &points,
                           std::size_t grid, std::size_t budget,
                           std::uint64_t seed, double dc_estimate);

// Smoothing inequality at level t:
// |E h(F) - E h(N)| <= (4/3) |E h_t(F) - E h_t(N)| + (20 m / sqrt(2)) sqrt(t)/(1-t),
// checked against the batch with all Gaussian expectations exact where the
// set allows it. E h_t(N_Sigma) equals P(N_Sigma in Q) exactly because
// sqrt(t) N + sqrt(1-t) N' is again N_Sigma. ok allows 3 combined MC
// standard errors of slack.
struct SmoothingCheck {
  double lhs = 0.0;
  double mollified_diff = 0.0;
  double slack = 0.0;
  double rhs = 0.0;
  double se = 0.0;
  bool ok = false;
};

SmoothingCheck smoothing_check(const ConvexSet &q,
                               const CovarianceMatrix &sigma, double t,
                               const SampleBatch &batch, std::size_t budget,
                               std::uint64_t seed,
                               std::size_t ref_draws = 1u << 20);

}  // namespace malstein
