#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "malstein/batch.hpp"
#include "malstein/bounds.hpp"
#include "malstein/covariance.hpp"

namespace malstein {

enum class ConvexFamily { half_space, axis_box, ball, polytope, whole };

std::string family_name(ConvexFamily f);

// One measurable convex subset of R^m. Half-spaces and polytopes are stored
// as {x : normals * x <= offsets}; boxes as [lo, hi]; balls by center and
// radius. The whole space is the degenerate member with probability 1.
struct ConvexSet {
  ConvexFamily family = ConvexFamily::whole;
  Eigen::MatrixXd normals;  // faces x m
  Eigen::VectorXd offsets;
  Eigen::VectorXd lo, hi;
  Eigen::VectorXd center;
  double radius = 0.0;

  bool contains(const Eigen::VectorXd &x) const;
  // Closed-form N(0, Sigma) probability where one exists (half-spaces;
  // boxes under diagonal Sigma; whole space). Returns false otherwise and
  // the caller falls back to the shared Monte Carlo reference.
  bool gauss_prob(const CovarianceMatrix &sigma, double &out) const;
};

// A finite family of convex sets, reproducible from (family, m, seed,
// counts). Half-space classes store unit directions plus probability levels;
// the thresholds themselves are empirical quantiles of the batch under test,
// so they are materialized inside dc_lower. The other families are concrete
// geometry scaled to Sigma's marginal standard deviations.
class ConvexTestClass {
 public:
  static ConvexTestClass half_spaces(std::size_t m, std::size_t directions,
                                     std::size_t thresholds,
                                     std::uint64_t seed);
  static ConvexTestClass axis_boxes(std::size_t m, std::size_t count,
                                    const CovarianceMatrix &sigma,
                                    std::uint64_t seed);
  static ConvexTestClass balls(std::size_t m, std::size_t count,
                               const CovarianceMatrix &sigma,
                               std::uint64_t seed);
  static ConvexTestClass polytopes(std::size_t m, std::size_t count,
                                   std::size_t faces,
                                   const CovarianceMatrix &sigma,
                                   std::uint64_t seed);
  static ConvexTestClass whole(std::size_t m);

  // Image class under an invertible linear map: {x : a.x <= c} maps to
  // {y : (A^{-T}a).y <= c}. Half-space families only.
  ConvexTestClass linear_image(const Eigen::MatrixXd &A) const;

  ConvexFamily family = ConvexFamily::half_space;
  std::size_t m = 0;
  std::uint64_t seed = 0;

  Eigen::MatrixXd directions;  // directions x m, unit rows
  std::vector<double> levels;  // threshold probability levels in (0,1)

  std::vector<ConvexSet> sets;  // boxes / balls / polytopes / whole

  std::size_t size() const;
};

struct DistanceEstimate {
  std::string kind;    // "dc-lower" / "dW" / "d2"
  std::string family;  // test class or solver description
  double value = 0.0;
  double se = 0.0;          // statistical error scale (bootstrap or solver)
  double envelope95 = 0.0;  // upper 95% bootstrap envelope of the statistic
  std::size_t r_f = 0;
  std::size_t r_g = 0;
  std::size_t class_count = 0;
  std::map<std::string, double> details;
};

struct DcOptions {
  std::size_t bootstrap = 200;
  std::uint64_t bootstrap_seed = 0x626f6f74;
  std::size_t mc_reference = 1u << 20;  // draws for sets without closed form
  std::uint64_t mc_seed = 0x67726566;
  bool bonferroni = false;
};

// Max over the class of |Phat(F in Q) - P(N_Sigma in Q)|. A lower bound on
// the convex distance by construction; the bootstrap quantifies the
// selection bias of the max.
DistanceEstimate dc_lower(const SampleBatch &batch,
                          const CovarianceMatrix &sigma,
                          const ConvexTestClass &cls,
                          const DcOptions &opts = {});

// m = 1 exact sweeps used by dc_lower and by the calibration tests.
// ks_exact_1d is the exact empirical Kolmogorov statistic against
// N(0, sigma_sq); dc_interval_exact_1d is the exact sup over all intervals.
double ks_exact_1d(std::vector<double> scores, double sigma_sq);
double dc_interval_exact_1d(std::vector<double> scores, double sigma_sq);

struct TransportOptions {
  enum class Method { automatic, exact, entropic };
  Method method = Method::automatic;
  std::size_t exact_cap = 4096;
  double reg_factor = 0.01;  // epsilon = reg_factor * median pairwise cost
  double marginal_tol = 1e-6;
  std::size_t max_iter = 20000;
  std::size_t bootstrap = 0;  // 1-d path only; 0 disables
  std::uint64_t bootstrap_seed = 0x64777462;
};

// Empirical 1-Wasserstein distance between equal-size batches: monotone
// rearrangement in one dimension, exact assignment up to exact_cap rows,
// entropic regularization with a primal/dual certificate beyond.
DistanceEstimate dW_estimate(const SampleBatch &f, const SampleBatch &g,
                             const TransportOptions &opts = {});

// One member of the smooth d2 test family: h(x) = lambda * q(a.x + c) with
// q either a quadratic capped smoothly to linear growth or a Gaussian bump.
// lambda is chosen so the certified Lipschitz and Hessian HS bounds are
// both <= 1; members carry the certificates and d2_estimate rejects any
// member whose certificates exceed 1.
struct SmoothTestMember {
  enum class Shape { capped_quadratic, gauss_bump };
  Shape shape = Shape::gauss_bump;
  Eigen::VectorXd a;  // unit direction
  double c = 0.0;     // scalar shift
  double lambda = 1.0;
  double cap = 3.0;   // quadratic region is |s| <= cap
  double ramp = 1.0;  // q'' ramps to 0 over [cap, cap + ramp]
  double lip_bound = 1.0;
  double hess_bound = 1.0;

  static SmoothTestMember capped_quadratic(Eigen::VectorXd a, double c,
                                           double cap, double ramp);
  static SmoothTestMember gauss_bump(Eigen::VectorXd a, double c);

  double scalar(double s) const;  // q(s) before the lambda scale
  double evaluate(const Eigen::VectorXd &x) const;
  // E h(N_Sigma), closed form after projecting to the direction a.
  double gauss_mean(const CovarianceMatrix &sigma) const;
};

std::vector<SmoothTestMember> default_d2_family(std::size_t m,
                                                std::size_t directions,
                                                std::size_t shifts,
                                                std::uint64_t seed);

DistanceEstimate d2_estimate(const SampleBatch &batch,
                             const CovarianceMatrix &sigma,
                             const std::vector<SmoothTestMember> &family);

struct SandwichResult {
  bool ok = false;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  // rhs - lhs
};

// The testable direction of the main bound: a valid lower estimate of the
// convex distance must not exceed the clipped bound plus statistical error.
SandwichResult sandwich_check(const DistanceEstimate &dc,
                              const BoundReport &bound, double se_mult = 3.0);

// Isoperimetric-constant estimates for the convex/Wasserstein bridge.
// half_space_exact = sup over half-spaces of the boundary density,
// (2 pi lambda_min)^{-1/2}; mc_lower sweeps centered balls and boxes by
// Monte Carlo enlargement increments; identity_bound = 4 m^{1/4} divided by
// sqrt(lambda_min), an upper bound obtained by mapping to the standard
// Gaussian. value = max(mc_lower, half_space_exact), a defensible lower
// estimate used for reporting.
struct GammaEstimate {
  double mc_lower = 0.0;
  double half_space_exact = 0.0;
  double identity_bound = 0.0;
  double value = 0.0;
  bool identity = false;
};

GammaEstimate gamma_estimate(const CovarianceMatrix &sigma,
                             std::uint64_t seed, std::size_t draws = 1u << 17);

}  // namespace malstein
