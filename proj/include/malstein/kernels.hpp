#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "malstein/autocovariance.hpp"

namespace malstein {

// Heavy data-parallel loops, each as an OpenMP version and a serial
// reference. Both fill per-index slots and reduce in a fixed serial order,
// so results are bit-identical for any thread count.

// sum_{i,j,k,l in [0,n)} |rho(i-j)| . mid(j-k) . |rho(k-l)| with
// mid = |rho| (square_mid = false) or rho^2 (square_mid = true).
// The literal quadruple loop; n is capped at 128.
double quad_sum_brute(const AutocovarianceModel &model, long long n,
                      bool square_mid);
double quad_sum_brute_serial(const AutocovarianceModel &model, long long n,
                             bool square_mid);

// Empirical P(a . F_r <= threshold) for every (direction, threshold) pair:
// scores[d][r] = a_d . F_r precomputed by the caller. Counts use strict
// ranking of sorted scores; out[d*T + t] = #{r : scores[d][r] <= thr[d][t]}.
void halfspace_counts(std::span<const std::vector<double>> scores,
                      std::span<const std::vector<double>> thresholds,
                      std::vector<std::size_t> &out);
void halfspace_counts_serial(std::span<const std::vector<double>> scores,
                             std::span<const std::vector<double>> thresholds,
                             std::vector<std::size_t> &out);

}  // namespace malstein
