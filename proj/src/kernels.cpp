#include "malstein/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "malstein/common.hpp"
#include "malstein/parallel.hpp"

namespace malstein {

namespace {

double quad_sum_impl(const AutocovarianceModel &model, long long n,
                     bool square_mid, bool parallel) {
  if (n < 1) throw contract_error("quad_sum_brute: n must be >= 1");
  if (n > 128) throw resource_error("quad_sum_brute: n limited to 128");
  // Cache rho on the needed window; the loop itself stays literal.
  std::vector<double> rho_abs(static_cast<std::size_t>(n));
  for (long long d = 0; d < n; ++d)
    rho_abs[static_cast<std::size_t>(d)] = std::abs(model(d));
  std::vector<double> mid(static_cast<std::size_t>(n));
  for (long long d = 0; d < n; ++d)
    mid[static_cast<std::size_t>(d)] =
        square_mid ? rho_abs[static_cast<std::size_t>(d)] * rho_abs[static_cast<std::size_t>(d)]
                   : rho_abs[static_cast<std::size_t>(d)];

  std::vector<double> partial(static_cast<std::size_t>(n), 0.0);
  auto body = [&](std::ptrdiff_t i) {
    double s = 0.0;
    for (long long j = 0; j < n; ++j) {
      double w1 = rho_abs[static_cast<std::size_t>(std::llabs(i - j))];
      if (w1 == 0.0) continue;
      for (long long k = 0; k < n; ++k) {
        double w2 = mid[static_cast<std::size_t>(std::llabs(j - k))];
        if (w2 == 0.0) continue;
        double w12 = w1 * w2;
        for (long long l = 0; l < n; ++l)
          s += w12 * rho_abs[static_cast<std::size_t>(std::llabs(k - l))];
      }
    }
    partial[static_cast<std::size_t>(i)] = s;
  };
  if (parallel)
    parallel_for(static_cast<std::ptrdiff_t>(n), body);
  else
    for (long long i = 0; i < n; ++i) body(static_cast<std::ptrdiff_t>(i));
  return neumaier_sum(partial);
}

void halfspace_counts_impl(std::span<const std::vector<double>> scores,
                           std::span<const std::vector<double>> thresholds,
                           std::vector<std::size_t> &out, bool parallel) {
  if (scores.size() != thresholds.size())
    throw contract_error("halfspace_counts: direction count mismatch");
  std::size_t D = scores.size();
  std::size_t T = D == 0 ? 0 : thresholds[0].size();
  for (const auto &t : thresholds)
    if (t.size() != T)
      throw contract_error("halfspace_counts: ragged threshold table");
  out.assign(D * T, 0);
  auto body = [&](std::ptrdiff_t d) {
    auto di = static_cast<std::size_t>(d);
    std::vector<double> sorted(scores[di]);
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t t = 0; t < T; ++t) {
      auto it = std::upper_bound(sorted.begin(), sorted.end(), thresholds[di][t]);
      out[di * T + t] = static_cast<std::size_t>(it - sorted.begin());
    }
  };
  if (parallel)
    parallel_for(static_cast<std::ptrdiff_t>(D), body);
  else
    for (std::size_t d = 0; d < D; ++d) body(static_cast<std::ptrdiff_t>(d));
}

}  // namespace

double quad_sum_brute(const AutocovarianceModel &model, long long n,
                      bool square_mid) {
  return quad_sum_impl(model, n, square_mid, true);
}

double quad_sum_brute_serial(const AutocovarianceModel &model, long long n,
                             bool square_mid) {
  return quad_sum_impl(model, n, square_mid, false);
}

void halfspace_counts(std::span<const std::vector<double>> scores,
                      std::span<const std::vector<double>> thresholds,
                      std::vector<std::size_t> &out) {
  halfspace_counts_impl(scores, thresholds, out, true);
}

void halfspace_counts_serial(std::span<const std::vector<double>> scores,
                             std::span<const std::vector<double>> thresholds,
                             std::vector<std::size_t> &out) {
  halfspace_counts_impl(scores, thresholds, out, false);
}

}  // namespace malstein
