#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace malstein {

enum class AcvKind { iid, ar1, fgn, table };

// Stationary unit-variance autocovariance rho(k), symmetric in k.
// Models: iid (delta_0), AR(1) powers r^|k|, fractional Gaussian noise
// increments, or an explicit finite table. rho(0) = 1 always.
class AutocovarianceModel {
 public:
  static AutocovarianceModel iid();
  static AutocovarianceModel ar1(double r);
  static AutocovarianceModel fgn(double hurst);
  static AutocovarianceModel table(std::vector<double> rho);

  double operator()(long long k) const;
  AcvKind kind() const;
  double param() const;             // r for ar1, H for fgn, else 0
  long long support() const;        // largest |k| with rho(k) != 0; -1 if unbounded
  // sum_{|k| < n} |rho(k)|^p with p >= 0; memoized per (p, n).
  double abs_pow_sum(double p, long long n) const;
  std::string id() const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
  explicit AutocovarianceModel(std::shared_ptr<const Impl> impl);
};

}  // namespace malstein
