#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "malstein/autocovariance.hpp"
#include "malstein/batch.hpp"
#include "malstein/covariance.hpp"

namespace malstein {

// Finitely supported real sequence on the integers: values on offsets
// [lo, lo + size). Reads outside the window return 0.
struct Sequence {
  long long lo = 0;
  std::vector<double> v;

  long long hi() const { return lo + static_cast<long long>(v.size()) - 1; }
  double at(long long k) const {
    long long i = k - lo;
    return (i >= 0 && i < static_cast<long long>(v.size()))
               ? v[static_cast<std::size_t>(i)]
               : 0.0;
  }
  double lp(double p) const;  // p >= 1
  double l1() const { return lp(1.0); }
  double l2() const { return lp(2.0); }
  double linf() const;
  Sequence abs() const;
  Sequence square() const;   // entrywise x^2
  Sequence reversed() const; // k -> -k
};

enum class ConvMethod { automatic, direct, fft };

// Full linear convolution on the window [a.lo+b.lo, a.hi+b.hi]. The fft
// path pads to a fast length; the direct path is plain double summation.
Sequence convolve(const Sequence &a, const Sequence &b,
                  ConvMethod method = ConvMethod::automatic);

// l2(Z) inner product by direct summation over the overlap.
double inner(const Sequence &a, const Sequence &b);

// rho_n: k -> rho(k) on |k| < n, zero elsewhere.
Sequence truncate(const AutocovarianceModel &model, long long n);
// Indicator of |k| < n (mass 2n-1).
Sequence ones_window(long long n);
// Indicator of [0, n).
Sequence block_window(long long n);

// Named convolutions entering the rate analysis, computed exactly.
struct ConvolutionTable {
  long long n = 0;
  std::map<double, double> rho_lp;  // p -> lp norm of rho_n
  Sequence rho;                     // rho_n
  Sequence rho_rho;                 // rho_n * rho_n
  Sequence rho_ones;                // rho_n * 1_n
  Sequence rho_rhosq;               // rho_n * rho_n^2
  Sequence rho_triple;              // rho_n * rho_n * rho_n
};
ConvolutionTable convolution_sums(const AutocovarianceModel &model, long long n,
                                  std::span<const double> ps);

Eigen::MatrixXd toeplitz(const AutocovarianceModel &model, std::size_t n);

// Exact sampler for (G_1,...,G_n) with autocovariance rho. Replicates come
// in pairs: pair p consumes one normal stream and yields replicates 2p and
// 2p+1, so replicate r is a pure function of (seed, stream_base + r/2, r%2)
// and serial/parallel schedules agree bit for bit.
class PathSampler {
 public:
  enum class Mode { iid_direct, circulant, dense_chol };

  PathSampler(AutocovarianceModel model, std::size_t n, std::uint64_t seed,
              std::uint64_t stream_base = 0);
  ~PathSampler();
  PathSampler(const PathSampler &) = delete;
  PathSampler &operator=(const PathSampler &) = delete;

  Mode mode() const { return mode_; }
  std::size_t n() const { return n_; }
  std::uint64_t seed() const { return seed_; }

  // Per-thread scratch (FFT buffers and plan). Construct one per worker.
  class Workspace {
   public:
    explicit Workspace(const PathSampler &s);
    ~Workspace();
    Workspace(const Workspace &) = delete;
    Workspace &operator=(const Workspace &) = delete;

   private:
    friend class PathSampler;
    struct State;
    std::unique_ptr<State> state_;
  };

  void sample_pair(std::size_t p, std::span<double> a, std::span<double> b,
                   Workspace &ws) const;
  void sample_path(std::size_t r, std::span<double> out, Workspace &ws) const;

 private:
  AutocovarianceModel model_;
  std::size_t n_ = 0;
  std::uint64_t seed_ = 0, stream_base_ = 0;
  Mode mode_ = Mode::iid_direct;
  std::size_t embed_len_ = 0;            // circulant order M = 2n-2
  std::vector<double> scale_;            // sqrt(lambda_l / M), clipped
  Eigen::MatrixXd factor_;               // dense fallback factor L, T_n = L L^T
};

// Materialized batches; row r of the result is path r. The parallel and
// serial versions produce bit-identical output.
std::vector<double> sample_stationary(const AutocovarianceModel &model,
                                      std::size_t n, std::size_t R,
                                      std::uint64_t seed);
std::vector<double> sample_stationary_serial(const AutocovarianceModel &model,
                                             std::size_t n, std::size_t R,
                                             std::uint64_t seed);

// i.i.d. N(0, Sigma) replicates via the Cholesky factor.
SampleBatch sample_normal(const CovarianceMatrix &sigma, std::size_t R,
                          std::uint64_t seed, std::uint64_t stream_base = 0);

}  // namespace malstein
