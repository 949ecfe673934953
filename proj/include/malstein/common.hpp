#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace malstein {

// Precondition violations: bad arguments, mismatched dimensions.
struct contract_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
// Invalid probabilistic model inputs (non-PSD covariance, bad parameters).
struct model_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
// Problem size exceeds a documented limit.
struct resource_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Overflow or an internally inconsistent numeric result.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Config file problems, reported with line/field context.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Compensated (Neumaier) summation; order-independent accuracy for final
// reductions of per-replicate partials.
double neumaier_sum(std::span<const double> xs);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};
MeanSe mean_se(std::span<const double> xs);

double normal_cdf(double z);
double normal_pdf(double z);
// Inverse of normal_cdf on (0,1); accurate to ~1e-15 after refinement.
double normal_quantile(double p);

std::uint64_t fnv1a64(std::string_view s);
std::uint64_t mix64(std::uint64_t x);

// Stream ids for the counter-based RNG. Distinct (tag, a, b) triples give
// unrelated streams; collisions are 64-bit-hash unlikely.
std::uint64_t derive_stream(std::string_view tag, std::uint64_t a = 0,
                            std::uint64_t b = 0);

// Shortest round-trip decimal form; locale-free, used for all CSV output.
std::string format_double(double v);

}  // namespace malstein
