#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <set>
#include <vector>

#include "malstein/common.hpp"
#include "malstein/rng.hpp"

using namespace malstein;

// The zero, all-ones and pi-digit blocks are the generator's published
// philox4x64-10 test vectors.
TEST_CASE("philox block matches the published test vectors") {
  {
    auto y = Philox4x64::block({0u, 0u}, {0u, 0u, 0u, 0u});
    CHECK(y[0] == 0x16554d9eca36314cULL);
    CHECK(y[1] == 0xdb20fe9d672d0fdcULL);
    CHECK(y[2] == 0xd7e772cee186176bULL);
    CHECK(y[3] == 0x7e68b68aec7ba23bULL);
  }
  {
    constexpr std::uint64_t ff = 0xffffffffffffffffULL;
    auto y = Philox4x64::block({ff, ff}, {ff, ff, ff, ff});
    CHECK(y[0] == 0x87b092c3013fe90bULL);
    CHECK(y[1] == 0x438c3c67be8d0224ULL);
    CHECK(y[2] == 0x9cc7d7c69cd777b6ULL);
    CHECK(y[3] == 0xa09caebf594f0ba0ULL);
  }
  {
    auto y = Philox4x64::block({0x452821e638d01377ULL, 0xbe5466cf34e90c6cULL},
                               {0x243f6a8885a308d3ULL, 0x13198a2e03707344ULL,
                                0xa4093822299f31d0ULL, 0x082efa98ec4e6c89ULL});
    CHECK(y[0] == 0xa528f45403e61d95ULL);
    CHECK(y[1] == 0x38c72dbd566e9788ULL);
    CHECK(y[2] == 0xa5a1610e72fd18b5ULL);
    CHECK(y[3] == 0x57bd43b5e52b7fe6ULL);
  }
}

namespace {

// Literal transcription of the philox4x64-10 round function, kept separate
// from the library implementation.
std::array<std::uint64_t, 4> reference_philox(std::array<std::uint64_t, 2> key,
                                              std::array<std::uint64_t, 4> x) {
  auto mulhilo = [](std::uint64_t a, std::uint64_t b, std::uint64_t &hi) {
    auto p = static_cast<unsigned __int128>(a) * b;
    hi = static_cast<std::uint64_t>(p >> 64);
    return static_cast<std::uint64_t>(p);
  };
  for (int round = 0; round < 10; ++round) {
    std::uint64_t hi0, hi1;
    std::uint64_t lo0 = mulhilo(0xD2E7470EE14C6C93ULL, x[0], hi0);
    std::uint64_t lo1 = mulhilo(0xCA5A826395121157ULL, x[2], hi1);
    x = {hi1 ^ x[1] ^ key[0], lo1, hi0 ^ x[3] ^ key[1], lo0};
    key[0] += 0x9E3779B97F4A7C15ULL;
    key[1] += 0xBB67AE8584CAA73BULL;
  }
  return x;
}

}  // namespace

TEST_CASE("philox block agrees with an independent transcription") {
  std::vector<std::array<std::uint64_t, 2>> keys = {
      {0x0123456789abcdefULL, 0xfedcba9876543210ULL},
      {1u, 0u},
      {0xdeadbeefULL, 0xfeedface0badf00dULL}};
  std::vector<std::array<std::uint64_t, 4>> ctrs = {
      {7u, 0u, 0u, 0u},
      {0u, 1u, 2u, 3u},
      {0x8000000000000000ULL, 0u, 0xffffffffffffffffULL, 5u}};
  for (const auto &k : keys)
    for (const auto &c : ctrs) {
      auto got = Philox4x64::block(k, c);
      auto want = reference_philox(k, c);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < 4; ++i) CHECK(got[i] == want[i]);
    }
}

TEST_CASE("stream values are pure functions of (seed, stream, index)") {
  NormalStream a(42, 7);
  NormalStream b(42, 7);
  NormalStream c(42, 8);
  NormalStream d(43, 7);
  bool normals_equal = true;
  bool u64_equal = true;
  bool stream_differs = false;
  bool seed_differs = false;
  for (std::uint64_t i = 0; i < 64; ++i) {
    normals_equal = normals_equal && a.normal(i) == b.normal(i);
    u64_equal = u64_equal && a.u64(i) == b.u64(i);
    stream_differs = stream_differs || a.u64(i) != c.u64(i);
    seed_differs = seed_differs || a.u64(i) != d.u64(i);
  }
  CHECK(normals_equal);
  CHECK(u64_equal);
  CHECK(stream_differs);
  CHECK(seed_differs);
}

TEST_CASE("fill_normals agrees with indexed access at any offset") {
  NormalStream s(2026, 3);
  for (std::uint64_t first : {std::uint64_t{0}, std::uint64_t{1},
                              std::uint64_t{3}, std::uint64_t{1000}}) {
    std::vector<double> buf(17);
    s.fill_normals(buf, first);
    bool equal = true;
    for (std::size_t k = 0; k < buf.size(); ++k)
      equal = equal && buf[k] == s.normal(first + k);
    CHECK(equal);
  }
}

TEST_CASE("normal stream moments match the standard normal") {
  const std::size_t r = std::size_t{1} << 18;
  NormalStream s(99, 0);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    double x = s.normal(i);
    sum += x;
    sum_sq += x * x;
  }
  const double n = static_cast<double>(r);
  double mean = sum / n;
  double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(n));
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("uniforms live strictly inside the unit interval") {
  const std::size_t r = std::size_t{1} << 16;
  NormalStream s(7, 11);
  double sum = 0.0;
  double lo = 1.0, hi = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    double u = s.uniform(i);
    sum += u;
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo > 0.0);
  CHECK(hi < 1.0);
  const double n = static_cast<double>(r);
  CHECK(std::abs(sum / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST_CASE("index draws cover the requested range roughly uniformly") {
  NormalStream s(5, 2);
  const std::uint64_t bins = 8;
  std::vector<std::size_t> count(bins, 0);
  const std::size_t r = 80000;
  for (std::size_t i = 0; i < r; ++i) {
    std::uint64_t k = s.index(i, bins);
    REQUIRE(k < bins);
    ++count[k];
  }
  const double expect = static_cast<double>(r) / bins;
  for (std::uint64_t k = 0; k < bins; ++k)
    CHECK(std::abs(count[k] - expect) < 6.0 * std::sqrt(expect));
}

TEST_CASE("derive_stream separates labeled substreams") {
  std::set<std::uint64_t> seen;
  seen.insert(derive_stream("gamma-sq"));
  seen.insert(derive_stream("dc-boot"));
  seen.insert(derive_stream("dc-ref"));
  seen.insert(derive_stream("n-point", 64));
  seen.insert(derive_stream("n-point", 128));
  CHECK(seen.size() == 5);
  CHECK(derive_stream("n-point", 64) == derive_stream("n-point", 64));
}
