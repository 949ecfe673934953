#include "malstein/rng.hpp"

#include <cmath>

namespace malstein {

namespace {

constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

inline void philox_round(std::array<std::uint64_t, 4>& x,
                         const std::array<std::uint64_t, 2>& k) {
  __uint128_t p0 = static_cast<__uint128_t>(kMul0) * x[0];
  __uint128_t p1 = static_cast<__uint128_t>(kMul1) * x[2];
  std::uint64_t hi0 = static_cast<std::uint64_t>(p0 >> 64);
  std::uint64_t lo0 = static_cast<std::uint64_t>(p0);
  std::uint64_t hi1 = static_cast<std::uint64_t>(p1 >> 64);
  std::uint64_t lo1 = static_cast<std::uint64_t>(p1);
  x = {hi1 ^ x[1] ^ k[0], lo1, hi0 ^ x[3] ^ k[1], lo0};
}

// 53-bit uniform in (0,1); never exactly 0 or 1, safe under log().
inline double to_unit(std::uint64_t w) {
  return static_cast<double>(w >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

constexpr double kTwoPi = 6.283185307179586476925287;

}  // namespace

std::array<std::uint64_t, 4> Philox4x64::block(const std::array<std::uint64_t, 2>& key,
                                               const std::array<std::uint64_t, 4>& ctr) {
  std::array<std::uint64_t, 4> x = ctr;
  std::array<std::uint64_t, 2> k = key;
  philox_round(x, k);
  for (int r = 1; r < 10; ++r) {
    k[0] += kWeyl0;
    k[1] += kWeyl1;
    philox_round(x, k);
  }
  return x;
}

NormalStream::NormalStream(std::uint64_t seed, std::uint64_t stream)
    : key_{seed, 0xda3e39cb94b95bdbULL}, stream_(stream) {}

double NormalStream::normal(std::uint64_t i) const {
  auto w = Philox4x64::block(key_, {i >> 1, stream_, 0x6e6f726d616cULL, 0});
  double u1 = to_unit(w[0]);
  double u2 = to_unit(w[1]);
  double r = std::sqrt(-2.0 * std::log(u1));
  return (i & 1) ? r * std::sin(kTwoPi * u2) : r * std::cos(kTwoPi * u2);
}

void NormalStream::fill_normals(std::span<double> out, std::uint64_t first) const {
  std::uint64_t i = first;
  std::size_t j = 0;
  while (j < out.size()) {
    auto w = Philox4x64::block(key_, {i >> 1, stream_, 0x6e6f726d616cULL, 0});
    double u1 = to_unit(w[0]);
    double u2 = to_unit(w[1]);
    double r = std::sqrt(-2.0 * std::log(u1));
    if ((i & 1) == 0 && j + 1 < out.size()) {
      out[j++] = r * std::cos(kTwoPi * u2);
      out[j++] = r * std::sin(kTwoPi * u2);
      i += 2;
    } else {
      out[j++] = (i & 1) ? r * std::sin(kTwoPi * u2) : r * std::cos(kTwoPi * u2);
      ++i;
    }
  }
}

std::uint64_t NormalStream::u64(std::uint64_t i) const {
  auto w = Philox4x64::block(key_, {i >> 2, stream_, 0x756e6966ULL, 0});
  return w[i & 3];
}

double NormalStream::uniform(std::uint64_t i) const { return to_unit(u64(i)); }

std::uint64_t NormalStream::index(std::uint64_t i, std::uint64_t n) const {
  // 53-bit uniform scaled to [0,n); bias is O(n / 2^53), negligible here.
  return static_cast<std::uint64_t>(uniform(i) * static_cast<double>(n)) % n;
}

}  // namespace malstein
