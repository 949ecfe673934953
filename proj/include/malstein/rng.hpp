#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace malstein {

// Philox4x64-10 counter-mode generator. A draw is a pure function of
// (key, counter), so any replicate or block can be generated independently,
// in any order, on any thread, with identical output.
struct Philox4x64 {
  static std::array<std::uint64_t, 4> block(const std::array<std::uint64_t, 2>& key,
                                            const std::array<std::uint64_t, 4>& ctr);
};

// One logical stream = (seed, stream id). Draw i is addressed by a block
// counter; interleaving across threads cannot change any value.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream);

  double normal(std::uint64_t i) const;  // i-th N(0,1) variate of the stream
  void fill_normals(std::span<double> out, std::uint64_t first = 0) const;

  std::uint64_t u64(std::uint64_t i) const;
  double uniform(std::uint64_t i) const;              // in (0,1), 53-bit
  std::uint64_t index(std::uint64_t i, std::uint64_t n) const;  // uniform on [0,n)

 private:
  std::array<std::uint64_t, 2> key_;
  std::uint64_t stream_;
};

}  // namespace malstein
