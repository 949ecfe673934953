// Wall-clock comparison of the parallel kernels against their serial
// references. Each pair is verified to agree bit-for-bit before timing, so
// the table doubles as a correctness smoke test at benchmark sizes.
//
// Usage: bench_kernels [threads]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "malstein/functionals.hpp"
#include "malstein/gausssim.hpp"
#include "malstein/hermite.hpp"
#include "malstein/kernels.hpp"
#include "malstein/parallel.hpp"
#include "malstein/rng.hpp"

using namespace malstein;

namespace {

template <typename F>
double time_best_of(int reps, F &&fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (dt < best) best = dt;
  }
  return best;
}

void print_row(const char *name, const char *shape, double serial_s,
               double parallel_s, bool identical) {
  std::printf("%-24s %-26s %10.4f %10.4f %8.2fx   %s\n", name, shape, serial_s,
              parallel_s, serial_s / parallel_s,
              identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char **argv) {
  if (argc > 1) set_threads(std::atoi(argv[1]));
  std::printf("threads: %d\n\n", max_threads());
  std::printf("%-24s %-26s %10s %10s %9s   %s\n", "kernel", "shape", "serial",
              "parallel", "speedup", "check");

  {
    AutocovarianceModel model = AutocovarianceModel::fgn(0.7);
    const long long n = 96;
    double serial_v = 0.0, parallel_v = 0.0;
    double ts = time_best_of(3, [&] {
      serial_v = quad_sum_brute_serial(model, n, false);
    });
    double tp = time_best_of(3, [&] {
      parallel_v = quad_sum_brute(model, n, false);
    });
    print_row("quad_sum_brute", "fgn(0.7), n=96", ts, tp,
              std::memcmp(&serial_v, &parallel_v, sizeof(double)) == 0);
  }

  {
    const std::size_t D = 64, R = 200000, T = 48;
    NormalStream gen(42, 0);
    std::vector<std::vector<double>> scores(D), thresholds(D);
    std::uint64_t ctr = 0;
    for (std::size_t d = 0; d < D; ++d) {
      scores[d].resize(R);
      for (std::size_t r = 0; r < R; ++r) scores[d][r] = gen.normal(ctr++);
      thresholds[d].resize(T);
      for (std::size_t t = 0; t < T; ++t)
        thresholds[d][t] = -2.0 + 4.0 * static_cast<double>(t) /
                                      static_cast<double>(T - 1);
    }
    std::vector<std::size_t> out_s, out_p;
    double ts = time_best_of(3, [&] {
      halfspace_counts_serial(scores, thresholds, out_s);
    });
    double tp = time_best_of(3, [&] {
      halfspace_counts(scores, thresholds, out_p);
    });
    print_row("halfspace_counts", "64 x 200000 x 48", ts, tp, out_s == out_p);
  }

  {
    AutocovarianceModel model = AutocovarianceModel::fgn(0.65);
    const std::size_t n = 1024, R = 2000;
    std::vector<double> a, b;
    double ts = time_best_of(3, [&] {
      a = sample_stationary_serial(model, n, R, 7);
    });
    double tp = time_best_of(3, [&] { b = sample_stationary(model, n, R, 7); });
    bool same = a.size() == b.size() &&
                std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
    print_row("sample_stationary", "fgn(0.65), n=1024, R=2000", ts, tp, same);
  }

  {
    BreuerMajorSpec spec;
    spec.phi = HermiteExpansion::from_coeffs({0.0, 0.0, 1.0});
    spec.model = AutocovarianceModel::ar1(0.5);
    spec.partition = {0.0, 0.5, 1.0};
    spec.n = 512;
    const std::size_t R = 4000;
    SampleBatch a, b;
    double ts = time_best_of(3, [&] {
      a = breuer_major_sample_serial(spec, R, 11);
    });
    double tp = time_best_of(3, [&] { b = breuer_major_sample(spec, R, 11); });
    bool same =
        a.data.size() == b.data.size() &&
        std::memcmp(a.data.data(), b.data.data(),
                    a.data.size() * sizeof(double)) == 0;
    print_row("breuer_major_sample", "H2, ar1(0.5), n=512", ts, tp, same);
  }

  return 0;
}
