#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace malstein {

// Where a batch of samples came from, carried alongside the data so that
// downstream reports can state it without re-threading parameters.
struct Provenance {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::string generator;  // e.g. "breuer-major fgn(0.7) n=1024"
};

// R replicates of an m-dimensional statistic, row-major: row r holds
// replicate r. Rows are independent by construction; columns are the
// coordinates of the vector functional.
struct SampleBatch {
  std::size_t m = 0;
  std::size_t R = 0;
  std::vector<double> data;  // size m*R, data[r*m + i]
  Provenance provenance;

  double at(std::size_t r, std::size_t i) const { return data[r * m + i]; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * m, m};
  }

  // Column mean and the m x m sample second-moment matrix E[F F^T]
  // (uncentered; the functionals here are mean zero by construction).
  std::vector<double> col_means() const;
  std::vector<double> second_moment() const;  // row-major m*m

  void save_csv(const std::string &path) const;
  static SampleBatch load_csv(const std::string &path);
};

}  // namespace malstein
