#include "malstein/batch.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "malstein/common.hpp"

namespace malstein {

std::vector<double> SampleBatch::col_means() const {
  std::vector<double> out(m, 0.0);
  std::vector<double> comp(m, 0.0);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t i = 0; i < m; ++i) {
      // Neumaier accumulation per column.
      double x = data[r * m + i];
      double s = out[i] + x;
      comp[i] += std::abs(out[i]) >= std::abs(x) ? (out[i] - s) + x : (x - s) + out[i];
      out[i] = s;
    }
  for (std::size_t i = 0; i < m; ++i) out[i] = (out[i] + comp[i]) / static_cast<double>(R);
  return out;
}

std::vector<double> SampleBatch::second_moment() const {
  std::vector<double> out(m * m, 0.0);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i; j < m; ++j) out[i * m + j] += data[r * m + i] * data[r * m + j];
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) {
      out[i * m + j] /= static_cast<double>(R);
      out[j * m + i] = out[i * m + j];
    }
  return out;
}

void SampleBatch::save_csv(const std::string &path) const {
  std::ofstream f(path);
  if (!f) throw resource_error("cannot open for writing: " + path);
  f << "# seed=" << provenance.seed << " stream=" << provenance.stream
    << " generator=" << provenance.generator << "\n";
  f << "replicate";
  for (std::size_t i = 0; i < m; ++i) f << ",F" << i;
  f << "\n";
  for (std::size_t r = 0; r < R; ++r) {
    f << r;
    for (std::size_t i = 0; i < m; ++i) f << "," << format_double(data[r * m + i]);
    f << "\n";
  }
  if (!f) throw resource_error("write failed: " + path);
}

SampleBatch SampleBatch::load_csv(const std::string &path) {
  std::ifstream f(path);
  if (!f) throw resource_error("cannot open for reading: " + path);
  SampleBatch b;
  std::string line;
  bool header_seen = false;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream is(line.substr(1));
      std::string tok;
      while (is >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
        if (k == "seed") b.provenance.seed = std::stoull(v);
        else if (k == "stream") b.provenance.stream = std::stoull(v);
        else if (k == "generator") b.provenance.generator = v;
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      b.m = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
      continue;
    }
    std::istringstream is(line);
    std::string cell;
    std::getline(is, cell, ',');  // replicate index, positional
    std::size_t got = 0;
    while (std::getline(is, cell, ',')) {
      b.data.push_back(std::stod(cell));
      ++got;
    }
    if (got != b.m) throw config_error("batch csv: ragged row in " + path);
    ++b.R;
  }
  if (!header_seen) throw config_error("batch csv: missing header in " + path);
  return b;
}

}  // namespace malstein
