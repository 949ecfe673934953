#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace malstein {

inline constexpr int kSchemaVersion = 1;

// Machine-readable record of a hard failure (inequality violation, fit
// breakdown). Serialized to failures.json; presence of any record makes the
// run exit nonzero.
struct Failure {
  std::string kind;
  std::string where;
  std::string message;
  std::map<std::string, double> data;
};

// Collected output of one harness run. The CSV body (header + rows) is
// deterministic for a fixed config and seed; the timestamp comment line is
// the only part allowed to differ between reruns.
struct RunReport {
  std::string run_kind;
  std::uint64_t config_hash = 0;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> summary_lines;
  std::vector<Failure> failures;
  std::vector<std::string> warnings;

  void add_row(std::vector<std::string> cells);

  // Deterministic part of results.csv: config-hash comment, header, rows.
  std::string csv_body() const;

  void write_csv(const std::string &path) const;
  void write_json(const std::string &path) const;
  void write_summary(const std::string &path) const;
  void write_failures(const std::string &path) const;

  // Writes results.csv, results.json, summary.txt and, if any failures were
  // recorded, failures.json into dir. Returns the process exit code.
  int write_all(const std::string &dir) const;
};

struct CsvContents {
  std::uint64_t config_hash = 0;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

// Reads a results.csv produced by write_csv. Returns nullopt when the file
// does not exist; throws config_error on malformed contents.
std::optional<CsvContents> read_results_csv(const std::string &path);

std::string csv_escape(const std::string &cell);

}  // namespace malstein
