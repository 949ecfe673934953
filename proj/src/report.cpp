#include "malstein/report.hpp"

#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "malstein/common.hpp"

namespace malstein {

namespace {

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

std::string utc_now() {
  std::time_t t = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string &line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  cells.push_back(cur);
  return cells;
}

void write_text(const std::string &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw resource_error("report: cannot write '" + path + "'");
  out << text;
}

}  // namespace

std::string csv_escape(const std::string &cell) {
  if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char ch : cell) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

void RunReport::add_row(std::vector<std::string> cells) {
  if (cells.size() != columns.size())
    throw contract_error("report: row has " + std::to_string(cells.size()) +
                         " cells, expected " + std::to_string(columns.size()));
  rows.push_back(std::move(cells));
}

std::string RunReport::csv_body() const {
  std::ostringstream out;
  out << "# config_hash " << hex64(config_hash) << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i)
    out << (i ? "," : "") << csv_escape(columns[i]);
  out << "\n";
  for (const auto &row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << csv_escape(row[i]);
    out << "\n";
  }
  return out.str();
}

void RunReport::write_csv(const std::string &path) const {
  write_text(path, "# generated " + utc_now() + "\n" + csv_body());
}

void RunReport::write_json(const std::string &path) const {
  nlohmann::json j;
  j["run_kind"] = run_kind;
  j["schema_version"] = kSchemaVersion;
  j["config_hash"] = hex64(config_hash);
  j["columns"] = columns;
  nlohmann::json jrows = nlohmann::json::array();
  for (const auto &row : rows) {
    nlohmann::json obj;
    for (std::size_t i = 0; i < columns.size(); ++i) obj[columns[i]] = row[i];
    jrows.push_back(std::move(obj));
  }
  j["rows"] = std::move(jrows);
  j["warnings"] = warnings;
  nlohmann::json jfail = nlohmann::json::array();
  for (const auto &f : failures) {
    nlohmann::json obj;
    obj["kind"] = f.kind;
    obj["where"] = f.where;
    obj["message"] = f.message;
    obj["data"] = f.data;
    jfail.push_back(std::move(obj));
  }
  j["failures"] = std::move(jfail);
  write_text(path, j.dump(2) + "\n");
}

void RunReport::write_summary(const std::string &path) const {
  std::ostringstream out;
  out << "run: " << run_kind << "\n";
  out << "config_hash: " << hex64(config_hash) << "\n";
  out << "rows: " << rows.size() << "\n";
  for (const auto &line : summary_lines) out << line << "\n";
  for (const auto &w : warnings) out << "warning: " << w << "\n";
  for (const auto &f : failures)
    out << "FAILURE [" << f.kind << "] " << f.where << ": " << f.message
        << "\n";
  out << (failures.empty() ? "status: ok" : "status: failed") << "\n";
  write_text(path, out.str());
}

void RunReport::write_failures(const std::string &path) const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto &f : failures) {
    nlohmann::json obj;
    obj["kind"] = f.kind;
    obj["where"] = f.where;
    obj["message"] = f.message;
    obj["data"] = f.data;
    arr.push_back(std::move(obj));
  }
  write_text(path, arr.dump(2) + "\n");
}

int RunReport::write_all(const std::string &dir) const {
  std::filesystem::create_directories(dir);
  write_csv(dir + "/results.csv");
  write_json(dir + "/results.json");
  write_summary(dir + "/summary.txt");
  if (!failures.empty()) write_failures(dir + "/failures.json");
  return failures.empty() ? 0 : 1;
}

std::optional<CsvContents> read_results_csv(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  CsvContents out;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::istringstream ls(line.substr(1));
      std::string tag, value;
      ls >> tag >> value;
      if (tag == "config_hash")
        out.config_hash = std::stoull(value, nullptr, 16);
      continue;
    }
    if (!have_header) {
      out.columns = split_csv_line(line);
      have_header = true;
      continue;
    }
    auto cells = split_csv_line(line);
    if (cells.size() != out.columns.size())
      throw config_error("results csv '" + path + "': row with " +
                         std::to_string(cells.size()) + " cells, expected " +
                         std::to_string(out.columns.size()));
    out.rows.push_back(std::move(cells));
  }
  if (!have_header)
    throw config_error("results csv '" + path + "': missing header");
  return out;
}

}  // namespace malstein
