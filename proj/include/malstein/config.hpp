#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace malstein {

// Key-value configuration with [section] headers, # comments and
// whitespace-separated list values. Lookups report the file, section, key
// and line number on every failure.
class Config {
 public:
  static Config parse_file(const std::string &path);
  static Config parse_string(const std::string &text,
                             const std::string &origin = "<string>");

  bool has(const std::string &section, const std::string &key) const;
  std::vector<std::string> sections() const;

  std::string get_string(const std::string &section,
                         const std::string &key) const;
  std::string get_string(const std::string &section, const std::string &key,
                         const std::string &fallback) const;
  double get_double(const std::string &section, const std::string &key) const;
  double get_double(const std::string &section, const std::string &key,
                    double fallback) const;
  std::uint64_t get_u64(const std::string &section, const std::string &key) const;
  std::uint64_t get_u64(const std::string &section, const std::string &key,
                        std::uint64_t fallback) const;
  std::vector<double> get_doubles(const std::string &section,
                                  const std::string &key) const;
  std::vector<long long> get_ints(const std::string &section,
                                  const std::string &key) const;

  // Stable digest of one section's parsed content, used by --resume to
  // detect config edits between runs.
  std::uint64_t section_hash(const std::string &section) const;
  std::uint64_t full_hash() const;

  void set(const std::string &section, const std::string &key,
           const std::string &value);

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  std::string origin_;
  std::map<std::string, std::map<std::string, Entry>> data_;

  const Entry &lookup(const std::string &section, const std::string &key) const;
  [[noreturn]] void fail(const std::string &section, const std::string &key,
                         int line, const std::string &what) const;
};

}  // namespace malstein
