#include "malstein/config.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "malstein/common.hpp"

namespace malstein {

namespace {

std::string trim(const std::string &s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace

Config Config::parse_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw config_error("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path);
}

Config Config::parse_string(const std::string &text, const std::string &origin) {
  Config c;
  c.origin_ = origin;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw config_error(origin + ":" + std::to_string(lineno) +
                           ": unterminated section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw config_error(origin + ":" + std::to_string(lineno) +
                           ": empty section name");
      c.data_[section];
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error(origin + ":" + std::to_string(lineno) +
                         ": expected 'key = value', got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw config_error(origin + ":" + std::to_string(lineno) + ": empty key");
    if (section.empty())
      throw config_error(origin + ":" + std::to_string(lineno) + ": key '" +
                         key + "' outside any [section]");
    c.data_[section][key] = Entry{value, lineno};
  }
  return c;
}

bool Config::has(const std::string &section, const std::string &key) const {
  auto s = data_.find(section);
  return s != data_.end() && s->second.count(key) > 0;
}

std::vector<std::string> Config::sections() const {
  std::vector<std::string> out;
  for (const auto &[name, kv] : data_) out.push_back(name);
  return out;
}

const Config::Entry &Config::lookup(const std::string &section,
                                    const std::string &key) const {
  auto s = data_.find(section);
  if (s == data_.end())
    throw config_error(origin_ + ": missing section [" + section + "]");
  auto k = s->second.find(key);
  if (k == s->second.end())
    throw config_error(origin_ + ": missing key '" + key + "' in [" + section +
                       "]");
  return k->second;
}

void Config::fail(const std::string &section, const std::string &key, int line,
                  const std::string &what) const {
  throw config_error(origin_ + ":" + std::to_string(line) + ": [" + section +
                     "] " + key + ": " + what);
}

std::string Config::get_string(const std::string &section,
                               const std::string &key) const {
  return lookup(section, key).value;
}

std::string Config::get_string(const std::string &section,
                               const std::string &key,
                               const std::string &fallback) const {
  return has(section, key) ? lookup(section, key).value : fallback;
}

double Config::get_double(const std::string &section,
                          const std::string &key) const {
  const Entry &e = lookup(section, key);
  errno = 0;
  char *end = nullptr;
  double v = std::strtod(e.value.c_str(), &end);
  if (end == e.value.c_str() || *end != '\0' || errno == ERANGE)
    fail(section, key, e.line, "not a number: '" + e.value + "'");
  return v;
}

double Config::get_double(const std::string &section, const std::string &key,
                          double fallback) const {
  return has(section, key) ? get_double(section, key) : fallback;
}

std::uint64_t Config::get_u64(const std::string &section,
                              const std::string &key) const {
  const Entry &e = lookup(section, key);
  errno = 0;
  char *end = nullptr;
  unsigned long long v = std::strtoull(e.value.c_str(), &end, 10);
  if (end == e.value.c_str() || *end != '\0' || errno == ERANGE)
    fail(section, key, e.line, "not an unsigned integer: '" + e.value + "'");
  return static_cast<std::uint64_t>(v);
}

std::uint64_t Config::get_u64(const std::string &section,
                              const std::string &key,
                              std::uint64_t fallback) const {
  return has(section, key) ? get_u64(section, key) : fallback;
}

std::vector<double> Config::get_doubles(const std::string &section,
                                        const std::string &key) const {
  const Entry &e = lookup(section, key);
  std::istringstream in(e.value);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    errno = 0;
    char *end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0' || errno == ERANGE)
      fail(section, key, e.line, "not a number in list: '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) fail(section, key, e.line, "empty list");
  return out;
}

std::vector<long long> Config::get_ints(const std::string &section,
                                        const std::string &key) const {
  const Entry &e = lookup(section, key);
  std::istringstream in(e.value);
  std::vector<long long> out;
  std::string tok;
  while (in >> tok) {
    errno = 0;
    char *end = nullptr;
    long long v = std::strtoll(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0' || errno == ERANGE)
      fail(section, key, e.line, "not an integer in list: '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) fail(section, key, e.line, "empty list");
  return out;
}

std::uint64_t Config::section_hash(const std::string &section) const {
  auto s = data_.find(section);
  std::string blob = section + "\n";
  if (s != data_.end())
    for (const auto &[k, e] : s->second) blob += k + "=" + e.value + "\n";
  return fnv1a64(blob);
}

std::uint64_t Config::full_hash() const {
  std::string blob;
  for (const auto &[name, kv] : data_) {
    blob += "[" + name + "]\n";
    for (const auto &[k, e] : kv) blob += k + "=" + e.value + "\n";
  }
  return fnv1a64(blob);
}

void Config::set(const std::string &section, const std::string &key,
                 const std::string &value) {
  data_[section][key] = Entry{value, 0};
}

}  // namespace malstein
