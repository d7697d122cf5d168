#include "contrasum/kvconfig.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "contrasum/errors.hpp"

namespace contrasum {

namespace {

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

}  // namespace

KvConfig KvConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

KvConfig KvConfig::parse_string(std::string_view content) {
  KvConfig cfg;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    const std::size_t nl = content.find('\n', pos);
    std::string_view line =
        content.substr(pos, nl == std::string_view::npos ? content.size() - pos : nl - pos);
    ++line_no;
    pos = (nl == std::string_view::npos) ? content.size() + 1 : nl + 1;

    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw SchemaError(line_no, "expected 'key = value', got: " + std::string(line));
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw SchemaError(line_no, "empty key");
    cfg.entries_[key] = value;
  }
  return cfg;
}

const std::string& KvConfig::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ValidationError(key, "missing required config key");
  return it->second;
}

std::string KvConfig::get_or(const std::string& key, const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

std::int64_t KvConfig::get_int(const std::string& key) const {
  const std::string& raw = get(key);
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(raw.c_str(), &end, 10);
  if (errno != 0 || end == raw.c_str() || *end != '\0') {
    throw ValidationError(key, "not an integer: '" + raw + "'");
  }
  return v;
}

std::int64_t KvConfig::get_int_or(const std::string& key, std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::uint64_t KvConfig::get_uint(const std::string& key) const {
  const std::string& raw = get(key);
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(raw.c_str(), &end, 10);
  if (errno != 0 || end == raw.c_str() || *end != '\0' || raw.find('-') != std::string::npos) {
    throw ValidationError(key, "not an unsigned integer: '" + raw + "'");
  }
  return v;
}

std::uint64_t KvConfig::get_uint_or(const std::string& key, std::uint64_t fallback) const {
  return has(key) ? get_uint(key) : fallback;
}

double KvConfig::get_real(const std::string& key) const {
  const std::string& raw = get(key);
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(raw.c_str(), &end);
  if (errno != 0 || end == raw.c_str() || *end != '\0') {
    throw ValidationError(key, "not a number: '" + raw + "'");
  }
  return v;
}

double KvConfig::get_real_or(const std::string& key, double fallback) const {
  return has(key) ? get_real(key) : fallback;
}

}  // namespace contrasum
