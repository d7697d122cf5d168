#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace contrasum {

inline constexpr const char* kToolVersion = "0.1.0";

// Provenance record written next to every output artifact; the output hashes
// let reruns be compared without re-reading the data files.
struct RunManifest {
  std::string command;
  std::string tool_version = kToolVersion;
  std::map<std::string, std::string> config;  // resolved key-values
  std::vector<std::string> inputs;
  struct Output {
    std::string path;
    std::string content_hash;  // fnv1a64, hex
  };
  std::vector<Output> outputs;
  std::uint64_t seed = 0;
  double duration_seconds = 0.0;

  void add_output(const std::string& path);  // hashes the file
  void write(const std::string& path) const;
};

}  // namespace contrasum
