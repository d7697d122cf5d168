#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace contrasum {

std::string read_file(const std::string& path);
std::vector<std::string> read_lines(const std::string& path);

// Writes via a temp file in the same directory, then renames into place.
void atomic_write_file(const std::string& path, std::string_view content);

// FNV-1a 64-bit; stable content fingerprint for rerun-identity checks.
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64_file(const std::string& path);
std::string hex64(std::uint64_t v);

}  // namespace contrasum
