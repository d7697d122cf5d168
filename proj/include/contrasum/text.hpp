#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace contrasum::text {

inline bool is_word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c == '\'';
}

inline char to_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }
inline char to_upper(char c) { return (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c; }
inline bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }

std::string casefold(std::string_view s);

// True when [pos, pos+len) is not glued to adjacent word characters.
bool word_bounded(std::string_view text, std::size_t pos, std::size_t len);

// Leftmost case-insensitive occurrence of `word` on word boundaries, at or
// after `from`. `word` may contain spaces (multi-word surface forms).
std::optional<std::size_t> find_word(std::string_view text, std::string_view word,
                                     std::size_t from = 0);

bool contains_word(std::string_view text, std::string_view word);

// Copies the leading-capital pattern of `original` onto `replacement`.
std::string match_capitalization(std::string_view original, std::string_view replacement);

std::string lowercase_first(std::string_view s);
std::string uppercase_first(std::string_view s);

}  // namespace contrasum::text
