#include "contrasum/text.hpp"

namespace contrasum::text {

std::string casefold(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = to_lower(c);
  return out;
}

bool word_bounded(std::string_view text, std::size_t pos, std::size_t len) {
  if (pos > 0 && is_word_char(text[pos - 1])) return false;
  const std::size_t end = pos + len;
  if (end < text.size() && is_word_char(text[end])) return false;
  return true;
}

namespace {

bool matches_at(std::string_view text, std::string_view word, std::size_t pos) {
  if (pos + word.size() > text.size()) return false;
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (to_lower(text[pos + i]) != to_lower(word[i])) return false;
  }
  return word_bounded(text, pos, word.size());
}

}  // namespace

std::optional<std::size_t> find_word(std::string_view text, std::string_view word,
                                     std::size_t from) {
  if (word.empty() || text.size() < word.size()) return std::nullopt;
  for (std::size_t pos = from; pos + word.size() <= text.size(); ++pos) {
    if (matches_at(text, word, pos)) return pos;
  }
  return std::nullopt;
}

bool contains_word(std::string_view text, std::string_view word) {
  return find_word(text, word).has_value();
}

std::string match_capitalization(std::string_view original, std::string_view replacement) {
  std::string out(replacement);
  if (!original.empty() && !out.empty() && is_upper(original.front())) {
    out.front() = to_upper(out.front());
  }
  return out;
}

std::string lowercase_first(std::string_view s) {
  std::string out(s);
  if (!out.empty()) out.front() = to_lower(out.front());
  return out;
}

std::string uppercase_first(std::string_view s) {
  std::string out(s);
  if (!out.empty()) out.front() = to_upper(out.front());
  return out;
}

}  // namespace contrasum::text
