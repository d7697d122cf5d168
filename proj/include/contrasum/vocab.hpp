#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace contrasum::s2s {

inline constexpr int kPadId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kUnkId = 3;

// Whitespace-and-punctuation word tokenization, case-folded. Words are runs
// of [a-z0-9'], punctuation characters become single-char tokens.
std::vector<std::string> word_tokenize(std::string_view text);

class Vocabulary {
 public:
  Vocabulary();

  // Dense indices: reserved tokens first, then the corpus words sorted.
  static Vocabulary build(const std::vector<std::string>& texts);
  // Exact index order as stored (checkpoint restore path).
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  int index_of(std::string_view token) const;  // kUnkId when absent
  const std::string& token_at(int index) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::pair<std::string, int>> sorted_;  // binary-searchable
  void rebuild_index();
};

std::vector<int> tokenize(std::string_view text, const Vocabulary& vocab);

// Joins word tokens with spaces; punctuation attaches to the previous token.
// PAD/BOS/EOS are dropped.
std::string detokenize(std::span<const int> ids, const Vocabulary& vocab);

}  // namespace contrasum::s2s
