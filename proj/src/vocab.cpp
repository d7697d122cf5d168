#include "contrasum/vocab.hpp"

#include <algorithm>
#include <set>

#include "contrasum/errors.hpp"
#include "contrasum/text.hpp"

namespace contrasum::s2s {

namespace txt = contrasum::text;

std::vector<std::string> word_tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&]() {
    if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  };
  for (char c : text) {
    if (txt::is_word_char(c)) {
      current += txt::to_lower(c);
    } else {
      flush();
      if (c != ' ' && c != '\t' && c != '\n' && c != '\r') {
        tokens.push_back(std::string(1, c));
      }
    }
  }
  flush();
  return tokens;
}

Vocabulary::Vocabulary() : tokens_{"<pad>", "<bos>", "<eos>", "<unk>"} { rebuild_index(); }

Vocabulary Vocabulary::build(const std::vector<std::string>& texts) {
  std::set<std::string> words;
  for (const std::string& t : texts) {
    for (std::string& w : word_tokenize(t)) words.insert(std::move(w));
  }
  Vocabulary v;
  for (const std::string& w : words) v.tokens_.push_back(w);
  v.rebuild_index();
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 4 || tokens[0] != "<pad>" || tokens[1] != "<bos>" || tokens[2] != "<eos>" ||
      tokens[3] != "<unk>") {
    throw ContractError("vocabulary must start with <pad>, <bos>, <eos>, <unk>");
  }
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  v.rebuild_index();
  return v;
}

void Vocabulary::rebuild_index() {
  sorted_.clear();
  sorted_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    sorted_.emplace_back(tokens_[i], static_cast<int>(i));
  }
  std::sort(sorted_.begin(), sorted_.end());
}

int Vocabulary::index_of(std::string_view token) const {
  auto it = std::lower_bound(sorted_.begin(), sorted_.end(), token,
                             [](const auto& entry, std::string_view t) { return entry.first < t; });
  if (it != sorted_.end() && it->first == token) return it->second;
  return kUnkId;
}

const std::string& Vocabulary::token_at(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= tokens_.size()) {
    throw ContractError("token index out of range: " + std::to_string(index));
  }
  return tokens_[static_cast<std::size_t>(index)];
}

std::vector<int> tokenize(std::string_view text, const Vocabulary& vocab) {
  std::vector<int> ids;
  for (const std::string& w : word_tokenize(text)) ids.push_back(vocab.index_of(w));
  return ids;
}

std::string detokenize(std::span<const int> ids, const Vocabulary& vocab) {
  std::string out;
  for (int id : ids) {
    if (id == kPadId || id == kBosId || id == kEosId) continue;
    const std::string& tok = vocab.token_at(id);
    const bool punct = tok.size() == 1 && !txt::is_word_char(tok[0]);
    if (!out.empty() && !punct) out += ' ';
    out += tok;
  }
  return out;
}

}  // namespace contrasum::s2s
