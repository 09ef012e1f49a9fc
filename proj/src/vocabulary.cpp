#include "css/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <stdexcept>

namespace css {

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    if (c == '[') {
      // "[Laughter]" style annotation: no whitespace or nested brackets inside.
      std::size_t j = i + 1;
      while (j < n && text[j] != ']' && text[j] != '[' && !is_space(text[j])) ++j;
      if (j < n && text[j] == ']' && j > i + 1) {
        std::string tok;
        for (std::size_t k = i; k <= j; ++k) tok += lower(text[k]);
        out.push_back(std::move(tok));
        i = j + 1;
        continue;
      }
    }
    if (is_word_byte(static_cast<unsigned char>(c))) {
      std::string tok;
      std::size_t j = i;
      while (j < n) {
        const auto cj = static_cast<unsigned char>(text[j]);
        if (is_word_byte(cj)) {
          tok += lower(text[j]);
          ++j;
        } else if ((cj == '\'' || cj == '-') && j + 1 < n && is_word_byte(static_cast<unsigned char>(text[j + 1]))) {
          // Internal apostrophes and hyphens stay inside the word: don't, uh-huh.
          tok += text[j];
          ++j;
        } else {
          break;
        }
      }
      out.push_back(std::move(tok));
      i = j;
      continue;
    }
    out.emplace_back(1, c);
    ++i;
  }
  return out;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

Vocabulary::Vocabulary() {
  insert(std::string(kPadToken));
  insert(std::string(kUnkToken));
  insert(std::string(kSosToken));
  insert(std::string(kEosToken));
}

void Vocabulary::insert(std::string token) {
  if (index_.count(token)) throw std::invalid_argument("duplicate vocabulary token: " + token);
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> corpus, std::size_t max_size,
                             std::span<const std::string> extra_reserved) {
  Vocabulary v;
  for (const auto& tok : extra_reserved) v.insert(tok);
  if (max_size <= v.size()) {
    throw std::invalid_argument("vocabulary max size " + std::to_string(max_size) + " leaves no room beyond " +
                                std::to_string(v.size()) + " reserved tokens");
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) {
      if (!v.index_.count(tok)) ++counts[tok];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // counts is already lexicographic, so a stable sort by frequency keeps the tie rule.
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t room = max_size - v.size();
  for (std::size_t i = 0; i < ranked.size() && i < room; ++i) v.insert(ranked[i].first);
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kReservedCount || tokens[kPadId] != kPadToken || tokens[kUnkId] != kUnkToken ||
      tokens[kSosId] != kSosToken || tokens[kEosId] != kEosToken) {
    throw std::invalid_argument("token list does not start with the reserved tokens");
  }
  Vocabulary v;
  for (std::size_t i = kReservedCount; i < tokens.size(); ++i) v.insert(std::move(tokens[i]));
  return v;
}

int Vocabulary::id(std::string_view token) const { return find(token).value_or(kUnkId); }

std::optional<int> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of " +
                            std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenSequence encode(const Vocabulary& vocab, std::span<const std::string> tokens, std::size_t max_len,
                     bool append_eos) {
  TokenSequence seq;
  seq.original_length = tokens.size();
  const std::size_t room = append_eos ? (max_len == 0 ? 0 : max_len - 1) : max_len;
  const std::size_t keep = std::min(room, tokens.size());
  seq.ids.reserve(keep + 1);
  for (std::size_t i = 0; i < keep; ++i) seq.ids.push_back(vocab.id(tokens[i]));
  if (append_eos && max_len > 0) seq.ids.push_back(kEosId);
  return seq;
}

std::vector<std::string> decode(const Vocabulary& vocab, std::span<const int> ids) {
  std::vector<std::string> out;
  for (int id : ids) {
    const auto& tok = vocab.token(id);
    if (id == kEosId) break;
    if (id == kPadId || id == kSosId) continue;
    out.push_back(tok);
  }
  return out;
}

TokenSequence window_concat(std::span<const TokenSequence> history, std::size_t k, int sep_id, std::size_t max_len) {
  if (k == 0) throw std::invalid_argument("window size must be at least 1");
  const std::size_t first = history.size() > k ? history.size() - k : 0;
  std::vector<int> joined;
  for (std::size_t i = first; i < history.size(); ++i) {
    if (i > first) joined.push_back(sep_id);
    joined.insert(joined.end(), history[i].ids.begin(), history[i].ids.end());
  }
  TokenSequence out;
  out.original_length = joined.size();
  const std::size_t drop = joined.size() > max_len ? joined.size() - max_len : 0;
  out.ids.assign(joined.begin() + static_cast<std::ptrdiff_t>(drop), joined.end());
  return out;
}

}  // namespace css
