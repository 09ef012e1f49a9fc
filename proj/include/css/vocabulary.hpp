#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace css {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kSosId = 2;
inline constexpr int kEosId = 3;
inline constexpr std::size_t kReservedCount = 4;

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kSosToken = "<s>";
inline constexpr std::string_view kEosToken = "</s>";
inline constexpr std::string_view kSepToken = "<sep>";

/// Lowercases, splits punctuation into single tokens and keeps bracketed
/// annotations such as "[Laughter]" whole.
std::vector<std::string> tokenize(std::string_view text);

/// Joins tokens with single spaces.
std::string detokenize(std::span<const std::string> tokens);

/// Bijective token <-> id map with ids 0..3 reserved for PAD, UNK, SOS, EOS.
class Vocabulary {
 public:
  Vocabulary();

  /// Keeps the most frequent tokens (ties broken lexicographically) so the
  /// total size, reserved words included, is at most max_size. Extra
  /// reserved words take the ids right after EOS.
  static Vocabulary build(std::span<const std::vector<std::string>> corpus, std::size_t max_size,
                          std::span<const std::string> extra_reserved = {});

  /// Restores a vocabulary from its id-ordered token list.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  /// UNK for out-of-vocabulary tokens.
  int id(std::string_view token) const;
  std::optional<int> find(std::string_view token) const;
  /// Throws std::out_of_range for unknown ids.
  const std::string& token(int id) const;

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  void insert(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Integer-encoded utterance. `original_length` is the token count before
/// truncation.
struct TokenSequence {
  std::vector<int> ids;
  std::size_t original_length = 0;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

/// Maps tokens to ids (OOV -> UNK) and truncates to max_len. With
/// append_eos the result ends in EOS and still fits in max_len.
TokenSequence encode(const Vocabulary& vocab, std::span<const std::string> tokens, std::size_t max_len,
                     bool append_eos = false);

/// Inverse of encode: stops at the first EOS and drops PAD and SOS.
std::vector<std::string> decode(const Vocabulary& vocab, std::span<const int> ids);

/// Joins the last k sequences of `history` with `sep_id` between them and
/// keeps the rightmost max_len ids.
TokenSequence window_concat(std::span<const TokenSequence> history, std::size_t k, int sep_id,
                            std::size_t max_len = 50);

}  // namespace css
