#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "css/dialogue_act.hpp"
#include "css/vocabulary.hpp"

namespace css {

// ---------------------------------------------------------------------------
// Cornell movie-dialogue format

inline constexpr std::string_view kCornellDelimiter = " +++$+++ ";

/// Ordered lines of one conversation.
struct Conversation {
  std::string id;
  std::vector<std::string> turns;
};

/// Adjacent (utterance, response) lines; `turn` is the utterance's index in
/// its conversation.
struct TextPair {
  std::string utterance;
  std::string response;
  std::size_t conversation = 0;
  std::size_t turn = 0;
};

struct CornellCorpus {
  std::vector<Conversation> conversations;
  std::vector<TextPair> pairs;
  std::size_t malformed_lines = 0;
  std::size_t malformed_conversations = 0;
  std::size_t unresolved_ids = 0;
};

/// Splits on the exact " +++$+++ " delimiter.
std::vector<std::string> split_cornell_fields(std::string_view line);

/// A conversation is split where it references a line id that is missing
/// from the lines file, so no pair spans the gap.
CornellCorpus parse_cornell(std::istream& lines, std::istream& conversations);
CornellCorpus parse_cornell(const std::filesystem::path& lines_file, const std::filesystem::path& conversations_file);

std::vector<TextPair> adjacent_pairs(std::span<const Conversation> conversations);

// ---------------------------------------------------------------------------
// Switchboard dialogue-act CSVs

struct SwdaOptions {
  std::string act_column = "act_tag";
  std::string text_column = "text";
  // Used when present; otherwise the file stem identifies the conversation.
  std::string conversation_column = "conversation_no";
};

struct TaggedUtterance {
  std::string act_tag;
  std::string text;
  std::vector<std::string> tokens;
  std::string conversation;
  std::size_t turn = 0;
};

struct SwdaCorpus {
  std::vector<TaggedUtterance> utterances;
  std::size_t skipped_rows = 0;
  std::size_t files = 0;
};

/// One RFC 4180 record (quoted fields may contain commas, quotes and
/// newlines). Returns false at end of input.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields);

/// Removes transcription markup: `{X ...}` discourse brackets (words kept),
/// `<...>` non-speech annotations, restart brackets, `+`, `/`, `--` and `#`.
/// An utterance made only of non-speech annotations becomes bracketed
/// tokens, e.g. "<Laughter>." -> "[laughter]".
std::string strip_disfluency(std::string_view text);

SwdaCorpus parse_swda_csv(std::istream& in, const std::string& fallback_conversation, const SwdaOptions& options = {});
/// Reads every *.csv under a directory (sorted by path) or a single file.
SwdaCorpus parse_swda(const std::filesystem::path& csv_dir, const SwdaOptions& options = {});

// ---------------------------------------------------------------------------
// Encoded pairs and bucketing

struct DialoguePair {
  TokenSequence utterance;
  TokenSequence response;
  std::size_t conversation = 0;
  std::size_t turn = 0;
};

/// Row-major matrix of token ids.
struct IdMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<int> ids;

  int at(std::size_t r, std::size_t c) const { return ids[r * cols + c]; }
  int& at(std::size_t r, std::size_t c) { return ids[r * cols + c]; }
  std::span<const int> row(std::size_t r) const { return std::span<const int>(ids).subspan(r * cols, cols); }
};

/// Padded batch for one length bucket. Utterances are `bucket` wide;
/// responses are `bucket + 1` wide as SOS r_1 .. r_n EOS PAD...
struct BucketedBatch {
  std::size_t bucket = 0;
  std::vector<std::size_t> source;  // index of each row in the input pairs
  IdMatrix utterances;
  IdMatrix responses;
  std::vector<int> utterance_lengths;
  std::vector<int> response_lengths;  // tokens between SOS and EOS

  std::size_t size() const { return source.size(); }
};

struct BatchPlan {
  std::vector<BucketedBatch> batches;
  std::size_t dropped = 0;
};

/// Each pair goes to the smallest bound >= max(|utterance|, |response| + 1);
/// longer pairs are dropped and counted. Batch contents and order are a
/// deterministic function of `seed`.
BatchPlan bucket_batches(std::span<const DialoguePair> pairs, std::span<const std::size_t> bucket_bounds,
                         std::size_t batch_size, std::uint64_t seed);

/// Builds one batch from explicit rows, padded to `bucket`.
BucketedBatch make_batch(std::span<const DialoguePair> pairs, std::span<const std::size_t> rows, std::size_t bucket);

}  // namespace css
