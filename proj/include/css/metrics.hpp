#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "css/chatbot.hpp"

namespace css {

/// Generated responses of one model, as tokens.
struct ResponseSet {
  std::string model;
  std::vector<std::vector<std::string>> responses;
};

/// True for tokens left out of every count (EOS and PAD).
bool is_counted_token(std::string_view token);

struct LengthStats {
  double mean = 0;
  double median = 0;
};

/// Throws InputError for an empty set.
LengthStats length_stats(const ResponseSet& rs);

struct DiversityCounts {
  std::size_t unique = 0;
  std::size_t total = 0;
};

/// Distinct unigrams and total tokens across the whole set.
DiversityCounts diversity_counts(const ResponseSet& rs);

/// unique / total. Throws InputError when no tokens were generated.
double diversity(const ResponseSet& rs);

/// One decimal per line; blank lines are skipped.
std::vector<double> read_scores(std::istream& in);
std::vector<double> read_scores(const std::filesystem::path& path);

/// Arithmetic mean. Throws InputError when the count differs from
/// `responses` or a score is outside [0, 1].
double aggregate_specificity(std::span<const double> scores, std::size_t responses);

struct MetricsReport {
  std::string model;
  double median_len = 0;
  double mean_len = 0;
  double diversity = 0;
  std::optional<double> mean_specificity;
};

MetricsReport make_report(const ResponseSet& rs, std::optional<std::span<const double>> scores = std::nullopt);

/// Header `model,median_len,mean_len,diversity,mean_specificity`; the last
/// column is empty when no scores were given.
void write_report_csv(std::ostream& out, std::span<const MetricsReport> rows);

/// Conversations separated by blank lines, one user utterance per line.
std::vector<std::vector<std::string>> read_user_turns(std::istream& in);
std::vector<std::vector<std::string>> read_user_turns(const std::filesystem::path& path);

struct ReplayResult {
  ResponseSet responses;
  std::vector<DialogueState> transcripts;
  std::size_t skipped = 0;  // empty conversations
};

/// Feeds each conversation's user turns to a fresh state and fills in the
/// bot turns. Exactly one response per user turn.
ReplayResult replay_transcripts(std::span<const std::vector<std::string>> conversations, const Chatbot& bot,
                                const GenerationOptions& gen, std::string model_name);

/// `user: ...` / `bot: ...` lines, conversations separated by blank lines.
void write_transcripts(std::ostream& out, std::span<const DialogueState> transcripts);

}  // namespace css
