#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "css/da_encoder.hpp"
#include "css/vocabulary.hpp"
#include "json.hpp"

namespace css {

/// Dialogue-act model bundled with the vocabulary it was trained on.
class ActClassifier {
 public:
  ActClassifier(DAEncoder<float> model, Vocabulary vocab);

  DAPrediction classify(std::string_view text) const;
  DAPrediction classify_tokens(std::span<const std::string> tokens) const;

  const DAEncoder<float>& model() const { return model_; }
  const Vocabulary& vocab() const { return vocab_; }
  std::size_t context_dim() const { return model_.config().hidden_dim; }

 private:
  DAEncoder<float> model_;
  Vocabulary vocab_;
};

enum class Speaker { user, bot };

std::string_view speaker_name(Speaker s);
Speaker parse_speaker(std::string_view name);

/// How the context model sees the preceding exchange pairs: one vector per
/// turn, or one vector per pair computed on the pair's joined text.
enum class ContextPolicy { per_turn, per_pair };

ContextPolicy parse_context_policy(std::string_view name);
std::string_view context_policy_name(ContextPolicy p);

struct ContextOptions {
  std::size_t pairs = 2;
  bool include_current = false;
  ContextPolicy policy = ContextPolicy::per_turn;

  friend bool operator==(const ContextOptions&, const ContextOptions&) = default;
};

struct Turn {
  Speaker speaker = Speaker::user;
  std::string text;
  std::vector<std::string> words;
  TokenSequence tokens;  // in the generator's vocabulary
  ContextVector context;          // empty without a classifier
  ContextVector pair_context;     // set on the turn that closes a pair (per_pair only)
  std::optional<DialogueAct> act;
  std::vector<float> act_probs;
};

/// A pair opens at a user turn, or at a bot turn that follows another bot
/// turn or starts the conversation. Returns [begin, end) turn ranges.
std::vector<std::pair<std::size_t, std::size_t>> exchange_pairs(std::span<const Speaker> speakers);

/// The last `options.pairs` pairs before the current utterance.
std::vector<std::pair<std::size_t, std::size_t>> context_pairs(std::span<const Speaker> speakers,
                                                               const ContextOptions& options);

/// Turns whose vectors make up the context for what follows `speakers`.
/// When the last turn is a user turn it is the current utterance and is
/// left out unless include_current is set.
std::vector<std::size_t> context_turns(std::span<const Speaker> speakers, const ContextOptions& options);

/// Rolling transcript of one conversation. Each turn is classified once
/// when pushed; the classifier and vocabulary must outlive the state.
class DialogueState {
 public:
  DialogueState(const Vocabulary& vocab, std::size_t max_len, const ActClassifier* classifier,
                std::size_t context_dim, ContextOptions options = {});

  const Turn& push_turn(Speaker speaker, std::string text);

  /// Mean of the cached vectors selected by context_turns; zero vector when
  /// nothing qualifies.
  ContextVector current_context() const;

  const std::vector<Turn>& turns() const { return turns_; }
  std::size_t size() const { return turns_.size(); }
  bool empty() const { return turns_.empty(); }
  void reset() { turns_.clear(); }

  std::size_t context_dim() const { return context_dim_; }
  const ContextOptions& options() const { return options_; }
  bool has_classifier() const { return classifier_ != nullptr; }

 private:
  const Vocabulary* vocab_;
  std::size_t max_len_;
  const ActClassifier* classifier_;
  std::size_t context_dim_;
  ContextOptions options_;
  std::vector<Turn> turns_;
};

/// `{speaker, text, act, act_probs}`; act fields are null without a
/// classifier.
nlohmann::json turn_json(const Turn& turn);
nlohmann::json transcript_json(const DialogueState& state);

}  // namespace css
