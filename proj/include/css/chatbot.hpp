#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "css/corpus.hpp"
#include "css/dialogue_state.hpp"
#include "css/seq2seq.hpp"

namespace css {

enum class DecodeMethod { greedy, beam };

DecodeMethod parse_decode_method(std::string_view name);
std::string_view decode_method_name(DecodeMethod m);

struct GenerationOptions {
  DecodeMethod method = DecodeMethod::beam;
  BeamOptions beam{};  // beam.decode also governs greedy decoding
};

struct ScoredResponse {
  std::string text;
  std::vector<int> ids;  // without EOS
  double logprob = 0;
  double score = 0;
};

struct BotReply {
  std::string text;
  std::vector<int> ids;
  std::vector<ScoredResponse> beams;  // best first; one entry for greedy
  std::size_t chosen = 0;
  ContextVector context;
  double context_norm = 0;
};

struct ChatOptions {
  ContextOptions context{};
  std::size_t window = 2;  // baseline2 input, in turns of either speaker
};

/// Generator input for the last of `history`: the turn itself, or for
/// baseline2 the last `window` turns joined by the separator.
TokenSequence model_input(ModelMode mode, std::span<const TokenSequence> history, std::size_t window, int sep_id,
                          std::size_t max_in_len);

/// Generator, its vocabulary and an optional act classifier (required in
/// css mode). Read-only after construction, so one instance can serve many
/// conversations at once.
class Chatbot {
 public:
  Chatbot(Seq2Seq<float> model, Vocabulary vocab, std::shared_ptr<const ActClassifier> classifier,
          ChatOptions options = {});

  DialogueState new_state() const;

  /// Responds to the state's last turn without changing the state.
  BotReply reply(const DialogueState& state, const GenerationOptions& gen) const;

  /// Pushes the user turn, generates and pushes the bot turn.
  BotReply respond(DialogueState& state, std::string text, const GenerationOptions& gen) const;

  const Seq2Seq<float>& model() const { return model_; }
  const Vocabulary& vocab() const { return vocab_; }
  const ActClassifier* classifier() const { return classifier_.get(); }
  const ChatOptions& options() const { return options_; }
  ModelMode mode() const { return model_.config().mode; }

 private:
  Seq2Seq<float> model_;
  Vocabulary vocab_;
  std::shared_ptr<const ActClassifier> classifier_;
  ChatOptions options_;
  int sep_id_ = kUnkId;
};

/// Adjacent-line training pairs with the model input and context each mode
/// sees at chat time. Within a conversation the utterance's line plays the
/// user and lines alternate backwards from it. Responses are cut to
/// max_out_len - 1 tokens so EOS still fits.
std::vector<ContextPair> build_training_pairs(std::span<const Conversation> conversations, const Vocabulary& vocab,
                                              const Seq2SeqConfig& config, const ActClassifier* classifier,
                                              const ChatOptions& options = {});

}  // namespace css
