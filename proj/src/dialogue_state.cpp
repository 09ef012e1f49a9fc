#include "css/dialogue_state.hpp"

#include <stdexcept>

#include "css/errors.hpp"

namespace css {

ActClassifier::ActClassifier(DAEncoder<float> model, Vocabulary vocab)
    : model_(std::move(model)), vocab_(std::move(vocab)) {
  if (vocab_.size() > model_.config().vocab_size) {
    throw ConfigError("classifier vocabulary has " + std::to_string(vocab_.size()) + " entries but the model embeds " +
                      std::to_string(model_.config().vocab_size));
  }
}

DAPrediction ActClassifier::classify(std::string_view text) const { return da_predict(model_, vocab_, text); }

DAPrediction ActClassifier::classify_tokens(std::span<const std::string> tokens) const {
  auto seq = encode(vocab_, tokens, model_.config().max_len);
  return da_predict(model_, seq.ids);
}

std::string_view speaker_name(Speaker s) { return s == Speaker::user ? "user" : "bot"; }

Speaker parse_speaker(std::string_view name) {
  if (name == "user") return Speaker::user;
  if (name == "bot") return Speaker::bot;
  throw InputError("unknown speaker '" + std::string(name) + "'");
}

ContextPolicy parse_context_policy(std::string_view name) {
  if (name == "per_turn") return ContextPolicy::per_turn;
  if (name == "per_pair") return ContextPolicy::per_pair;
  throw ConfigError("unknown context policy '" + std::string(name) + "' (per_turn or per_pair)");
}

std::string_view context_policy_name(ContextPolicy p) { return p == ContextPolicy::per_turn ? "per_turn" : "per_pair"; }

std::vector<std::pair<std::size_t, std::size_t>> exchange_pairs(std::span<const Speaker> speakers) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  bool has_bot = false;
  for (std::size_t i = 0; i < speakers.size(); ++i) {
    if (pairs.empty() || speakers[i] == Speaker::user || has_bot) {
      pairs.emplace_back(i, i + 1);
      has_bot = speakers[i] == Speaker::bot;
    } else {
      pairs.back().second = i + 1;
      has_bot = true;
    }
  }
  return pairs;
}

std::vector<std::pair<std::size_t, std::size_t>> context_pairs(std::span<const Speaker> speakers,
                                                                 const ContextOptions& options) {
  std::size_t end = speakers.size();
  if (!options.include_current && end > 0 && speakers[end - 1] == Speaker::user) --end;
  auto pairs = exchange_pairs(speakers.first(end));
  if (pairs.size() > options.pairs) pairs.erase(pairs.begin(), pairs.end() - static_cast<std::ptrdiff_t>(options.pairs));
  return pairs;
}

std::vector<std::size_t> context_turns(std::span<const Speaker> speakers, const ContextOptions& options) {
  std::vector<std::size_t> out;
  for (auto [b, e] : context_pairs(speakers, options)) {
    for (std::size_t i = b; i < e; ++i) out.push_back(i);
  }
  return out;
}

DialogueState::DialogueState(const Vocabulary& vocab, std::size_t max_len, const ActClassifier* classifier,
                             std::size_t context_dim, ContextOptions options)
    : vocab_(&vocab),
      max_len_(max_len),
      classifier_(classifier),
      context_dim_(classifier ? classifier->context_dim() : context_dim),
      options_(options) {
  if (classifier && context_dim != classifier->context_dim()) {
    throw ConfigError("context dimension " + std::to_string(context_dim) + " does not match the classifier's " +
                      std::to_string(classifier->context_dim()));
  }
}

const Turn& DialogueState::push_turn(Speaker speaker, std::string text) {
  Turn t;
  t.speaker = speaker;
  t.words = tokenize(text);
  t.text = std::move(text);
  t.tokens = encode(*vocab_, t.words, max_len_);
  if (classifier_) {
    auto pred = classifier_->classify_tokens(t.words);
    t.context = std::move(pred.hidden);
    t.act = pred.act;
    t.act_probs = std::move(pred.probs);
  }
  turns_.push_back(std::move(t));

  if (classifier_ && options_.policy == ContextPolicy::per_pair) {
    std::vector<Speaker> speakers;
    for (const auto& turn : turns_) speakers.push_back(turn.speaker);
    auto pairs = exchange_pairs(speakers);
    auto [b, e] = pairs.back();
    if (e - b == 2) {
      std::vector<std::string> joined = turns_[b].words;
      joined.insert(joined.end(), turns_[b + 1].words.begin(), turns_[b + 1].words.end());
      turns_.back().pair_context = classifier_->classify_tokens(joined).hidden;
    }
  }
  return turns_.back();
}

ContextVector DialogueState::current_context() const {
  if (!classifier_) return ContextVector(context_dim_, 0.0f);
  std::vector<Speaker> speakers;
  for (const auto& turn : turns_) speakers.push_back(turn.speaker);
  std::vector<ContextVector> vectors;
  for (auto [b, e] : context_pairs(speakers, options_)) {
    if (options_.policy == ContextPolicy::per_pair && e - b == 2) {
      vectors.push_back(turns_[e - 1].pair_context);
    } else {
      for (std::size_t i = b; i < e; ++i) vectors.push_back(turns_[i].context);
    }
  }
  return average_context(vectors, context_dim_);
}

nlohmann::json turn_json(const Turn& turn) {
  nlohmann::json j;
  j["speaker"] = speaker_name(turn.speaker);
  j["text"] = turn.text;
  if (turn.act) {
    j["act"] = act_name(*turn.act);
    j["act_probs"] = turn.act_probs;
  } else {
    j["act"] = nullptr;
    j["act_probs"] = nullptr;
  }
  return j;
}

nlohmann::json transcript_json(const DialogueState& state) {
  auto arr = nlohmann::json::array();
  for (const auto& t : state.turns()) arr.push_back(turn_json(t));
  return arr;
}

}  // namespace css
