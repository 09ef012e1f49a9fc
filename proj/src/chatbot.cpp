#include "css/chatbot.hpp"

#include <cmath>
#include <map>
#include <optional>

#include "css/errors.hpp"

namespace css {

DecodeMethod parse_decode_method(std::string_view name) {
  if (name == "greedy") return DecodeMethod::greedy;
  if (name == "beam") return DecodeMethod::beam;
  throw ConfigError("unknown decode method '" + std::string(name) + "' (greedy or beam)");
}

std::string_view decode_method_name(DecodeMethod m) { return m == DecodeMethod::greedy ? "greedy" : "beam"; }

TokenSequence model_input(ModelMode mode, std::span<const TokenSequence> history, std::size_t window, int sep_id,
                          std::size_t max_in_len) {
  if (history.empty()) return {};
  if (mode == ModelMode::baseline2) return window_concat(history, window, sep_id, max_in_len);
  TokenSequence last = history.back();
  if (last.ids.size() > max_in_len) last.ids.resize(max_in_len);
  return last;
}

Chatbot::Chatbot(Seq2Seq<float> model, Vocabulary vocab, std::shared_ptr<const ActClassifier> classifier,
                 ChatOptions options)
    : model_(std::move(model)), vocab_(std::move(vocab)), classifier_(std::move(classifier)), options_(options) {
  const auto& c = model_.config();
  if (vocab_.size() != c.vocab_size) {
    throw ConfigError("vocabulary has " + std::to_string(vocab_.size()) + " entries but the model expects " +
                      std::to_string(c.vocab_size));
  }
  if (c.mode == ModelMode::css && !classifier_) throw ConfigError("css mode needs a dialogue-act model");
  if (classifier_ && classifier_->context_dim() != c.context_dim) {
    throw ConfigError("dialogue-act hidden size " + std::to_string(classifier_->context_dim()) +
                      " does not match the model's context size " + std::to_string(c.context_dim));
  }
  if (c.mode == ModelMode::baseline2) {
    auto sep = vocab_.find(kSepToken);
    if (!sep) throw ConfigError("baseline2 needs the separator token in its vocabulary");
    sep_id_ = *sep;
    if (options_.window == 0) throw ConfigError("baseline2 window must be at least 1");
  }
}

DialogueState Chatbot::new_state() const {
  return DialogueState(vocab_, model_.config().max_in_len, classifier_.get(), model_.config().context_dim,
                       options_.context);
}

BotReply Chatbot::reply(const DialogueState& state, const GenerationOptions& gen) const {
  if (state.empty() || state.turns().back().speaker != Speaker::user) {
    throw InputError("reply needs a conversation ending in a user turn");
  }
  std::vector<TokenSequence> history;
  history.reserve(state.size());
  for (const auto& t : state.turns()) history.push_back(t.tokens);
  const auto input = model_input(mode(), history, options_.window, sep_id_, model_.config().max_in_len);

  BotReply out;
  if (mode() == ModelMode::css) out.context = state.current_context();
  double sq = 0;
  for (float v : out.context) sq += static_cast<double>(v) * v;
  out.context_norm = std::sqrt(sq);

  auto to_scored = [&](const Hypothesis& h) {
    ScoredResponse r;
    r.ids = h.response();
    r.text = detokenize(decode(vocab_, r.ids));
    r.logprob = h.logprob;
    r.score = h.score;
    return r;
  };
  if (gen.method == DecodeMethod::greedy) {
    out.beams.push_back(to_scored(greedy_decode(model_, input.ids, out.context, gen.beam.decode)));
    out.chosen = 0;
  } else {
    auto result = beam_decode(model_, input.ids, out.context, gen.beam);
    for (const auto& h : result.beams) out.beams.push_back(to_scored(h));
    out.chosen = result.chosen;
  }
  out.ids = out.beams[out.chosen].ids;
  out.text = out.beams[out.chosen].text;
  return out;
}

BotReply Chatbot::respond(DialogueState& state, std::string text, const GenerationOptions& gen) const {
  state.push_turn(Speaker::user, std::move(text));
  auto r = reply(state, gen);
  state.push_turn(Speaker::bot, r.text);
  return r;
}

std::vector<ContextPair> build_training_pairs(std::span<const Conversation> conversations, const Vocabulary& vocab,
                                              const Seq2SeqConfig& config, const ActClassifier* classifier,
                                              const ChatOptions& options) {
  const bool use_context = config.mode == ModelMode::css;
  if (use_context && !classifier) throw ConfigError("css mode needs a dialogue-act model");
  int sep_id = kUnkId;
  if (config.mode == ModelMode::baseline2) {
    auto sep = vocab.find(kSepToken);
    if (!sep) throw ConfigError("baseline2 needs the separator token in its vocabulary");
    sep_id = *sep;
  }
  std::vector<ContextPair> out;
  for (std::size_t ci = 0; ci < conversations.size(); ++ci) {
    const auto& conv = conversations[ci];
    const std::size_t n = conv.turns.size();
    if (n < 2) continue;
    std::vector<std::vector<std::string>> words;
    std::vector<TokenSequence> tokens;
    for (const auto& line : conv.turns) {
      words.push_back(tokenize(line));
      tokens.push_back(encode(vocab, words.back(), config.max_in_len));
    }
    std::vector<std::optional<ContextVector>> line_vec(n);
    std::map<std::size_t, ContextVector> pair_vec;
    auto line_vector = [&](std::size_t i) -> const ContextVector& {
      if (!line_vec[i]) line_vec[i] = classifier->classify_tokens(words[i]).hidden;
      return *line_vec[i];
    };
    auto pair_vector = [&](std::size_t b) -> const ContextVector& {
      auto it = pair_vec.find(b);
      if (it == pair_vec.end()) {
        auto joined = words[b];
        joined.insert(joined.end(), words[b + 1].begin(), words[b + 1].end());
        it = pair_vec.emplace(b, classifier->classify_tokens(joined).hidden).first;
      }
      return it->second;
    };

    for (std::size_t i = 0; i + 1 < n; ++i) {
      ContextPair cp;
      cp.pair.conversation = ci;
      cp.pair.turn = i;
      cp.pair.utterance = model_input(config.mode, std::span(tokens).first(i + 1), options.window, sep_id,
                                      config.max_in_len);
      cp.pair.response = encode(vocab, words[i + 1], config.max_out_len - 1);
      if (use_context) {
        std::vector<Speaker> speakers(i + 1);
        for (std::size_t j = 0; j <= i; ++j) speakers[j] = (i - j) % 2 == 0 ? Speaker::user : Speaker::bot;
        std::vector<ContextVector> vs;
        for (auto [b, e] : context_pairs(speakers, options.context)) {
          if (options.context.policy == ContextPolicy::per_pair && e - b == 2) {
            vs.push_back(pair_vector(b));
          } else {
            for (std::size_t j = b; j < e; ++j) vs.push_back(line_vector(j));
          }
        }
        cp.context = average_context(vs, classifier->context_dim());
      }
      out.push_back(std::move(cp));
    }
  }
  return out;
}

}  // namespace css
