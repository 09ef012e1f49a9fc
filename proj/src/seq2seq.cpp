#include "css/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "css/errors.hpp"

namespace css {

ModelMode parse_mode(std::string_view name) {
  if (name == "baseline1") return ModelMode::baseline1;
  if (name == "baseline2") return ModelMode::baseline2;
  if (name == "css") return ModelMode::css;
  throw ConfigError("unknown model mode '" + std::string(name) + "' (expected baseline1, baseline2 or css)");
}

std::string_view mode_name(ModelMode mode) {
  switch (mode) {
    case ModelMode::baseline1: return "baseline1";
    case ModelMode::baseline2: return "baseline2";
    case ModelMode::css: return "css";
  }
  return "css";
}

AttentionKeys parse_attention_keys(std::string_view name) {
  if (name == "reduced") return AttentionKeys::reduced;
  if (name == "concat") return AttentionKeys::concat;
  throw ConfigError("unknown attention keys '" + std::string(name) + "' (expected reduced or concat)");
}

std::string_view attention_keys_name(AttentionKeys keys) {
  return keys == AttentionKeys::reduced ? "reduced" : "concat";
}

void Seq2SeqConfig::validate() const {
  if (vocab_size < kReservedCount) throw ConfigError("seq2seq vocabulary must hold the reserved tokens");
  if (embed_dim == 0 || encoder_hidden == 0 || decoder_hidden == 0 || context_dim == 0) {
    throw ConfigError("seq2seq dimensions must be positive");
  }
  if (max_in_len == 0 || max_out_len == 0) throw ConfigError("sequence length limits must be positive");
  if (window == 0) throw ConfigError("baseline2 window must be at least 1");
}

template <typename T>
Seq2Seq<T>::Seq2Seq(Seq2SeqConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& c = config_;
  const auto H = c.encoder_hidden;
  const auto D = c.decoder_hidden;
  params_.add("enc.embedding", {c.vocab_size, c.embed_dim});
  for (const char* dir : {"enc.fwd", "enc.bwd"}) {
    params_.add(std::string(dir) + ".wx", {c.embed_dim, 4 * H});
    params_.add(std::string(dir) + ".wh", {H, 4 * H});
    params_.add(std::string(dir) + ".b", {4 * H});
  }
  params_.add("init.h.weight", {2 * H, D});
  params_.add("init.h.bias", {D});
  params_.add("init.c.weight", {2 * H, D});
  params_.add("init.c.bias", {D});
  params_.add("fuse.weight", {c.fused_dim(), D});
  params_.add("fuse.bias", {D});
  params_.add("att.weight", {D, c.score_key_dim()});
  params_.add("dec.embedding", {c.vocab_size, c.embed_dim});
  params_.add("dec.wx", {c.embed_dim, 4 * D});
  params_.add("dec.wh", {D, 4 * D});
  params_.add("dec.b", {4 * D});
  params_.add("out.weight", {2 * D, c.vocab_size});
  params_.add("out.bias", {c.vocab_size});
}

template <typename T>
void Seq2Seq<T>::initialize(Rng& rng) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    const auto& shape = p.value.shape();
    if (shape.size() == 1) {
      p.value.fill(T{0});
    } else if (p.name.find("embedding") != std::string::npos) {
      init_uniform(p.value, shape[1], shape[1], rng);
    } else {
      init_uniform(p.value, shape[0], shape[1], rng);
    }
  }
  auto forget_bias = [&](const std::string& name, std::size_t hidden) {
    auto& b = params_.at(name).value;
    for (std::size_t k = hidden; k < 2 * hidden; ++k) b[k] = T{1};
  };
  forget_bias("enc.fwd.b", config_.encoder_hidden);
  forget_bias("enc.bwd.b", config_.encoder_hidden);
  forget_bias("dec.b", config_.decoder_hidden);
}

template <typename T>
Var<T> Seq2Seq<T>::bind(Graph<T>& g, const Parameter<T>& p) const {
  if (!g.grad_enabled()) return g.param(p);
  return g.param(const_cast<Parameter<T>&>(p));
}

// Gate layout along columns: input, forget, candidate, output.
template <typename T>
typename Seq2Seq<T>::LstmOut Seq2Seq<T>::lstm_cell(Var<T> x_proj, Var<T> h, Var<T> c, Var<T> wh,
                                                   std::size_t hidden) const {
  auto gates = add(x_proj, matmul(h, wh));
  auto i = sigmoid(slice_cols(gates, 0, hidden));
  auto f = sigmoid(slice_cols(gates, hidden, hidden));
  auto cand = css::tanh(slice_cols(gates, 2 * hidden, hidden));
  auto o = sigmoid(slice_cols(gates, 3 * hidden, hidden));
  auto c_new = add(mul(f, c), mul(i, cand));
  return {mul(o, css::tanh(c_new)), c_new};
}

template <typename T>
EncodedBatch<T> Seq2Seq<T>::encode(Graph<T>& g, std::span<const int> ids, std::size_t batch, std::size_t steps,
                                   std::span<const int> lengths) const {
  if (batch == 0 || steps == 0 || ids.size() != batch * steps || lengths.size() != batch) {
    throw DimensionError("encode: expected " + std::to_string(batch) + " rows of " + std::to_string(steps) +
                         " ids with one length each");
  }
  for (int len : lengths) {
    if (len < 1 || static_cast<std::size_t>(len) > steps) {
      throw InputError("encode: utterance length " + std::to_string(len) + " outside [1, " + std::to_string(steps) +
                       "]");
    }
  }
  const auto H = config_.encoder_hidden;
  std::vector<int> time_major(batch * steps);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < steps; ++t) time_major[t * batch + b] = ids[b * steps + t];
  }
  auto emb = embedding(bind(g, "enc.embedding"), std::span<const int>(time_major));

  std::vector<std::vector<T>> masks(steps, std::vector<T>(batch));
  std::vector<bool> full(steps, true);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < batch; ++b) {
      masks[t][b] = static_cast<int>(t) < lengths[b] ? T{1} : T{0};
      if (masks[t][b] == T{0}) full[t] = false;
    }
  }

  struct Pass {
    std::vector<Var<T>> states;
    Var<T> h;
    Var<T> c;
  };
  auto run = [&](const std::string& dir, bool reverse) {
    auto proj = affine(emb, bind(g, dir + ".wx"), bind(g, dir + ".b"));
    auto wh = bind(g, dir + ".wh");
    Pass p;
    p.states.resize(steps);
    p.h = g.constant(Tensor<T>::zeros(batch, H));
    p.c = g.constant(Tensor<T>::zeros(batch, H));
    for (std::size_t k = 0; k < steps; ++k) {
      const std::size_t t = reverse ? steps - 1 - k : k;
      auto next = lstm_cell(slice_rows(proj, t * batch, batch), p.h, p.c, wh, H);
      if (full[t]) {
        p.h = next.h;
        p.c = next.c;
      } else {
        // Padded positions carry the previous state through unchanged.
        p.h = blend_rows<T>(masks[t], next.h, p.h);
        p.c = blend_rows<T>(masks[t], next.c, p.c);
      }
      p.states[t] = p.h;
    }
    return p;
  };
  auto fwd = run("enc.fwd", false);
  auto bwd = run("enc.bwd", true);

  EncodedBatch<T> out;
  out.batch = batch;
  out.steps = steps;
  out.lengths.assign(lengths.begin(), lengths.end());
  out.states = concat_cols(std::vector<Var<T>>{stack_time(fwd.states), stack_time(bwd.states)});
  out.h0 = css::tanh(affine(concat_cols(std::vector<Var<T>>{fwd.h, bwd.h}), bind(g, "init.h.weight"),
                            bind(g, "init.h.bias")));
  out.c0 = affine(concat_cols(std::vector<Var<T>>{fwd.c, bwd.c}), bind(g, "init.c.weight"), bind(g, "init.c.bias"));
  return out;
}

template <typename T>
Var<T> Seq2Seq<T>::context_input(Graph<T>& g, std::span<const ContextVector> contexts, std::size_t batch) const {
  Tensor<T> ctx = Tensor<T>::zeros(batch, config_.context_dim);
  if (config_.mode == ModelMode::css && !contexts.empty()) {
    if (contexts.size() != batch) {
      throw DimensionError("expected " + std::to_string(batch) + " context rows, got " +
                           std::to_string(contexts.size()));
    }
    for (std::size_t b = 0; b < batch; ++b) {
      if (contexts[b].empty()) continue;
      if (contexts[b].size() != config_.context_dim) {
        throw DimensionError("context vector of size " + std::to_string(contexts[b].size()) + " where " +
                             std::to_string(config_.context_dim) + " expected");
      }
      for (std::size_t k = 0; k < config_.context_dim; ++k) ctx(b, k) = static_cast<T>(contexts[b][k]);
    }
  }
  return g.constant(std::move(ctx));
}

template <typename T>
AttentionKeySet<T> Seq2Seq<T>::fuse_context(Graph<T>& g, const EncodedBatch<T>& enc, Var<T> ctx) const {
  if (ctx.rows() != enc.batch || ctx.cols() != config_.context_dim) {
    throw DimensionError("fuse_context: context " + shape_string(ctx.value().shape()) + " for batch " +
                         std::to_string(enc.batch) + " of dimension " + std::to_string(config_.context_dim));
  }
  AttentionKeySet<T> k;
  k.fused = concat_cols(std::vector<Var<T>>{enc.states, repeat_rows(ctx, enc.steps)});
  k.keys = activate(affine(k.fused, bind(g, "fuse.weight"), bind(g, "fuse.bias")), config_.fusion_activation);
  k.scored = config_.attention_keys == AttentionKeys::reduced ? k.keys : k.fused;
  return k;
}

template <typename T>
AttentionResult<T> Seq2Seq<T>::attend(Graph<T>& g, Var<T> query, const AttentionKeySet<T>& keys,
                                      std::span<const int> lengths, std::size_t steps) const {
  auto projected = matmul(query, bind(g, "att.weight"));
  auto scores = batched_dot(projected, keys.scored, steps);
  AttentionResult<T> r;
  r.weights = masked_softmax(scores, lengths);
  r.summary = weighted_sum(r.weights, keys.keys);
  return r;
}

template <typename T>
DecoderStep<T> Seq2Seq<T>::decode_step(Graph<T>& g, std::span<const int> prev_tokens, Var<T> h, Var<T> c,
                                       const AttentionKeySet<T>& keys, std::span<const int> lengths,
                                       std::size_t steps) const {
  auto x = embedding(bind(g, "dec.embedding"), prev_tokens);
  auto proj = affine(x, bind(g, "dec.wx"), bind(g, "dec.b"));
  auto next = lstm_cell(proj, h, c, bind(g, "dec.wh"), config_.decoder_hidden);
  auto att = attend(g, next.h, keys, lengths, steps);
  DecoderStep<T> out;
  out.logits = affine(concat_cols(std::vector<Var<T>>{next.h, att.summary}), bind(g, "out.weight"),
                      bind(g, "out.bias"));
  out.h = next.h;
  out.c = next.c;
  out.weights = att.weights;
  return out;
}

template <typename T>
typename Seq2Seq<T>::Loss Seq2Seq<T>::sequence_loss(Graph<T>& g, const BucketedBatch& batch,
                                                    std::span<const ContextVector> contexts) const {
  const std::size_t B = batch.size();
  if (B == 0) throw InputError("empty batch");
  const int in_steps_i = *std::max_element(batch.utterance_lengths.begin(), batch.utterance_lengths.end());
  const int out_max = *std::max_element(batch.response_lengths.begin(), batch.response_lengths.end());
  const auto in_steps = static_cast<std::size_t>(std::max(in_steps_i, 1));
  const auto T_out = static_cast<std::size_t>(out_max) + 1;
  if (in_steps > batch.utterances.cols || T_out + 1 > batch.responses.cols) {
    throw DimensionError("batch lengths exceed its padded width");
  }

  std::vector<int> in_ids(B * in_steps);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < in_steps; ++t) in_ids[b * in_steps + t] = batch.utterances.at(b, t);
  }
  std::vector<int> targets(B * T_out);
  std::vector<int> dec_in(T_out * B);  // time-major
  Loss loss;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T_out; ++t) {
      dec_in[t * B + b] = batch.responses.at(b, t);
      const int target = batch.responses.at(b, t + 1);
      targets[b * T_out + t] = target;
      if (target != kPadId) ++loss.tokens;
    }
  }
  if (loss.tokens == 0) throw InputError("batch has no target tokens");

  auto enc = encode(g, in_ids, B, in_steps, batch.utterance_lengths);
  auto keys = fuse_context(g, enc, context_input(g, contexts, B));
  auto proj = affine(embedding(bind(g, "dec.embedding"), std::span<const int>(dec_in)), bind(g, "dec.wx"),
                     bind(g, "dec.b"));
  auto wh = bind(g, "dec.wh");
  auto h = enc.h0;
  auto c = enc.c0;
  std::vector<Var<T>> outputs;
  outputs.reserve(T_out);
  for (std::size_t t = 0; t < T_out; ++t) {
    auto next = lstm_cell(slice_rows(proj, t * B, B), h, c, wh, config_.decoder_hidden);
    h = next.h;
    c = next.c;
    auto att = attend(g, h, keys, enc.lengths, in_steps);
    outputs.push_back(concat_cols(std::vector<Var<T>>{h, att.summary}));
  }
  auto logits = affine(stack_time(outputs), bind(g, "out.weight"), bind(g, "out.bias"));
  loss.total = softmax_cross_entropy(logits, std::span<const int>(targets), kPadId);
  return loss;
}

template class Seq2Seq<float>;
template class Seq2Seq<double>;

// ---------------------------------------------------------------------------
// Training

namespace {

std::vector<ContextVector> batch_contexts(const BucketedBatch& batch, std::span<const ContextPair> data) {
  std::vector<ContextVector> ctx;
  ctx.reserve(batch.size());
  for (auto src : batch.source) ctx.push_back(data[src].context);
  return ctx;
}

std::vector<DialoguePair> pairs_of(std::span<const ContextPair> data) {
  std::vector<DialoguePair> pairs;
  pairs.reserve(data.size());
  for (const auto& d : data) pairs.push_back(d.pair);
  return pairs;
}

}  // namespace

double train_step(Seq2Seq<float>& model, const BucketedBatch& batch, std::span<const ContextVector> contexts,
                  OptimizerState<float>& opt) {
  Graph<float> g;
  auto loss = model.sequence_loss(g, batch, contexts);
  const double mean = static_cast<double>(loss.total.value()[0]) / static_cast<double>(loss.tokens);
  model.params().zero_grad();
  g.backward(loss.mean());
  adam_step(model.params(), opt);
  return mean;
}

double evaluate_loss(const Seq2Seq<float>& model, std::span<const ContextPair> data, std::size_t batch_size,
                     std::span<const std::size_t> bucket_bounds) {
  auto pairs = pairs_of(data);
  auto plan = bucket_batches(pairs, bucket_bounds, batch_size, 0);
  double total = 0;
  std::size_t tokens = 0;
  for (const auto& b : plan.batches) {
    Graph<float> g(GradMode::disabled);
    auto ctx = batch_contexts(b, data);
    auto loss = model.sequence_loss(g, b, ctx);
    total += static_cast<double>(loss.total.value()[0]);
    tokens += loss.tokens;
  }
  return tokens == 0 ? 0.0 : total / static_cast<double>(tokens);
}

std::vector<LossRow> train_seq2seq(Seq2Seq<float>& model, std::span<const ContextPair> train,
                                   std::span<const ContextPair> validation, const Seq2SeqTrainConfig& config) {
  if (train.empty()) throw ConfigError("seq2seq training set is empty");
  if (config.batch_size == 0) throw ConfigError("batch size must be positive");
  auto pairs = pairs_of(train);
  Rng rng(config.seed);
  OptimizerState<float> opt{config.adam, 0, {}, {}};
  std::vector<LossRow> history;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    auto plan = bucket_batches(pairs, config.bucket_bounds, config.batch_size, rng.next());
    if (plan.batches.empty()) throw ConfigError("every training pair exceeds the largest bucket");
    double total = 0;
    std::size_t tokens = 0;
    for (const auto& b : plan.batches) {
      auto ctx = batch_contexts(b, train);
      std::size_t n = 0;
      for (auto len : b.response_lengths) n += static_cast<std::size_t>(len) + 1;
      total += train_step(model, b, ctx, opt) * static_cast<double>(n);
      tokens += n;
    }
    history.push_back({epoch, "train", total / static_cast<double>(tokens)});
    if (!validation.empty()) {
      history.push_back({epoch, "validation", evaluate_loss(model, validation, config.batch_size, config.bucket_bounds)});
    }
  }
  return history;
}

void write_loss_csv(std::ostream& out, std::span<const LossRow> rows) {
  out << "epoch,split,loss\n";
  char buf[80];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%s,%.6f\n", r.epoch, r.split.c_str(), r.loss);
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// Decoding

std::vector<int> Hypothesis::response() const {
  std::vector<int> out = tokens;
  if (finished_with_eos && !out.empty() && out.back() == kEosId) out.pop_back();
  return out;
}

double length_normalized(double logprob, std::size_t length, double alpha) {
  if (alpha == 0.0 || length == 0) return logprob;
  return logprob / std::pow(static_cast<double>(length), alpha);
}

DecoderSession start_decoding(const Seq2Seq<float>& model, std::span<const int> utterance, const ContextVector& ctx) {
  std::vector<int> ids(utterance.begin(), utterance.begin() + static_cast<std::ptrdiff_t>(std::min(
                                                                 utterance.size(), model.config().max_in_len)));
  if (ids.empty()) ids.push_back(kUnkId);
  Graph<float> g(GradMode::disabled);
  const std::vector<int> lengths{static_cast<int>(ids.size())};
  auto enc = model.encode(g, ids, 1, ids.size(), lengths);
  std::vector<ContextVector> rows;
  if (!ctx.empty()) rows.push_back(ctx);
  auto keys = model.fuse_context(g, enc, model.context_input(g, rows, 1));
  return {ids.size(), keys.keys.value(), keys.scored.value(), enc.h0.value(), enc.c0.value()};
}

namespace {

Tensor<float> tile_rows(const Tensor<float>& t, std::size_t n) {
  Tensor<float> out = Tensor<float>::zeros(t.rows() * n, t.cols());
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(t.data().begin(), t.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * t.size()));
  }
  return out;
}

}  // namespace

StepResult decoder_log_probs(const Seq2Seq<float>& model, const DecoderSession& session, std::span<const int> prev,
                             const Tensor<float>& h, const Tensor<float>& c, const DecodeOptions& options) {
  const std::size_t n = prev.size();
  Graph<float> g(GradMode::disabled);
  AttentionKeySet<float> keys;
  keys.keys = g.constant(n == 1 ? session.keys : tile_rows(session.keys, n));
  keys.scored = model.config().attention_keys == AttentionKeys::reduced
                    ? keys.keys
                    : g.constant(n == 1 ? session.scored : tile_rows(session.scored, n));
  keys.fused = keys.scored;
  const std::vector<int> lengths(n, static_cast<int>(session.steps));
  auto step = model.decode_step(g, prev, g.constant(h), g.constant(c), keys, lengths, session.steps);

  StepResult r;
  r.log_probs = step.logits.value();
  const float neg_inf = -std::numeric_limits<float>::infinity();
  for (std::size_t row = 0; row < n; ++row) {
    auto logits = r.log_probs.row(row);
    logits[kPadId] = neg_inf;
    logits[kSosId] = neg_inf;
    if (options.mask_unk) logits[kUnkId] = neg_inf;
    auto lp = log_softmax_row<float>(logits);
    std::copy(lp.begin(), lp.end(), logits.begin());
  }
  r.h = step.h.value();
  r.c = step.c.value();
  return r;
}

Hypothesis greedy_decode(const Seq2Seq<float>& model, std::span<const int> utterance, const ContextVector& ctx,
                         const DecodeOptions& options) {
  auto session = start_decoding(model, utterance, ctx);
  const std::size_t max_len = std::min(options.max_out_len, model.config().max_out_len);
  Hypothesis hyp;
  Tensor<float> h = session.h0;
  Tensor<float> c = session.c0;
  int prev = kSosId;
  for (std::size_t t = 0; t < max_len; ++t) {
    auto step = decoder_log_probs(model, session, std::span<const int>(&prev, 1), h, c, options);
    auto row = step.log_probs.row(0);
    const int tok = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    hyp.logprob += static_cast<double>(row[static_cast<std::size_t>(tok)]);
    hyp.tokens.push_back(tok);
    if (tok == kEosId) {
      hyp.finished_with_eos = true;
      break;
    }
    h = std::move(step.h);
    c = std::move(step.c);
    prev = tok;
  }
  hyp.score = hyp.logprob;
  return hyp;
}

BeamResult beam_decode(const Seq2Seq<float>& model, std::span<const int> utterance, const ContextVector& ctx,
                       const BeamOptions& options) {
  const std::size_t width = options.width;
  if (width == 0) throw std::invalid_argument("beam width must be at least 1");
  if (options.chosen_beam < 1 || options.chosen_beam > width) {
    throw std::invalid_argument("chosen beam " + std::to_string(options.chosen_beam) + " outside [1, " +
                                std::to_string(width) + "]");
  }
  const std::size_t max_len = std::min(options.decode.max_out_len, model.config().max_out_len);
  const double alpha = options.length_penalty;
  auto session = start_decoding(model, utterance, ctx);
  const std::size_t D = session.h0.cols();

  struct Live {
    Hypothesis hyp;
    std::size_t state_row = 0;
  };
  std::vector<Live> alive{{Hypothesis{}, 0}};
  Tensor<float> h = session.h0;
  Tensor<float> c = session.c0;
  std::vector<Hypothesis> finished;

  auto finish = [&](Hypothesis hyp) {
    hyp.score = length_normalized(hyp.logprob, hyp.tokens.size(), alpha);
    finished.push_back(std::move(hyp));
  };
  // Score of the width-th best finished hypothesis, if there are that many.
  auto kth_finished = [&]() -> std::optional<double> {
    if (finished.size() < width) return std::nullopt;
    std::vector<double> scores;
    for (const auto& f : finished) scores.push_back(f.score);
    std::nth_element(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(width - 1), scores.end(),
                     std::greater<>());
    return scores[width - 1];
  };

  for (std::size_t step = 1; step <= max_len && !alive.empty(); ++step) {
    std::vector<int> prev;
    for (const auto& a : alive) prev.push_back(a.hyp.tokens.empty() ? kSosId : a.hyp.tokens.back());
    Tensor<float> hs = Tensor<float>::zeros(alive.size(), D);
    Tensor<float> cs = Tensor<float>::zeros(alive.size(), D);
    for (std::size_t i = 0; i < alive.size(); ++i) {
      std::copy_n(h.row(alive[i].state_row).begin(), D, hs.row(i).begin());
      std::copy_n(c.row(alive[i].state_row).begin(), D, cs.row(i).begin());
    }
    auto out = decoder_log_probs(model, session, prev, hs, cs, options.decode);

    struct Candidate {
      double logprob;
      std::size_t beam;
      int token;
    };
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < alive.size(); ++i) {
      auto row = out.log_probs.row(i);
      for (std::size_t v = 0; v < row.size(); ++v) {
        if (std::isinf(row[v])) continue;
        cands.push_back({alive[i].hyp.logprob + static_cast<double>(row[v]), i, static_cast<int>(v)});
      }
    }
    // At most one EOS per live beam can rank ahead of the width-th continuation.
    const std::size_t keep = std::min(cands.size(), 2 * width);
    auto better = [](const Candidate& a, const Candidate& b) {
      if (a.logprob != b.logprob) return a.logprob > b.logprob;
      if (a.beam != b.beam) return a.beam < b.beam;
      return a.token < b.token;
    };
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(), better);

    std::vector<Live> next;
    for (std::size_t k = 0; k < keep && next.size() < width; ++k) {
      const auto& cand = cands[k];
      Hypothesis hyp = alive[cand.beam].hyp;
      hyp.tokens.push_back(cand.token);
      hyp.logprob = cand.logprob;
      if (cand.token == kEosId) {
        hyp.finished_with_eos = true;
        finish(std::move(hyp));
      } else {
        next.push_back({std::move(hyp), cand.beam});
      }
    }
    h = std::move(out.h);
    c = std::move(out.c);
    alive = std::move(next);

    if (step == max_len) {
      for (auto& a : alive) finish(std::move(a.hyp));
      alive.clear();
      break;
    }
    // With no length penalty a live hypothesis can only lose probability.
    if (alpha == 0.0 && !alive.empty()) {
      if (auto kth = kth_finished(); kth && alive.front().hyp.logprob <= *kth) break;
    }
  }

  std::stable_sort(finished.begin(), finished.end(),
                   [](const Hypothesis& a, const Hypothesis& b) { return a.score > b.score; });
  if (finished.size() > width) finished.resize(width);
  BeamResult result;
  result.beams = std::move(finished);
  result.chosen = std::min(options.chosen_beam, result.beams.size()) - 1;
  return result;
}

}  // namespace css
