#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "css/corpus.hpp"
#include "css/da_encoder.hpp"
#include "css/graph.hpp"
#include "css/ops.hpp"
#include "css/optim.hpp"
#include "css/random.hpp"

namespace css {

enum class ModelMode { baseline1, baseline2, css };

ModelMode parse_mode(std::string_view name);
std::string_view mode_name(ModelMode mode);

/// Which vectors the attention scores are computed against. `reduced` uses
/// the fused keys after the feed-forward reduction; `concat` scores the raw
/// state-plus-context concatenation and still sums the reduced keys.
enum class AttentionKeys { reduced, concat };

AttentionKeys parse_attention_keys(std::string_view name);
std::string_view attention_keys_name(AttentionKeys keys);

struct Seq2SeqConfig {
  ModelMode mode = ModelMode::css;
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 128;
  std::size_t encoder_hidden = 256;  // per direction
  std::size_t decoder_hidden = 256;
  std::size_t context_dim = 512;
  std::size_t max_in_len = 50;
  std::size_t max_out_len = 50;
  Activation fusion_activation = Activation::tanh;
  AttentionKeys attention_keys = AttentionKeys::reduced;
  std::size_t window = 2;  // baseline2 input window, in turns

  std::size_t state_dim() const { return 2 * encoder_hidden; }
  std::size_t fused_dim() const { return state_dim() + context_dim; }
  std::size_t score_key_dim() const { return attention_keys == AttentionKeys::reduced ? decoder_hidden : fused_dim(); }
  void validate() const;

  friend bool operator==(const Seq2SeqConfig&, const Seq2SeqConfig&) = default;
};

template <typename T>
struct EncodedBatch {
  std::size_t batch = 0;
  std::size_t steps = 0;
  std::vector<int> lengths;
  Var<T> states;  // [B*steps x state_dim], forward half then backward half
  Var<T> h0;      // decoder initial state [B x decoder_hidden]
  Var<T> c0;
};

template <typename T>
struct AttentionKeySet {
  Var<T> fused;   // [B*steps x fused_dim]
  Var<T> keys;    // [B*steps x decoder_hidden], summed by attention
  Var<T> scored;  // what the query is compared against
};

template <typename T>
struct AttentionResult {
  Var<T> weights;  // [B x steps]
  Var<T> summary;  // [B x decoder_hidden]
};

template <typename T>
struct DecoderStep {
  Var<T> logits;  // [B x vocab]
  Var<T> h;
  Var<T> c;
  Var<T> weights;
};

/// Bidirectional LSTM encoder and attention LSTM decoder with the
/// conversation context fused into every attention key.
template <typename T>
class Seq2Seq {
 public:
  explicit Seq2Seq(Seq2SeqConfig config);

  const Seq2SeqConfig& config() const { return config_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

  /// Glorot-uniform matrices, zero biases, forget-gate biases +1.
  void initialize(Rng& rng);

  /// ids: B rows of `steps` ids, padded after each row's length. Every
  /// length must be in [1, steps].
  EncodedBatch<T> encode(Graph<T>& g, std::span<const int> ids, std::size_t batch, std::size_t steps,
                         std::span<const int> lengths) const;

  /// ctx: [B x context_dim]. Each encoder state is concatenated with its
  /// row's context and reduced to decoder_hidden.
  AttentionKeySet<T> fuse_context(Graph<T>& g, const EncodedBatch<T>& enc, Var<T> ctx) const;

  AttentionResult<T> attend(Graph<T>& g, Var<T> query, const AttentionKeySet<T>& keys, std::span<const int> lengths,
                            std::size_t steps) const;

  /// One decoder step from the previous tokens (one per row).
  DecoderStep<T> decode_step(Graph<T>& g, std::span<const int> prev_tokens, Var<T> h, Var<T> c,
                             const AttentionKeySet<T>& keys, std::span<const int> lengths, std::size_t steps) const;

  /// Teacher-forced cross-entropy summed over non-PAD targets. Rows of
  /// `contexts` pair with batch rows; an empty span means zero context.
  struct Loss {
    Var<T> total;
    std::size_t tokens = 0;
    Var<T> mean() const { return scale(total, T{1} / static_cast<T>(tokens)); }
  };
  Loss sequence_loss(Graph<T>& g, const BucketedBatch& batch, std::span<const ContextVector> contexts) const;

  /// Context rows as a [B x context_dim] constant. baseline modes always
  /// get zeros.
  Var<T> context_input(Graph<T>& g, std::span<const ContextVector> contexts, std::size_t batch) const;

 private:
  Var<T> bind(Graph<T>& g, const Parameter<T>& p) const;
  Var<T> bind(Graph<T>& g, const std::string& name) const { return bind(g, params_.at(name)); }

  struct LstmOut {
    Var<T> h;
    Var<T> c;
  };
  LstmOut lstm_cell(Var<T> x_proj, Var<T> h, Var<T> c, Var<T> wh, std::size_t hidden) const;

  Seq2SeqConfig config_;
  ParameterSet<T> params_;
};

// ---------------------------------------------------------------------------
// Training

struct Seq2SeqTrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  std::vector<std::size_t> bucket_bounds{10, 15, 25, 50};
  AdamConfig adam{};
  std::uint64_t seed = 0;
};

/// A training pair plus the context the model sees with it.
struct ContextPair {
  DialoguePair pair;
  ContextVector context;  // empty for zero context
};

struct LossRow {
  std::size_t epoch = 0;
  std::string split;
  double loss = 0;  // mean per-token cross-entropy
};

/// Teacher-forced step: backward plus one Adam update. Returns the mean
/// per-token loss before the update. Throws InputError for a batch with no
/// target tokens.
double train_step(Seq2Seq<float>& model, const BucketedBatch& batch, std::span<const ContextVector> contexts,
                  OptimizerState<float>& opt);

/// Mean per-token loss without updating.
double evaluate_loss(const Seq2Seq<float>& model, std::span<const ContextPair> data, std::size_t batch_size,
                     std::span<const std::size_t> bucket_bounds);

/// Epoch loop over bucketed batches. Emits one train row and, when
/// validation is non-empty, one validation row per epoch.
std::vector<LossRow> train_seq2seq(Seq2Seq<float>& model, std::span<const ContextPair> train,
                                   std::span<const ContextPair> validation, const Seq2SeqTrainConfig& config);

/// Header `epoch,split,loss`.
void write_loss_csv(std::ostream& out, std::span<const LossRow> rows);

// ---------------------------------------------------------------------------
// Decoding

struct DecodeOptions {
  std::size_t max_out_len = 50;
  bool mask_unk = true;  // PAD and SOS are always masked
};

struct BeamOptions {
  std::size_t width = 3;
  double length_penalty = 0.0;  // score = logprob / len^alpha
  std::size_t chosen_beam = 3;  // 1-based rank among the final beams
  DecodeOptions decode{};
};

struct Hypothesis {
  std::vector<int> tokens;  // generated ids; ends in EOS when finished_with_eos
  double logprob = 0;
  double score = 0;
  bool finished_with_eos = false;

  /// Tokens before EOS.
  std::vector<int> response() const;
};

struct BeamResult {
  std::vector<Hypothesis> beams;  // sorted by score, best first
  std::size_t chosen = 0;         // index into beams
  const Hypothesis& best() const { return beams.front(); }
  const Hypothesis& selected() const { return beams[chosen]; }
};

/// Encoded utterance ready for step-by-step decoding.
struct DecoderSession {
  std::size_t steps = 0;
  Tensor<float> keys;    // [steps x decoder_hidden]
  Tensor<float> scored;  // [steps x score_key_dim]
  Tensor<float> h0;
  Tensor<float> c0;
};

struct StepResult {
  Tensor<float> log_probs;  // [n x vocab], masked entries are -inf
  Tensor<float> h;
  Tensor<float> c;
};

/// Encodes a single utterance (empty input becomes a lone UNK; longer than
/// max_in_len keeps the first max_in_len ids).
DecoderSession start_decoding(const Seq2Seq<float>& model, std::span<const int> utterance, const ContextVector& ctx);

/// Advances n hypotheses at once; h and c are [n x decoder_hidden].
StepResult decoder_log_probs(const Seq2Seq<float>& model, const DecoderSession& session, std::span<const int> prev,
                             const Tensor<float>& h, const Tensor<float>& c, const DecodeOptions& options);

Hypothesis greedy_decode(const Seq2Seq<float>& model, std::span<const int> utterance, const ContextVector& ctx,
                         const DecodeOptions& options = {});

/// Beam search that keeps `width` live hypotheses, retires those ending in
/// EOS, and treats hypotheses reaching max_out_len as finished. Throws
/// std::invalid_argument unless 1 <= chosen_beam <= width.
BeamResult beam_decode(const Seq2Seq<float>& model, std::span<const int> utterance, const ContextVector& ctx,
                       const BeamOptions& options = {});

double length_normalized(double logprob, std::size_t length, double alpha);

}  // namespace css
