#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "css/dialogue_act.hpp"
#include "css/graph.hpp"
#include "css/ops.hpp"
#include "css/optim.hpp"
#include "css/random.hpp"
#include "css/vocabulary.hpp"

namespace css {

/// Hidden-layer activation of the dialogue-act CNN, used as conversation
/// context.
using ContextVector = std::vector<float>;

struct DAEncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 128;
  std::size_t max_len = 25;
  std::vector<std::size_t> windows{3, 4, 5, 6, 8};
  std::size_t filters_per_window = 128;
  std::size_t hidden_dim = 512;
  std::size_t num_classes = kNumDialogueActs;
  Activation hidden_activation = Activation::relu;
  double dropout = 0.5;  // on the pooled features, training only

  std::size_t pooled_dim() const { return filters_per_window * windows.size(); }
  /// Throws ConfigError when the dimensions cannot form a network.
  void validate() const;

  friend bool operator==(const DAEncoderConfig&, const DAEncoderConfig&) = default;
};

template <typename T>
struct DAForward {
  Var<T> pooled;  // [B x pooled_dim]
  Var<T> hidden;  // [B x hidden_dim]
  Var<T> logits;  // [B x num_classes]
};

/// Text CNN: embedding, parallel valid convolutions, max-over-time pooling,
/// one hidden layer and a softmax classifier over dialogue acts.
template <typename T>
class DAEncoder {
 public:
  explicit DAEncoder(DAEncoderConfig config);

  const DAEncoderConfig& config() const { return config_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

  /// Glorot-uniform matrices, zero biases.
  void initialize(Rng& rng);

  /// Tail-truncates or right-pads with PAD to max_len.
  std::vector<int> prepare(std::span<const int> ids) const;

  /// `ids` holds batch rows of max_len ids each. A non-null dropout_rng
  /// enables dropout on the pooled features. With a differentiable graph
  /// the model must not be shared with other threads.
  DAForward<T> forward(Graph<T>& g, std::span<const int> ids, std::size_t batch, Rng* dropout_rng = nullptr) const;

 private:
  Var<T> bind(Graph<T>& g, const Parameter<T>& p) const;

  DAEncoderConfig config_;
  ParameterSet<T> params_;
};

struct DAPrediction {
  ContextVector hidden;
  std::vector<float> probs;
  DialogueAct act = DialogueAct::Other;
};

/// Inference on one utterance (ids before padding).
DAPrediction da_predict(const DAEncoder<float>& model, std::span<const int> ids);

/// Inference on one utterance given as text.
DAPrediction da_predict(const DAEncoder<float>& model, const Vocabulary& vocab, std::string_view text);

struct DAExample {
  std::vector<int> ids;  // unpadded
  int label = 0;
};

struct DATrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 50;
  AdamConfig adam{};
  std::uint64_t seed = 0;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  std::string split;
  double loss = 0;
  double accuracy = 0;
};

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = kNumDialogueActs);

  void add(std::size_t truth, std::size_t predicted);
  std::size_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * classes_ + predicted]; }
  std::size_t classes() const { return classes_; }
  std::size_t total() const;
  std::size_t trace() const;
  std::size_t row_sum(std::size_t truth) const;
  /// trace / total; 0 for an empty matrix.
  double accuracy() const;

  /// Header of class names, then one row of counts per true class.
  void write_csv(std::ostream& out) const;

 private:
  std::size_t classes_;
  std::vector<std::size_t> counts_;
};

struct DAEvaluation {
  double loss = 0;  // mean cross-entropy
  ConfusionMatrix confusion;
  double accuracy() const { return confusion.accuracy(); }
};

/// Minimizes mean cross-entropy with Adam. Returns one train row and, when
/// `validation` is non-empty, one validation row per epoch. Deterministic
/// given config.seed. Throws ConfigError on an empty training set and
/// InputError on labels outside the class range.
std::vector<EpochMetrics> train_da(DAEncoder<float>& model, std::span<const DAExample> train,
                                   std::span<const DAExample> validation, const DATrainConfig& config);

/// Throws CheckpointError when the model's class count differs from the
/// dialogue-act inventory.
DAEvaluation evaluate_da(const DAEncoder<float>& model, std::span<const DAExample> data);

/// Header `epoch,split,loss,accuracy`.
void write_da_history_csv(std::ostream& out, std::span<const EpochMetrics> rows);

/// Elementwise mean; an empty list gives the zero vector of `dim`.
ContextVector average_context(std::span<const ContextVector> vectors, std::size_t dim);

}  // namespace css
