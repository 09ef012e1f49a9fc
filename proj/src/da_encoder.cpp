#include "css/da_encoder.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "css/errors.hpp"

namespace css {

void DAEncoderConfig::validate() const {
  if (vocab_size <= kReservedCount) throw ConfigError("DA encoder vocabulary must exceed the reserved tokens");
  if (embed_dim == 0 || filters_per_window == 0 || hidden_dim == 0 || num_classes == 0) {
    throw ConfigError("DA encoder dimensions must be positive");
  }
  if (windows.empty()) throw ConfigError("DA encoder needs at least one convolution window");
  for (auto w : windows) {
    if (w == 0 || w > max_len) {
      throw ConfigError("convolution window " + std::to_string(w) + " does not fit max_len " + std::to_string(max_len));
    }
  }
  if (dropout < 0 || dropout >= 1) throw ConfigError("dropout must lie in [0, 1)");
}

template <typename T>
DAEncoder<T>::DAEncoder(DAEncoderConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& c = config_;
  params_.add("embedding", {c.vocab_size, c.embed_dim});
  for (auto w : c.windows) {
    params_.add("conv" + std::to_string(w) + ".filters", {w, c.embed_dim, c.filters_per_window});
    params_.add("conv" + std::to_string(w) + ".bias", {c.filters_per_window});
  }
  params_.add("hidden.weight", {c.pooled_dim(), c.hidden_dim});
  params_.add("hidden.bias", {c.hidden_dim});
  params_.add("output.weight", {c.hidden_dim, c.num_classes});
  params_.add("output.bias", {c.num_classes});
}

template <typename T>
void DAEncoder<T>::initialize(Rng& rng) {
  const auto& c = config_;
  // One embedding row is active per lookup, so its scale uses embed_dim on both sides.
  init_uniform(params_.at("embedding").value, c.embed_dim, c.embed_dim, rng);
  for (auto w : c.windows) {
    init_uniform(params_.at("conv" + std::to_string(w) + ".filters").value, w * c.embed_dim, c.filters_per_window, rng);
    params_.at("conv" + std::to_string(w) + ".bias").value.fill(T{0});
  }
  init_uniform(params_.at("hidden.weight").value, c.pooled_dim(), c.hidden_dim, rng);
  params_.at("hidden.bias").value.fill(T{0});
  init_uniform(params_.at("output.weight").value, c.hidden_dim, c.num_classes, rng);
  params_.at("output.bias").value.fill(T{0});
}

template <typename T>
std::vector<int> DAEncoder<T>::prepare(std::span<const int> ids) const {
  std::vector<int> out(config_.max_len, kPadId);
  std::copy_n(ids.begin(), std::min(ids.size(), config_.max_len), out.begin());
  return out;
}

template <typename T>
Var<T> DAEncoder<T>::bind(Graph<T>& g, const Parameter<T>& p) const {
  if (!g.grad_enabled()) return g.param(p);
  return g.param(const_cast<Parameter<T>&>(p));
}

template <typename T>
DAForward<T> DAEncoder<T>::forward(Graph<T>& g, std::span<const int> ids, std::size_t batch, Rng* dropout_rng) const {
  const auto& c = config_;
  if (batch == 0 || ids.size() != batch * c.max_len) {
    throw DimensionError("DA encoder expects " + std::to_string(batch) + " rows of " + std::to_string(c.max_len) +
                         " ids, got " + std::to_string(ids.size()));
  }
  auto x = embedding(bind(g, params_.at("embedding")), ids);
  std::vector<Var<T>> pooled;
  pooled.reserve(c.windows.size());
  for (auto w : c.windows) {
    const auto name = "conv" + std::to_string(w);
    auto conv = conv1d_valid(x, c.max_len, bind(g, params_.at(name + ".filters")), bind(g, params_.at(name + ".bias")));
    pooled.push_back(max_over_time(conv, c.max_len - w + 1));
  }
  DAForward<T> out;
  out.pooled = pooled.size() == 1 ? pooled.front() : concat_cols(pooled);
  auto features = out.pooled;
  if (dropout_rng && c.dropout > 0) {
    const T keep_scale = static_cast<T>(1.0 / (1.0 - c.dropout));
    Tensor<T> mask({batch, c.pooled_dim()});
    for (auto& m : mask.data()) m = dropout_rng->bernoulli(c.dropout) ? T{0} : keep_scale;
    features = mul(features, g.constant(std::move(mask)));
  }
  out.hidden = activate(affine(features, bind(g, params_.at("hidden.weight")), bind(g, params_.at("hidden.bias"))),
                        c.hidden_activation);
  out.logits = affine(out.hidden, bind(g, params_.at("output.weight")), bind(g, params_.at("output.bias")));
  return out;
}

template class DAEncoder<float>;
template class DAEncoder<double>;

DAPrediction da_predict(const DAEncoder<float>& model, std::span<const int> ids) {
  Graph<float> g(GradMode::disabled);
  auto padded = model.prepare(ids);
  auto f = model.forward(g, padded, 1);
  DAPrediction p;
  const auto& h = f.hidden.value();
  p.hidden.assign(h.data().begin(), h.data().end());
  const auto& logits = f.logits.value();
  p.probs = softmax_row<float>(logits.data());
  const auto best = std::max_element(p.probs.begin(), p.probs.end()) - p.probs.begin();
  p.act = act_from_index(std::min<std::size_t>(static_cast<std::size_t>(best), kNumDialogueActs - 1));
  return p;
}

DAPrediction da_predict(const DAEncoder<float>& model, const Vocabulary& vocab, std::string_view text) {
  auto tokens = tokenize(text);
  auto seq = encode(vocab, tokens, model.config().max_len);
  return da_predict(model, seq.ids);
}

// ---------------------------------------------------------------------------

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted) {
  if (truth >= classes_ || predicted >= classes_) throw std::out_of_range("class index outside confusion matrix");
  ++counts_[truth * classes_ + predicted];
}

std::size_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0}); }

std::size_t ConfusionMatrix::trace() const {
  std::size_t t = 0;
  for (std::size_t i = 0; i < classes_; ++i) t += at(i, i);
  return t;
}

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::size_t s = 0;
  for (std::size_t j = 0; j < classes_; ++j) s += at(truth, j);
  return s;
}

double ConfusionMatrix::accuracy() const {
  const auto n = total();
  return n == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(n);
}

void ConfusionMatrix::write_csv(std::ostream& out) const {
  for (std::size_t j = 0; j < classes_; ++j) {
    if (j) out << ',';
    out << (classes_ == kNumDialogueActs ? std::string(kDialogueActNames[j]) : "class" + std::to_string(j));
  }
  out << '\n';
  for (std::size_t i = 0; i < classes_; ++i) {
    for (std::size_t j = 0; j < classes_; ++j) {
      if (j) out << ',';
      out << at(i, j);
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

namespace {

void check_labels(std::span<const DAExample> data, std::size_t classes) {
  for (const auto& ex : data) {
    if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= classes) {
      throw InputError("dialogue act label " + std::to_string(ex.label) + " outside [0, " + std::to_string(classes) +
                       ")");
    }
  }
}

struct BatchInput {
  std::vector<int> ids;
  std::vector<int> labels;
};

BatchInput gather(const DAEncoder<float>& model, std::span<const DAExample> data, std::span<const std::size_t> rows) {
  BatchInput b;
  b.ids.reserve(rows.size() * model.config().max_len);
  for (auto r : rows) {
    auto p = model.prepare(data[r].ids);
    b.ids.insert(b.ids.end(), p.begin(), p.end());
    b.labels.push_back(data[r].label);
  }
  return b;
}

std::size_t count_correct(const Tensor<float>& logits, std::span<const int> labels) {
  std::size_t correct = 0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    const auto best = std::max_element(row.begin(), row.end()) - row.begin();
    if (best == labels[r]) ++correct;
  }
  return correct;
}

}  // namespace

std::vector<EpochMetrics> train_da(DAEncoder<float>& model, std::span<const DAExample> train,
                                   std::span<const DAExample> validation, const DATrainConfig& config) {
  if (train.empty()) throw ConfigError("DA training set is empty");
  if (config.batch_size == 0) throw ConfigError("batch size must be positive");
  check_labels(train, model.config().num_classes);
  check_labels(validation, model.config().num_classes);

  Rng rng(config.seed);
  Rng shuffle_rng = rng.split();
  Rng dropout_rng = rng.split();
  OptimizerState<float> opt{config.adam, 0, {}, {}};
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<EpochMetrics> history;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const auto n = std::min(config.batch_size, order.size() - start);
      auto batch = gather(model, train, std::span<const std::size_t>(order).subspan(start, n));
      Graph<float> g;
      auto f = model.forward(g, batch.ids, n, &dropout_rng);
      auto total = softmax_cross_entropy(f.logits, std::span<const int>(batch.labels));
      auto loss = scale(total, 1.0f / static_cast<float>(n));
      loss_sum += static_cast<double>(total.value()[0]);
      correct += count_correct(f.logits.value(), batch.labels);
      model.params().zero_grad();
      g.backward(loss);
      adam_step(model.params(), opt);
    }
    history.push_back({epoch, "train", loss_sum / static_cast<double>(train.size()),
                       static_cast<double>(correct) / static_cast<double>(train.size())});
    if (!validation.empty()) {
      auto eval = evaluate_da(model, validation);
      history.push_back({epoch, "validation", eval.loss, eval.accuracy()});
    }
  }
  return history;
}

DAEvaluation evaluate_da(const DAEncoder<float>& model, std::span<const DAExample> data) {
  if (model.config().num_classes != kNumDialogueActs) {
    throw CheckpointError("DA model has " + std::to_string(model.config().num_classes) + " classes, expected " +
                          std::to_string(kNumDialogueActs));
  }
  check_labels(data, kNumDialogueActs);
  DAEvaluation ev{0.0, ConfusionMatrix(kNumDialogueActs)};
  constexpr std::size_t kChunk = 256;
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    const auto n = std::min(kChunk, data.size() - start);
    rows.resize(n);
    std::iota(rows.begin(), rows.end(), start);
    auto batch = gather(model, data, rows);
    Graph<float> g(GradMode::disabled);
    auto f = model.forward(g, batch.ids, n);
    ev.loss += static_cast<double>(softmax_cross_entropy(f.logits, std::span<const int>(batch.labels)).value()[0]);
    const auto& logits = f.logits.value();
    for (std::size_t r = 0; r < n; ++r) {
      auto row = logits.row(r);
      const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      ev.confusion.add(static_cast<std::size_t>(batch.labels[r]), best);
    }
  }
  if (!data.empty()) ev.loss /= static_cast<double>(data.size());
  return ev;
}

void write_da_history_csv(std::ostream& out, std::span<const EpochMetrics> rows) {
  out << "epoch,split,loss,accuracy\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%s,%.6f,%.6f\n", r.epoch, r.split.c_str(), r.loss, r.accuracy);
    out << buf;
  }
}

ContextVector average_context(std::span<const ContextVector> vectors, std::size_t dim) {
  ContextVector mean(dim, 0.0f);
  if (vectors.empty()) return mean;
  std::vector<double> acc(dim, 0.0);
  for (const auto& v : vectors) {
    if (v.size() != dim) {
      throw DimensionError("context vector of size " + std::to_string(v.size()) + " where " + std::to_string(dim) +
                           " expected");
    }
    for (std::size_t i = 0; i < dim; ++i) acc[i] += v[i];
  }
  const double n = static_cast<double>(vectors.size());
  for (std::size_t i = 0; i < dim; ++i) mean[i] = static_cast<float>(acc[i] / n);
  return mean;
}

}  // namespace css
