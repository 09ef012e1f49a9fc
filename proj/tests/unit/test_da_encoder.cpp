#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>

#include "doctest.h"

#include "css/da_encoder.hpp"
#include "css/errors.hpp"
#include "css/gradcheck.hpp"

using namespace css;

namespace {

DAEncoderConfig small_config(std::size_t vocab = 50) {
  DAEncoderConfig c;
  c.vocab_size = vocab;
  c.embed_dim = 16;
  c.filters_per_window = 8;
  c.hidden_dim = 32;
  return c;
}

// Ten classes, each marked by one keyword placed among filler words.
std::vector<DAExample> keyword_dataset(std::size_t n, Rng& rng) {
  std::vector<DAExample> out;
  const int first_keyword = 4;
  const int first_filler = 14;
  const int fillers = 30;
  for (std::size_t i = 0; i < n; ++i) {
    DAExample ex;
    ex.label = static_cast<int>(i % kNumDialogueActs);
    const auto len = 3 + rng.index(10);
    for (std::size_t k = 0; k < len; ++k) ex.ids.push_back(first_filler + static_cast<int>(rng.index(fillers)));
    ex.ids[rng.index(len)] = first_keyword + ex.label;
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

TEST_CASE("dimension chain at the published sizes") {
  DAEncoderConfig c;
  c.vocab_size = 40;
  DAEncoder<float> model(c);
  Rng rng(1);
  model.initialize(rng);
  CHECK(c.pooled_dim() == 640);

  std::vector<int> ids(2 * 25);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(4 + i % 30);
  Graph<float> g(GradMode::disabled);
  auto f = model.forward(g, ids, 2);
  CHECK(f.pooled.rows() == 2);
  CHECK(f.pooled.cols() == 640);
  CHECK(f.hidden.cols() == 512);
  CHECK(f.logits.cols() == 10);

  // Per-window convolution lengths before pooling.
  auto x = embedding(g.param(std::as_const(model.params()).at("embedding")), std::span<const int>(ids));
  const std::vector<std::size_t> expected{23, 22, 21, 20, 18};
  for (std::size_t k = 0; k < c.windows.size(); ++k) {
    const auto name = "conv" + std::to_string(c.windows[k]);
    const auto& params = std::as_const(model.params());
    auto conv = conv1d_valid(x, 25, g.param(params.at(name + ".filters")), g.param(params.at(name + ".bias")));
    CHECK(conv.rows() == 2 * expected[k]);
    CHECK(conv.cols() == 128);
  }
}

TEST_CASE("prediction: probabilities, purity and truncation") {
  DAEncoder<float> model(small_config());
  Rng rng(2);
  model.initialize(rng);
  std::vector<int> ids{5, 6, 7, 8};
  auto a = da_predict(model, ids);
  auto b = da_predict(model, ids);
  CHECK(a.hidden.size() == 32);
  CHECK(a.hidden == b.hidden);  // bitwise
  CHECK(a.probs == b.probs);
  const double total = std::accumulate(a.probs.begin(), a.probs.end(), 0.0);
  CHECK(std::abs(total - 1.0) < 1e-6);
  CHECK(act_index(a.act) == static_cast<std::size_t>(std::max_element(a.probs.begin(), a.probs.end()) - a.probs.begin()));

  std::vector<int> longer(40, 9);
  std::vector<int> cut(25, 9);
  CHECK(da_predict(model, longer).hidden == da_predict(model, cut).hidden);
  CHECK(model.prepare(ids) == std::vector<int>{5, 6, 7, 8, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  CHECK_NOTHROW(da_predict(model, std::vector<int>{}));
}

TEST_CASE("argmax is invariant to shifting the logits") {
  DAEncoder<float> model(small_config());
  Rng rng(3);
  model.initialize(rng);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> ids;
    for (int k = 0; k < 6; ++k) ids.push_back(4 + static_cast<int>(rng.index(26)));
    auto before = da_predict(model, ids);
    auto& bias = model.params().at("output.bias").value;
    const float shift = static_cast<float>(rng.uniform(-50, 50));
    for (auto& v : bias.data()) v += shift;
    auto after = da_predict(model, ids);
    for (auto& v : bias.data()) v -= shift;
    CHECK(before.act == after.act);
    for (std::size_t i = 0; i < before.probs.size(); ++i) CHECK(std::abs(before.probs[i] - after.probs[i]) < 1e-5);
  }
}

TEST_CASE("gradient check at reduced width") {
  DAEncoderConfig c;
  c.vocab_size = 12;
  c.embed_dim = 4;
  c.filters_per_window = 2;
  c.hidden_dim = 8;
  DAEncoder<double> model(c);
  Rng rng(4);
  model.initialize(rng);
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    for (auto& v : model.params()[i].value.data()) v += rng.uniform(-0.1, 0.1);  // nonzero biases
  }
  std::vector<int> ids;
  for (int r = 0; r < 3; ++r) {
    std::vector<int> raw;
    for (int k = 0; k < 9 + 4 * r; ++k) raw.push_back(static_cast<int>(rng.index(12)));
    auto p = model.prepare(raw);
    ids.insert(ids.end(), p.begin(), p.end());
  }
  const std::vector<int> labels{1, 7, 3};
  auto report = gradient_check(
      [&](Graph<double>& g) {
        auto f = model.forward(g, ids, 3);
        return softmax_cross_entropy<double>(f.logits, labels);
      },
      model.params());
  if (!report.ok()) report.print(std::cout);
  CHECK(report.ok());
  CHECK(report.max_rel_error() < 1e-4);
}

TEST_CASE("training: ten examples are memorized") {
  DAEncoder<float> model(small_config());
  Rng rng(5);
  model.initialize(rng);
  auto data = keyword_dataset(10, rng);
  DATrainConfig tc;
  tc.epochs = 200;
  tc.batch_size = 10;
  tc.seed = 5;
  auto history = train_da(model, data, {}, tc);
  CHECK(history.size() == 200);
  CHECK(evaluate_da(model, data).accuracy() == 1.0);
}

TEST_CASE("training: keyword-separable classes generalize") {
  DAEncoder<float> model(small_config());
  Rng rng(6);
  model.initialize(rng);
  auto data = keyword_dataset(1000, rng);
  std::span<const DAExample> all(data);
  auto history = train_da(model, all.subspan(0, 800), all.subspan(800), DATrainConfig{30, 50, {}, 6});
  REQUIRE(history.size() == 60);
  CHECK(history.back().split == "validation");
  const double held_out = evaluate_da(model, all.subspan(800)).accuracy();
  MESSAGE("held-out accuracy " << held_out);
  CHECK(held_out >= 0.9);
}

TEST_CASE("training: deterministic given seed") {
  Rng data_rng(7);
  auto data = keyword_dataset(40, data_rng);
  auto run = [&] {
    DAEncoder<float> model(small_config());
    Rng rng(8);
    model.initialize(rng);
    auto h = train_da(model, data, std::span<const DAExample>(data).subspan(0, 10), DATrainConfig{3, 16, {}, 9});
    std::ostringstream csv;
    write_da_history_csv(csv, h);
    std::vector<float> flat;
    for (std::size_t i = 0; i < model.params().size(); ++i) {
      const auto& v = model.params()[i].value.data();
      flat.insert(flat.end(), v.begin(), v.end());
    }
    return std::make_pair(csv.str(), flat);
  };
  auto a = run();
  auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.first.rfind("epoch,split,loss,accuracy\n1,train,", 0) == 0);
}

TEST_CASE("training and evaluation errors") {
  DAEncoder<float> model(small_config());
  Rng rng(9);
  model.initialize(rng);
  CHECK_THROWS_AS(train_da(model, {}, {}, {}), ConfigError);
  std::vector<DAExample> bad{{{4, 5}, 12}};
  CHECK_THROWS_AS(train_da(model, bad, {}, {}), InputError);

  auto c = small_config();
  c.num_classes = 4;
  DAEncoder<float> wrong(c);
  std::vector<DAExample> ok{{{4, 5}, 1}};
  CHECK_THROWS_AS(evaluate_da(wrong, ok), CheckpointError);

  auto tiny = small_config();
  tiny.max_len = 5;
  CHECK_THROWS_AS(DAEncoder<float>{tiny}, ConfigError);
}

TEST_CASE("evaluation: constant predictor on balanced classes") {
  DAEncoder<float> model(small_config());
  Rng rng(10);
  model.initialize(rng);
  model.params().at("output.weight").value.fill(0.0f);
  model.params().at("output.bias").value[3] = 1.0f;
  auto data = keyword_dataset(100, rng);
  auto ev = evaluate_da(model, data);
  CHECK(ev.accuracy() == doctest::Approx(0.10));
  for (std::size_t t = 0; t < kNumDialogueActs; ++t) {
    CHECK(ev.confusion.row_sum(t) == 10);
    CHECK(ev.confusion.at(t, 3) == 10);
  }
}

TEST_CASE("confusion matrix") {
  ConfusionMatrix perfect;
  for (std::size_t c = 0; c < kNumDialogueActs; ++c) {
    for (std::size_t k = 0; k <= c; ++k) perfect.add(c, c);
  }
  CHECK(perfect.accuracy() == 1.0);
  for (std::size_t i = 0; i < kNumDialogueActs; ++i) {
    for (std::size_t j = 0; j < kNumDialogueActs; ++j) {
      if (i != j) CHECK(perfect.at(i, j) == 0);
    }
  }

  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    ConfusionMatrix m;
    std::size_t agree = 0;
    const auto n = 1 + rng.index(300);
    for (std::size_t k = 0; k < n; ++k) {
      const auto t = rng.index(10);
      const auto p = rng.index(10);
      agree += t == p;
      m.add(t, p);
    }
    CHECK(m.total() == n);
    CHECK(m.trace() == agree);
    CHECK(m.accuracy() == static_cast<double>(agree) / static_cast<double>(n));
  }

  ConfusionMatrix small;
  small.add(0, 0);
  small.add(4, 2);
  std::ostringstream csv;
  small.write_csv(csv);
  std::istringstream lines(csv.str());
  std::string header;
  std::getline(lines, header);
  CHECK(header == "Accept,NonOpinionated,Backchannel,Opinionated,Question,Summarize,Reject,Conventional,NonVerbal,Other");
  std::string row;
  std::size_t count = 0;
  while (std::getline(lines, row)) ++count;
  CHECK(count == 10);
  CHECK_THROWS(small.add(10, 0));
}

TEST_CASE("average_context") {
  const ContextVector v1{1.0f, -2.0f, 3.5f};
  const ContextVector v2{3.0f, 0.0f, -1.5f};
  std::vector<ContextVector> same{v1, v1};
  CHECK(average_context(same, 3) == v1);
  CHECK(average_context({}, 3) == ContextVector{0, 0, 0});
  std::vector<ContextVector> two{v1, v2};
  CHECK(average_context(two, 3) == ContextVector{2.0f, -1.0f, 1.0f});
  std::vector<ContextVector> mismatch{v1, ContextVector{1.0f}};
  CHECK_THROWS_AS(average_context(mismatch, 3), DimensionError);
}

TEST_CASE("property: average_context is permutation invariant and bounded") {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = 1 + rng.index(6);
    const std::size_t dim = 1 + rng.index(16);
    std::vector<ContextVector> vs(n, ContextVector(dim));
    for (auto& v : vs) {
      for (auto& x : v) x = static_cast<float>(rng.uniform(-10, 10));
    }
    auto mean = average_context(vs, dim);
    auto shuffled = vs;
    rng.shuffle(shuffled);
    CHECK(average_context(shuffled, dim) == mean);
    for (std::size_t i = 0; i < dim; ++i) {
      float lo = vs[0][i];
      float hi = vs[0][i];
      for (const auto& v : vs) {
        lo = std::min(lo, v[i]);
        hi = std::max(hi, v[i]);
      }
      CHECK(mean[i] >= lo);
      CHECK(mean[i] <= hi);
    }
  }
}
