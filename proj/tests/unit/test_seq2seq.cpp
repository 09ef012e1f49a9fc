#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "css/errors.hpp"
#include "css/gradcheck.hpp"
#include "css/seq2seq.hpp"
#include "support.hpp"

using namespace css;

namespace {

Seq2SeqConfig toy_config(std::size_t vocab, ModelMode mode = ModelMode::css) {
  Seq2SeqConfig c;
  c.mode = mode;
  c.vocab_size = vocab;
  c.embed_dim = 3;
  c.encoder_hidden = 4;
  c.decoder_hidden = 4;
  c.context_dim = 5;
  c.max_in_len = 10;
  c.max_out_len = 10;
  return c;
}

template <typename T>
void randomize(ParameterSet<T>& params, Rng& rng, double lo = -0.5, double hi = 0.5) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (auto& v : params[i].value.data()) v = static_cast<T>(rng.uniform(lo, hi));
  }
}

ContextVector random_ctx(std::size_t dim, Rng& rng) {
  ContextVector v(dim);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
  return v;
}

std::vector<int> random_ids(std::size_t n, std::size_t vocab, Rng& rng) {
  std::vector<int> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(static_cast<int>(kReservedCount + rng.index(vocab - kReservedCount)));
  return ids;
}

DialoguePair pair_of(std::vector<int> utt, std::vector<int> resp) {
  DialoguePair p;
  p.utterance.original_length = utt.size();
  p.response.original_length = resp.size();
  p.utterance.ids = std::move(utt);
  p.response.ids = std::move(resp);
  return p;
}

BucketedBatch batch_of(const std::vector<DialoguePair>& pairs, std::size_t bucket) {
  std::vector<std::size_t> rows(pairs.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return make_batch(pairs, rows, bucket);
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Log-probability of a full hypothesis, one step at a time.
double sequence_logprob(const Seq2Seq<float>& model, const DecoderSession& s, const std::vector<int>& tokens) {
  Tensor<float> h = s.h0;
  Tensor<float> c = s.c0;
  int prev = kSosId;
  double lp = 0;
  for (int tok : tokens) {
    auto step = decoder_log_probs(model, s, std::span<const int>(&prev, 1), h, c, {});
    lp += static_cast<double>(step.log_probs(0, static_cast<std::size_t>(tok)));
    h = step.h;
    c = step.c;
    prev = tok;
  }
  return lp;
}

}  // namespace

TEST_CASE("dimensions at the published sizes") {
  Seq2SeqConfig c;
  c.vocab_size = 30;
  CHECK(c.state_dim() == 512);
  CHECK(c.fused_dim() == 1024);
  Seq2Seq<float> model(c);
  Rng rng(1);
  model.initialize(rng);

  Graph<float> g(GradMode::disabled);
  const std::vector<int> one{7};
  const std::vector<int> len1{1};
  auto enc1 = model.encode(g, one, 1, 1, len1);
  CHECK(enc1.states.rows() == 1);
  CHECK(enc1.states.cols() == 512);

  const std::vector<int> ids{5, 6, 7, 8, 9};
  const std::vector<int> len5{5};
  auto enc = model.encode(g, ids, 1, 5, len5);
  auto keys = model.fuse_context(g, enc, model.context_input(g, std::vector<ContextVector>{random_ctx(512, rng)}, 1));
  CHECK(keys.fused.rows() == 5);
  CHECK(keys.fused.cols() == 1024);
  CHECK(keys.keys.cols() == 256);
  CHECK(enc.h0.cols() == 256);
  const std::vector<int> sos{kSosId};
  auto step = model.decode_step(g, sos, enc.h0, enc.c0, keys, len5, 5);
  CHECK(step.logits.cols() == 30);
  CHECK(step.h.cols() == 256);
}

TEST_CASE("context fusion distinguishes contexts") {
  Seq2Seq<float> model(toy_config(12));
  Rng rng(2);
  model.initialize(rng);
  const std::vector<int> ids{4, 5, 6};
  auto a = start_decoding(model, ids, random_ctx(5, rng));
  auto b = start_decoding(model, ids, random_ctx(5, rng));
  CHECK_FALSE(a.keys == b.keys);
  auto zero = start_decoding(model, ids, ContextVector(5, 0.0f));
  auto none = start_decoding(model, ids, ContextVector{});
  CHECK(zero.keys == none.keys);
  CHECK_THROWS_AS(start_decoding(model, ids, ContextVector(3, 1.0f)), DimensionError);
}

TEST_CASE("attention") {
  auto c = toy_config(8);
  c.decoder_hidden = 2;
  Seq2Seq<double> model(c);
  model.params().at("att.weight").value = Tensor<double>::matrix(2, 2, {1, 0, 0, 1});
  Graph<double> g(GradMode::disabled);

  SUBCASE("single key") {
    AttentionKeySet<double> k;
    k.keys = g.constant(Tensor<double>::matrix(1, 2, {0.3, -0.7}));
    k.scored = k.keys;
    const std::vector<int> len{1};
    auto r = model.attend(g, g.constant(Tensor<double>::matrix(1, 2, {2, 1})), k, len, 1);
    CHECK(r.weights.value()[0] == 1.0);
    CHECK(r.summary.value() == Tensor<double>::matrix(1, 2, {0.3, -0.7}));
  }
  SUBCASE("orthogonal keys with identity weight") {
    AttentionKeySet<double> k;
    k.keys = g.constant(Tensor<double>::matrix(2, 2, {1, 0, 0, 1}));
    k.scored = k.keys;
    const std::vector<int> len{2};
    auto r = model.attend(g, g.constant(Tensor<double>::matrix(1, 2, {0.2, 0.9})), k, len, 2);
    CHECK(r.weights.value()[1] > r.weights.value()[0]);
    CHECK(r.weights.value()[0] + r.weights.value()[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.weights.value()[1] == doctest::Approx(sig(0.7)).epsilon(1e-12));
  }
  SUBCASE("padded positions get zero weight") {
    Rng rng(3);
    AttentionKeySet<double> k;
    k.keys = g.constant(css::testing::random_tensor({3 * 4, 2}, rng));
    k.scored = k.keys;
    const std::vector<int> lens{4, 1, 2};
    auto r = model.attend(g, g.constant(css::testing::random_tensor({3, 2}, rng)), k, lens, 4);
    const auto& w = r.weights.value();
    for (std::size_t b = 0; b < 3; ++b) {
      double s = 0;
      for (std::size_t t = 0; t < 4; ++t) {
        CHECK(w(b, t) >= 0.0);
        if (static_cast<int>(t) >= lens[b]) CHECK(w(b, t) == 0.0);
        s += w(b, t);
      }
      CHECK(std::abs(s - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("decode_step matches hand arithmetic at hidden 2, vocab 4") {
  Seq2SeqConfig c;
  c.vocab_size = 4;
  c.embed_dim = 2;
  c.encoder_hidden = 1;
  c.decoder_hidden = 2;
  c.context_dim = 1;
  Seq2Seq<double> model(c);
  Rng rng(4);
  randomize(model.params(), rng, -1, 1);

  const auto& P = model.params();
  const auto& emb = P.at("dec.embedding").value;
  const auto& wx = P.at("dec.wx").value;  // 2 x 8
  const auto& bias = P.at("dec.b").value;
  const auto& watt = P.at("att.weight").value;  // 2 x 2
  const auto& wout = P.at("out.weight").value;  // 4 x 4
  const auto& bout = P.at("out.bias").value;
  const double K[2][2] = {{0.5, -0.25}, {-0.8, 0.4}};

  // Zero initial state, so the recurrent weights drop out.
  double gates[8];
  for (int j = 0; j < 8; ++j) gates[j] = emb(kSosId, 0) * wx(0, j) + emb(kSosId, 1) * wx(1, j) + bias[j];
  double h[2];
  for (int u = 0; u < 2; ++u) {
    const double i = sig(gates[u]);
    const double cand = std::tanh(gates[4 + u]);
    const double o = sig(gates[6 + u]);
    h[u] = o * std::tanh(i * cand);
  }
  double q[2];
  for (int j = 0; j < 2; ++j) q[j] = h[0] * watt(0, j) + h[1] * watt(1, j);
  const double s0 = q[0] * K[0][0] + q[1] * K[0][1];
  const double s1 = q[0] * K[1][0] + q[1] * K[1][1];
  const double w1 = 1.0 / (1.0 + std::exp(s0 - s1));
  const double w0 = 1.0 - w1;
  const double summary[2] = {w0 * K[0][0] + w1 * K[1][0], w0 * K[0][1] + w1 * K[1][1]};
  const double feat[4] = {h[0], h[1], summary[0], summary[1]};
  double expected[4];
  for (int v = 0; v < 4; ++v) {
    expected[v] = bout[v];
    for (int k = 0; k < 4; ++k) expected[v] += feat[k] * wout(k, v);
  }

  Graph<double> g(GradMode::disabled);
  AttentionKeySet<double> keys;
  keys.keys = g.constant(Tensor<double>::matrix(2, 2, {K[0][0], K[0][1], K[1][0], K[1][1]}));
  keys.scored = keys.keys;
  const std::vector<int> sos{kSosId};
  const std::vector<int> len{2};
  auto step = model.decode_step(g, sos, g.constant(Tensor<double>::zeros(1, 2)), g.constant(Tensor<double>::zeros(1, 2)),
                                keys, len, 2);
  REQUIRE(step.logits.cols() == 4);
  for (int v = 0; v < 4; ++v) CHECK(step.logits.value()[static_cast<std::size_t>(v)] == doctest::Approx(expected[v]).epsilon(1e-12));
  CHECK(step.h.value()[0] == doctest::Approx(h[0]).epsilon(1e-12));
  CHECK(step.h.value()[1] == doctest::Approx(h[1]).epsilon(1e-12));

  auto again = model.decode_step(g, sos, g.constant(Tensor<double>::zeros(1, 2)), g.constant(Tensor<double>::zeros(1, 2)),
                                 keys, len, 2);
  CHECK(again.logits.value() == step.logits.value());
}

TEST_CASE("backward direction mirrors the forward direction") {
  Seq2Seq<double> model(toy_config(12));
  Rng rng(5);
  randomize(model.params(), rng);
  for (const char* part : {".wx", ".wh", ".b"}) {
    model.params().at(std::string("enc.bwd") + part).value = model.params().at(std::string("enc.fwd") + part).value;
  }
  const std::vector<int> ids{4, 9, 6, 11, 5};
  std::vector<int> reversed(ids.rbegin(), ids.rend());
  const std::vector<int> len{5};
  Graph<double> g(GradMode::disabled);
  auto a = model.encode(g, ids, 1, 5, len).states.value();
  auto b = model.encode(g, reversed, 1, 5, len).states.value();
  const std::size_t H = 4;
  bool forward_changed = false;
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t k = 0; k < H; ++k) {
      CHECK(b(i, H + k) == a(4 - i, k));
      if (b(i, k) != a(i, k)) forward_changed = true;
    }
  }
  CHECK(forward_changed);
}

TEST_CASE("padding does not change the encoding or the loss") {
  Seq2Seq<double> model(toy_config(12));
  Rng rng(6);
  randomize(model.params(), rng);
  auto p1 = pair_of({4, 5}, {6, 7});
  auto p2 = pair_of({8, 9, 10, 11, 4, 5}, {6, 7, 8, 9, 10});
  std::vector<ContextVector> c1{random_ctx(5, rng)};
  std::vector<ContextVector> c2{random_ctx(5, rng)};
  std::vector<ContextVector> both{c1[0], c2[0]};

  Graph<double> g(GradMode::disabled);
  const double alone1 = model.sequence_loss(g, batch_of({p1}, 10), c1).total.value()[0];
  const double alone2 = model.sequence_loss(g, batch_of({p2}, 10), c2).total.value()[0];
  const auto joint = model.sequence_loss(g, batch_of({p1, p2}, 10), both);
  CHECK(joint.total.value()[0] == doctest::Approx(alone1 + alone2).epsilon(1e-12));
  CHECK(joint.tokens == 3 + 6);
  const double wide = model.sequence_loss(g, batch_of({p1, p2}, 25), both).total.value()[0];
  CHECK(wide == joint.total.value()[0]);
}

namespace {

GradCheckReport check_toy(ModelMode mode, AttentionKeys att, std::uint64_t seed) {
  auto c = toy_config(8, mode);
  c.attention_keys = att;
  Seq2Seq<double> model(c);
  Rng rng(seed);
  randomize(model.params(), rng, -1, 1);
  std::vector<DialoguePair> pairs{pair_of({4, 5, 6}, {7, 4}), pair_of({7, 5}, {6, 5, 4})};
  auto batch = batch_of(pairs, 4);
  std::vector<ContextVector> ctx{random_ctx(5, rng), random_ctx(5, rng)};
  return gradient_check([&](Graph<double>& g) { return model.sequence_loss(g, batch, ctx).mean(); }, model.params());
}

}  // namespace

TEST_CASE("gradient check end to end at toy width") {
  for (auto mode : {ModelMode::css, ModelMode::baseline1}) {
    for (auto att : {AttentionKeys::reduced, AttentionKeys::concat}) {
      auto report = check_toy(mode, att, 1);
      INFO("mode " << mode_name(mode) << ", keys " << attention_keys_name(att));
      if (!report.ok()) report.print(std::cout);
      CHECK(report.ok());
      CHECK(report.max_rel_error() < 1e-4);
    }
  }
}

// Central differences with step 1e-5 carry about eps * |loss| / step = 2e-11
// of rounding noise, so entries whose true gradient is below ~1e-7 can miss
// the relative tolerance. Every miss must sit at that noise floor.
TEST_CASE("property: gradient mismatches are finite-difference noise") {
  std::size_t clean = 0;
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    for (auto att : {AttentionKeys::reduced, AttentionKeys::concat}) {
      auto report = check_toy(ModelMode::css, att, seed);
      clean += report.ok();
      for (const auto& p : report.params) {
        if (p.passed) continue;
        INFO("seed " << seed << " " << p.name << " analytic " << p.analytic_at_worst << " numeric " << p.numeric_at_worst);
        CHECK(std::abs(p.analytic_at_worst - p.numeric_at_worst) < 1e-10);
      }
    }
  }
  MESSAGE(clean << " of 60 random points pass entrywise");
}

TEST_CASE("initial loss is close to ln V") {
  Seq2SeqConfig c;
  c.vocab_size = 500;
  c.embed_dim = 32;
  c.encoder_hidden = 32;
  c.decoder_hidden = 32;
  c.context_dim = 16;
  Seq2Seq<float> model(c);
  Rng rng(8);
  model.initialize(rng);
  std::vector<DialoguePair> pairs;
  std::vector<ContextVector> ctx;
  for (int i = 0; i < 8; ++i) {
    pairs.push_back(pair_of(random_ids(6, 500, rng), random_ids(7, 500, rng)));
    ctx.push_back(random_ctx(16, rng));
  }
  OptimizerState<float> opt;
  const double loss = train_step(model, batch_of(pairs, 10), ctx, opt);
  MESSAGE("initial loss " << loss << " vs ln V " << std::log(500.0));
  CHECK(std::abs(loss - std::log(500.0)) < 0.1 * std::log(500.0));
}

TEST_CASE("training rejects a batch without targets") {
  Seq2Seq<float> model(toy_config(8));
  Rng rng(9);
  model.initialize(rng);
  auto batch = batch_of({pair_of({4}, {5})}, 4);
  std::fill(batch.responses.ids.begin(), batch.responses.ids.end(), kPadId);
  OptimizerState<float> opt;
  CHECK_THROWS_AS(train_step(model, batch, {}, opt), InputError);
}

TEST_CASE("toy corpus is memorized") {
  auto c = toy_config(20);
  c.embed_dim = 16;
  c.encoder_hidden = 32;
  c.decoder_hidden = 32;
  c.context_dim = 8;
  Seq2Seq<float> model(c);
  Rng rng(10);
  model.initialize(rng);
  std::vector<ContextPair> data;
  for (int i = 0; i < 32; ++i) {
    data.push_back({pair_of(random_ids(1 + rng.index(6), 20, rng), random_ids(1 + rng.index(6), 20, rng)),
                    random_ctx(8, rng)});
  }
  Seq2SeqTrainConfig tc;
  tc.epochs = 300;
  tc.batch_size = 32;
  tc.adam.learning_rate = 1e-2;
  auto history = train_seq2seq(model, data, {}, tc);
  MESSAGE("final loss " << history.back().loss);
  CHECK(history.back().loss < 0.1);
  CHECK(evaluate_loss(model, data, 32, tc.bucket_bounds) < 0.1);
}

TEST_CASE("training is deterministic given seed") {
  Rng data_rng(11);
  std::vector<ContextPair> data;
  for (int i = 0; i < 12; ++i) {
    data.push_back({pair_of(random_ids(3, 12, data_rng), random_ids(4, 12, data_rng)), random_ctx(5, data_rng)});
  }
  auto run = [&] {
    Seq2Seq<float> model(toy_config(12));
    Rng rng(12);
    model.initialize(rng);
    Seq2SeqTrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 5;
    tc.seed = 4;
    auto h = train_seq2seq(model, data, std::span<const ContextPair>(data).subspan(0, 4), tc);
    std::ostringstream csv;
    write_loss_csv(csv, h);
    return csv.str();
  };
  const auto a = run();
  CHECK(a == run());
  CHECK(a.rfind("epoch,split,loss\n1,train,", 0) == 0);
  CHECK(a.find("3,validation,") != std::string::npos);
}

TEST_CASE("zero context in css equals baseline1 bitwise") {
  Rng rng(13);
  Seq2Seq<float> css_model(toy_config(12, ModelMode::css));
  css_model.initialize(rng);
  Seq2Seq<float> base(toy_config(12, ModelMode::baseline1));
  base.params().assign_from(css_model.params());
  for (int trial = 0; trial < 10; ++trial) {
    auto ids = random_ids(1 + rng.index(8), 12, rng);
    const ContextVector zero(5, 0.0f);
    auto a = start_decoding(css_model, ids, zero);
    auto b = start_decoding(base, ids, random_ctx(5, rng));  // ignored by baseline1
    CHECK(a.keys == b.keys);
    CHECK(greedy_decode(css_model, ids, zero).tokens == greedy_decode(base, ids, {}).tokens);
    auto batch = batch_of({pair_of(ids, random_ids(3, 12, rng))}, 10);
    Graph<float> g(GradMode::disabled);
    CHECK(css_model.sequence_loss(g, batch, std::vector<ContextVector>{zero}).total.value() ==
          base.sequence_loss(g, batch, {}).total.value());
  }
}

TEST_CASE("greedy decoding") {
  Seq2Seq<float> model(toy_config(12));
  Rng rng(14);
  model.initialize(rng);
  for (int trial = 0; trial < 20; ++trial) {
    auto ids = random_ids(1 + rng.index(9), 12, rng);
    auto ctx = random_ctx(5, rng);
    DecodeOptions opt;
    opt.max_out_len = 1 + rng.index(10);
    auto a = greedy_decode(model, ids, ctx, opt);
    CHECK(a.tokens.size() <= opt.max_out_len);
    auto eos = std::find(a.tokens.begin(), a.tokens.end(), kEosId);
    CHECK((eos == a.tokens.end() || eos + 1 == a.tokens.end()));
    for (int t : a.tokens) {
      CHECK(t != kUnkId);
      CHECK(t != kPadId);
      CHECK(t != kSosId);
    }
    CHECK(greedy_decode(model, ids, ctx, opt).tokens == a.tokens);
  }
  // An untrained toy model rarely emits EOS, so the length cap is exercised.
  auto longest = greedy_decode(model, std::vector<int>{}, {}, DecodeOptions{50, true});
  CHECK(longest.tokens.size() <= 50);
}

TEST_CASE("width-1 beam equals greedy") {
  Rng rng(15);
  for (int trial = 0; trial < 50; ++trial) {
    Seq2Seq<float> model(toy_config(9));
    model.initialize(rng);
    randomize(model.params(), rng, -1.5, 1.5);
    auto ids = random_ids(1 + rng.index(6), 9, rng);
    auto ctx = random_ctx(5, rng);
    auto greedy = greedy_decode(model, ids, ctx);
    auto beam = beam_decode(model, ids, ctx, BeamOptions{1, 0.0, 1, {}});
    REQUIRE(beam.beams.size() == 1);
    CHECK(beam.selected().tokens == greedy.tokens);
    CHECK(beam.selected().logprob == doctest::Approx(greedy.logprob));
  }
}

TEST_CASE("beam search top hypothesis matches exhaustive enumeration") {
  Rng rng(16);
  std::size_t agree = 0;
  const std::vector<int> alphabet{kEosId, 4, 5};
  for (int trial = 0; trial < 50; ++trial) {
    auto c = toy_config(6);
    c.max_out_len = 4;
    Seq2Seq<float> model(c);
    randomize(model.params(), rng, -1.0, 1.0);
    auto ids = random_ids(1 + rng.index(4), 6, rng);
    auto ctx = random_ctx(5, rng);
    auto session = start_decoding(model, ids, ctx);

    // All sequences of words of length < 4 closed by EOS, plus the length-4 word strings.
    std::vector<std::vector<int>> all;
    std::function<void(std::vector<int>)> grow = [&](std::vector<int> prefix) {
      if (prefix.size() == 4) {
        all.push_back(prefix);
        return;
      }
      for (int tok : alphabet) {
        auto next = prefix;
        next.push_back(tok);
        if (tok == kEosId) {
          all.push_back(next);
        } else {
          grow(next);
        }
      }
    };
    grow({});
    CHECK(all.size() == 1 + 2 + 4 + 8 + 16);
    double best_lp = -1e300;
    std::vector<int> best;
    for (const auto& seq : all) {
      const double lp = sequence_logprob(model, session, seq);
      if (lp > best_lp) {
        best_lp = lp;
        best = seq;
      }
    }
    auto beam = beam_decode(model, ids, ctx, BeamOptions{3, 0.0, 1, DecodeOptions{4, true}});
    if (beam.best().tokens == best) ++agree;
    CHECK(beam.best().logprob <= best_lp + 1e-5);
    for (std::size_t k = 1; k < beam.beams.size(); ++k) CHECK(beam.beams[k - 1].score >= beam.beams[k].score);
  }
  MESSAGE("beam agreed with exhaustive search on " << agree << " of 50");
  CHECK(agree == 50);
}

TEST_CASE("chosen beam selection") {
  Seq2Seq<float> model(toy_config(12));
  Rng rng(17);
  model.initialize(rng);
  randomize(model.params(), rng, -1, 1);
  auto ids = random_ids(4, 12, rng);
  auto ctx = random_ctx(5, rng);
  auto r = beam_decode(model, ids, ctx, BeamOptions{3, 0.0, 3, {}});
  REQUIRE(r.beams.size() == 3);
  CHECK(r.chosen == 2);
  CHECK(r.selected().tokens == r.beams[2].tokens);
  CHECK(r.beams[0].score >= r.beams[1].score);
  CHECK(r.beams[1].score >= r.beams[2].score);
  for (const auto& b : r.beams) {
    if (b.finished_with_eos) CHECK(b.tokens.back() == kEosId);
    CHECK(b.response().size() <= 10);
  }
  auto first = beam_decode(model, ids, ctx, BeamOptions{3, 0.0, 1, {}});
  CHECK(first.selected().tokens == r.beams[0].tokens);

  CHECK_THROWS_AS(beam_decode(model, ids, ctx, BeamOptions{3, 0.0, 4, {}}), std::invalid_argument);
  CHECK_THROWS_AS(beam_decode(model, ids, ctx, BeamOptions{3, 0.0, 0, {}}), std::invalid_argument);

  // A two-token vocabulary with a length-1 cap leaves fewer finals than the width.
  auto c = toy_config(5);
  c.max_out_len = 1;
  Seq2Seq<float> tiny(c);
  tiny.initialize(rng);
  auto clamp = beam_decode(tiny, std::vector<int>{4}, {}, BeamOptions{3, 0.0, 3, DecodeOptions{1, true}});
  CHECK(clamp.beams.size() == 2);
  CHECK(clamp.chosen == 1);
}

TEST_CASE("length penalty") {
  CHECK(length_normalized(-6.0, 3, 0.0) == -6.0);
  CHECK(length_normalized(-6.0, 4, 1.0) == -1.5);
  CHECK(length_normalized(-8.0, 4, 0.5) == -4.0);
  Seq2Seq<float> model(toy_config(12));
  Rng rng(18);
  model.initialize(rng);
  randomize(model.params(), rng, -1, 1);
  auto r = beam_decode(model, random_ids(3, 12, rng), {}, BeamOptions{4, 1.0, 2, {}});
  for (const auto& b : r.beams) CHECK(b.score == doctest::Approx(b.logprob / static_cast<double>(b.tokens.size())));
  for (std::size_t k = 1; k < r.beams.size(); ++k) CHECK(r.beams[k - 1].score >= r.beams[k].score);
}

TEST_CASE("configuration errors") {
  CHECK_THROWS_AS(parse_mode("css2"), ConfigError);
  CHECK(parse_mode("baseline2") == ModelMode::baseline2);
  CHECK(parse_attention_keys("concat") == AttentionKeys::concat);
  auto c = toy_config(3);
  CHECK_THROWS_AS(Seq2Seq<float>{c}, ConfigError);
  Seq2Seq<float> model(toy_config(8));
  Graph<float> g(GradMode::disabled);
  const std::vector<int> ids{4, 5, 0};
  const std::vector<int> bad{0};
  CHECK_THROWS_AS(model.encode(g, ids, 1, 3, bad), InputError);
}
