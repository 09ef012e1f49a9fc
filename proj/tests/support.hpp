#pragma once

#include <functional>
#include <string>
#include <vector>

#include "css/gradcheck.hpp"
#include "css/ops.hpp"
#include "css/random.hpp"

namespace css::testing {

inline Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

using OpFn = std::function<Var<double>(Graph<double>&, const std::vector<Var<double>>&)>;

/// Finite-difference check of one op: every operand becomes a parameter and
/// the loss is the op output contracted with a fixed random probe.
inline GradCheckReport check_op(const OpFn& op, const std::vector<Tensor<double>>& operands, Rng& rng,
                                GradCheckOptions options = {}) {
  ParameterSet<double> params;
  std::vector<Parameter<double>*> inputs;
  for (std::size_t i = 0; i < operands.size(); ++i) {
    auto& p = params.add("x" + std::to_string(i), operands[i].shape());
    p.value = operands[i];
    inputs.push_back(&p);
  }
  Tensor<double> probe;
  Rng probe_rng = rng.split();
  LossBuilder build = [&](Graph<double>& g) {
    std::vector<Var<double>> vars;
    for (auto* p : inputs) vars.push_back(g.param(*p));
    auto out = op(g, vars);
    if (probe.empty()) probe = random_tensor(out.value().shape(), probe_rng);
    return sum(mul(out, g.constant(probe)));
  };
  return gradient_check(build, params, options);
}

struct OpCase {
  const char* name;
  OpFn fn;
  std::vector<Tensor<double>> operands;
};

/// Every differentiable op on operands of random small shapes drawn from `rng`.
inline std::vector<OpCase> random_op_cases(Rng& rng) {
  using V = std::vector<Var<double>>;
  const std::size_t m = 1 + rng.index(4);
  const std::size_t n = 1 + rng.index(4);
  const std::size_t k = 1 + rng.index(4);
  const std::size_t steps = 1 + rng.index(4);
  auto rt = [&](Shape s) { return random_tensor(std::move(s), rng); };
  std::vector<int> ids;
  for (std::size_t i = 0; i < m * 2; ++i) ids.push_back(static_cast<int>(rng.index(k + 1)));
  std::vector<int> targets;
  for (std::size_t i = 0; i < m; ++i) targets.push_back(rng.bernoulli(0.2) ? -1 : static_cast<int>(rng.index(n)));
  std::vector<int> lengths;
  for (std::size_t i = 0; i < m; ++i) lengths.push_back(1 + static_cast<int>(rng.index(steps)));
  std::vector<double> mask;
  for (std::size_t i = 0; i < m; ++i) mask.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
  const std::size_t width = 1 + rng.index(steps);
  const std::size_t begin = rng.index(n);
  const std::size_t count = 1 + rng.index(n - begin);
  const double factor = rng.uniform(-2, 2);

  return {
      {"matmul", [](Graph<double>&, const V& v) { return matmul(v[0], v[1]); }, {rt({m, k}), rt({k, n})}},
      {"add", [](Graph<double>&, const V& v) { return add(v[0], v[1]); }, {rt({m, n}), rt({m, n})}},
      {"sub", [](Graph<double>&, const V& v) { return sub(v[0], v[1]); }, {rt({m, n}), rt({m, n})}},
      {"mul", [](Graph<double>&, const V& v) { return mul(v[0], v[1]); }, {rt({m, n}), rt({m, n})}},
      {"scale", [factor](Graph<double>&, const V& v) { return scale(v[0], factor); }, {rt({m, n})}},
      {"add_bias", [](Graph<double>&, const V& v) { return add_bias(v[0], v[1]); }, {rt({m, n}), rt({n})}},
      {"affine", [](Graph<double>&, const V& v) { return affine(v[0], v[1], v[2]); }, {rt({m, k}), rt({k, n}), rt({n})}},
      {"sigmoid", [](Graph<double>&, const V& v) { return sigmoid(v[0]); }, {rt({m, n})}},
      {"tanh", [](Graph<double>&, const V& v) { return css::tanh(v[0]); }, {rt({m, n})}},
      {"relu", [](Graph<double>&, const V& v) { return relu(v[0]); }, {rt({m, n})}},
      {"sum", [](Graph<double>&, const V& v) { return sum(v[0]); }, {rt({m, n})}},
      {"concat_cols", [](Graph<double>&, const V& v) { return concat_cols(V{v[0], v[1], v[0]}); }, {rt({m, n}), rt({m, k})}},
      {"slice_cols", [begin, count](Graph<double>&, const V& v) { return slice_cols(v[0], begin, count); }, {rt({m, n})}},
      {"slice_rows", [begin, count](Graph<double>&, const V& v) { return slice_rows(v[0], begin, count); }, {rt({n, m})}},
      {"embedding", [ids](Graph<double>&, const V& v) { return embedding<double>(v[0], ids); }, {rt({k + 1, n})}},
      {"conv1d_valid",
       [steps](Graph<double>&, const V& v) { return conv1d_valid(v[0], steps, v[1], v[2]); },
       {rt({m * steps, k}), rt({width, k, n}), rt({n})}},
      {"max_over_time", [steps](Graph<double>&, const V& v) { return max_over_time(v[0], steps); }, {rt({m * steps, n})}},
      {"softmax_cross_entropy",
       [targets](Graph<double>&, const V& v) { return softmax_cross_entropy<double>(v[0], targets); },
       {rt({m, n})}},
      {"blend_rows", [mask](Graph<double>&, const V& v) { return blend_rows<double>(mask, v[0], v[1]); }, {rt({m, n}), rt({m, n})}},
      {"repeat_rows", [steps](Graph<double>&, const V& v) { return repeat_rows(v[0], steps); }, {rt({m, n})}},
      {"stack_time", [](Graph<double>&, const V& v) { return stack_time(V{v[0], v[1], v[0]}); }, {rt({m, n}), rt({m, n})}},
      {"batched_dot", [steps](Graph<double>&, const V& v) { return batched_dot(v[0], v[1], steps); }, {rt({m, n}), rt({m * steps, n})}},
      {"masked_softmax", [lengths](Graph<double>&, const V& v) { return masked_softmax<double>(v[0], lengths); }, {rt({m, steps})}},
      {"weighted_sum", [](Graph<double>&, const V& v) { return weighted_sum(v[0], v[1]); }, {rt({m, steps}), rt({m * steps, n})}},
  };
}

}  // namespace css::testing
