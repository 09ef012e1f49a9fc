#pragma once

#include <cstdint>
#include <vector>

#include "css/graph.hpp"
#include "css/random.hpp"

namespace css {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;  // <= 0 disables clipping
};

/// Moment accumulators, one pair per parameter in set order.
template <typename T>
struct OptimizerState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;
};

/// Bias-corrected Adam update of every parameter from its `grad`.
template <typename T>
void adam_step(ParameterSet<T>& params, OptimizerState<T>& state);

/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
template <typename T>
double clip_global_norm(ParameterSet<T>& params, double max_norm);

/// Uniform(-s, s) with s = sqrt(6 / (fan_in + fan_out)).
template <typename T>
void init_uniform(Tensor<T>& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace css
