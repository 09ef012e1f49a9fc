#include "css/optim.hpp"

#include <cmath>

namespace css {

template <typename T>
void adam_step(ParameterSet<T>& params, OptimizerState<T>& state) {
  if (state.first_moment.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.first_moment.emplace_back(params[i].value.shape());
      state.second_moment.emplace_back(params[i].value.shape());
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw DimensionError("optimizer state tracks " + std::to_string(state.first_moment.size()) +
                         " parameters, set has " + std::to_string(params.size()));
  }
  const auto& cfg = state.config;
  if (cfg.clip_norm > 0) clip_global_norm(params, cfg.clip_norm);

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T step_size = static_cast<T>(cfg.learning_rate / correction1);
  const T root_c2 = static_cast<T>(std::sqrt(correction2));
  const T eps = static_cast<T>(cfg.epsilon);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    if (m.shape() != p.value.shape() || p.grad.shape() != p.value.shape()) {
      throw DimensionError("adam_step: parameter " + p.name + " " + shape_string(p.value.shape()) +
                           " does not match its state " + shape_string(m.shape()) + " or gradient " +
                           shape_string(p.grad.shape()));
    }
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const T g = p.grad[k];
      m[k] = b1 * m[k] + (T{1} - b1) * g;
      v[k] = b2 * v[k] + (T{1} - b2) * g * g;
      p.value[k] -= step_size * m[k] / (std::sqrt(v[k]) / root_c2 + eps);
    }
  }
}

template <typename T>
double clip_global_norm(ParameterSet<T>& params, double max_norm) {
  double total = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (T g : params[i].grad.data()) total += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(total);
  if (norm > max_norm && norm > 0) {
    const T factor = static_cast<T>(max_norm / norm);
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (auto& g : params[i].grad.data()) g *= factor;
    }
  }
  return norm;
}

template <typename T>
void init_uniform(Tensor<T>& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-s, s));
}

template void adam_step(ParameterSet<float>&, OptimizerState<float>&);
template void adam_step(ParameterSet<double>&, OptimizerState<double>&);
template double clip_global_norm(ParameterSet<float>&, double);
template double clip_global_norm(ParameterSet<double>&, double);
template void init_uniform(Tensor<float>&, std::size_t, std::size_t, Rng&);
template void init_uniform(Tensor<double>&, std::size_t, std::size_t, Rng&);

}  // namespace css
