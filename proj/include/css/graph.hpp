#pragma once

#include <deque>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "css/tensor.hpp"

namespace css {

/// Raised when a graph is used against its contract (non-scalar loss,
/// repeated backward, foreign variables).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

/// Ordered, name-addressable parameter collection. Addresses of stored
/// parameters are stable for the lifetime of the set.
template <typename T>
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) noexcept = default;
  ParameterSet& operator=(ParameterSet&&) noexcept = default;

  Parameter<T>& add(std::string name, Shape shape) {
    if (index_.count(name)) throw ContractError("duplicate parameter name: " + name);
    auto p = std::make_unique<Parameter<T>>();
    p->name = name;
    p->value = Tensor<T>(shape);
    p->grad = Tensor<T>(std::move(shape));
    index_[name] = params_.size();
    params_.push_back(std::move(p));
    return *params_.back();
  }

  Parameter<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
    return *params_[it->second];
  }
  const Parameter<T>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
    return *params_[it->second];
  }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *params_[i]; }

  std::size_t element_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->grad.fill(T{0});
  }

  /// Copies values from another set with identical names and shapes,
  /// converting element type.
  template <typename U>
  void assign_from(const ParameterSet<U>& other) {
    if (other.size() != size()) throw DimensionError("parameter count mismatch");
    for (std::size_t i = 0; i < size(); ++i) {
      auto& dst = *params_[i];
      const auto& src = other[i];
      if (dst.name != src.name || dst.value.shape() != src.value.shape()) {
        throw DimensionError("parameter " + src.name + " " + shape_string(src.value.shape()) +
                             " does not match " + dst.name + " " + shape_string(dst.value.shape()));
      }
      for (std::size_t k = 0; k < dst.value.size(); ++k) dst.value[k] = static_cast<T>(src.value[k]);
    }
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::map<std::string, std::size_t> index_;
};

enum class GradMode { enabled, disabled };

template <typename T>
class Graph;

/// Handle to a node in a Graph.
template <typename T>
struct Var {
  Graph<T>* graph = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return graph->value(*this); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Tape of operations recorded in topological (creation) order. Reverse-mode
/// differentiation walks the tape backwards from a scalar loss.
template <typename T>
class Graph {
 public:
  /// Called during backward with the node's own id; reads grad(self) and
  /// accumulates into the grads of the node's inputs.
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  explicit Graph(GradMode mode = GradMode::enabled) : mode_(mode) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const { return mode_ == GradMode::enabled; }
  std::size_t size() const { return nodes_.size(); }

  Var<T> constant(Tensor<T> value) {
    Node& n = nodes_.emplace_back();
    n.value = std::move(value);
    return {this, nodes_.size() - 1};
  }

  /// Leaf that receives a gradient; used to differentiate with respect to
  /// inputs rather than parameters.
  Var<T> input(Tensor<T> value) {
    Node& n = nodes_.emplace_back();
    n.value = std::move(value);
    n.requires_grad = grad_enabled();
    return {this, nodes_.size() - 1};
  }

  /// References the parameter's storage; no copy is taken.
  Var<T> param(Parameter<T>& p) {
    Node& n = nodes_.emplace_back();
    n.external = &p.value;
    n.param = &p;
    n.requires_grad = grad_enabled();
    return {this, nodes_.size() - 1};
  }

  Var<T> param(const Parameter<T>& p) {
    if (grad_enabled()) throw ContractError("const parameter used in a differentiable graph");
    Node& n = nodes_.emplace_back();
    n.external = &p.value;
    return {this, nodes_.size() - 1};
  }

  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn backward) {
    bool needs = false;
    if (grad_enabled()) {
      for (const auto& in : inputs) {
        check_owned(in);
        needs = needs || nodes_[in.id].requires_grad;
      }
    }
    Node& n = nodes_.emplace_back();
    n.value = std::move(value);
    n.requires_grad = needs;
    if (needs) n.backward = std::move(backward);
    return {this, nodes_.size() - 1};
  }

  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& inputs, BackwardFn backward) {
    bool needs = false;
    if (grad_enabled()) {
      for (const auto& in : inputs) {
        check_owned(in);
        needs = needs || nodes_[in.id].requires_grad;
      }
    }
    Node& n = nodes_.emplace_back();
    n.value = std::move(value);
    n.requires_grad = needs;
    if (needs) n.backward = std::move(backward);
    return {this, nodes_.size() - 1};
  }

  const Tensor<T>& value(Var<T> v) const {
    check_owned(v);
    return value(v.id);
  }
  const Tensor<T>& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.value;
  }

  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool requires_grad(Var<T> v) const { return requires_grad(v.id); }

  /// Gradient buffer of a node, allocated as zeros on first use.
  Tensor<T>& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor<T>(value(id).shape());
    return n.grad;
  }
  Tensor<T>& grad(Var<T> v) {
    check_owned(v);
    return grad(v.id);
  }
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }

  /// Reverse-mode accumulation from a scalar loss. Parameter gradients are
  /// added into Parameter::grad.
  void backward(Var<T> loss) {
    check_owned(loss);
    if (!grad_enabled()) throw ContractError("backward on a graph built without gradients");
    if (backward_done_) throw ContractError("backward already run on this graph");
    if (value(loss).size() != 1) {
      throw ContractError("loss must be scalar, got shape " + shape_string(value(loss).shape()));
    }
    backward_done_ = true;
    if (!nodes_[loss.id].requires_grad) return;
    grad(loss.id)[0] = T{1};
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.backward) n.backward(*this, i);
      if (n.param) n.param->grad += n.grad;
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    Tensor<T> grad;
    Parameter<T>* param = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
  };

  void check_owned(Var<T> v) const {
    if (v.graph != this || v.id >= nodes_.size()) throw ContractError("variable does not belong to this graph");
  }

  GradMode mode_;
  bool backward_done_ = false;
  std::deque<Node> nodes_;
};

}  // namespace css
