#include "css/ops.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>

#include "css/errors.hpp"
#include "eigen_view.hpp"

namespace css {

using detail::view;

Activation parse_activation(std::string_view name) {
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw ConfigError("unknown activation '" + std::string(name) + "' (expected sigmoid, tanh or relu)");
}

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
  }
  return "relu";
}

namespace {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": operand shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

}  // namespace

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  Graph<T>& g = *a.graph;
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions differ for " + shape_string(av.shape()) + " and " +
                         shape_string(bv.shape()));
  }
  Tensor<T> out = Tensor<T>::zeros(av.rows(), bv.cols());
  view(out).noalias() = view(av) * view(bv);
  return g.record(std::move(out), {a, b}, [ia = a.id, ib = b.id](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    if (g.requires_grad(ia)) view(g.grad(ia)).noalias() += view(gy) * view(g.value(ib)).transpose();
    if (g.requires_grad(ib)) view(g.grad(ib)).noalias() += view(g.value(ia)).transpose() * view(gy);
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return a.graph->record(std::move(out), {a, b}, [ia = a.id, ib = b.id](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    for (auto id : {ia, ib}) {
      if (!g.requires_grad(id)) continue;
      auto& gx = g.grad(id);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    }
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.graph->record(std::move(out), {a, b}, [ia = a.id, ib = b.id](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    if (g.requires_grad(ia)) {
      auto& gx = g.grad(ia);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    }
    if (g.requires_grad(ib)) {
      auto& gx = g.grad(ib);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] -= gy[i];
    }
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.graph->record(std::move(out), {a, b}, [ia = a.id, ib = b.id](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    if (g.requires_grad(ia)) {
      auto& gx = g.grad(ia);
      const auto& other = g.value(ib);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * other[i];
    }
    if (g.requires_grad(ib)) {
      auto& gx = g.grad(ib);
      const auto& other = g.value(ia);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * other[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> x, T factor) {
  Tensor<T> out = x.value();
  for (auto& v : out.data()) v *= factor;
  return x.graph->record(std::move(out), {x}, [ix = x.id, factor](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    auto& gx = g.grad(ix);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * factor;
  });
}

template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias) {
  const auto& xv = x.value();
  const auto& bv = bias.value();
  if (bv.size() != xv.cols()) {
    throw DimensionError("add_bias: bias " + shape_string(bv.shape()) + " does not match columns of " +
                         shape_string(xv.shape()));
  }
  Tensor<T> out = xv;
  const std::size_t n = xv.cols();
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    T* row = out.data().data() + r * n;
    for (std::size_t c = 0; c < n; ++c) row[c] += bv[c];
  }
  return x.graph->record(std::move(out), {x, bias}, [ix = x.id, ib = bias.id](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    if (g.requires_grad(ix)) {
      auto& gx = g.grad(ix);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    }
    if (g.requires_grad(ib)) {
      auto& gb = g.grad(ib);
      const std::size_t n = gb.size();
      for (std::size_t r = 0; r < gy.size() / n; ++r) {
        for (std::size_t c = 0; c < n; ++c) gb[c] += gy[r * n + c];
      }
    }
  });
}

template <typename T>
Var<T> affine(Var<T> x, Var<T> w, Var<T> bias) {
  return add_bias(matmul(x, w), bias);
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  Tensor<T> out = x.value();
  for (auto& v : out.data()) v = stable_sigmoid(v);
  return x.graph->record(std::move(out), {x}, [ix = x.id](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    const auto& y = g.value(self);
    auto& gx = g.grad(ix);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * y[i] * (T{1} - y[i]);
  });
}

template <typename T>
Var<T> tanh(Var<T> x) {
  Tensor<T> out = x.value();
  for (auto& v : out.data()) v = std::tanh(v);
  return x.graph->record(std::move(out), {x}, [ix = x.id](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    const auto& y = g.value(self);
    auto& gx = g.grad(ix);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * (T{1} - y[i] * y[i]);
  });
}

template <typename T>
Var<T> relu(Var<T> x) {
  Tensor<T> out = x.value();
  for (auto& v : out.data()) v = v > T{0} ? v : T{0};
  return x.graph->record(std::move(out), {x}, [ix = x.id](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    const auto& in = g.value(ix);
    auto& gx = g.grad(ix);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      if (in[i] > T{0}) gx[i] += gy[i];
    }
  });
}

template <typename T>
Var<T> activate(Var<T> x, Activation kind) {
  switch (kind) {
    case Activation::sigmoid: return sigmoid(x);
    case Activation::tanh: return tanh(x);
    case Activation::relu: return relu(x);
  }
  return relu(x);
}

template <typename T>
Var<T> sum(Var<T> x) {
  T total{0};
  for (T v : x.value().data()) total += v;
  return x.graph->record(Tensor<T>({1}, {total}), {x}, [ix = x.id](Graph<T>& g, std::size_t self) {
    const T gy = g.grad(self)[0];
    auto& gx = g.grad(ix);
    for (auto& v : gx.data()) v += gy;
  });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> widths;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row counts differ for " + shape_string(parts.front().value().shape()) +
                           " and " + shape_string(p.value().shape()));
    }
    widths.push_back(p.cols());
    ids.push_back(p.id);
    cols += p.cols();
  }
  Tensor<T> out = Tensor<T>::zeros(rows, cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    const std::size_t w = v.cols();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.data().data() + r * w, w, out.data().data() + r * cols + offset);
    }
    offset += w;
  }
  return parts.front().graph->record(std::move(out), parts,
                                     [ids, widths, rows, cols](Graph<T>& g, std::size_t self) {
                                       const auto& gy = g.grad(self);
                                       std::size_t offset = 0;
                                       for (std::size_t k = 0; k < ids.size(); ++k) {
                                         const std::size_t w = widths[k];
                                         if (g.requires_grad(ids[k])) {
                                           auto& gx = g.grad(ids[k]);
                                           for (std::size_t r = 0; r < rows; ++r) {
                                             for (std::size_t c = 0; c < w; ++c) {
                                               gx[r * w + c] += gy[r * cols + offset + c];
                                             }
                                           }
                                         }
                                         offset += w;
                                       }
                                     });
}

template <typename T>
Var<T> slice_cols(Var<T> x, std::size_t begin, std::size_t count) {
  const auto& xv = x.value();
  const std::size_t rows = xv.rows();
  const std::size_t cols = xv.cols();
  if (count == 0 || begin + count > cols) {
    throw DimensionError("slice_cols: columns [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + shape_string(xv.shape()));
  }
  Tensor<T> out = Tensor<T>::zeros(rows, count);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(xv.data().data() + r * cols + begin, count, out.data().data() + r * count);
  }
  return x.graph->record(std::move(out), {x}, [ix = x.id, begin, count, rows, cols](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    auto& gx = g.grad(ix);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < count; ++c) gx[r * cols + begin + c] += gy[r * count + c];
    }
  });
}

template <typename T>
Var<T> slice_rows(Var<T> x, std::size_t begin, std::size_t count) {
  const auto& xv = x.value();
  const std::size_t cols = xv.cols();
  if (count == 0 || begin + count > xv.rows()) {
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + shape_string(xv.shape()));
  }
  Tensor<T> out = Tensor<T>::zeros(count, cols);
  std::copy_n(xv.data().data() + begin * cols, count * cols, out.data().data());
  return x.graph->record(std::move(out), {x}, [ix = x.id, begin, count, cols](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    auto& gx = g.grad(ix);
    for (std::size_t i = 0; i < count * cols; ++i) gx[begin * cols + i] += gy[i];
  });
}

template <typename T>
Var<T> embedding(Var<T> table, std::span<const int> ids) {
  const auto& tv = table.value();
  const std::size_t vocab = tv.rows();
  const std::size_t dim = tv.cols();
  if (ids.empty()) throw DimensionError("embedding: empty id list");
  Tensor<T> out = Tensor<T>::zeros(ids.size(), dim);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw std::out_of_range("embedding: id " + std::to_string(ids[i]) + " outside table of " +
                              std::to_string(vocab) + " rows");
    }
    std::copy_n(tv.data().data() + static_cast<std::size_t>(ids[i]) * dim, dim, out.data().data() + i * dim);
  }
  std::vector<int> kept(ids.begin(), ids.end());
  return table.graph->record(std::move(out), {table}, [it = table.id, kept, dim](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    auto& gt = g.grad(it);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      T* dst = gt.data().data() + static_cast<std::size_t>(kept[i]) * dim;
      const T* src = gy.data().data() + i * dim;
      for (std::size_t c = 0; c < dim; ++c) dst[c] += src[c];
    }
  });
}

template <typename T>
Var<T> conv1d_valid(Var<T> x, std::size_t seq_len, Var<T> filters, Var<T> bias) {
  const auto& xv = x.value();
  const auto& fv = filters.value();
  if (fv.rank() != 3) throw DimensionError("conv1d_valid: filters must be [W x E x F], got " + shape_string(fv.shape()));
  const std::size_t width = fv.shape()[0];
  const std::size_t embed = fv.shape()[1];
  const std::size_t nfilters = fv.shape()[2];
  if (xv.cols() != embed) {
    throw DimensionError("conv1d_valid: input " + shape_string(xv.shape()) + " does not match filters " +
                         shape_string(fv.shape()));
  }
  if (seq_len == 0 || xv.rows() % seq_len != 0) {
    throw DimensionError("conv1d_valid: " + std::to_string(xv.rows()) + " rows are not a multiple of sequence length " +
                         std::to_string(seq_len));
  }
  if (seq_len < width) {
    throw std::length_error("conv1d_valid: window " + std::to_string(width) + " is longer than sequence length " +
                            std::to_string(seq_len) + "; pad the input first");
  }
  if (bias.value().size() != nfilters) {
    throw DimensionError("conv1d_valid: bias " + shape_string(bias.value().shape()) + " does not match " +
                         std::to_string(nfilters) + " filters");
  }
  const std::size_t batch = xv.rows() / seq_len;
  const std::size_t steps = seq_len - width + 1;
  const std::size_t patch = width * embed;

  // Rows of one window are contiguous in row-major storage.
  Tensor<T> patches = Tensor<T>::zeros(batch * steps, patch);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < steps; ++t) {
      std::copy_n(xv.data().data() + (b * seq_len + t) * embed, patch, patches.data().data() + (b * steps + t) * patch);
    }
  }
  Tensor<T> out = Tensor<T>::zeros(batch * steps, nfilters);
  view(out).noalias() = view(patches) * view(fv, patch, nfilters);
  const auto& bv = bias.value();
  for (std::size_t r = 0; r < batch * steps; ++r) {
    for (std::size_t f = 0; f < nfilters; ++f) out(r, f) += bv[f];
  }
  return x.graph->record(
      std::move(out), {x, filters, bias},
      [ix = x.id, iw = filters.id, ib = bias.id, patches = std::move(patches), batch, steps, seq_len, embed, patch,
       nfilters](Graph<T>& g, std::size_t self) {
        const auto& gy = g.grad(self);
        if (g.requires_grad(iw)) {
          view(g.grad(iw), patch, nfilters).noalias() += view(patches).transpose() * view(gy);
        }
        if (g.requires_grad(ib)) {
          auto& gb = g.grad(ib);
          for (std::size_t r = 0; r < batch * steps; ++r) {
            for (std::size_t f = 0; f < nfilters; ++f) gb[f] += gy(r, f);
          }
        }
        if (g.requires_grad(ix)) {
          Tensor<T> gp = Tensor<T>::zeros(batch * steps, patch);
          view(gp).noalias() = view(gy) * view(g.value(iw), patch, nfilters).transpose();
          auto& gx = g.grad(ix);
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t t = 0; t < steps; ++t) {
              T* dst = gx.data().data() + (b * seq_len + t) * embed;
              const T* src = gp.data().data() + (b * steps + t) * patch;
              for (std::size_t k = 0; k < patch; ++k) dst[k] += src[k];
            }
          }
        }
      });
}

template <typename T>
Var<T> max_over_time(Var<T> x, std::size_t steps) {
  const auto& xv = x.value();
  if (steps == 0 || xv.rows() % steps != 0) {
    throw DimensionError("max_over_time: " + std::to_string(xv.rows()) + " rows are not a multiple of " +
                         std::to_string(steps) + " steps");
  }
  const std::size_t batch = xv.rows() / steps;
  const std::size_t cols = xv.cols();
  Tensor<T> out = Tensor<T>::zeros(batch, cols);
  std::vector<std::size_t> argmax(batch * cols);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < cols; ++c) {
      std::size_t best = b * steps;
      for (std::size_t t = 1; t < steps; ++t) {
        if (xv(b * steps + t, c) > xv(best, c)) best = b * steps + t;
      }
      argmax[b * cols + c] = best;
      out(b, c) = xv(best, c);
    }
  }
  return x.graph->record(std::move(out), {x}, [ix = x.id, argmax = std::move(argmax), cols](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    auto& gx = g.grad(ix);
    for (std::size_t k = 0; k < argmax.size(); ++k) gx(argmax[k], k % cols) += gy[k];
  });
}

template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, std::span<const int> targets, int ignore) {
  const auto& lv = logits.value();
  const std::size_t rows = lv.rows();
  const std::size_t classes = lv.cols();
  if (targets.size() != rows) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                         shape_string(lv.shape()));
  }
  Tensor<T> probs = Tensor<T>::zeros(rows, classes);
  T loss{0};
  for (std::size_t r = 0; r < rows; ++r) {
    const int target = targets[r];
    if (target == ignore) continue;
    if (target < 0 || static_cast<std::size_t>(target) >= classes) {
      throw std::out_of_range("softmax_cross_entropy: target " + std::to_string(target) + " outside [0, " +
                              std::to_string(classes) + ")");
    }
    const T* z = lv.data().data() + r * classes;
    T top = z[0];
    for (std::size_t c = 1; c < classes; ++c) top = std::max(top, z[c]);
    T denom{0};
    for (std::size_t c = 0; c < classes; ++c) {
      probs(r, c) = std::exp(z[c] - top);
      denom += probs(r, c);
    }
    for (std::size_t c = 0; c < classes; ++c) probs(r, c) /= denom;
    loss += top + std::log(denom) - z[target];
  }
  std::vector<int> kept(targets.begin(), targets.end());
  return logits.graph->record(
      Tensor<T>({1}, {loss}), {logits},
      [il = logits.id, probs = std::move(probs), kept, ignore, classes](Graph<T>& g, std::size_t self) {
        const T gy = g.grad(self)[0];
        auto& gx = g.grad(il);
        for (std::size_t r = 0; r < kept.size(); ++r) {
          if (kept[r] == ignore) continue;
          for (std::size_t c = 0; c < classes; ++c) gx(r, c) += gy * probs(r, c);
          gx(r, static_cast<std::size_t>(kept[r])) -= gy;
        }
      });
}

template <typename T>
Var<T> blend_rows(std::span<const T> mask, Var<T> a, Var<T> b) {
  require_same_shape(a.value(), b.value(), "blend_rows");
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  if (mask.size() != rows) {
    throw DimensionError("blend_rows: mask of " + std::to_string(mask.size()) + " entries for " +
                         shape_string(a.value().shape()));
  }
  Tensor<T> out = Tensor<T>::zeros(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& src = mask[r] != T{0} ? a.value() : b.value();
    std::copy_n(src.data().data() + r * cols, cols, out.data().data() + r * cols);
  }
  std::vector<T> m(mask.begin(), mask.end());
  return a.graph->record(std::move(out), {a, b}, [ia = a.id, ib = b.id, m, cols](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    for (std::size_t r = 0; r < m.size(); ++r) {
      const std::size_t target = m[r] != T{0} ? ia : ib;
      if (!g.requires_grad(target)) continue;
      auto& gx = g.grad(target);
      for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += gy[r * cols + c];
    }
  });
}

template <typename T>
Var<T> repeat_rows(Var<T> x, std::size_t steps) {
  const auto& xv = x.value();
  const std::size_t batch = xv.rows();
  const std::size_t cols = xv.cols();
  Tensor<T> out = Tensor<T>::zeros(batch * steps, cols);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < steps; ++t) {
      std::copy_n(xv.data().data() + b * cols, cols, out.data().data() + (b * steps + t) * cols);
    }
  }
  return x.graph->record(std::move(out), {x}, [ix = x.id, batch, steps, cols](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    auto& gx = g.grad(ix);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t c = 0; c < cols; ++c) gx[b * cols + c] += gy[(b * steps + t) * cols + c];
      }
    }
  });
}

template <typename T>
Var<T> stack_time(const std::vector<Var<T>>& steps) {
  if (steps.empty()) throw DimensionError("stack_time: no steps");
  const std::size_t batch = steps.front().rows();
  const std::size_t cols = steps.front().cols();
  const std::size_t n = steps.size();
  std::vector<std::size_t> ids;
  for (const auto& s : steps) {
    if (s.rows() != batch || s.cols() != cols) {
      throw DimensionError("stack_time: step shapes differ: " + shape_string(steps.front().value().shape()) + " and " +
                           shape_string(s.value().shape()));
    }
    ids.push_back(s.id);
  }
  Tensor<T> out = Tensor<T>::zeros(batch * n, cols);
  for (std::size_t t = 0; t < n; ++t) {
    const auto& v = steps[t].value();
    for (std::size_t b = 0; b < batch; ++b) {
      std::copy_n(v.data().data() + b * cols, cols, out.data().data() + (b * n + t) * cols);
    }
  }
  return steps.front().graph->record(std::move(out), steps, [ids, batch, cols](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    const std::size_t n = ids.size();
    for (std::size_t t = 0; t < n; ++t) {
      if (!g.requires_grad(ids[t])) continue;
      auto& gx = g.grad(ids[t]);
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < cols; ++c) gx[b * cols + c] += gy[(b * n + t) * cols + c];
      }
    }
  });
}

template <typename T>
Var<T> batched_dot(Var<T> q, Var<T> keys, std::size_t steps) {
  const auto& qv = q.value();
  const auto& kv = keys.value();
  const std::size_t batch = qv.rows();
  const std::size_t dim = qv.cols();
  if (kv.cols() != dim || kv.rows() != batch * steps) {
    throw DimensionError("batched_dot: query " + shape_string(qv.shape()) + " incompatible with keys " +
                         shape_string(kv.shape()) + " over " + std::to_string(steps) + " steps");
  }
  Tensor<T> out = Tensor<T>::zeros(batch, steps);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < steps; ++t) {
      T acc{0};
      const T* qr = qv.data().data() + b * dim;
      const T* kr = kv.data().data() + (b * steps + t) * dim;
      for (std::size_t d = 0; d < dim; ++d) acc += qr[d] * kr[d];
      out(b, t) = acc;
    }
  }
  return q.graph->record(std::move(out), {q, keys},
                         [iq = q.id, ik = keys.id, batch, steps, dim](Graph<T>& g, std::size_t self) {
                           const auto& gy = g.grad(self);
                           const auto& qv = g.value(iq);
                           const auto& kv = g.value(ik);
                           const bool dq = g.requires_grad(iq);
                           const bool dk = g.requires_grad(ik);
                           for (std::size_t b = 0; b < batch; ++b) {
                             for (std::size_t t = 0; t < steps; ++t) {
                               const T w = gy(b, t);
                               const std::size_t kr = (b * steps + t) * dim;
                               if (dq) {
                                 auto& gq = g.grad(iq);
                                 for (std::size_t d = 0; d < dim; ++d) gq[b * dim + d] += w * kv[kr + d];
                               }
                               if (dk) {
                                 auto& gk = g.grad(ik);
                                 for (std::size_t d = 0; d < dim; ++d) gk[kr + d] += w * qv[b * dim + d];
                               }
                             }
                           }
                         });
}

template <typename T>
Var<T> masked_softmax(Var<T> scores, std::span<const int> lengths) {
  const auto& sv = scores.value();
  const std::size_t batch = sv.rows();
  const std::size_t steps = sv.cols();
  if (lengths.size() != batch) {
    throw DimensionError("masked_softmax: " + std::to_string(lengths.size()) + " lengths for scores " +
                         shape_string(sv.shape()));
  }
  Tensor<T> out = Tensor<T>::zeros(batch, steps);
  for (std::size_t b = 0; b < batch; ++b) {
    const int len = lengths[b];
    if (len < 1 || static_cast<std::size_t>(len) > steps) {
      throw std::out_of_range("masked_softmax: length " + std::to_string(len) + " outside [1, " +
                              std::to_string(steps) + "]");
    }
    T top = sv(b, 0);
    for (int t = 1; t < len; ++t) top = std::max(top, sv(b, t));
    T denom{0};
    for (int t = 0; t < len; ++t) {
      out(b, t) = std::exp(sv(b, t) - top);
      denom += out(b, t);
    }
    for (int t = 0; t < len; ++t) out(b, t) /= denom;
  }
  std::vector<int> lens(lengths.begin(), lengths.end());
  return scores.graph->record(std::move(out), {scores}, [is = scores.id, lens](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    const auto& y = g.value(self);
    auto& gx = g.grad(is);
    for (std::size_t b = 0; b < lens.size(); ++b) {
      T dot{0};
      for (int t = 0; t < lens[b]; ++t) dot += gy(b, t) * y(b, t);
      for (int t = 0; t < lens[b]; ++t) gx(b, t) += y(b, t) * (gy(b, t) - dot);
    }
  });
}

template <typename T>
Var<T> weighted_sum(Var<T> weights, Var<T> keys) {
  const auto& wv = weights.value();
  const auto& kv = keys.value();
  const std::size_t batch = wv.rows();
  const std::size_t steps = wv.cols();
  if (kv.rows() != batch * steps) {
    throw DimensionError("weighted_sum: weights " + shape_string(wv.shape()) + " incompatible with keys " +
                         shape_string(kv.shape()));
  }
  const std::size_t dim = kv.cols();
  Tensor<T> out = Tensor<T>::zeros(batch, dim);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < steps; ++t) {
      const T w = wv(b, t);
      if (w == T{0}) continue;
      const T* kr = kv.data().data() + (b * steps + t) * dim;
      for (std::size_t d = 0; d < dim; ++d) out(b, d) += w * kr[d];
    }
  }
  return weights.graph->record(
      std::move(out), {weights, keys}, [iw = weights.id, ik = keys.id, batch, steps, dim](Graph<T>& g, std::size_t self) {
        const auto& gy = g.grad(self);
        const auto& wv = g.value(iw);
        const auto& kv = g.value(ik);
        const bool dw = g.requires_grad(iw);
        const bool dk = g.requires_grad(ik);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t t = 0; t < steps; ++t) {
            const std::size_t kr = (b * steps + t) * dim;
            if (dw) {
              T acc{0};
              for (std::size_t d = 0; d < dim; ++d) acc += gy[b * dim + d] * kv[kr + d];
              g.grad(iw)(b, t) += acc;
            }
            if (dk) {
              const T w = wv(b, t);
              auto& gk = g.grad(ik);
              for (std::size_t d = 0; d < dim; ++d) gk[kr + d] += w * gy[b * dim + d];
            }
          }
        }
      });
}

template <typename T>
std::vector<T> softmax_row(std::span<const T> logits) {
  std::vector<T> out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const T top = *std::max_element(out.begin(), out.end());
  T denom{0};
  for (auto& v : out) {
    v = std::exp(v - top);
    denom += v;
  }
  for (auto& v : out) v /= denom;
  return out;
}

template <typename T>
std::vector<T> log_softmax_row(std::span<const T> logits) {
  std::vector<T> out(logits.begin(), logits.end());
  if (out.empty()) return out;
  T top = -std::numeric_limits<T>::infinity();
  for (T v : out) top = std::max(top, v);
  T denom{0};
  for (T v : out) denom += std::exp(v - top);
  const T lse = top + std::log(denom);
  for (auto& v : out) v -= lse;
  return out;
}

#define CSS_INSTANTIATE_OPS(T)                                                            \
  template Var<T> matmul(Var<T>, Var<T>);                                                 \
  template Var<T> add(Var<T>, Var<T>);                                                    \
  template Var<T> sub(Var<T>, Var<T>);                                                    \
  template Var<T> mul(Var<T>, Var<T>);                                                    \
  template Var<T> scale(Var<T>, T);                                                       \
  template Var<T> add_bias(Var<T>, Var<T>);                                               \
  template Var<T> affine(Var<T>, Var<T>, Var<T>);                                         \
  template Var<T> sigmoid(Var<T>);                                                        \
  template Var<T> tanh(Var<T>);                                                           \
  template Var<T> relu(Var<T>);                                                           \
  template Var<T> activate(Var<T>, Activation);                                           \
  template Var<T> sum(Var<T>);                                                            \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                                \
  template Var<T> slice_cols(Var<T>, std::size_t, std::size_t);                           \
  template Var<T> slice_rows(Var<T>, std::size_t, std::size_t);                           \
  template Var<T> embedding(Var<T>, std::span<const int>);                                \
  template Var<T> conv1d_valid(Var<T>, std::size_t, Var<T>, Var<T>);                      \
  template Var<T> max_over_time(Var<T>, std::size_t);                                     \
  template Var<T> softmax_cross_entropy(Var<T>, std::span<const int>, int);               \
  template Var<T> blend_rows(std::span<const T>, Var<T>, Var<T>);                         \
  template Var<T> repeat_rows(Var<T>, std::size_t);                                       \
  template Var<T> stack_time(const std::vector<Var<T>>&);                                 \
  template Var<T> batched_dot(Var<T>, Var<T>, std::size_t);                               \
  template Var<T> masked_softmax(Var<T>, std::span<const int>);                           \
  template Var<T> weighted_sum(Var<T>, Var<T>);                                           \
  template std::vector<T> softmax_row(std::span<const T>);                                \
  template std::vector<T> log_softmax_row(std::span<const T>);

CSS_INSTANTIATE_OPS(float)
CSS_INSTANTIATE_OPS(double)

#undef CSS_INSTANTIATE_OPS

}  // namespace css
