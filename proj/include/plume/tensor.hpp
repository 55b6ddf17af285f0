#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "plume/errors.hpp"
#include "plume/kernels.hpp"
#include "plume/rng.hpp"

namespace plume {

using Shape = std::vector<int>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int e : s) {
    if (e <= 0) throw ShapeError("non-positive extent in shape " + shape_str(s));
    n *= static_cast<std::size_t>(e);
  }
  return n;
}

namespace detail {

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // sized on demand during backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode<T>>> inputs;
  std::function<void(TensorNode<T>&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

}  // namespace detail

// Value-semantics handle over a node of the computation graph. Operations
// evaluate eagerly; when any operand requires gradients the result records
// its inputs and a backward closure so backward() can replay the chain.
// Nodes are immutable once produced by an operation.
template <typename T>
class Tensor {
 public:
  using Node = detail::TensorNode<T>;

  Tensor() = default;

  static Tensor zeros(Shape shape) { return full(std::move(shape), T(0)); }

  static Tensor full(Shape shape, T fill) {
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->value.assign(shape_numel(shape), fill);
    t.node_->shape = std::move(shape);
    return t;
  }

  static Tensor from(Shape shape, std::vector<T> values) {
    if (shape_numel(shape) != values.size())
      throw ShapeError("data length " + std::to_string(values.size()) +
                       " does not match shape " + shape_str(shape));
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(values);
    return t;
  }

  static Tensor scalar(T v) { return from({}, {v}); }

  // Uniform in [-bound, bound); the usual fan-in init uses bound = 1/sqrt(fan_in).
  static Tensor uniform(Shape shape, T bound, Rng& rng) {
    Tensor t = zeros(std::move(shape));
    for (T& v : t.node_->value)
      v = static_cast<T>(rng.uniform(-static_cast<double>(bound), static_cast<double>(bound)));
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return require().shape; }
  std::size_t numel() const { return require().value.size(); }
  int dim(std::size_t i) const { return require().shape.at(i); }

  const std::vector<T>& values() const { return require().value; }
  // Mutation is only meaningful on leaves (inputs under construction).
  std::vector<T>& mutable_values() { return require().value; }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) {
    Node& n = require();
    if (on && n.backward_fn)
      throw ContractError("requires_grad can only be toggled on leaf tensors");
    n.requires_grad = on;
    if (on) n.ensure_grad();
  }

  const std::vector<T>& grad() const {
    const Node& n = require();
    if (!n.requires_grad) throw ContractError("tensor does not track gradients");
    const_cast<Node&>(n).ensure_grad();
    return n.grad;
  }
  void zero_grad() {
    Node& n = require();
    n.ensure_grad();
    std::fill(n.grad.begin(), n.grad.end(), T(0));
  }

  T at(std::initializer_list<int> idx) const {
    return values()[flat_index(idx)];
  }
  void set(std::initializer_list<int> idx, T v) {
    mutable_values()[flat_index(idx)] = v;
  }

  // Deep copy with no graph history.
  Tensor detached_clone(bool track_grad = false) const {
    Tensor t = from(shape(), values());
    if (track_grad) t.set_requires_grad(true);
    return t;
  }

  bool finite() const {
    for (const T& v : values())
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  std::shared_ptr<Node> node() const { return node_; }

  static Tensor wrap(std::shared_ptr<Node> n) {
    Tensor t;
    t.node_ = std::move(n);
    return t;
  }

 private:
  Node& require() const {
    if (!node_) throw ContractError("operation on an undefined tensor");
    return *node_;
  }

  std::size_t flat_index(std::initializer_list<int> idx) const {
    const Shape& s = shape();
    if (idx.size() != s.size())
      throw ShapeError("index rank mismatch for shape " + shape_str(s));
    std::size_t flat = 0;
    std::size_t d = 0;
    for (int i : idx) {
      if (i < 0 || i >= s[d]) throw ShapeError("index out of range");
      flat = flat * static_cast<std::size_t>(s[d]) + static_cast<std::size_t>(i);
      ++d;
    }
    return flat;
  }

  std::shared_ptr<Node> node_;
};

namespace detail {

// Fork thresholds tuned to the fork/join cost: libm-heavy maps pay off much
// earlier than single-instruction zips.
constexpr std::ptrdiff_t kTranscendentalParallelCutoff = 1 << 14;
constexpr std::ptrdiff_t kCheapParallelCutoff = 1 << 17;

template <typename T, typename F>
void map_into(const std::vector<T>& a, std::vector<T>& out, F f,
              std::ptrdiff_t cutoff = kCheapParallelCutoff) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(out.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n >= cutoff)
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = f(a[i]);
}

template <typename T, typename F>
void zip_into(const std::vector<T>& a, const std::vector<T>& b, std::vector<T>& out, F f) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(out.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n >= kCheapParallelCutoff)
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = f(a[i], b[i]);
}

template <typename T>
Tensor<T> make_op(Shape shape, std::vector<T> value,
                  std::vector<Tensor<T>> inputs,
                  std::function<void(TensorNode<T>&)> backward) {
  auto node = std::make_shared<TensorNode<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.node());
    node->backward_fn = std::move(backward);
  }
  return Tensor<T>::wrap(std::move(node));
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
}

template <typename T>
void check_rank4(const Tensor<T>& t, const char* what) {
  if (t.shape().size() != 4)
    throw ShapeError(std::string(what) + " must be rank-4 [B,C,H,W], got " +
                     shape_str(t.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and structural operations
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  detail::zip_into(a.values(), b.values(), out, [](T x, T y) { return x + y; });
  return detail::make_op<T>(a.shape(), std::move(out), {a, b},
                            [](detail::TensorNode<T>& self) {
                              for (int side = 0; side < 2; ++side) {
                                auto& in = self.inputs[side];
                                if (!in->requires_grad) continue;
                                in->ensure_grad();
                                const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(self.grad.size());
                                for (std::ptrdiff_t i = 0; i < n; ++i) in->grad[i] += self.grad[i];
                              }
                            });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "sub");
  std::vector<T> out(a.numel());
  detail::zip_into(a.values(), b.values(), out, [](T x, T y) { return x - y; });
  return detail::make_op<T>(a.shape(), std::move(out), {a, b},
                            [](detail::TensorNode<T>& self) {
                              const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(self.grad.size());
                              if (self.inputs[0]->requires_grad) {
                                self.inputs[0]->ensure_grad();
                                for (std::ptrdiff_t i = 0; i < n; ++i)
                                  self.inputs[0]->grad[i] += self.grad[i];
                              }
                              if (self.inputs[1]->requires_grad) {
                                self.inputs[1]->ensure_grad();
                                for (std::ptrdiff_t i = 0; i < n; ++i)
                                  self.inputs[1]->grad[i] -= self.grad[i];
                              }
                            });
}

template <typename T>
Tensor<T> hadamard(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "hadamard");
  std::vector<T> out(a.numel());
  detail::zip_into(a.values(), b.values(), out, [](T x, T y) { return x * y; });
  return detail::make_op<T>(a.shape(), std::move(out), {a, b},
                            [](detail::TensorNode<T>& self) {
                              const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(self.grad.size());
                              auto& a_in = self.inputs[0];
                              auto& b_in = self.inputs[1];
                              if (a_in->requires_grad) {
                                a_in->ensure_grad();
                                for (std::ptrdiff_t i = 0; i < n; ++i)
                                  a_in->grad[i] += self.grad[i] * b_in->value[i];
                              }
                              if (b_in->requires_grad) {
                                b_in->ensure_grad();
                                for (std::ptrdiff_t i = 0; i < n; ++i)
                                  b_in->grad[i] += self.grad[i] * a_in->value[i];
                              }
                            });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "div");
  std::vector<T> out(a.numel());
  detail::zip_into(a.values(), b.values(), out, [](T x, T y) { return x / y; });
  return detail::make_op<T>(a.shape(), std::move(out), {a, b},
                            [](detail::TensorNode<T>& self) {
                              const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(self.grad.size());
                              auto& a_in = self.inputs[0];
                              auto& b_in = self.inputs[1];
                              if (a_in->requires_grad) {
                                a_in->ensure_grad();
                                for (std::ptrdiff_t i = 0; i < n; ++i)
                                  a_in->grad[i] += self.grad[i] / b_in->value[i];
                              }
                              if (b_in->requires_grad) {
                                b_in->ensure_grad();
                                for (std::ptrdiff_t i = 0; i < n; ++i)
                                  b_in->grad[i] -= self.grad[i] * a_in->value[i] /
                                                   (b_in->value[i] * b_in->value[i]);
                              }
                            });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  std::vector<T> out(a.numel());
  detail::map_into(a.values(), out, [c](T x) { return c * x; });
  return detail::make_op<T>(a.shape(), std::move(out), {a},
                            [c](detail::TensorNode<T>& self) {
                              auto& in = self.inputs[0];
                              if (!in->requires_grad) return;
                              in->ensure_grad();
                              const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(self.grad.size());
                              for (std::ptrdiff_t i = 0; i < n; ++i)
                                in->grad[i] += c * self.grad[i];
                            });
}

template <typename T>
Tensor<T> shift(const Tensor<T>& a, T c) {
  std::vector<T> out(a.numel());
  detail::map_into(a.values(), out, [c](T x) { return x + c; });
  return detail::make_op<T>(a.shape(), std::move(out), {a},
                            [](detail::TensorNode<T>& self) {
                              auto& in = self.inputs[0];
                              if (!in->requires_grad) return;
                              in->ensure_grad();
                              const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(self.grad.size());
                              for (std::ptrdiff_t i = 0; i < n; ++i)
                                in->grad[i] += self.grad[i];
                            });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  std::vector<T> out(a.numel());
  detail::map_into(
      a.values(), out,
      [](T x) {
        // split form keeps exp() argument non-positive
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
      },
      detail::kTranscendentalParallelCutoff);
  return detail::make_op<T>(a.shape(), std::move(out), {a},
                            [](detail::TensorNode<T>& self) {
                              auto& in = self.inputs[0];
                              if (!in->requires_grad) return;
                              in->ensure_grad();
                              const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(self.grad.size());
                              for (std::ptrdiff_t i = 0; i < n; ++i) {
                                const T s = self.value[i];
                                in->grad[i] += self.grad[i] * s * (T(1) - s);
                              }
                            });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& a) {
  std::vector<T> out(a.numel());
  detail::map_into(a.values(), out, [](T x) { return std::tanh(x); },
                   detail::kTranscendentalParallelCutoff);
  return detail::make_op<T>(a.shape(), std::move(out), {a},
                            [](detail::TensorNode<T>& self) {
                              auto& in = self.inputs[0];
                              if (!in->requires_grad) return;
                              in->ensure_grad();
                              const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(self.grad.size());
                              for (std::ptrdiff_t i = 0; i < n; ++i) {
                                const T th = self.value[i];
                                in->grad[i] += self.grad[i] * (T(1) - th * th);
                              }
                            });
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  std::vector<T> out(a.numel());
  detail::map_into(a.values(), out, [](T x) { return x * x; });
  return detail::make_op<T>(a.shape(), std::move(out), {a},
                            [](detail::TensorNode<T>& self) {
                              auto& in = self.inputs[0];
                              if (!in->requires_grad) return;
                              in->ensure_grad();
                              const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(self.grad.size());
                              for (std::ptrdiff_t i = 0; i < n; ++i)
                                in->grad[i] += self.grad[i] * T(2) * in->value[i];
                            });
}

// Elementwise square root; domain is x > 0 except that callers guarding the
// zero case themselves may rely on sqrt(0) = 0 with a zero upstream gradient.
template <typename T>
Tensor<T> sqrt(const Tensor<T>& a) {
  std::vector<T> out(a.numel());
  detail::map_into(a.values(), out, [](T x) { return std::sqrt(x); });
  return detail::make_op<T>(a.shape(), std::move(out), {a},
                            [](detail::TensorNode<T>& self) {
                              auto& in = self.inputs[0];
                              if (!in->requires_grad) return;
                              in->ensure_grad();
                              const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(self.grad.size());
                              for (std::ptrdiff_t i = 0; i < n; ++i)
                                in->grad[i] += self.grad[i] * T(0.5) / self.value[i];
                            });
}

// Sum of all elements to a rank-0 tensor. Fixed accumulation order.
template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T acc = T(0);
  for (const T& v : a.values()) acc += v;
  return detail::make_op<T>({}, {acc}, {a}, [](detail::TensorNode<T>& self) {
    auto& in = self.inputs[0];
    if (!in->requires_grad) return;
    in->ensure_grad();
    const T g = self.grad[0];
    for (T& gi : in->grad) gi += g;
  });
}

// ---------------------------------------------------------------------------
// Convolution and channel plumbing (NCHW)
// ---------------------------------------------------------------------------

// Cross-correlation with zero same-padding. input [B,Cin,H,W] with kernel
// [Cout,Cin,kh,kw] (kh, kw odd) -> [B,Cout,H,W].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel) {
  detail::check_rank4(input, "conv2d input");
  detail::check_rank4(kernel, "conv2d kernel");
  const int b = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != cin)
    throw ShapeError("conv2d: kernel expects " + std::to_string(kernel.dim(1)) +
                     " input channels, input has " + std::to_string(cin));
  if (kh % 2 == 0 || kw % 2 == 0)
    throw ShapeError("conv2d: kernel extents must be odd for same-padding");

  std::vector<T> out(static_cast<std::size_t>(b) * cout * h * w);
  kernels::conv2d_forward(input.values().data(), kernel.values().data(), out.data(),
                          b, cin, h, w, cout, kh, kw);
  return detail::make_op<T>(
      {b, cout, h, w}, std::move(out), {input, kernel},
      [b, cin, h, w, cout, kh, kw](detail::TensorNode<T>& self) {
        auto& in = self.inputs[0];
        auto& ker = self.inputs[1];
        if (in->requires_grad) {
          in->ensure_grad();
          kernels::conv2d_grad_input(self.grad.data(), ker->value.data(),
                                     in->grad.data(), b, cin, h, w, cout, kh, kw);
        }
        if (ker->requires_grad) {
          ker->ensure_grad();
          kernels::conv2d_grad_kernel(self.grad.data(), in->value.data(),
                                      ker->grad.data(), b, cin, h, w, cout, kh, kw);
        }
      });
}

// Broadcast a per-channel bias over batch and space. bias shape [C].
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  detail::check_rank4(x, "add_bias input");
  if (bias.shape().size() != 1 || bias.dim(0) != x.dim(1))
    throw ShapeError("add_bias: bias shape " + shape_str(bias.shape()) +
                     " does not match channel count " + std::to_string(x.dim(1)));
  const int b = x.dim(0), c = x.dim(1);
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(x.dim(2)) * x.dim(3);
  std::vector<T> out(x.numel());
  const auto& xv = x.values();
  const auto& bv = bias.values();
  for (int bi = 0; bi < b; ++bi)
    for (int ci = 0; ci < c; ++ci) {
      const std::ptrdiff_t base = (static_cast<std::ptrdiff_t>(bi) * c + ci) * plane;
      for (std::ptrdiff_t i = 0; i < plane; ++i) out[base + i] = xv[base + i] + bv[ci];
    }
  return detail::make_op<T>(x.shape(), std::move(out), {x, bias},
                            [b, c, plane](detail::TensorNode<T>& self) {
                              auto& xin = self.inputs[0];
                              auto& bin = self.inputs[1];
                              if (xin->requires_grad) {
                                xin->ensure_grad();
                                const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(self.grad.size());
                                for (std::ptrdiff_t i = 0; i < n; ++i)
                                  xin->grad[i] += self.grad[i];
                              }
                              if (bin->requires_grad) {
                                bin->ensure_grad();
                                for (int bi = 0; bi < b; ++bi)
                                  for (int ci = 0; ci < c; ++ci) {
                                    const std::ptrdiff_t base =
                                        (static_cast<std::ptrdiff_t>(bi) * c + ci) * plane;
                                    T acc = T(0);
                                    for (std::ptrdiff_t i = 0; i < plane; ++i)
                                      acc += self.grad[base + i];
                                    bin->grad[ci] += acc;
                                  }
                              }
                            });
}

// Concatenate along the channel axis; all parts share B, H, W.
template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ContractError("concat_channels: no inputs");
  detail::check_rank4(parts[0], "concat_channels input");
  const int b = parts[0].dim(0), h = parts[0].dim(2), w = parts[0].dim(3);
  int total_c = 0;
  for (const auto& p : parts) {
    detail::check_rank4(p, "concat_channels input");
    if (p.dim(0) != b || p.dim(2) != h || p.dim(3) != w)
      throw ShapeError("concat_channels: incompatible part shape " + shape_str(p.shape()));
    total_c += p.dim(1);
  }
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
  std::vector<T> out(static_cast<std::size_t>(b) * total_c * plane);
  std::vector<int> channels;
  channels.reserve(parts.size());
  int c_off = 0;
  for (const auto& p : parts) {
    const int pc = p.dim(1);
    channels.push_back(pc);
    const auto& pv = p.values();
    for (int bi = 0; bi < b; ++bi) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(bi) * pc * plane;
      const std::ptrdiff_t dst = (static_cast<std::ptrdiff_t>(bi) * total_c + c_off) * plane;
      std::copy(pv.begin() + src, pv.begin() + src + static_cast<std::ptrdiff_t>(pc) * plane,
                out.begin() + dst);
    }
    c_off += pc;
  }
  return detail::make_op<T>(
      {b, total_c, h, w}, std::move(out), parts,
      [b, total_c, plane, channels](detail::TensorNode<T>& self) {
        int off = 0;
        for (std::size_t p = 0; p < channels.size(); ++p) {
          auto& in = self.inputs[p];
          const int pc = channels[p];
          if (in->requires_grad) {
            in->ensure_grad();
            for (int bi = 0; bi < b; ++bi) {
              const std::ptrdiff_t src = (static_cast<std::ptrdiff_t>(bi) * total_c + off) * plane;
              const std::ptrdiff_t dst = static_cast<std::ptrdiff_t>(bi) * pc * plane;
              const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(pc) * plane;
              for (std::ptrdiff_t i = 0; i < len; ++i)
                in->grad[dst + i] += self.grad[src + i];
            }
          }
          off += pc;
        }
      });
}

// Channel slice [c0, c1) of an NCHW tensor.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, int c0, int c1) {
  detail::check_rank4(x, "slice_channels input");
  const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (c0 < 0 || c1 > c || c0 >= c1)
    throw ShapeError("slice_channels: bad range [" + std::to_string(c0) + "," +
                     std::to_string(c1) + ") for " + std::to_string(c) + " channels");
  const int sc = c1 - c0;
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
  std::vector<T> out(static_cast<std::size_t>(b) * sc * plane);
  const auto& xv = x.values();
  for (int bi = 0; bi < b; ++bi) {
    const std::ptrdiff_t src = (static_cast<std::ptrdiff_t>(bi) * c + c0) * plane;
    const std::ptrdiff_t dst = static_cast<std::ptrdiff_t>(bi) * sc * plane;
    std::copy(xv.begin() + src, xv.begin() + src + static_cast<std::ptrdiff_t>(sc) * plane,
              out.begin() + dst);
  }
  return detail::make_op<T>({b, sc, h, w}, std::move(out), {x},
                            [b, c, c0, sc, plane](detail::TensorNode<T>& self) {
                              auto& in = self.inputs[0];
                              if (!in->requires_grad) return;
                              in->ensure_grad();
                              for (int bi = 0; bi < b; ++bi) {
                                const std::ptrdiff_t dst =
                                    (static_cast<std::ptrdiff_t>(bi) * c + c0) * plane;
                                const std::ptrdiff_t src =
                                    static_cast<std::ptrdiff_t>(bi) * sc * plane;
                                const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(sc) * plane;
                                for (std::ptrdiff_t i = 0; i < len; ++i)
                                  in->grad[dst + i] += self.grad[src + i];
                              }
                            });
}

// ---------------------------------------------------------------------------
// Reverse pass
// ---------------------------------------------------------------------------

// Populates grad for every reachable tensor with requires_grad. Leaf
// gradients accumulate across calls; clear them via zero_grad between
// optimizer steps.
template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || !loss.shape().empty())
    throw ContractError("backward requires a rank-0 scalar loss");
  if (!loss.requires_grad()) return;  // nothing reachable tracks gradients

  using Node = detail::TensorNode<T>;
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  // Iterative post-order DFS; child visit order follows input order so the
  // traversal (and thus accumulation order) is reproducible.
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && !seen.count(child)) {
        seen.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior nodes get fresh gradient buffers each pass; leaves keep theirs.
  for (Node* n : order) {
    if (n->backward_fn) {
      n->grad.assign(n->value.size(), T(0));
    } else {
      n->ensure_grad();
    }
  }
  loss.node()->grad[0] = T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace plume
