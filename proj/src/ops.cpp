// Copyright 2026 The papool Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "papool/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "papool/errors.hpp"

namespace papool {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;

// A shape split around one axis: [outer, len, inner].
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_to_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  return out;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()) + " differ");
  }
}

template <typename Fn, typename Deriv>
Tensor unary(const Tensor& x, const char* name, Fn fn, Deriv deriv) {
  auto in = x.data();
  Buffer out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fn(in[i]);
  return Tensor::make_op(name, x.shape(), std::move(out), {x}, [x, deriv](const BackwardContext& ctx) {
    auto g = x.grad_buffer();
    auto xv = x.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.out_grad[i] * deriv(xv[i], ctx.out_value[i]);
  });
}

}  // namespace

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() < 1 || weight.rank() != 2 || bias.rank() != 1 || x.shape().back() != weight.dim(0) ||
      bias.dim(0) != weight.dim(1)) {
    throw DimensionError("linear: x " + shape_to_string(x.shape()) + " incompatible with W " +
                         shape_to_string(weight.shape()) + " and b " + shape_to_string(bias.shape()));
  }
  const auto cin = weight.dim(0);
  const auto cout = weight.dim(1);
  const auto rows = x.numel() / cin;
  Shape shape = x.shape();
  shape.back() = cout;

  Buffer out(rows * cout);
  {
    ConstMap X(x.data().data(), rows, cin);
    ConstMap W(weight.data().data(), cin, cout);
    Eigen::Map<const Eigen::RowVectorXd> B(bias.data().data(), cout);
    Map Y(out.data(), rows, cout);
    Y.noalias() = X * W;
    Y.rowwise() += B;
  }
  return Tensor::make_op("linear", std::move(shape), std::move(out), {x, weight, bias},
                         [x, weight, bias, rows, cin, cout](const BackwardContext& ctx) {
                           ConstMap G(ctx.out_grad.data(), rows, cout);
                           if (x.requires_grad()) {
                             Map GX(x.grad_buffer().data(), rows, cin);
                             GX.noalias() += G * ConstMap(weight.data().data(), cin, cout).transpose();
                           }
                           if (weight.requires_grad()) {
                             Map GW(weight.grad_buffer().data(), cin, cout);
                             GW.noalias() += ConstMap(x.data().data(), rows, cin).transpose() * G;
                           }
                           if (bias.requires_grad()) {
                             Eigen::Map<Eigen::RowVectorXd> GB(bias.grad_buffer().data(), cout);
                             GB += G.colwise().sum();
                           }
                         });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, "tanh", [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

// The axis-wise kernels below walk each [len, inner] slab row by row so the
// innermost loop runs over contiguous memory.

Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto s = split_at(x.shape(), axis);
  auto in = x.data();
  Buffer out(in.size());
  std::vector<double> top(s.inner);
  std::vector<double> total(s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    const double* src = in.data() + o * s.len * s.inner;
    double* dst = out.data() + o * s.len * s.inner;
    std::fill(top.begin(), top.end(), -std::numeric_limits<double>::infinity());
    std::fill(total.begin(), total.end(), 0.0);
    for (std::size_t k = 0; k < s.len; ++k) {
      for (std::size_t i = 0; i < s.inner; ++i) top[i] = std::max(top[i], src[k * s.inner + i]);
    }
    for (std::size_t k = 0; k < s.len; ++k) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const double e = std::exp(src[k * s.inner + i] - top[i]);
        dst[k * s.inner + i] = e;
        total[i] += e;
      }
    }
    for (auto& t : total) t = 1.0 / t;
    for (std::size_t k = 0; k < s.len; ++k) {
      for (std::size_t i = 0; i < s.inner; ++i) dst[k * s.inner + i] *= total[i];
    }
  }
  return Tensor::make_op("softmax", x.shape(), std::move(out), {x}, [x, s](const BackwardContext& ctx) {
    auto g = x.grad_buffer();
    std::vector<double> dot(s.inner);
    for (std::size_t o = 0; o < s.outer; ++o) {
      const std::size_t base = o * s.len * s.inner;
      const double* y = ctx.out_value.data() + base;
      const double* gy = ctx.out_grad.data() + base;
      double* gx = g.data() + base;
      std::fill(dot.begin(), dot.end(), 0.0);
      for (std::size_t k = 0; k < s.len; ++k) {
        for (std::size_t i = 0; i < s.inner; ++i) dot[i] += y[k * s.inner + i] * gy[k * s.inner + i];
      }
      for (std::size_t k = 0; k < s.len; ++k) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          const auto idx = k * s.inner + i;
          gx[idx] += y[idx] * (gy[idx] - dot[i]);
        }
      }
    }
  });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  const auto s = split_at(x.shape(), axis);
  auto in = x.data();
  Buffer out(in.size());
  std::vector<double> top(s.inner);
  std::vector<double> total(s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    const double* src = in.data() + o * s.len * s.inner;
    double* dst = out.data() + o * s.len * s.inner;
    std::fill(top.begin(), top.end(), -std::numeric_limits<double>::infinity());
    std::fill(total.begin(), total.end(), 0.0);
    for (std::size_t k = 0; k < s.len; ++k) {
      for (std::size_t i = 0; i < s.inner; ++i) top[i] = std::max(top[i], src[k * s.inner + i]);
    }
    for (std::size_t k = 0; k < s.len; ++k) {
      for (std::size_t i = 0; i < s.inner; ++i) total[i] += std::exp(src[k * s.inner + i] - top[i]);
    }
    for (std::size_t i = 0; i < s.inner; ++i) total[i] = top[i] + std::log(total[i]);
    for (std::size_t k = 0; k < s.len; ++k) {
      for (std::size_t i = 0; i < s.inner; ++i) dst[k * s.inner + i] = src[k * s.inner + i] - total[i];
    }
  }
  return Tensor::make_op("log_softmax", x.shape(), std::move(out), {x}, [x, s](const BackwardContext& ctx) {
    auto g = x.grad_buffer();
    std::vector<double> total(s.inner);
    for (std::size_t o = 0; o < s.outer; ++o) {
      const std::size_t base = o * s.len * s.inner;
      const double* y = ctx.out_value.data() + base;
      const double* gy = ctx.out_grad.data() + base;
      double* gx = g.data() + base;
      std::fill(total.begin(), total.end(), 0.0);
      for (std::size_t k = 0; k < s.len; ++k) {
        for (std::size_t i = 0; i < s.inner; ++i) total[i] += gy[k * s.inner + i];
      }
      for (std::size_t k = 0; k < s.len; ++k) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          const auto idx = k * s.inner + i;
          gx[idx] += gy[idx] - std::exp(y[idx]) * total[i];
        }
      }
    }
  });
}

Tensor reduce_max(const Tensor& x, std::size_t axis) {
  const auto s = split_at(x.shape(), axis);
  if (s.len == 0) throw DimensionError("reduce_max over empty axis of " + shape_to_string(x.shape()));
  auto in = x.data();
  Buffer out(s.outer * s.inner);
  const bool track = grad_enabled() && x.requires_grad();
  std::vector<std::uint32_t> arg(track ? out.size() : 0, 0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    const double* src = in.data() + o * s.len * s.inner;
    double* best = out.data() + o * s.inner;
    std::copy_n(src, s.inner, best);
    if (track) {
      std::uint32_t* which = arg.data() + o * s.inner;
      for (std::size_t k = 1; k < s.len; ++k) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          const double v = src[k * s.inner + i];
          if (v > best[i]) {
            best[i] = v;
            which[i] = static_cast<std::uint32_t>(k);
          }
        }
      }
    } else {
      for (std::size_t k = 1; k < s.len; ++k) {
        for (std::size_t i = 0; i < s.inner; ++i) best[i] = std::max(best[i], src[k * s.inner + i]);
      }
    }
  }
  return Tensor::make_op("reduce_max", drop_axis(x.shape(), axis), std::move(out), {x},
                         [x, s, arg = std::move(arg)](const BackwardContext& ctx) {
                           auto g = x.grad_buffer();
                           for (std::size_t o = 0; o < s.outer; ++o) {
                             for (std::size_t i = 0; i < s.inner; ++i) {
                               const auto j = o * s.inner + i;
                               g[(o * s.len + arg[j]) * s.inner + i] += ctx.out_grad[j];
                             }
                           }
                         });
}

Tensor reduce_sum(const Tensor& x, std::size_t axis) {
  const auto s = split_at(x.shape(), axis);
  auto in = x.data();
  Buffer out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t k = 0; k < s.len; ++k) {
      const double* row = in.data() + (o * s.len + k) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += row[i];
    }
  }
  return Tensor::make_op("reduce_sum", drop_axis(x.shape(), axis), std::move(out), {x},
                         [x, s](const BackwardContext& ctx) {
                           auto g = x.grad_buffer();
                           for (std::size_t o = 0; o < s.outer; ++o) {
                             for (std::size_t k = 0; k < s.len; ++k) {
                               double* dst = g.data() + (o * s.len + k) * s.inner;
                               const double* src = ctx.out_grad.data() + o * s.inner;
                               for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
                             }
                           }
                         });
}

Tensor reduce_mean(const Tensor& x, std::size_t axis) {
  const auto len = split_at(x.shape(), axis).len;
  if (len == 0) throw DimensionError("reduce_mean over empty axis of " + shape_to_string(x.shape()));
  return scale(reduce_sum(x, axis), 1.0 / static_cast<double>(len));
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return Tensor::make_op("sum", {}, {total}, {x}, [x](const BackwardContext& ctx) {
    auto g = x.grad_buffer();
    for (auto& v : g) v += ctx.out_grad[0];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto av = a.data();
  auto bv = b.data();
  Buffer out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return Tensor::make_op("add", a.shape(), std::move(out), {a, b}, [a, b](const BackwardContext& ctx) {
    for (const auto* t : {&a, &b}) {
      if (!t->requires_grad()) continue;
      auto g = t->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.out_grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto av = a.data();
  auto bv = b.data();
  Buffer out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return Tensor::make_op("sub", a.shape(), std::move(out), {a, b}, [a, b](const BackwardContext& ctx) {
    if (a.requires_grad()) {
      auto g = a.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.out_grad[i];
    }
    if (b.requires_grad()) {
      auto g = b.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= ctx.out_grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto av = a.data();
  auto bv = b.data();
  Buffer out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return Tensor::make_op("mul", a.shape(), std::move(out), {a, b}, [a, b](const BackwardContext& ctx) {
    if (a.requires_grad()) {
      auto g = a.grad_buffer();
      auto other = b.data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.out_grad[i] * other[i];
    }
    if (b.requires_grad()) {
      auto g = b.grad_buffer();
      auto other = a.data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.out_grad[i] * other[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  auto in = x.data();
  Buffer out(in.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] * factor;
  return Tensor::make_op("scale", x.shape(), std::move(out), {x}, [x, factor](const BackwardContext& ctx) {
    auto g = x.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.out_grad[i] * factor;
  });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  const auto& first = parts.front().shape();
  if (axis >= first.size()) {
    throw DimensionError("concat axis " + std::to_string(axis) + " out of range for " + shape_to_string(first));
  }
  Shape shape = first;
  shape[axis] = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    const auto& ps = p.shape();
    bool ok = ps.size() == first.size();
    for (std::size_t i = 0; ok && i < ps.size(); ++i) ok = (i == axis) || ps[i] == first[i];
    if (!ok) {
      throw DimensionError("concat: shape " + shape_to_string(ps) + " incompatible with " +
                           shape_to_string(first) + " along axis " + std::to_string(axis));
    }
    shape[axis] += ps[axis];
  }
  const auto s = split_at(shape, axis);
  for (const auto& p : parts) widths.push_back(p.shape()[axis] * s.inner);
  const std::size_t row = s.len * s.inner;

  Buffer out(s.outer * row);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    auto src = parts[p].data();
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(src.data() + o * widths[p], widths[p], out.data() + o * row + offset);
    }
    offset += widths[p];
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return Tensor::make_op("concat", std::move(shape), std::move(out), inputs,
                         [inputs, widths, outer = s.outer, row](const BackwardContext& ctx) {
                           std::size_t off = 0;
                           for (std::size_t p = 0; p < inputs.size(); ++p) {
                             if (inputs[p].requires_grad()) {
                               auto g = inputs[p].grad_buffer();
                               for (std::size_t o = 0; o < outer; ++o) {
                                 const double* src = ctx.out_grad.data() + o * row + off;
                                 double* dst = g.data() + o * widths[p];
                                 for (std::size_t i = 0; i < widths[p]; ++i) dst[i] += src[i];
                               }
                             }
                             off += widths[p];
                           }
                         });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape " + shape_to_string(x.shape()) + " to " + shape_to_string(shape));
  }
  return Tensor::make_op("reshape", std::move(shape), Buffer(x.data().begin(), x.data().end()), {x}, [x](const BackwardContext& ctx) {
    auto g = x.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.out_grad[i];
  });
}

Tensor index_select(const Tensor& x, std::span<const std::size_t> indices, const Shape& leading) {
  if (x.rank() < 1) throw DimensionError("index_select on a scalar");
  if (shape_numel(leading) != indices.size()) {
    throw DimensionError("index_select: " + std::to_string(indices.size()) + " indices for leading shape " +
                         shape_to_string(leading));
  }
  const auto rows = x.dim(0);
  const auto width = rows ? x.numel() / rows : 0;
  for (auto idx : indices) {
    if (idx >= rows) {
      throw ValidationError("index " + std::to_string(idx) + " out of range for " + std::to_string(rows) + " rows");
    }
  }
  Shape shape = leading;
  shape.insert(shape.end(), x.shape().begin() + 1, x.shape().end());
  auto in = x.data();
  Buffer out(indices.size() * width);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    std::copy_n(in.data() + indices[r] * width, width, out.data() + r * width);
  }
  return Tensor::make_op("index_select", std::move(shape), std::move(out), {x},
                         [x, idx = std::vector<std::size_t>(indices.begin(), indices.end()), width](
                             const BackwardContext& ctx) {
                           auto g = x.grad_buffer();
                           for (std::size_t r = 0; r < idx.size(); ++r) {
                             const double* src = ctx.out_grad.data() + r * width;
                             double* dst = g.data() + idx[r] * width;
                             for (std::size_t i = 0; i < width; ++i) dst[i] += src[i];
                           }
                         });
}

Tensor masked_fill(const Tensor& x, std::span<const std::uint8_t> mask, double value) {
  if (x.rank() < 1) throw DimensionError("masked_fill on a scalar");
  const auto last = x.shape().back();
  if (mask.size() * last != x.numel()) {
    throw DimensionError("masked_fill: mask of " + std::to_string(mask.size()) + " entries for shape " +
                         shape_to_string(x.shape()));
  }
  Buffer out(x.data().begin(), x.data().end());
  for (std::size_t r = 0; r < mask.size(); ++r) {
    if (mask[r]) std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(r * last), last, value);
  }
  return Tensor::make_op("masked_fill", x.shape(), std::move(out), {x},
                         [x, m = std::vector<std::uint8_t>(mask.begin(), mask.end()), last](
                             const BackwardContext& ctx) {
                           auto g = x.grad_buffer();
                           for (std::size_t r = 0; r < m.size(); ++r) {
                             if (m[r]) continue;
                             for (std::size_t i = 0; i < last; ++i) g[r * last + i] += ctx.out_grad[r * last + i];
                           }
                         });
}

Tensor dropout(const Tensor& x, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ValidationError("dropout probability must lie in [0, 1)");
  if (p == 0.0) return x;
  const double keep = 1.0 / (1.0 - p);
  std::vector<double> factor(x.numel());
  for (auto& f : factor) f = rng.uniform() < p ? 0.0 : keep;
  auto in = x.data();
  Buffer out(in.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] * factor[i];
  return Tensor::make_op("dropout", x.shape(), std::move(out), {x},
                         [x, factor = std::move(factor)](const BackwardContext& ctx) {
                           auto g = x.grad_buffer();
                           for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.out_grad[i] * factor[i];
                         });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw DimensionError("cross_entropy: logits " + shape_to_string(logits.shape()) + " with " +
                         std::to_string(labels.size()) + " labels");
  }
  const auto batch = logits.dim(0);
  const auto classes = logits.dim(1);
  for (auto l : labels) {
    if (l >= classes) {
      throw ValidationError("label " + std::to_string(l) + " out of range for " + std::to_string(classes) +
                            " classes");
    }
  }
  auto in = logits.data();
  std::vector<double> probs(in.size());
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* row = in.data() + b * classes;
    const double m = *std::max_element(row, row + classes);
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) total += std::exp(row[c] - m);
    const double lse = m + std::log(total);
    for (std::size_t c = 0; c < classes; ++c) probs[b * classes + c] = std::exp(row[c] - lse);
    loss += lse - row[labels[b]];
  }
  loss /= static_cast<double>(batch);
  return Tensor::make_op(
      "cross_entropy", {}, {loss}, {logits},
      [logits, probs = std::move(probs), lab = std::vector<std::size_t>(labels.begin(), labels.end()), batch,
       classes](const BackwardContext& ctx) {
        auto g = logits.grad_buffer();
        const double s = ctx.out_grad[0] / static_cast<double>(batch);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t c = 0; c < classes; ++c) {
            const double target = c == lab[b] ? 1.0 : 0.0;
            g[b * classes + c] += s * (probs[b * classes + c] - target);
          }
        }
      });
}

}  // namespace papool
