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

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace papool {

using Shape = std::vector<std::size_t>;

/// Allocator handing out 64-byte aligned blocks, so vectorized kernels see
/// the same alignment (and hence the same summation order) on every run.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

/// Storage for tensor values and gradients.
using Buffer = std::vector<double, AlignedAllocator<double>>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {
struct Node;
}

/// Values handed to a backward rule: the forward output and its gradient.
struct BackwardContext {
  std::span<const double> out_value;
  std::span<const double> out_grad;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

/// Dense row-major f64 array with optional reverse-mode gradient tracking.
///
/// A Tensor is a cheap handle: copies share the underlying node. Values are
/// immutable once an op has produced them; only parameters are updated in
/// place (through mutable_data) between forward passes. The tape is implicit
/// in the input links recorded by each op and is rebuilt on every forward.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  /// Records an op result. When gradient mode is on and any input requires a
  /// gradient, the result keeps `inputs` and `backward`; otherwise it is a
  /// plain constant.
  static Tensor make_op(std::string_view name, Shape shape, Buffer values,
                        std::vector<Tensor> inputs, BackwardFn backward);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  /// In-place write access; reserved for parameters and optimizers.
  std::span<double> mutable_data();
  std::vector<double> to_vector() const;

  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  bool has_grad() const;
  /// Gradient values; all zeros if nothing has been accumulated yet.
  std::vector<double> grad() const;
  /// Gradient buffer, allocated (zeroed) on first use. Backward rules add into it.
  std::span<double> grad_buffer() const;
  void zero_grad();

  /// Leaf sharing this tensor's storage with a private gradient buffer.
  Tensor alias_leaf(bool requires_grad = true) const;
  /// Constant copy of the values, cut from the tape.
  Tensor detach() const;

  /// Propagates d(this)/d(leaf) into every reachable leaf that requires grad.
  /// Leaf gradients accumulate across calls; intermediates are reset.
  void backward() const;

  std::string_view op_name() const;

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Whether ops record onto the tape on this thread.
bool grad_enabled();

/// Disables recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace papool
