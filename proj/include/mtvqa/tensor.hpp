#pragma once

// Dense row-major tensors with reverse-mode automatic differentiation.
//
// A Tensor is a shared handle. Operations on tensors that require gradients
// record a tape node on their result; backward() walks those nodes once in
// reverse topological order and then releases them, so a graph can be
// differentiated exactly once. Leaf gradients accumulate across backward
// calls until zero_grad().
//
// Tensors and their graph are confined to one thread.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mtvqa/errors.hpp"

namespace mtvqa {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

template <typename T>
struct TensorData;

template <typename T>
using BackwardFn = std::function<void(TensorData<T>& out)>;

template <typename T>
struct TapeNode {
  const char* op = "";
  std::vector<std::shared_ptr<TensorData<T>>> inputs;
  BackwardFn<T> backward;
  bool released = false;
};

template <typename T>
struct TensorData {
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;  // empty until a backward pass reaches this tensor
  bool requires_grad = false;
  std::shared_ptr<TapeNode<T>> node;  // null for leaves

  // Allocates a zero gradient if none exists yet.
  std::vector<T>& grad_buffer() {
    if (grad.size() != values.size()) grad.assign(values.size(), T(0));
    return grad;
  }
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorData<T>> d) : data_(std::move(d)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const noexcept { return static_cast<bool>(data_); }
  const Shape& shape() const { return data_->shape; }
  std::size_t rank() const { return data_->shape.size(); }
  std::size_t dim(std::size_t i) const { return data_->shape.at(i); }
  std::size_t numel() const { return data_->values.size(); }

  std::span<const T> values() const { return data_->values; }
  std::span<T> mutable_values() { return data_->values; }
  std::span<const T> grad() const { return data_->grad; }
  bool has_grad() const { return !data_->grad.empty(); }

  bool requires_grad() const { return data_->requires_grad; }
  void set_requires_grad(bool r) { data_->requires_grad = r; }
  void zero_grad() { data_->grad.clear(); }

  T item() const;
  T operator[](std::size_t flat) const { return data_->values[flat]; }
  // 2-D element access.
  T at(std::size_t i, std::size_t j) const;

  bool is_leaf() const { return !data_->node; }
  const char* creator() const { return data_->node ? data_->node->op : ""; }

  TensorData<T>& data() const { return *data_; }
  const std::shared_ptr<TensorData<T>>& ptr() const { return data_; }

 private:
  std::shared_ptr<TensorData<T>> data_;
};

/// Thread-local switch; while disabled, operations record no tape nodes.
bool grad_enabled() noexcept;

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// While a tracker is alive on this thread, non-smooth operations (max-pool
/// argmax, hinges, probability clamps, interval endpoints) fold their
/// discrete choices into a signature. Two evaluations with equal signatures
/// lie on the same smooth piece.
class BranchTracker {
 public:
  BranchTracker();
  ~BranchTracker();
  BranchTracker(const BranchTracker&) = delete;
  BranchTracker& operator=(const BranchTracker&) = delete;
  std::uint64_t signature() const noexcept;

 private:
  bool prev_active_;
  std::uint64_t prev_sig_;
};

bool branch_tracking() noexcept;
void record_branch(std::uint64_t choice) noexcept;

/// Builds an operation result and, if any input requires gradients and grad
/// mode is on, attaches a tape node with the given backward rule. The rule
/// reads out.grad and accumulates into the inputs' grad_buffer().
template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> values,
                      std::initializer_list<Tensor<T>> inputs, BackwardFn<T> backward);

template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> values,
                      const std::vector<Tensor<T>>& inputs, BackwardFn<T> backward);

/// Populates gradients of every tensor reachable from `loss` that requires
/// them. `loss` must hold exactly one element. The traversed graph is
/// released; differentiating it again throws GraphError.
template <typename T>
void backward(const Tensor<T>& loss);

/// Converts values between precisions (no graph connection).
template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& x, bool requires_grad = false) {
  std::vector<To> v(x.values().begin(), x.values().end());
  return Tensor<To>::from(x.shape(), std::move(v), requires_grad);
}

}  // namespace mtvqa
