#include "mtvqa/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace mtvqa {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

namespace {
thread_local bool g_tracking = false;
thread_local std::uint64_t g_branch_sig = 0;
}  // namespace

BranchTracker::BranchTracker() : prev_active_(g_tracking), prev_sig_(g_branch_sig) {
  g_tracking = true;
  g_branch_sig = 0xcbf29ce484222325ull;
}
BranchTracker::~BranchTracker() {
  g_tracking = prev_active_;
  g_branch_sig = prev_sig_;
}
std::uint64_t BranchTracker::signature() const noexcept { return g_branch_sig; }

bool branch_tracking() noexcept { return g_tracking; }

void record_branch(std::uint64_t choice) noexcept {
  if (!g_tracking) return;
  g_branch_sig = (g_branch_sig ^ (choice + 0x9E3779B97F4A7C15ull)) * 0x100000001b3ull;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return from(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
  if (shape_numel(shape) != values.size())
    throw DimensionError("tensor shape " + shape_str(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  auto d = std::make_shared<TensorData<T>>();
  d->shape = std::move(shape);
  d->values = std::move(values);
  d->requires_grad = requires_grad;
  return Tensor<T>(std::move(d));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw RankError("item() on tensor of shape " + shape_str(shape()));
  return data_->values[0];
}

template <typename T>
T Tensor<T>::at(std::size_t i, std::size_t j) const {
  if (rank() != 2) throw RankError("at(i, j) on tensor of shape " + shape_str(shape()));
  return data_->values[i * data_->shape[1] + j];
}

template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> values,
                      const std::vector<Tensor<T>>& inputs, BackwardFn<T> backward) {
  Tensor<T> out = Tensor<T>::from(std::move(shape), std::move(values));
  if (!g_grad_enabled) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor<T>& t) { return t.requires_grad(); });
  if (!any) return out;
  auto node = std::make_shared<TapeNode<T>>();
  node->op = op;
  node->inputs.reserve(inputs.size());
  for (const auto& t : inputs) node->inputs.push_back(t.ptr());
  node->backward = std::move(backward);
  out.data().requires_grad = true;
  out.data().node = std::move(node);
  return out;
}

template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> values,
                      std::initializer_list<Tensor<T>> inputs, BackwardFn<T> backward) {
  return make_result<T>(op, std::move(shape), std::move(values), std::vector<Tensor<T>>(inputs),
                        std::move(backward));
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.numel() != 1)
    throw RankError("backward() needs a single-element loss, got shape " +
                    shape_str(loss.shape()));
  if (!loss.requires_grad())
    throw GraphError("backward(): loss does not depend on any tensor requiring gradients");
  if (loss.ptr()->node && loss.ptr()->node->released)
    throw GraphError("backward(): graph already released by a previous backward pass");

  // Iterative post-order DFS gives a topological order (inputs before users).
  // Owning handles: releasing a node drops its inputs, which may be the last
  // reference to tensors still waiting in the order.
  std::vector<std::shared_ptr<TensorData<T>>> order;
  std::unordered_set<TensorData<T>*> seen;
  std::vector<std::pair<std::shared_ptr<TensorData<T>>, std::size_t>> stack;
  stack.emplace_back(loss.ptr(), 0);
  seen.insert(loss.ptr().get());
  while (!stack.empty()) {
    auto& [t, next] = stack.back();
    if (t->node && t->node->released)
      throw GraphError(std::string("backward(): graph already released at op '") + t->node->op +
                       "'");
    if (t->node && next < t->node->inputs.size()) {
      auto in = t->node->inputs[next++];
      if (in->requires_grad && seen.insert(in.get()).second) stack.emplace_back(std::move(in), 0);
      continue;
    }
    order.push_back(t);
    stack.pop_back();
  }

  // Leaves keep accumulating; every reached leaf ends up with a gradient,
  // even when no path contributes (e.g. a zero subgradient).
  for (auto& t : order) {
    if (t->node)
      t->grad.assign(t->values.size(), T(0));
    else
      t->grad_buffer();
  }
  loss.data().grad_buffer()[0] += T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorData<T>* t = it->get();
    if (!t->node) continue;
    t->node->backward(*t);
    t->node->released = true;
    t->node->backward = nullptr;
    t->node->inputs.clear();
  }
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> make_result(const char*, Shape, std::vector<float>,
                                   std::initializer_list<Tensor<float>>, BackwardFn<float>);
template Tensor<double> make_result(const char*, Shape, std::vector<double>,
                                    std::initializer_list<Tensor<double>>, BackwardFn<double>);
template Tensor<float> make_result(const char*, Shape, std::vector<float>,
                                   const std::vector<Tensor<float>>&, BackwardFn<float>);
template Tensor<double> make_result(const char*, Shape, std::vector<double>,
                                    const std::vector<Tensor<double>>&, BackwardFn<double>);
template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);

}  // namespace mtvqa
