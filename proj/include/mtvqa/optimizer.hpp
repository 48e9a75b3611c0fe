#pragma once

// Adam over a fixed list of parameter tensors.

#include <cstdint>
#include <vector>

#include "mtvqa/config.hpp"
#include "mtvqa/tensor.hpp"

namespace mtvqa {

template <typename T>
class Adam {
 public:
  Adam(std::vector<Tensor<T>> params, const OptimizerConfig& cfg);

  /// One update from the current gradients. Parameters without a gradient
  /// see a zero gradient (their moments still decay).
  void step();
  void zero_grad();
  std::int64_t steps_taken() const { return t_; }

 private:
  std::vector<Tensor<T>> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace mtvqa
