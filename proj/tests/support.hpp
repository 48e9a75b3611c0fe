#pragma once

// Shared helpers for the unit tests: random tensors and a central-difference
// gradient check over an arbitrary scalar function of some leaf tensors.

#include <cmath>
#include <functional>
#include <vector>

#include "mtvqa/rng.hpp"
#include "mtvqa/tensor.hpp"

namespace mtvqa::testing {

template <typename T = double>
Tensor<T> random_tensor(Rng& rng, Shape shape, double lo = -2.0, double hi = 2.0, bool grad = true) {
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return Tensor<T>::from(std::move(shape), std::move(v), grad);
}

// Worst relative error |a - n| / max(|a|, |n|, floor) over every entry of
// every input. f must build a fresh graph on each call.
inline double max_grad_error(const std::vector<Tensor<double>>& inputs,
                             const std::function<Tensor<double>()>& f, double h = 1e-6,
                             double floor = 1e-6) {
  for (const auto& x : inputs) x.data().grad.clear();
  backward(f());
  std::vector<std::vector<double>> analytic;
  for (const auto& x : inputs) {
    auto g = x.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) analytic.back().assign(x.numel(), 0.0);
  }
  double worst = 0.0;
  for (std::size_t p = 0; p < inputs.size(); ++p) {
    auto& vals = inputs[p].data().values;
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double keep = vals[i];
      double fp, fm;
      {
        NoGradGuard ng;
        vals[i] = keep + h;
        fp = f().item();
        vals[i] = keep - h;
        fm = f().item();
      }
      vals[i] = keep;
      const double num = (fp - fm) / (2 * h);
      const double a = analytic[p][i];
      const double err = std::abs(a - num) / std::max({std::abs(a), std::abs(num), floor});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace mtvqa::testing
