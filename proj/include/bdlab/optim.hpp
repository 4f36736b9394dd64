#pragma once

#include <functional>
#include <span>
#include <vector>

#include "bdlab/matrix.hpp"

namespace bdlab::grad {

/// Adam with decoupled weight decay. With `plain` set, steps are
/// param -= lr * (grad + wd * param) and the moment buffers are unused.
struct OptimState {
  double lr = 1e-2;
  double weight_decay = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool plain = false;
  long step = 0;
  std::vector<DenseMatrix> m;
  std::vector<DenseMatrix> v;
};

/// Updates `params` in place from `grads` (same shapes, same order on every call).
void adam_step(std::span<DenseMatrix* const> params, std::span<const DenseMatrix> grads, OptimState& state);

/// Central-difference gradient of f at x.
std::vector<double> finite_diff_gradient(const std::function<double(std::span<const double>)>& f,
                                         std::span<const double> x, double eps = 1e-5);

}  // namespace bdlab::grad
