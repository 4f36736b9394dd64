#include "bdlab/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "bdlab/common.hpp"

namespace bdlab::grad {

void adam_step(std::span<DenseMatrix* const> params, std::span<const DenseMatrix> grads, OptimState& state) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: params and grads differ in count");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->same_shape(grads[k])) throw std::invalid_argument("adam_step: gradient shape mismatch");
    if (!grads[k].all_finite()) throw NumericError("adam_step: non-finite gradient");
  }
  ++state.step;
  if (state.plain) {
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto p = params[k]->values();
      auto g = grads[k].values();
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= state.lr * (g[i] + state.weight_decay * p[i]);
    }
    return;
  }
  if (state.m.empty()) {
    for (const auto& g : grads) {
      state.m.emplace_back(g.rows(), g.cols());
      state.v.emplace_back(g.rows(), g.cols());
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: parameter list changed");
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k]->values();
    auto g = grads[k].values();
    auto m = state.m[k].values();
    auto v = state.v[k].values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] *= 1.0 - state.lr * state.weight_decay;
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      p[i] -= state.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.eps);
    }
  }
}

std::vector<double> finite_diff_gradient(const std::function<double(std::span<const double>)>& f,
                                         std::span<const double> x, double eps) {
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> grad(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + eps;
    const double up = f(point);
    point[i] = saved - eps;
    const double down = f(point);
    point[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) throw NumericError("finite_diff_gradient: non-finite objective");
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

}  // namespace bdlab::grad
