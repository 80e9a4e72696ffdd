#include "pmseg/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "pmseg/error.hpp"

namespace pmseg {

AdamState AdamState::for_params(const std::vector<Tensor>& params, double lr) {
  AdamState s;
  s.lr = lr;
  for (const Tensor& p : params) {
    s.m.emplace_back(p.shape());
    s.v.emplace_back(p.shape());
  }
  return s;
}

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size() || params.size() != state.v.size())
    throw std::invalid_argument("adam: " + std::to_string(params.size()) + " params, " +
                                std::to_string(grads.size()) + " grads, " + std::to_string(state.m.size()) +
                                " moments");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(params[i].shape(), grads[i].shape(), "adam grad");
    require_same_shape(params[i].shape(), state.m[i].shape(), "adam moment");
    if (!grads[i].all_finite())
      throw NumericalError("adam: non-finite gradient in parameter " + std::to_string(i) + " at step " +
                           std::to_string(state.step + 1));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* p = params[i].data().data();
    double* m = state.m[i].data().data();
    double* v = state.v[i].data().data();
    const double* g = grads[i].data().data();
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      p[j] -= state.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + state.eps);
    }
  }
}

}  // namespace pmseg
