#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace benim {

enum class OptimizerMethod { sgd, adam };

struct OptimizerState {
  OptimizerMethod method = OptimizerMethod::adam;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::size_t step = 0;

  OptimizerState() = default;
  OptimizerState(OptimizerMethod m, double lr) : method(m), learning_rate(lr) {
    if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  }
};

/// One SGD or Adam update of `params` in place.
inline void optimizer_step(OptimizerState& state, std::span<double> params,
                           std::span<const double> grad) {
  if (params.size() != grad.size())
    throw std::invalid_argument("optimizer: parameter/gradient size mismatch");
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      std::ostringstream os;
      os << "non-finite gradient at coordinate " << i << " (value " << grad[i]
         << ", step " << state.step << ")";
      throw std::runtime_error(os.str());
    }
  }
  ++state.step;
  if (state.method == OptimizerMethod::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i)
      params[i] -= state.learning_rate * grad[i];
    return;
  }
  if (state.first_moment.size() != params.size()) {
    state.first_moment.assign(params.size(), 0.0);
    state.second_moment.assign(params.size(), 0.0);
  }
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * grad[i];
    v = state.beta2 * v + (1.0 - state.beta2) * grad[i] * grad[i];
    params[i] -= state.learning_rate * (m / c1) / (std::sqrt(v / c2) + state.epsilon);
  }
}

}  // namespace benim
