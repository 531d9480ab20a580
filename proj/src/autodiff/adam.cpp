#include "geognn/autodiff/adam.hpp"

#include <cmath>

namespace geognn::ad {

AdamState AdamState::for_param(const Parameter& param, double lr) {
  AdamState s;
  s.m = Matrix::Zero(param.value.rows(), param.value.cols());
  s.v = Matrix::Zero(param.value.rows(), param.value.cols());
  s.lr = lr;
  return s;
}

void adam_step(Parameter& param, AdamState& state) {
  const auto rows = param.value.rows();
  const auto cols = param.value.cols();
  if (param.grad.rows() != rows || param.grad.cols() != cols || state.m.rows() != rows ||
      state.m.cols() != cols || state.v.rows() != rows || state.v.cols() != cols) {
    fail(ErrorCode::ContractViolation, "adam_step: shape mismatch for '" + param.name + "'");
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * param.grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * param.grad.cwiseProduct(param.grad);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  param.value.array() -=
      state.lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.eps);
  param.grad.setZero();
}

}  // namespace geognn::ad
