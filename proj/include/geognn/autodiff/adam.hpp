#pragma once

#include "geognn/autodiff/tape.hpp"

#include <cstdint>

namespace geognn::ad {

struct AdamState {
  Matrix m;
  Matrix v;
  std::uint64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double lr = 1e-3;
  double eps = 1e-8;

  /// Zero moments shaped like `param`.
  static AdamState for_param(const Parameter& param, double lr = 1e-3);
};

/// One bias-corrected Adam update from param.grad. The gradient is zeroed
/// afterwards.
void adam_step(Parameter& param, AdamState& state);

}  // namespace geognn::ad
