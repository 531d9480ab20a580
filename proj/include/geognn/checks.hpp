#pragma once

#include "geognn/autodiff/gradcheck.hpp"

#include <cstdint>

namespace geognn {

struct GradCheckSetup {
  std::size_t nodes = 12;
  std::size_t in_dim = 6;
  std::size_t classes = 3;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t head_dim = 4;
  double edge_prob = 0.3;
  double tau = 1.0;
  double alpha = 0.5;
  double step = 1e-5;
};

/// Finite-difference check of GeoGNN -> linear head -> cross-entropy on a
/// seeded random graph with Gaussian features, dropout off.
ad::GradCheckReport model_gradient_check(std::uint64_t seed, const GradCheckSetup& setup = {});

}  // namespace geognn
