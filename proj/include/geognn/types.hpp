#pragma once

#include <Eigen/Core>

#include <compare>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace geognn {

/// Dense row-major matrix; rows are nodes (or edges), columns are features.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

using NodeId = std::size_t;
using Labels = std::vector<std::size_t>;

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

using EdgeList = std::vector<Edge>;

/// The one PRNG used everywhere so that seeded runs are bitwise reproducible.
using Rng = std::mt19937_64;

}  // namespace geognn
