#pragma once

#include "geognn/types.hpp"

#include <json.hpp>

#include <cstddef>
#include <vector>

namespace geognn::drift {

struct DriftConfig {
  std::size_t k = 15;
  std::size_t r = 8;
  double epsilon = 1e-8;
  bool include_self_in_knn = false;

  /// Throws InvalidConfig unless 1 <= r < min(k, d), k <= n-1 (n with self)
  /// and epsilon > 0.
  void validate(std::size_t n, std::size_t d) const;
};

using KnnTable = std::vector<std::vector<std::size_t>>;

/// k most cosine-similar rows of `plm` for every node, most similar first,
/// ties to the smaller id.
KnnTable knn_reference(const Matrix& plm, const DriftConfig& config);

struct LocalTangentModel {
  Vector mean;
  Matrix basis;  // d x r, orthonormal columns
  std::size_t owner = 0;
};

/// Rank-r PCA of the neighbor rows. Throws RankDeficientError carrying the
/// achieved rank when the centered neighbor matrix has rank < r.
LocalTangentModel fit_local_tangent(const Matrix& plm, const std::vector<std::size_t>& neighbor_ids,
                                    std::size_t r, std::size_t owner = 0);

struct DriftScore {
  double drift = 0.0;
  double residual = 0.0;       // E
  double centered_norm2 = 0.0; // |z|^2
};

DriftScore drift_score(const Vector& h, const LocalTangentModel& model, double epsilon);

struct DriftReport {
  /// NaN for excluded nodes.
  std::vector<double> per_node;
  double mean_drift = 0.0;
  DriftConfig config;
  std::size_t layer = 0;
  std::vector<std::size_t> excluded_nodes;
  /// Nodes scored with r lowered to their achieved rank.
  std::vector<std::size_t> reduced_rank_nodes;
};

DriftReport drift_report(const Matrix& current, const Matrix& plm, const DriftConfig& config,
                         std::size_t layer = 0);

/// Same as above with a precomputed neighbor table, so several layers can
/// share one kNN pass over `plm`.
DriftReport drift_report(const Matrix& current, const Matrix& plm, const KnnTable& knn,
                         const DriftConfig& config, std::size_t layer = 0);

nlohmann::json to_json(const DriftReport& report);

}  // namespace geognn::drift
