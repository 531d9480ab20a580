#pragma once

#include "geognn/graph.hpp"
#include "geognn/types.hpp"

#include <string>
#include <vector>

namespace geognn::smoothing {

enum class Aggregator { Mean, Laplacian, Attention, Geodesic };

struct AggregatorKind {
  Aggregator kind = Aggregator::Mean;
  double tau = 1.0;    // Attention, Geodesic
  double alpha = 1.0;  // Geodesic
};

const char* to_string(Aggregator kind) noexcept;
/// "mean", "laplacian", "attention" or "geodesic"; Validation otherwise.
Aggregator parse_aggregator(const std::string& name);

struct LayerTrace {
  /// snapshots[0] is the input, snapshots[l] the output of layer l.
  std::vector<Matrix> snapshots;
  std::size_t antipodal_pairs = 0;
};

/// One propagation step of the chosen aggregator. For Geodesic the rows of
/// `h` must already be unit vectors.
Matrix smooth_step(const Matrix& h, const Graph& graph, const AggregatorKind& kind,
                   std::size_t* antipodal_pairs = nullptr);

/// Applies `layers` parameter-free propagation steps. Geodesic projects the
/// input rows to the sphere once before the first step.
LayerTrace smooth(const Matrix& features, const Graph& graph, const AggregatorKind& kind,
                  std::size_t layers);

}  // namespace geognn::smoothing
