#pragma once

#include "geognn/graph.hpp"
#include "geognn/types.hpp"

#include <json.hpp>

#include <cstdint>

namespace geognn::synth {

struct SynthSpec {
  std::size_t n = 600;
  std::size_t d = 16;
  std::size_t classes = 4;
  double kappa = 100.0;
  double p_in = 0.05;
  double p_out = 0.005;
  /// Intrinsic dimension m: features live on a great m-sphere inside S^{d-1}.
  /// Capped at d - 1, which gives clusters spread over the whole sphere.
  std::size_t manifold_dim = 8;
  std::uint64_t seed = 0;

  /// Throws Validation on an inconsistent spec.
  void validate() const;
  std::size_t effective_manifold_dim() const;
};

struct SynthData {
  Matrix features;      // n x d, unit rows
  Labels labels;        // n
  EdgeList edges;       // u < v
  Matrix class_means;   // C x d, unit rows
};

/// Class means uniform on the m-sphere; each node gets a tangent Gaussian
/// with scale 1/sqrt(kappa) around its class mean, pushed through the exp
/// map; edges follow a stochastic block model with p_in / p_out.
SynthData generate(const SynthSpec& spec);

/// Seeded Monte-Carlo estimate of nearest-centroid accuracy for `spec`.
double expected_separability(const SynthSpec& spec, std::size_t samples = 10000);

struct NodeSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Shuffled node split; val and test sizes are rounded, train takes the rest.
NodeSplit split_nodes(std::size_t n, SplitRatios ratios, std::uint64_t seed);

nlohmann::json to_json(const SynthSpec& spec);

}  // namespace geognn::synth
