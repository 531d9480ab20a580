#pragma once

#include "geognn/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace geognn {

/// Compressed sparse row adjacency. Neighbor lists are sorted and free of
/// duplicates; N(i) = col_indices[row_offsets[i] .. row_offsets[i+1]).
struct Graph {
  std::size_t n = 0;
  std::vector<std::size_t> row_offsets{0};
  std::vector<std::size_t> col_indices;
  bool has_self_loops = false;

  std::span<const std::size_t> neighbors(NodeId i) const;
  std::size_t degree(NodeId i) const { return row_offsets[i + 1] - row_offsets[i]; }
  std::size_t num_entries() const { return col_indices.size(); }
  bool has_edge(NodeId u, NodeId v) const;

  /// Every stored (i, j) in CSR order.
  EdgeList entries() const;
  /// Distinct pairs u < v ignoring direction and self-loops.
  EdgeList undirected_edges() const;
  std::size_t self_loop_count() const;
};

/// Deduplicates, optionally mirrors every (u,v), optionally adds (i,i) for
/// all nodes. Throws Validation on ids >= n.
Graph build_csr(const EdgeList& edges, std::size_t n, bool add_self_loops = true,
                bool symmetrize = true);

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

/// Link-prediction split. Negatives of a split are stored in blocks of
/// neg_per_pos, block i belonging to positive i.
struct EdgeSplit {
  EdgeList train;
  EdgeList val;
  EdgeList test;
  EdgeList train_neg;
  EdgeList val_neg;
  EdgeList test_neg;
  std::size_t neg_per_pos = 0;
  std::uint64_t seed = 0;
};

/// Shuffles the undirected non-self edges with `seed` and cuts them by
/// `ratios` (val and test sizes rounded, train takes the rest). Negatives are
/// uniform node pairs u != v that are not edges of `graph` in either
/// direction. Needs at least 10 edges; throws SamplingExhausted when 100x the
/// needed number of draws does not yield enough negatives.
EdgeSplit split_edges(const Graph& graph, SplitRatios ratios, std::size_t neg_per_pos,
                      std::uint64_t seed);

/// `count` uniform non-self pairs that are not edges of `graph`.
EdgeList sample_negatives(const Graph& graph, std::size_t count, Rng& rng);

}  // namespace geognn
