#include "geognn/graph.hpp"

#include "geognn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace geognn {

std::span<const std::size_t> Graph::neighbors(NodeId i) const {
  if (i >= n) fail(ErrorCode::ContractViolation, "node id out of range");
  return {col_indices.data() + row_offsets[i], degree(i)};
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  if (u >= n || v >= n) return false;
  const auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

EdgeList Graph::entries() const {
  EdgeList out;
  out.reserve(col_indices.size());
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j : neighbors(i)) out.push_back({i, j});
  }
  return out;
}

EdgeList Graph::undirected_edges() const {
  EdgeList out;
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j : neighbors(i)) {
      if (i == j) continue;
      out.push_back({std::min(i, j), std::max(i, j)});
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::size_t Graph::self_loop_count() const {
  std::size_t count = 0;
  for (NodeId i = 0; i < n; ++i) count += has_edge(i, i) ? 1 : 0;
  return count;
}

Graph build_csr(const EdgeList& edges, std::size_t n, bool add_self_loops, bool symmetrize) {
  EdgeList all;
  all.reserve(edges.size() * (symmetrize ? 2 : 1) + (add_self_loops ? n : 0));
  for (const Edge& e : edges) {
    if (e.src >= n || e.dst >= n) {
      fail(ErrorCode::Validation, "edge (" + std::to_string(e.src) + ", " + std::to_string(e.dst) +
                                      ") references a node outside [0, " + std::to_string(n) + ")");
    }
    all.push_back(e);
    if (symmetrize) all.push_back({e.dst, e.src});
  }
  if (add_self_loops) {
    for (NodeId i = 0; i < n; ++i) all.push_back({i, i});
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  Graph g;
  g.n = n;
  g.row_offsets.assign(n + 1, 0);
  g.col_indices.reserve(all.size());
  for (const Edge& e : all) {
    ++g.row_offsets[e.src + 1];
    g.col_indices.push_back(e.dst);
  }
  for (std::size_t i = 0; i < n; ++i) g.row_offsets[i + 1] += g.row_offsets[i];
  g.has_self_loops = n > 0 && g.self_loop_count() == n;
  return g;
}

namespace {

bool is_edge_either_way(const Graph& g, NodeId u, NodeId v) {
  return g.has_edge(u, v) || g.has_edge(v, u);
}

}  // namespace

EdgeList sample_negatives(const Graph& graph, std::size_t count, Rng& rng) {
  EdgeList out;
  if (count == 0) return out;
  if (graph.n < 2) fail(ErrorCode::SamplingExhausted, "negative sampling needs at least two nodes");
  out.reserve(count);
  std::uniform_int_distribution<std::size_t> pick(0, graph.n - 1);
  const std::size_t budget = 100 * count;
  for (std::size_t attempt = 0; attempt < budget && out.size() < count; ++attempt) {
    const NodeId u = pick(rng);
    const NodeId v = pick(rng);
    if (u == v || is_edge_either_way(graph, u, v)) continue;
    out.push_back({u, v});
  }
  if (out.size() < count) {
    fail(ErrorCode::SamplingExhausted,
         "negative sampling found " + std::to_string(out.size()) + " of " +
             std::to_string(count) + " non-edges after " + std::to_string(budget) + " draws");
  }
  return out;
}

EdgeSplit split_edges(const Graph& graph, SplitRatios ratios, std::size_t neg_per_pos,
                      std::uint64_t seed) {
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    fail(ErrorCode::InvalidConfig, "split ratios must be non-negative and sum to 1");
  }
  EdgeList positives = graph.undirected_edges();
  const std::size_t m = positives.size();
  if (m < 10) {
    fail(ErrorCode::InvalidInput, "edge split needs at least 10 edges, graph has " +
                                      std::to_string(m));
  }
  Rng rng(seed);
  std::shuffle(positives.begin(), positives.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::llround(ratios.val * static_cast<double>(m)));
  const auto n_test = static_cast<std::size_t>(std::llround(ratios.test * static_cast<double>(m)));
  if (n_val + n_test > m) fail(ErrorCode::InvalidConfig, "split ratios leave no training edges");

  EdgeSplit split;
  split.seed = seed;
  split.neg_per_pos = neg_per_pos;
  const auto val_end = positives.begin() + static_cast<std::ptrdiff_t>(n_val);
  const auto test_end = val_end + static_cast<std::ptrdiff_t>(n_test);
  split.val.assign(positives.begin(), val_end);
  split.test.assign(val_end, test_end);
  split.train.assign(test_end, positives.end());

  split.train_neg = sample_negatives(graph, split.train.size() * neg_per_pos, rng);
  split.val_neg = sample_negatives(graph, split.val.size() * neg_per_pos, rng);
  split.test_neg = sample_negatives(graph, split.test.size() * neg_per_pos, rng);
  return split;
}

}  // namespace geognn
