#include "geognn/errors.hpp"
#include "geognn/graph.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

using namespace geognn;

namespace {

std::vector<std::size_t> nbrs(const Graph& g, NodeId i) {
  const auto s = g.neighbors(i);
  return {s.begin(), s.end()};
}

Graph complete(std::size_t n) {
  EdgeList e;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v) e.push_back({u, v});
  return build_csr(e, n, false, true);
}

Graph random_graph(std::size_t n, double p, std::uint64_t seed) {
  Rng rng(seed);
  std::bernoulli_distribution b(p);
  EdgeList e;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (b(rng)) e.push_back({u, v});
  return build_csr(e, n, true, true);
}

}  // namespace

TEST_CASE("build_csr examples") {
  const Graph g = build_csr({{0, 1}}, 2, true, true);
  CHECK(nbrs(g, 0) == std::vector<std::size_t>{0, 1});
  CHECK(nbrs(g, 1) == std::vector<std::size_t>{0, 1});

  const Graph iso = build_csr({}, 3, true, true);
  for (NodeId i = 0; i < 3; ++i) CHECK(nbrs(iso, i) == std::vector<std::size_t>{i});

  const Graph tri = build_csr({{0, 1}, {1, 2}, {2, 0}}, 3, false, true);
  for (NodeId i = 0; i < 3; ++i) CHECK(tri.degree(i) == 2);
}

TEST_CASE("build_csr rejects out-of-range ids") {
  try {
    build_csr({{0, 3}}, 3);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Validation);
  }
}

TEST_CASE("build_csr deduplicates and keeps one self-loop per node") {
  const Graph g = build_csr({{0, 1}, {1, 0}, {0, 1}, {1, 1}}, 3, true, true);
  CHECK(nbrs(g, 1) == std::vector<std::size_t>{0, 1});
  CHECK(g.self_loop_count() == 3);
  const Graph directed = build_csr({{0, 1}}, 2, false, false);
  CHECK(directed.has_edge(0, 1));
  CHECK_FALSE(directed.has_edge(1, 0));
}

TEST_CASE("CSR round trip") {
  const Graph g = random_graph(40, 0.1, 4);
  const Graph again = build_csr(g.entries(), g.n, false, false);
  CHECK(again.row_offsets == g.row_offsets);
  CHECK(again.col_indices == g.col_indices);
  const Graph undirected = build_csr(g.undirected_edges(), g.n, true, true);
  CHECK(undirected.col_indices == g.col_indices);
}

TEST_CASE("split_edges sizes and determinism") {
  EdgeList e;
  for (std::size_t i = 0; i < 10; ++i) e.push_back({i, i + 1});
  const Graph path = build_csr(e, 11, true, true);
  const EdgeSplit s = split_edges(path, {}, 2, 7);
  CHECK(s.train.size() == 6);
  CHECK(s.val.size() == 2);
  CHECK(s.test.size() == 2);
  CHECK(s.val_neg.size() == 4);
  const EdgeSplit t = split_edges(path, {}, 2, 7);
  CHECK(s.train == t.train);
  CHECK(s.test_neg == t.test_neg);
}

TEST_CASE("split_edges invariants") {
  const Graph g = random_graph(60, 0.15, 2);
  const std::size_t m = g.undirected_edges().size();
  const EdgeSplit s = split_edges(g, {}, 5, 3);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto* part : {&s.train, &s.val, &s.test}) {
    for (const Edge& e : *part) {
      CHECK(seen.insert({std::min(e.src, e.dst), std::max(e.src, e.dst)}).second);
    }
  }
  CHECK(seen.size() == m);
  CHECK(std::abs(static_cast<double>(s.test.size()) - 0.2 * static_cast<double>(m)) <= 1.0);
  for (const auto* part : {&s.train_neg, &s.val_neg, &s.test_neg}) {
    for (const Edge& e : *part) {
      CHECK(e.src != e.dst);
      CHECK_FALSE(g.has_edge(e.src, e.dst));
      CHECK_FALSE(g.has_edge(e.dst, e.src));
    }
  }
  CHECK(s.test_neg.size() == 5 * s.test.size());
}

TEST_CASE("split_edges preconditions") {
  try {
    split_edges(complete(4), {}, 1, 0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidInput);
  }
  try {
    split_edges(complete(5), {}, 1, 0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SamplingExhausted);
  }
  const Graph g = random_graph(30, 0.3, 1);
  CHECK_THROWS_AS(split_edges(g, {0.5, 0.2, 0.2}, 1, 0), Error);
}
