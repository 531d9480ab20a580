#include "geognn/checks.hpp"

#include "geognn/graph.hpp"
#include "geognn/model.hpp"

#include <numeric>

namespace geognn {

ad::GradCheckReport model_gradient_check(std::uint64_t seed, const GradCheckSetup& setup) {
  Rng rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  EdgeList edges;
  for (std::size_t u = 0; u < setup.nodes; ++u) {
    for (std::size_t v = u + 1; v < setup.nodes; ++v) {
      if (coin(rng) < setup.edge_prob) edges.push_back({u, v});
    }
  }
  const Graph graph = build_csr(edges, setup.nodes, true, true);
  const EdgeIndex index = EdgeIndex::from_graph(graph);

  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix features(static_cast<Eigen::Index>(setup.nodes), static_cast<Eigen::Index>(setup.in_dim));
  for (Eigen::Index i = 0; i < features.size(); ++i) features.data()[i] = gauss(rng);
  std::uniform_int_distribution<std::size_t> pick(0, setup.classes - 1);
  Labels labels(setup.nodes);
  for (auto& y : labels) y = pick(rng);
  std::vector<std::size_t> rows(setup.nodes);
  std::iota(rows.begin(), rows.end(), std::size_t{0});

  ModelConfig config;
  config.layers = setup.layers;
  config.heads = setup.heads;
  config.head_dim = setup.head_dim;
  config.tau = setup.tau;
  config.alpha = setup.alpha;
  config.dropout = 0.0;
  config.seed = seed;
  GeoModel model(config, setup.in_dim, setup.classes);

  auto builder = [&](ad::Tape& tape) {
    Rng unused(0);
    const ad::Var logits = model.output(tape, tape.constant(features), index, false, unused);
    return ad::softmax_cross_entropy(logits, labels, rows);
  };
  const auto params = model.parameters();
  return ad::check_gradients(builder, params, setup.step);
}

}  // namespace geognn
