#include "geognn/autodiff/ops.hpp"
#include "geognn/checks.hpp"
#include "geognn/errors.hpp"
#include "geognn/model.hpp"
#include "geognn/smoothing.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace geognn;

namespace {

Matrix two_nodes() {
  Matrix x(2, 2);
  x << 1, 0, 0, 1;
  return x;
}

ModelConfig single_head(std::size_t d) {
  ModelConfig c;
  c.layers = 1;
  c.heads = 1;
  c.head_dim = d;
  c.tau = 1.0;
  c.alpha = 1.0;
  c.dropout = 0.0;
  return c;
}

Matrix layer(const Matrix& x, const Matrix& w, const Graph& g, const ModelConfig& c) {
  ad::Tape tape;
  return geo_layer_forward(tape, tape.constant(x), tape.constant(w), EdgeIndex::from_graph(g), c).value();
}

Matrix gaussian(Eigen::Index n, Eigen::Index d, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
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

TEST_CASE("two-node layer value") {
  const Graph g = build_csr({{0, 1}}, 2, true, true);
  const Matrix out = layer(two_nodes(), Matrix::Identity(2, 2), g, single_head(2));
  CHECK(std::abs(out(0, 0) - 0.9121) < 1e-4);
  CHECK(std::abs(out(0, 1) - 0.4100) < 1e-4);
}

TEST_CASE("zero step returns the normalized projection") {
  Rng rng(1);
  const Graph g = random_graph(10, 0.3, 1);
  const Matrix x = gaussian(10, 3, rng);
  const Matrix w = gaussian(4, 3, rng);
  ModelConfig c = single_head(4);
  c.alpha = 0.0;
  Matrix z = x * w.transpose();
  z.rowwise().normalize();
  CHECK((layer(x, w, g, c) - z).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("no_geodesic with uniform weights averages") {
  const Graph g = build_csr({{0, 1}}, 2, true, true);
  ModelConfig c = single_head(2);
  c.no_geodesic = true;
  c.no_cos = true;
  const Matrix out = layer(two_nodes(), Matrix::Identity(2, 2), g, c);
  CHECK(out(0, 0) == doctest::Approx(0.5));
  CHECK(out(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("all ablations reduce to mean smoothing") {
  Rng rng(2);
  const Graph g = random_graph(15, 0.25, 2);
  const Matrix x = gaussian(15, 5, rng);
  ModelConfig c = single_head(5);
  c.no_geodesic = c.no_cos = c.no_normalization = true;
  const Matrix mean = smoothing::smooth(x, g, {smoothing::Aggregator::Mean}, 1).snapshots[1];
  CHECK((layer(x, Matrix::Identity(5, 5), g, c) - mean).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("head blocks have unit norm") {
  Rng rng(3);
  const Graph g = random_graph(20, 0.2, 3);
  ModelConfig c;
  c.heads = 3;
  c.head_dim = 4;
  c.dropout = 0.0;
  const Matrix out = layer(gaussian(20, 6, rng), gaussian(12, 6, rng), g, c);
  for (std::size_t h = 0; h < 3; ++h) {
    const Matrix block = out.middleCols(static_cast<Eigen::Index>(4 * h), 4);
    CHECK((block.rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("lower temperature sharpens toward the most similar neighbor") {
  // Node 0 with neighbors at increasing angles; alpha = 1 and two neighbors
  // besides itself. The output moves toward node 1 as tau drops.
  Matrix x(3, 2);
  x << 1, 0, std::cos(0.4), std::sin(0.4), std::cos(1.2), std::sin(1.2);
  const Graph g = build_csr({{0, 1}, {0, 2}}, 3, false, true);
  double last = 10.0;
  for (double tau : {10.0, 1.0, 0.1, 0.01}) {
    ModelConfig c = single_head(2);
    c.tau = tau;
    const Matrix out = layer(x, Matrix::Identity(2, 2), g, c);
    const double angle = std::atan2(out(0, 1), out(0, 0));
    CHECK(std::abs(angle - 0.4) <= last + 1e-12);
    last = std::abs(angle - 0.4);
  }
  CHECK(last < 1e-6);
}

TEST_CASE("two layers chain through the instrumentation hook") {
  const Graph g = build_csr({{0, 1}}, 2, true, true);
  ModelConfig c = single_head(2);
  c.layers = 2;
  GeoModel model(c, 2, 0);
  model.layer_weight(0).value = Matrix::Identity(2, 2);
  model.layer_weight(1).value = Matrix::Identity(2, 2);
  std::vector<Matrix> seen;
  ForwardDiagnostics diag;
  diag.on_layer = [&](std::size_t, const Matrix& m) { seen.push_back(m); };
  ad::Tape tape;
  Rng rng(0);
  const Matrix final_out = model.forward(tape, tape.constant(two_nodes()), EdgeIndex::from_graph(g), false, rng, &diag).value();
  REQUIRE(seen.size() == 2);
  CHECK(seen[0] == layer(two_nodes(), Matrix::Identity(2, 2), g, c));
  CHECK(seen[1] == layer(seen[0], Matrix::Identity(2, 2), g, c));
  CHECK(seen[1] == final_out);
}

TEST_CASE("same seed gives bitwise-equal outputs") {
  Rng rng(4);
  const Graph g = random_graph(12, 0.3, 4);
  const Matrix x = gaussian(12, 5, rng);
  ModelConfig c;
  c.seed = 9;
  GeoModel a(c, 5, 3);
  GeoModel b(c, 5, 3);
  CHECK(a.classify(x, g) == b.classify(x, g));
  CHECK(a.embed(x, g) == b.embed(x, g));
}

TEST_CASE("classify") {
  Rng rng(5);
  const Graph g = random_graph(8, 0.3, 5);
  const Matrix x = gaussian(8, 4, rng);
  GeoModel m(ModelConfig{}, 4, 3);
  m.head()->value.setZero();
  const Matrix p = m.classify(x, g);
  CHECK((p.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);

  Matrix logits(2, 2);
  logits << std::log(3.0), 0.0, std::log(3.0) + 5.0, 5.0;
  const Matrix s = softmax_rows(logits);
  CHECK(s(0, 0) == doctest::Approx(0.75));
  CHECK(s(0, 1) == doctest::Approx(0.25));
  CHECK((s.row(0) - s.row(1)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(s.row(1).sum() - 1.0) < 1e-12);
}

TEST_CASE("score_link") {
  Vector u(2), v(2);
  u << 1, 0;
  v << 0, 1;
  CHECK(score_link(u, v, Similarity::Dot) == doctest::Approx(0.5));
  CHECK(score_link(u, u, Similarity::Cosine) == doctest::Approx(0.7311).epsilon(1e-4));
  Vector a(3), b(3);
  a << 0.3, -1.2, 2.0;
  b << 1.1, 0.4, -0.7;
  CHECK(score_link(a, b, Similarity::Dot) == score_link(b, a, Similarity::Dot));
  CHECK(score_link(a, b, Similarity::Cosine) == score_link(b, a, Similarity::Cosine));
}

TEST_CASE("end-to-end gradient check") {
  const auto rep = model_gradient_check(0);
  CHECK(rep.max_rel_error < 1e-4);
  GradCheckSetup one;
  one.layers = 1;
  CHECK(model_gradient_check(1, one).max_rel_error < 1e-4);
}

TEST_CASE("invalid configurations") {
  ModelConfig c;
  c.tau = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = ModelConfig{};
  c.head_dim = 1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = ModelConfig{};
  c.dropout = 1.0;
  CHECK_THROWS_AS(GeoModel(c, 4, 2), Error);
}

TEST_CASE("checkpoint round trip") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "geognn_test_model.ckpt";
  ModelConfig c;
  c.seed = 3;
  GeoModel m(c, 5, 4);
  m.save(path.string());
  const GeoModel back = GeoModel::load(path.string());
  const auto pa = m.parameters();
  const auto pb = back.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    CHECK(pa[i]->value == pb[i]->value);
  }
  {
    std::ofstream(path, std::ios::binary) << "NOTACKPT";
  }
  CHECK_THROWS_AS(GeoModel::load(path.string()), Error);
  fs::remove(path);
}
