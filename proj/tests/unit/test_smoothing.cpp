#include "geognn/errors.hpp"
#include "geognn/smoothing.hpp"

#include <doctest.h>

#include <Eigen/QR>

#include <random>

using namespace geognn;
using namespace geognn::smoothing;

namespace {

const Aggregator kAll[] = {Aggregator::Mean, Aggregator::Laplacian, Aggregator::Attention, Aggregator::Geodesic};

Matrix two_nodes() {
  Matrix x(2, 2);
  x << 1, 0, 0, 1;
  return x;
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

Matrix random_orthogonal(Eigen::Index d, Rng& rng) {
  Eigen::MatrixXd a = gaussian(d, d, rng);
  return Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
}

}  // namespace

TEST_CASE("two-node examples") {
  const Graph g = build_csr({{0, 1}}, 2, true, true);
  const Matrix x = two_nodes();
  const Matrix mean = smooth(x, g, {Aggregator::Mean}, 1).snapshots[1];
  CHECK(mean(0, 0) == doctest::Approx(0.5));
  CHECK(mean(0, 1) == doctest::Approx(0.5));
  const Matrix lap = smooth(x, g, {Aggregator::Laplacian}, 1).snapshots[1];
  CHECK(lap(0, 0) == doctest::Approx(0.5));
  CHECK(lap(0, 1) == doctest::Approx(0.5));
  const Matrix geo = smooth(x, g, {Aggregator::Geodesic, 1.0, 1.0}, 1).snapshots[1];
  CHECK(std::abs(geo(0, 0) - 0.9121) < 1e-4);
  CHECK(std::abs(geo(0, 1) - 0.4100) < 1e-4);
}

TEST_CASE("self-loop-only graphs are fixed points") {
  Rng rng(2);
  const Matrix x = gaussian(6, 3, rng);
  const Graph g = build_csr({}, 6, true, true);
  for (Aggregator a : kAll) {
    const auto trace = smooth(x, g, {a}, 3);
    CHECK(trace.snapshots.size() == 4);
    Matrix expected = x;
    if (a == Aggregator::Geodesic) expected.rowwise().normalize();
    CHECK((trace.snapshots[0] - x).norm() == 0.0);
    for (std::size_t l = 1; l <= 3; ++l) CHECK((trace.snapshots[l] - expected).norm() < 1e-12);
  }
}

TEST_CASE("Laplacian adds the implicit self-loop") {
  const Graph g = build_csr({{0, 1}}, 2, false, true);
  const Matrix lap = smooth(two_nodes(), g, {Aggregator::Laplacian}, 1).snapshots[1];
  CHECK(lap(0, 0) == doctest::Approx(0.5));
  CHECK(lap(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("zero-norm rows name the node") {
  Matrix x = two_nodes();
  x.row(1).setZero();
  const Graph g = build_csr({{0, 1}}, 2, true, true);
  for (Aggregator a : {Aggregator::Attention, Aggregator::Geodesic}) {
    try {
      smooth(x, g, {a}, 1);
      FAIL("expected an error");
    } catch (const DegenerateInputError& e) {
      REQUIRE(e.node().has_value());
      CHECK(*e.node() == 1);
    }
  }
}

TEST_CASE("attention and geodesic weights sum to one") {
  Rng rng(3);
  const Graph g = random_graph(30, 0.2, 5);
  Matrix x = gaussian(30, 5, rng);
  x.col(4).setConstant(0.25);  // a constant coordinate survives any convex combination
  const Matrix att = smooth_step(x, g, {Aggregator::Attention, 0.7});
  CHECK((att.col(4).array() - 0.25).abs().maxCoeff() < 1e-12);
}

TEST_CASE("geodesic rows stay on the sphere") {
  Rng rng(4);
  const Graph g = random_graph(40, 0.15, 6);
  const auto trace = smooth(gaussian(40, 6, rng), g, {Aggregator::Geodesic, 1.0, 1.0}, 4);
  for (std::size_t l = 1; l < trace.snapshots.size(); ++l) {
    CHECK((trace.snapshots[l].rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("orthogonal equivariance") {
  Rng rng(5);
  const Graph g = random_graph(25, 0.2, 7);
  const Matrix x = gaussian(25, 4, rng);
  const Matrix q = random_orthogonal(4, rng);
  // Rows are points, so the transform acts as X Q^T.
  const Matrix xq = x * q.transpose();
  for (Aggregator a : kAll) {
    const Matrix lhs = smooth(xq, g, {a}, 3).snapshots[3];
    const Matrix rhs = smooth(x, g, {a}, 3).snapshots[3] * q.transpose();
    const double tol = (a == Aggregator::Mean || a == Aggregator::Laplacian) ? 1e-9 : 1e-6;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < tol);
  }
}

TEST_CASE("large tau gives uniform attention") {
  Rng rng(6);
  const Graph g = random_graph(30, 0.2, 8);
  const Matrix x = gaussian(30, 5, rng);
  const Matrix att = smooth_step(x, g, {Aggregator::Attention, 1e6});
  const Matrix mean = smooth_step(x, g, {Aggregator::Mean});
  // |sum (w - 1/|N|) h_j| <= max |w - 1/|N|| * sum |h_j|
  const double scale = x.rowwise().norm().sum();
  CHECK((att - mean).cwiseAbs().maxCoeff() < 1e-5 * scale);
}

TEST_CASE("parse_aggregator") {
  CHECK(parse_aggregator("geodesic") == Aggregator::Geodesic);
  CHECK(std::string(to_string(Aggregator::Laplacian)) == "laplacian");
  CHECK_THROWS_AS(parse_aggregator("median"), Error);
}
