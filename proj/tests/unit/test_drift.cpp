#include "geognn/drift.hpp"
#include "geognn/errors.hpp"
#include "geognn/synth.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <Eigen/QR>

#include <cmath>
#include <random>

using namespace geognn;
using namespace geognn::drift;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> data) {
  Matrix m(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(data.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : data) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix gaussian(Eigen::Index n, Eigen::Index d, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

LocalTangentModel xy_plane() {
  const Matrix square = rows({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}});
  return fit_local_tangent(square, {0, 1, 2, 3}, 2);
}

}  // namespace

TEST_CASE("knn examples") {
  DriftConfig cfg;
  cfg.k = 1;
  const Matrix x = rows({{1, 0}, {0.99, 0.14}, {0, 1}});
  CHECK(knn_reference(x, cfg)[0] == std::vector<std::size_t>{1});
  const Matrix dup = rows({{1, 0}, {0, 1}, {1, 0}, {1, 0}});
  CHECK(knn_reference(dup, cfg)[0] == std::vector<std::size_t>{2});
  CHECK(knn_reference(dup, cfg)[3] == std::vector<std::size_t>{0});
}

TEST_CASE("knn with k = n-1 matches brute force") {
  Rng rng(1);
  const Matrix x = gaussian(20, 4, rng);
  DriftConfig cfg;
  cfg.k = 19;
  const auto table = knn_reference(x, cfg);
  for (std::size_t i = 0; i < 20; ++i) CHECK(table[i] == oracle::knn_brute(x, i, 19));
}

TEST_CASE("fit_local_tangent on collinear points") {
  const Matrix line = rows({{0, 0}, {1, 1}, {2, 2}}) / std::sqrt(2.0);
  const auto m = fit_local_tangent(line, {0, 1, 2}, 1);
  CHECK(m.mean(0) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(m.mean(1) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(m.basis(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(m.basis(1, 0) == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("fit_local_tangent on a square spans the xy-plane") {
  const auto m = xy_plane();
  Matrix expected = Matrix::Zero(3, 3);
  expected(0, 0) = expected(1, 1) = 1.0;
  CHECK((m.basis * m.basis.transpose() - expected).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("fit_local_tangent sign convention") {
  Rng rng(2);
  const Matrix x = gaussian(12, 5, rng);
  const auto m = fit_local_tangent(x, {0, 1, 2, 3, 4, 5, 6, 7}, 3);
  for (Eigen::Index c = 0; c < 3; ++c) {
    Eigen::Index at = 0;
    m.basis.col(c).cwiseAbs().maxCoeff(&at);
    CHECK(m.basis(at, c) > 0.0);
  }
}

TEST_CASE("identical neighbors are rank deficient") {
  const Matrix same = rows({{1, 2}, {1, 2}, {1, 2}});
  try {
    fit_local_tangent(same, {0, 1, 2}, 1);
    FAIL("expected an error");
  } catch (const RankDeficientError& e) {
    CHECK(e.achieved_rank() == 0);
  }
}

TEST_CASE("drift_score examples") {
  const auto m = xy_plane();
  Vector in_plane = m.mean + m.basis * Vector::Constant(2, 0.7);
  CHECK(drift_score(in_plane, m, 1e-8).drift < 1e-12);

  Vector up = m.mean;
  up(2) += 1.0;
  const auto s = drift_score(up, m, 1e-8);
  CHECK(s.residual == doctest::Approx(1.0));
  CHECK(s.drift == doctest::Approx(1.0 / (1.0 + 1e-8)).epsilon(1e-14));

  Vector diag = m.mean;
  diag(0) += 1.0;
  diag(2) += 1.0;
  const auto t = drift_score(diag, m, 1e-8);
  CHECK(t.residual == doctest::Approx(1.0));
  CHECK(t.centered_norm2 == doctest::Approx(2.0));
  CHECK(t.drift == doctest::Approx(0.5));
}

TEST_CASE("drift is non-increasing in r") {
  Rng rng(3);
  const Matrix x = gaussian(10, 6, rng);
  const std::vector<std::size_t> ids{0, 1, 2, 3, 4, 5, 6, 7, 8};
  const Vector h = gaussian(1, 6, rng).row(0).transpose();
  double last = 1.0;
  for (std::size_t r = 1; r <= 5; ++r) {
    const double d = drift_score(h, fit_local_tangent(x, ids, r), 1e-8).drift;
    CHECK(d <= last + 1e-12);
    CHECK(d >= 0.0);
    CHECK(d < 1.0);
    last = d;
  }
}

TEST_CASE("drift_report matches the brute-force oracle") {
  Rng rng(4);
  for (int inst = 0; inst < 5; ++inst) {
    const Matrix plm = gaussian(30, 6, rng);
    const Matrix cur = plm + 0.5 * gaussian(30, 6, rng);
    DriftConfig cfg;
    cfg.k = 10;
    cfg.r = 3;
    const auto rep = drift_report(cur, plm, cfg);
    const auto ref = oracle::drift_brute(cur, plm, 10, 3, cfg.epsilon);
    for (std::size_t i = 0; i < 30; ++i) CHECK(std::abs(rep.per_node[i] - ref[i]) < 1e-10);
  }
}

TEST_CASE("layer-0 drift on manifold data is small") {
  synth::SynthSpec spec;
  spec.n = 300;
  spec.manifold_dim = 4;  // intrinsic dimension matches r
  const auto data = synth::generate(spec);
  DriftConfig cfg;
  cfg.k = 10;
  cfg.r = 4;
  CHECK(drift_report(data.features, data.features, cfg).mean_drift < 0.05);
}

TEST_CASE("a random rotation raises drift") {
  Rng rng(0);
  // One Gaussian cluster inside a 3-dimensional affine subspace of R^6.
  const Matrix basis = gaussian(3, 6, rng);
  Matrix plm = gaussian(80, 3, rng) * basis;
  plm.rowwise() += gaussian(1, 6, rng).row(0) * 4.0;
  Eigen::MatrixXd a = gaussian(6, 6, rng);
  const Matrix q = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
  DriftConfig cfg;
  cfg.k = 10;
  cfg.r = 3;
  const double base = drift_report(plm, plm, cfg).mean_drift;
  CHECK(drift_report(plm * q, plm, cfg).mean_drift > base);
}

TEST_CASE("drift_report excludes and lowers rank") {
  // Node 4's neighbors (0..3) coincide, so its tangent fit is rank 0.
  Matrix plm = rows({{1, 0, 0}, {1, 0, 0}, {1, 0, 0}, {1, 0, 0}, {0.9, 0.1, 0}, {0, 1, 0}, {0, 0, 1}});
  DriftConfig cfg;
  cfg.k = 4;
  cfg.r = 1;
  const auto rep = drift_report(plm, plm, cfg);
  CHECK_FALSE(rep.excluded_nodes.empty());
  for (std::size_t i : rep.excluded_nodes) CHECK(std::isnan(rep.per_node[i]));
  const auto j = to_json(rep);
  CHECK(j["per_node"][rep.excluded_nodes.front()].is_null());
}

TEST_CASE("drift_report configuration errors") {
  Rng rng(5);
  const Matrix a = gaussian(20, 4, rng);
  const Matrix b = gaussian(20, 5, rng);
  DriftConfig cfg;
  cfg.k = 5;
  cfg.r = 2;
  auto code_of = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  CHECK(code_of([&] { drift_report(b, a, cfg); }) == ErrorCode::InvalidConfig);
  cfg.r = 4;
  CHECK(code_of([&] { drift_report(a, a, cfg); }) == ErrorCode::InvalidConfig);
  cfg.r = 2;
  cfg.k = 20;
  CHECK(code_of([&] { drift_report(a, a, cfg); }) == ErrorCode::InvalidConfig);
}
