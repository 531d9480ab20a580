#include "geognn/errors.hpp"
#include "geognn/sphere.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace geognn;
using namespace geognn::sphere;

namespace {

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Vector random_unit(std::size_t d, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = g(rng);
  return v / v.norm();
}

}  // namespace

TEST_CASE("project_to_sphere") {
  const Vector p = project_to_sphere(v2(3, 4));
  CHECK(p(0) == doctest::Approx(0.6));
  CHECK(p(1) == doctest::Approx(0.8));
  const Vector u = v2(0.6, 0.8);
  CHECK((project_to_sphere(u) - u).norm() < 1e-12);
  CHECK_THROWS_AS(project_to_sphere(v2(1e-30, 0)), DegenerateInputError);
}

TEST_CASE("geodesic_distance") {
  CHECK(geodesic_distance(v2(1, 0), v2(1, 0)) <= 4.5e-4);
  CHECK(geodesic_distance(v2(1, 0), v2(0, 1)) == doctest::Approx(std::numbers::pi / 2));
  CHECK(geodesic_distance(v2(1, 0), v2(-1, 0)) == doctest::Approx(std::numbers::pi).epsilon(1e-3));
}

TEST_CASE("log_map") {
  const Vector x = v2(1, 0);
  CHECK(log_map(x, x).norm() == 0.0);
  const Vector a = log_map(x, v2(0, 1));
  CHECK(std::abs(a(0)) < 1e-15);
  CHECK(a(1) == doctest::Approx(std::numbers::pi / 2));
  const Vector b = log_map(x, v2(std::cos(0.3), std::sin(0.3)));
  CHECK(std::abs(b(0)) < 1e-9);
  CHECK(std::abs(b(1) - 0.3) < 1e-9);
}

TEST_CASE("log_map antipodal policy") {
  const Vector x = v2(1, 0);
  const Vector y = v2(-1, 0);
  try {
    log_map(x, y);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AntipodalAmbiguity);
  }
  std::size_t count = 0;
  const Vector v = log_map(x, y, AntipodalPolicy::Clamp, &count);
  CHECK(count == 1);
  CHECK(v.allFinite());
}

TEST_CASE("exp_map") {
  const Vector x = v2(1, 0);
  CHECK(exp_map(x, Vector::Zero(2), 3.0) == x);
  const Vector e = exp_map(x, v2(0, std::numbers::pi / 2), 1.0);
  CHECK(std::abs(e(0)) < 1e-9);
  CHECK(std::abs(e(1) - 1.0) < 1e-9);
  const Vector y = v2(0.6, 0.8);
  CHECK((exp_map(x, log_map(x, y), 1.0) - y).norm() < 1e-6);
}

TEST_CASE("theta_over_sin uses the series near zero") {
  CHECK(theta_over_sin(0.0) == 1.0);
  CHECK(theta_over_sin(5e-5) == doctest::Approx(1.0 + 2.5e-9 / 6.0).epsilon(1e-15));
  CHECK(theta_over_sin(0.5) == doctest::Approx(0.5 / std::sin(0.5)));
}

TEST_CASE("round trip, norm preservation, tangency, length") {
  Rng rng(1);
  for (std::size_t d : {2, 8, 64}) {
    for (int t = 0; t < 300; ++t) {
      const Vector x = random_unit(d, rng);
      const Vector y = random_unit(d, rng);
      if (x.dot(y) <= -1.0 + 1e-6) continue;
      const Vector v = log_map(x, y);
      CHECK((exp_map(x, v, 1.0) - y).norm() < 1e-6);
      CHECK(std::abs(x.dot(v)) < 1e-8 * std::max(1.0, v.norm()));
      CHECK(std::abs(v.norm() - geodesic_distance(x, y)) < 1e-8);
      CHECK(std::abs(exp_map_unnormalized(x, v, 0.7).norm() - 1.0) < 1e-9);
      CHECK(std::abs(exp_map(x, v, 0.7).norm() - 1.0) < 1e-15);
    }
  }
}
