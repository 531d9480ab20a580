#include "geognn/autodiff/adam.hpp"
#include "geognn/autodiff/gradcheck.hpp"
#include "geognn/autodiff/ops.hpp"
#include "geognn/errors.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

using namespace geognn;
using namespace geognn::ad;

namespace {

using Builder = std::function<Var(Tape&, Var)>;

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

double eval(const Builder& f, const Matrix& x) {
  Tape tape;
  return f(tape, tape.variable(x)).scalar();
}

// Largest relative difference between the tape gradient and central differences.
double fd_error(const Builder& f, const Matrix& x, double h = 1e-6) {
  Tape tape;
  Var v = tape.variable(x);
  tape.backward(f(tape, v));
  const Matrix analytic = tape.gradient(v);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double fd = oracle::central_difference(
        [&](double step) {
          Matrix p = x;
          p.data()[i] += step;
          return eval(f, p);
        },
        h);
    const double a = analytic.data()[i];
    const double denom = std::max({std::abs(a), std::abs(fd), 1e-6});
    worst = std::max(worst, std::abs(a - fd) / denom);
  }
  return worst;
}

// Weighted sum so every output entry gets a distinct upstream gradient.
Var weighted(Tape& tape, Var y) {
  Matrix w(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = 0.3 + 0.1 * static_cast<double>(i % 7);
  return sum(mul(y, tape.constant(w)));
}

void check_primitive(const char* name, const Builder& f, Eigen::Index r, Eigen::Index c, double lo, double hi,
                     double tol = 1e-6) {
  Rng rng(11);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) worst = std::max(worst, fd_error(f, random_matrix(r, c, rng, lo, hi)));
  INFO(name);
  CHECK(worst < tol);
}

}  // namespace

TEST_CASE("product of a variable with itself") {
  Tape tape;
  Var x = tape.variable(Matrix::Constant(1, 1, 3.0));
  Var loss = sum(mul(x, x));
  tape.backward(loss);
  CHECK(tape.gradient(x)(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("cross-entropy gradient at zero logits") {
  Tape tape;
  Var z = tape.variable(Matrix::Zero(1, 2));
  const std::vector<std::size_t> labels{0};
  const std::vector<std::size_t> rows{0};
  Var loss = softmax_cross_entropy(z, labels, rows);
  CHECK(loss.scalar() == doctest::Approx(std::log(2.0)));
  tape.backward(loss);
  const Matrix g = tape.gradient(z);
  CHECK(g(0, 0) == doctest::Approx(-0.5));
  CHECK(g(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("sum of a matrix product against finite differences") {
  Rng rng(3);
  const Matrix a = random_matrix(3, 4, rng);
  const Builder f = [&](Tape& t, Var x) { return sum(matmul(t.constant(a), x)); };
  const Matrix x = random_matrix(4, 2, rng);
  CHECK(fd_error(f, x) < 1e-7);
  // d/dX sum(A X) has every column equal to the column sums of A.
  Tape tape;
  Var v = tape.variable(x);
  tape.backward(f(tape, v));
  const Matrix g = tape.gradient(v);
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(g(i, 0) == doctest::Approx(a.col(i).sum()));
    CHECK(g(i, 1) == doctest::Approx(a.col(i).sum()));
  }
}

TEST_CASE("per-primitive gradients match central differences") {
  Rng rng(5);
  const Matrix other = random_matrix(4, 3, rng);
  const Matrix square = random_matrix(3, 5, rng);
  const auto idx = make_index({2, 0, 1, 1, 3, 0});
  const auto seg = make_index({0, 2, 3, 6});

  check_primitive("matmul", [&](Tape& t, Var x) { return weighted(t, matmul(x, t.constant(square))); }, 4, 3, -1, 1);
  check_primitive("transpose", [&](Tape& t, Var x) { return weighted(t, transpose(x)); }, 4, 3, -1, 1);
  check_primitive("add/sub", [&](Tape& t, Var x) { return weighted(t, sub(add(x, t.constant(other)), x * x)); }, 4, 3,
                  -1, 1);
  check_primitive("div", [&](Tape& t, Var x) { return weighted(t, div(t.constant(other), x)); }, 4, 3, 0.5, 2.0);
  check_primitive("scale/add_scalar", [&](Tape& t, Var x) { return weighted(t, add_scalar(scale(x, -2.5), 1.0)); }, 4,
                  3, -1, 1);
  check_primitive("add_row_broadcast", [&](Tape& t, Var x) {
    return weighted(t, add_row_broadcast(t.constant(other), x));
  }, 1, 3, -1, 1);
  check_primitive("mean", [&](Tape& t, Var x) { return mean(mul(x, x)); }, 4, 3, -1, 1);
  check_primitive("slice/concat", [&](Tape& t, Var x) {
    const std::vector<Var> cols{slice_cols(x, 2, 1), slice_cols(x, 0, 2)};
    const std::vector<Var> rows{concat_cols(cols), x};
    return weighted(t, concat_rows(rows));
  }, 4, 3, -1, 1);
  check_primitive("gather/scatter", [&](Tape& t, Var x) {
    return weighted(t, scatter_add_rows(gather_rows(x, idx), idx, 5));
  }, 4, 3, -1, 1);
  check_primitive("row_dot/row_scale", [&](Tape& t, Var x) {
    return weighted(t, row_scale(row_dot(x, t.constant(other)), x));
  }, 4, 3, -1, 1);
  check_primitive("row_normalize", [&](Tape& t, Var x) { return weighted(t, row_normalize(x)); }, 4, 3, 0.2, 1.0);
  check_primitive("clamp (interior)", [&](Tape& t, Var x) { return weighted(t, clamp(x, -2.0, 2.0)); }, 4, 3, -1, 1);
  check_primitive("acos", [&](Tape& t, Var x) { return weighted(t, ad::acos(x)); }, 4, 3, -0.9, 0.9);
  check_primitive("sin/cos", [&](Tape& t, Var x) { return weighted(t, ad::sin(x) + ad::cos(x)); }, 4, 3, -3, 3);
  check_primitive("exp/log", [&](Tape& t, Var x) { return weighted(t, ad::exp(x) + ad::log(x)); }, 4, 3, 0.2, 2.0);
  check_primitive("relu", [&](Tape& t, Var x) { return weighted(t, relu(x)); }, 4, 3, 0.05, 1.0);
  check_primitive("segment_softmax", [&](Tape& t, Var x) { return weighted(t, segment_softmax(x, seg)); }, 6, 1, -2, 2);
  check_primitive("sphere_exp_rows (u)", [&](Tape& t, Var u) {
    return weighted(t, sphere_exp_rows(row_normalize(t.constant(other)), u, 0.7));
  }, 4, 3, -1, 1);
  check_primitive("sphere_exp_rows (x)", [&](Tape& t, Var x) {
    return weighted(t, sphere_exp_rows(x, t.constant(other), 0.7));
  }, 4, 3, -1, 1);
  check_primitive("softmax_cross_entropy", [&](Tape&, Var x) {
    const std::vector<std::size_t> labels{0, 2, 2};
    const std::vector<std::size_t> rows{0, 1, 3};
    return softmax_cross_entropy(x, labels, rows);
  }, 4, 3, -3, 3);
  check_primitive("bce_with_logits", [&](Tape&, Var x) {
    const std::vector<double> targets{1, 0, 0, 1, 1};
    return bce_with_logits(x, targets);
  }, 5, 1, -3, 3);
}

TEST_CASE("clamp passes no gradient at or beyond its bounds") {
  Tape tape;
  Matrix x(1, 3);
  x << -1.0, 0.0, 1.5;
  Var v = tape.variable(x);
  tape.backward(sum(clamp(v, -1.0, 1.0)));
  const Matrix g = tape.gradient(v);
  CHECK(g(0, 0) == 0.0);
  CHECK(g(0, 1) == 1.0);
  CHECK(g(0, 2) == 0.0);
}

TEST_CASE("row_normalize replaces zero rows and counts them") {
  Tape tape;
  Matrix x = Matrix::Zero(2, 3);
  x(1, 2) = 2.0;
  Var y = row_normalize(tape.variable(x));
  CHECK(y.value()(0, 0) == 1.0);
  CHECK(y.value()(1, 2) == 1.0);
  CHECK(tape.degenerate_rows() == 1);
}

TEST_CASE("mismatched shapes are contract violations") {
  Tape tape;
  Var a = tape.variable(Matrix::Zero(2, 3));
  Var b = tape.variable(Matrix::Zero(2, 2));
  CHECK_THROWS_AS(add(a, b), Error);
  CHECK_THROWS_AS(matmul(a, a), Error);
  try {
    add(a, b);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ContractViolation);
  }
}

TEST_CASE("gradients of unused variables are zero") {
  Tape tape;
  Var a = tape.variable(Matrix::Ones(2, 2));
  Var b = tape.variable(Matrix::Ones(2, 2));
  tape.backward(sum(a));
  CHECK(tape.gradient(b).isZero());
}

TEST_CASE("first Adam step moves by lr against the gradient sign") {
  Parameter p("w", Matrix::Zero(1, 2));
  p.grad = Matrix(1, 2);
  p.grad << 1.0, -3.0;
  AdamState s = AdamState::for_param(p);
  adam_step(p, s);
  // m_hat = g, v_hat = g^2, so the step is lr |g| / (|g| + eps).
  CHECK(p.value(0, 0) == doctest::Approx(-1e-3 / (1.0 + 1e-8)).epsilon(1e-12));
  CHECK(p.value(0, 1) == doctest::Approx(3e-3 / (3.0 + 1e-8)).epsilon(1e-12));
  CHECK(p.grad.isZero());
  CHECK(s.t == 1);

  const double first = p.value(0, 0);
  p.grad = Matrix::Ones(1, 2);
  adam_step(p, s);
  CHECK(std::abs((p.value(0, 0) - first) - first) < 1e-6 * std::abs(first));

  Parameter q("q", Matrix::Constant(1, 1, 2.0));
  q.grad = Matrix::Zero(1, 1);
  AdamState z = AdamState::for_param(q);
  adam_step(q, z);
  CHECK(q.value(0, 0) == 2.0);
  CHECK(z.t == 1);
}

TEST_CASE("check_gradients reports small errors on a smooth loss") {
  Rng rng(9);
  Parameter w("w", random_matrix(3, 2, rng));
  const Matrix x = random_matrix(4, 3, rng);
  std::vector<Parameter*> params{&w};
  const auto rep = check_gradients(
      [&](Tape& t) { return sum(ad::sin(matmul(t.constant(x), w.handle))); }, params);
  CHECK(rep.entries == 6);
  CHECK(rep.flagged == 0);
  CHECK(rep.max_rel_error < 1e-6);
}

TEST_CASE("dropout mask is inverted and seeded") {
  Rng a(1);
  Rng b(1);
  const Matrix m1 = dropout_mask(50, 40, 0.5, a);
  const Matrix m2 = dropout_mask(50, 40, 0.5, b);
  CHECK(m1 == m2);
  for (Eigen::Index i = 0; i < m1.size(); ++i) {
    const double v = m1.data()[i];
    CHECK((v == 0.0 || v == doctest::Approx(2.0)));
  }
  CHECK(m1.mean() == doctest::Approx(1.0).epsilon(0.1));
}
