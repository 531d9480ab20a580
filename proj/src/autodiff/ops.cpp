#include "geognn/autodiff/ops.hpp"

#include <cmath>
#include <string>

namespace geognn::ad {
namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Tape& same_tape(const char* op, Var a, Var b) {
  Tape& t = a.tape();
  if (&b.tape() != &t) fail(ErrorCode::ContractViolation, std::string(op) + ": inputs on different tapes");
  return t;
}

void same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorCode::ContractViolation,
         std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
  }
}

void column(const char* op, const Matrix& a) {
  if (a.cols() != 1) {
    fail(ErrorCode::ContractViolation, std::string(op) + ": expected a column, got " + shape(a));
  }
}

Var unary(Op op, Var a, Matrix value, OpAux aux = {}) {
  return a.tape().record(op, {a.id()}, std::move(value), std::move(aux));
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape("matmul", a, b);
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  if (A.cols() != B.rows()) {
    fail(ErrorCode::ContractViolation, "matmul: " + shape(A) + " times " + shape(B));
  }
  Matrix out = A * B;
  return t.record(Op::MatMul, {a.id(), b.id()}, std::move(out));
}

Var transpose(Var a) { return unary(Op::Transpose, a, a.value().transpose()); }

Var add(Var a, Var b) {
  Tape& t = same_tape("add", a, b);
  same_shape("add", a.value(), b.value());
  return t.record(Op::Add, {a.id(), b.id()}, a.value() + b.value());
}

Var sub(Var a, Var b) {
  Tape& t = same_tape("sub", a, b);
  same_shape("sub", a.value(), b.value());
  return t.record(Op::Sub, {a.id(), b.id()}, a.value() - b.value());
}

Var mul(Var a, Var b) {
  Tape& t = same_tape("mul", a, b);
  same_shape("mul", a.value(), b.value());
  Matrix out = a.value().cwiseProduct(b.value());
  return t.record(Op::Mul, {a.id(), b.id()}, std::move(out));
}

Var div(Var a, Var b) {
  Tape& t = same_tape("div", a, b);
  same_shape("div", a.value(), b.value());
  Matrix out = a.value().cwiseQuotient(b.value());
  return t.record(Op::Div, {a.id(), b.id()}, std::move(out));
}

Var scale(Var a, double factor) {
  OpAux aux;
  aux.lo = factor;
  return unary(Op::Scale, a, factor * a.value(), std::move(aux));
}

Var add_scalar(Var a, double offset) {
  Matrix out = a.value().array() + offset;
  return unary(Op::AddScalar, a, std::move(out));
}

Var add_row_broadcast(Var a, Var row) {
  Tape& t = same_tape("add_row_broadcast", a, row);
  const Matrix& A = a.value();
  const Matrix& r = row.value();
  if (r.rows() != 1 || r.cols() != A.cols()) {
    fail(ErrorCode::ContractViolation,
         "add_row_broadcast: row " + shape(r) + " against " + shape(A));
  }
  Matrix out = A.rowwise() + r.row(0);
  return t.record(Op::AddRowBroadcast, {a.id(), row.id()}, std::move(out));
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return unary(Op::Sum, a, std::move(out));
}

Var mean(Var a) {
  const auto n = a.value().size();
  if (n == 0) fail(ErrorCode::ContractViolation, "mean of an empty matrix");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
  const Matrix& A = a.value();
  if (start + count > static_cast<std::size_t>(A.cols())) {
    fail(ErrorCode::ContractViolation, "slice_cols: [" + std::to_string(start) + ", " +
                                           std::to_string(start + count) + ") outside " +
                                           shape(A));
  }
  OpAux aux;
  aux.start = start;
  aux.count = count;
  Matrix out = A.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count));
  return unary(Op::SliceCols, a, std::move(out), std::move(aux));
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorCode::ContractViolation, "concat_cols: no inputs");
  Tape& t = parts.front().tape();
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    same_tape("concat_cols", parts.front(), p);
    if (p.rows() != rows) fail(ErrorCode::ContractViolation, "concat_cols: row count mismatch");
    cols += p.cols();
    ids.push_back(p.id());
  }
  Matrix out(rows, cols);
  Eigen::Index offset = 0;
  for (const Var& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  return t.record(Op::ConcatCols, std::move(ids), std::move(out));
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorCode::ContractViolation, "concat_rows: no inputs");
  Tape& t = parts.front().tape();
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    same_tape("concat_rows", parts.front(), p);
    if (p.cols() != cols) fail(ErrorCode::ContractViolation, "concat_rows: column count mismatch");
    rows += p.rows();
    ids.push_back(p.id());
  }
  Matrix out(rows, cols);
  Eigen::Index offset = 0;
  for (const Var& p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    offset += p.rows();
  }
  return t.record(Op::ConcatRows, std::move(ids), std::move(out));
}

Var gather_rows(Var a, IndexArray index) {
  const Matrix& A = a.value();
  Matrix out(static_cast<Eigen::Index>(index->size()), A.cols());
  for (std::size_t e = 0; e < index->size(); ++e) {
    const std::size_t r = (*index)[e];
    if (r >= static_cast<std::size_t>(A.rows())) {
      fail(ErrorCode::ContractViolation, "gather_rows: row " + std::to_string(r) +
                                             " outside " + shape(A));
    }
    out.row(static_cast<Eigen::Index>(e)) = A.row(static_cast<Eigen::Index>(r));
  }
  OpAux aux;
  aux.index = std::move(index);
  return unary(Op::GatherRows, a, std::move(out), std::move(aux));
}

Var scatter_add_rows(Var a, IndexArray index, std::size_t rows) {
  const Matrix& A = a.value();
  if (index->size() != static_cast<std::size_t>(A.rows())) {
    fail(ErrorCode::ContractViolation, "scatter_add_rows: index length does not match rows");
  }
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rows), A.cols());
  for (std::size_t e = 0; e < index->size(); ++e) {
    const std::size_t r = (*index)[e];
    if (r >= rows) {
      fail(ErrorCode::ContractViolation, "scatter_add_rows: target row " + std::to_string(r) +
                                             " out of range");
    }
    out.row(static_cast<Eigen::Index>(r)) += A.row(static_cast<Eigen::Index>(e));
  }
  OpAux aux;
  aux.index = std::move(index);
  return unary(Op::ScatterAddRows, a, std::move(out), std::move(aux));
}

Var row_dot(Var a, Var b) {
  Tape& t = same_tape("row_dot", a, b);
  same_shape("row_dot", a.value(), b.value());
  Matrix out = a.value().cwiseProduct(b.value()).rowwise().sum();
  return t.record(Op::RowDot, {a.id(), b.id()}, std::move(out));
}

Var row_scale(Var s, Var a) {
  Tape& t = same_tape("row_scale", s, a);
  const Matrix& S = s.value();
  const Matrix& A = a.value();
  column("row_scale", S);
  if (S.rows() != A.rows()) {
    fail(ErrorCode::ContractViolation, "row_scale: " + shape(S) + " against " + shape(A));
  }
  Matrix out = (A.array().colwise() * S.col(0).array()).matrix();
  return t.record(Op::RowScale, {s.id(), a.id()}, std::move(out));
}

Var row_normalize(Var a) {
  const Matrix& A = a.value();
  Matrix out(A.rows(), A.cols());
  std::size_t degenerate = 0;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const double n = A.row(i).norm();
    if (n == 0.0) {
      out.row(i).setZero();
      if (A.cols() > 0) out(i, 0) = 1.0;
      ++degenerate;
    } else {
      out.row(i) = A.row(i) / n;
    }
  }
  a.tape().add_degenerate_rows(degenerate);
  return unary(Op::RowNormalize, a, std::move(out));
}

Var clamp(Var a, double lo, double hi) {
  if (!(lo <= hi)) fail(ErrorCode::ContractViolation, "clamp: lo > hi");
  const Matrix& A = a.value();
  Matrix out = A.cwiseMax(lo).cwiseMin(hi);
  const auto inside = static_cast<std::size_t>((A.array() > lo && A.array() < hi).count());
  a.tape().add_clamp_inside(inside);
  OpAux aux;
  aux.lo = lo;
  aux.hi = hi;
  return unary(Op::Clamp, a, std::move(out), std::move(aux));
}

Var acos(Var a) { return unary(Op::Acos, a, a.value().array().acos().matrix()); }
Var sin(Var a) { return unary(Op::Sin, a, a.value().array().sin().matrix()); }
Var cos(Var a) { return unary(Op::Cos, a, a.value().array().cos().matrix()); }
Var exp(Var a) { return unary(Op::Exp, a, a.value().array().exp().matrix()); }
Var log(Var a) { return unary(Op::Log, a, a.value().array().log().matrix()); }
Var relu(Var a) { return unary(Op::Relu, a, a.value().cwiseMax(0.0)); }

Var segment_softmax(Var scores, IndexArray offsets) {
  const Matrix& S = scores.value();
  column("segment_softmax", S);
  const auto& off = *offsets;
  if (off.empty() || off.back() != static_cast<std::size_t>(S.rows())) {
    fail(ErrorCode::ContractViolation, "segment_softmax: offsets do not cover the scores");
  }
  Matrix out(S.rows(), 1);
  for (std::size_t s = 0; s + 1 < off.size(); ++s) {
    if (off[s + 1] < off[s]) fail(ErrorCode::ContractViolation, "segment_softmax: offsets decrease");
    const auto begin = static_cast<Eigen::Index>(off[s]);
    const auto len = static_cast<Eigen::Index>(off[s + 1] - off[s]);
    if (len == 0) continue;
    const double top = S.col(0).segment(begin, len).maxCoeff();
    auto seg = out.col(0).segment(begin, len);
    seg = (S.col(0).segment(begin, len).array() - top).exp().matrix();
    seg /= seg.sum();
  }
  OpAux aux;
  aux.segments = std::move(offsets);
  return unary(Op::SegmentSoftmax, scores, std::move(out), std::move(aux));
}

Var sphere_exp_rows(Var x, Var u, double alpha) {
  Tape& t = same_tape("sphere_exp_rows", x, u);
  const Matrix& X = x.value();
  const Matrix& U = u.value();
  same_shape("sphere_exp_rows", X, U);
  Matrix out(X.rows(), X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double n = U.row(i).norm();
    if (n < 1e-12) {
      out.row(i) = X.row(i);
      continue;
    }
    const double th = alpha * n;
    out.row(i) = std::cos(th) * X.row(i) + (std::sin(th) / n) * U.row(i);
  }
  OpAux aux;
  aux.lo = alpha;
  return t.record(Op::SphereExpRows, {x.id(), u.id()}, std::move(out), std::move(aux));
}

Var softmax_cross_entropy(Var logits, std::span<const std::size_t> labels,
                          std::span<const std::size_t> rows) {
  const Matrix& L = logits.value();
  if (labels.size() != rows.size()) {
    fail(ErrorCode::ContractViolation, "softmax_cross_entropy: labels and rows differ in length");
  }
  if (rows.empty()) fail(ErrorCode::ContractViolation, "softmax_cross_entropy: no rows");
  auto probs = std::make_shared<Matrix>(static_cast<Eigen::Index>(rows.size()), L.cols());
  double total = 0.0;
  for (std::size_t q = 0; q < rows.size(); ++q) {
    if (rows[q] >= static_cast<std::size_t>(L.rows()) ||
        labels[q] >= static_cast<std::size_t>(L.cols())) {
      fail(ErrorCode::ContractViolation, "softmax_cross_entropy: row or label out of range");
    }
    const auto r = L.row(static_cast<Eigen::Index>(rows[q]));
    const double top = r.maxCoeff();
    const RowVector e = (r.array() - top).exp().matrix();
    const double z = e.sum();
    probs->row(static_cast<Eigen::Index>(q)) = e / z;
    total -= r(static_cast<Eigen::Index>(labels[q])) - top - std::log(z);
  }
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<double>(rows.size());
  OpAux aux;
  aux.index = make_index({rows.begin(), rows.end()});
  aux.segments = make_index({labels.begin(), labels.end()});
  aux.tensor = std::move(probs);
  return unary(Op::SoftmaxCrossEntropy, logits, std::move(out), std::move(aux));
}

Var bce_with_logits(Var scores, std::span<const double> targets) {
  const Matrix& S = scores.value();
  column("bce_with_logits", S);
  if (targets.size() != static_cast<std::size_t>(S.rows()) || targets.empty()) {
    fail(ErrorCode::ContractViolation, "bce_with_logits: targets do not match scores");
  }
  auto t = std::make_shared<Matrix>(S.rows(), 1);
  double total = 0.0;
  for (Eigen::Index i = 0; i < S.rows(); ++i) {
    const double s = S(i, 0);
    const double y = targets[static_cast<std::size_t>(i)];
    (*t)(i, 0) = y;
    total += std::max(s, 0.0) - s * y + std::log1p(std::exp(-std::abs(s)));
  }
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<double>(S.rows());
  OpAux aux;
  aux.tensor = std::move(t);
  return unary(Op::BceWithLogits, scores, std::move(out), std::move(aux));
}

Var apply_mask(Var a, Matrix mask) {
  same_shape("apply_mask", a.value(), mask);
  Matrix out = a.value().cwiseProduct(mask);
  OpAux aux;
  aux.tensor = std::make_shared<const Matrix>(std::move(mask));
  return unary(Op::ApplyMask, a, std::move(out), std::move(aux));
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) fail(ErrorCode::InvalidConfig, "dropout rate must lie in [0, 1)");
  Matrix mask(rows, cols);
  std::bernoulli_distribution keep(1.0 - p);
  const double kept = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) mask(i, j) = keep(rng) ? kept : 0.0;
  }
  return mask;
}

}  // namespace geognn::ad
