#include "geognn/autodiff/tape.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace geognn::ad {

const char* to_string(Op op) noexcept {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::MatMul: return "matmul";
    case Op::Transpose: return "transpose";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::AddRowBroadcast: return "add_row_broadcast";
    case Op::Sum: return "sum";
    case Op::SliceCols: return "slice_cols";
    case Op::ConcatCols: return "concat_cols";
    case Op::ConcatRows: return "concat_rows";
    case Op::GatherRows: return "gather_rows";
    case Op::ScatterAddRows: return "scatter_add_rows";
    case Op::RowDot: return "row_dot";
    case Op::RowScale: return "row_scale";
    case Op::RowNormalize: return "row_normalize";
    case Op::Clamp: return "clamp";
    case Op::Acos: return "acos";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Relu: return "relu";
    case Op::SegmentSoftmax: return "segment_softmax";
    case Op::SphereExpRows: return "sphere_exp_rows";
    case Op::SoftmaxCrossEntropy: return "softmax_cross_entropy";
    case Op::BceWithLogits: return "bce_with_logits";
    case Op::ApplyMask: return "apply_mask";
  }
  return "unknown";
}

IndexArray make_index(std::vector<std::size_t> values) {
  return std::make_shared<const std::vector<std::size_t>>(std::move(values));
}

Tape& Var::tape() const {
  if (tape_ == nullptr) fail(ErrorCode::ContractViolation, "use of an unbound tape variable");
  return *tape_;
}

const Matrix& Var::value() const { return tape().value(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    fail(ErrorCode::ContractViolation, "scalar() on a " + std::to_string(v.rows()) + "x" +
                                           std::to_string(v.cols()) + " node");
  }
  return v(0, 0);
}

Parameter::Parameter(std::string param_name, Matrix initial)
    : name(std::move(param_name)), value(std::move(initial)),
      grad(Matrix::Zero(value.rows(), value.cols())) {}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{Op::Leaf, {}, std::move(value), {}, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Matrix value) {
  nodes_.push_back(Node{Op::Leaf, {}, std::move(value), {}, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::bind(Parameter& param) {
  param.handle = variable(param.value);
  return param.handle;
}

Var Tape::record(Op op, std::vector<std::size_t> inputs, Matrix value, OpAux aux) {
  bool needs_grad = false;
  for (std::size_t in : inputs) {
    if (in >= nodes_.size()) {
      fail(ErrorCode::ContractViolation, std::string("input of ") + to_string(op) +
                                             " does not precede it on the tape");
    }
    needs_grad = needs_grad || nodes_[in].requires_grad;
  }
  nodes_.push_back(Node{op, std::move(inputs), std::move(value), std::move(aux), needs_grad});
  return Var(this, nodes_.size() - 1);
}

const Matrix& Tape::value(std::size_t id) const {
  if (id >= nodes_.size()) fail(ErrorCode::ContractViolation, "tape id out of range");
  return nodes_[id].value;
}

bool Tape::requires_grad(std::size_t id) const {
  if (id >= nodes_.size()) fail(ErrorCode::ContractViolation, "tape id out of range");
  return nodes_[id].requires_grad;
}

Op Tape::op(std::size_t id) const {
  if (id >= nodes_.size()) fail(ErrorCode::ContractViolation, "tape id out of range");
  return nodes_[id].op;
}

Matrix& Tape::grad_slot(std::size_t id) {
  Matrix& slot = grads_[id];
  if (slot.size() == 0) slot = Matrix::Zero(nodes_[id].value.rows(), nodes_[id].value.cols());
  return slot;
}

void Tape::backward(Var loss) {
  if (!loss.valid() || &loss.tape() != this) {
    fail(ErrorCode::ContractViolation, "backward() on a variable from another tape");
  }
  const Matrix& out = nodes_[loss.id()].value;
  if (out.rows() != 1 || out.cols() != 1) {
    fail(ErrorCode::ContractViolation, "backward() needs a scalar loss, got " +
                                           std::to_string(out.rows()) + "x" +
                                           std::to_string(out.cols()));
  }
  grads_.assign(nodes_.size(), Matrix());
  grads_[loss.id()] = Matrix::Ones(1, 1);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    if (!nodes_[id].requires_grad || grads_[id].size() == 0) continue;
    // Copy: propagate may grow grads_ slots of inputs, never of id itself.
    const Matrix g = grads_[id];
    propagate(id, g);
  }
  has_gradients_ = true;
}

Matrix Tape::gradient(Var v) const {
  if (!v.valid() || &v.tape() != this) {
    fail(ErrorCode::ContractViolation, "gradient() of a variable from another tape");
  }
  const Matrix& value = nodes_[v.id()].value;
  if (!has_gradients_ || grads_[v.id()].size() == 0) {
    return Matrix::Zero(value.rows(), value.cols());
  }
  return grads_[v.id()];
}

void Tape::propagate(std::size_t id, const Matrix& g) {
  const Node& node = nodes_[id];
  const auto& in = node.inputs;
  auto wants = [&](std::size_t k) { return nodes_[in[k]].requires_grad; };
  auto val = [&](std::size_t k) -> const Matrix& { return nodes_[in[k]].value; };

  switch (node.op) {
    case Op::Leaf:
      return;

    case Op::MatMul:
      if (wants(0)) grad_slot(in[0]).noalias() += g * val(1).transpose();
      if (wants(1)) grad_slot(in[1]).noalias() += val(0).transpose() * g;
      return;

    case Op::Transpose:
      if (wants(0)) grad_slot(in[0]) += g.transpose();
      return;

    case Op::Add:
      if (wants(0)) grad_slot(in[0]) += g;
      if (wants(1)) grad_slot(in[1]) += g;
      return;

    case Op::Sub:
      if (wants(0)) grad_slot(in[0]) += g;
      if (wants(1)) grad_slot(in[1]) -= g;
      return;

    case Op::Mul:
      if (wants(0)) grad_slot(in[0]).array() += g.array() * val(1).array();
      if (wants(1)) grad_slot(in[1]).array() += g.array() * val(0).array();
      return;

    case Op::Div:
      if (wants(0)) grad_slot(in[0]).array() += g.array() / val(1).array();
      if (wants(1)) {
        grad_slot(in[1]).array() -= g.array() * node.value.array() / val(1).array();
      }
      return;

    case Op::Scale:
      if (wants(0)) grad_slot(in[0]) += node.aux.lo * g;
      return;

    case Op::AddScalar:
    case Op::ApplyMask:
      if (!wants(0)) return;
      if (node.op == Op::AddScalar) {
        grad_slot(in[0]) += g;
      } else {
        grad_slot(in[0]).array() += g.array() * node.aux.tensor->array();
      }
      return;

    case Op::AddRowBroadcast:
      if (wants(0)) grad_slot(in[0]) += g;
      if (wants(1)) grad_slot(in[1]) += g.colwise().sum();
      return;

    case Op::Sum:
      if (wants(0)) grad_slot(in[0]).array() += g(0, 0);
      return;

    case Op::SliceCols:
      if (wants(0)) {
        grad_slot(in[0]).middleCols(static_cast<Eigen::Index>(node.aux.start),
                                    static_cast<Eigen::Index>(node.aux.count)) += g;
      }
      return;

    case Op::ConcatCols: {
      Eigen::Index offset = 0;
      for (std::size_t k = 0; k < in.size(); ++k) {
        const Eigen::Index width = val(k).cols();
        if (wants(k)) grad_slot(in[k]) += g.middleCols(offset, width);
        offset += width;
      }
      return;
    }

    case Op::ConcatRows: {
      Eigen::Index offset = 0;
      for (std::size_t k = 0; k < in.size(); ++k) {
        const Eigen::Index height = val(k).rows();
        if (wants(k)) grad_slot(in[k]) += g.middleRows(offset, height);
        offset += height;
      }
      return;
    }

    case Op::GatherRows: {
      if (!wants(0)) return;
      Matrix& dst = grad_slot(in[0]);
      const auto& index = *node.aux.index;
      for (std::size_t e = 0; e < index.size(); ++e) {
        dst.row(static_cast<Eigen::Index>(index[e])) += g.row(static_cast<Eigen::Index>(e));
      }
      return;
    }

    case Op::ScatterAddRows: {
      if (!wants(0)) return;
      Matrix& dst = grad_slot(in[0]);
      const auto& index = *node.aux.index;
      for (std::size_t e = 0; e < index.size(); ++e) {
        dst.row(static_cast<Eigen::Index>(e)) += g.row(static_cast<Eigen::Index>(index[e]));
      }
      return;
    }

    case Op::RowDot:
      if (wants(0)) grad_slot(in[0]) += (val(1).array().colwise() * g.col(0).array()).matrix();
      if (wants(1)) grad_slot(in[1]) += (val(0).array().colwise() * g.col(0).array()).matrix();
      return;

    case Op::RowScale:
      if (wants(0)) {
        grad_slot(in[0]) += (g.array() * val(1).array()).rowwise().sum().matrix();
      }
      if (wants(1)) {
        grad_slot(in[1]) += (g.array().colwise() * val(0).col(0).array()).matrix();
      }
      return;

    case Op::RowNormalize: {
      if (!wants(0)) return;
      Matrix& dst = grad_slot(in[0]);
      const Matrix& a = val(0);
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const double norm = a.row(i).norm();
        if (norm == 0.0) continue;
        const auto y = node.value.row(i);
        const double gy = g.row(i).dot(y);
        dst.row(i) += (g.row(i) - gy * y) / norm;
      }
      return;
    }

    case Op::Clamp: {
      if (!wants(0)) return;
      const double lo = node.aux.lo;
      const double hi = node.aux.hi;
      grad_slot(in[0]).array() +=
          (val(0).array() > lo && val(0).array() < hi).select(g.array(), 0.0);
      return;
    }

    case Op::Acos:
      if (wants(0)) {
        grad_slot(in[0]).array() -= g.array() / (1.0 - val(0).array().square()).sqrt();
      }
      return;

    case Op::Sin:
      if (wants(0)) grad_slot(in[0]).array() += g.array() * val(0).array().cos();
      return;

    case Op::Cos:
      if (wants(0)) grad_slot(in[0]).array() -= g.array() * val(0).array().sin();
      return;

    case Op::Exp:
      if (wants(0)) grad_slot(in[0]).array() += g.array() * node.value.array();
      return;

    case Op::Log:
      if (wants(0)) grad_slot(in[0]).array() += g.array() / val(0).array();
      return;

    case Op::Relu:
      if (wants(0)) grad_slot(in[0]).array() += (val(0).array() > 0.0).select(g.array(), 0.0);
      return;

    case Op::SegmentSoftmax: {
      if (!wants(0)) return;
      Matrix& dst = grad_slot(in[0]);
      const auto& offsets = *node.aux.segments;
      for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
        const auto begin = static_cast<Eigen::Index>(offsets[s]);
        const auto len = static_cast<Eigen::Index>(offsets[s + 1] - offsets[s]);
        if (len == 0) continue;
        const auto y = node.value.col(0).segment(begin, len);
        const auto gs = g.col(0).segment(begin, len);
        const double inner = y.dot(gs);
        dst.col(0).segment(begin, len).array() += y.array() * (gs.array() - inner);
      }
      return;
    }

    case Op::SphereExpRows: {
      const Matrix& x = val(0);
      const Matrix& u = val(1);
      const double alpha = node.aux.lo;
      const bool want_x = wants(0);
      const bool want_u = wants(1);
      Matrix* dx = want_x ? &grad_slot(in[0]) : nullptr;
      Matrix* du = want_u ? &grad_slot(in[1]) : nullptr;
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double n = u.row(i).norm();
        if (n < 1e-12) {
          if (dx) dx->row(i) += g.row(i);
          if (du) du->row(i) += alpha * g.row(i);
          continue;
        }
        const double t = alpha * n;
        const double c = std::cos(t);
        const double s = std::sin(t);
        if (dx) dx->row(i) += c * g.row(i);
        if (du) {
          const double k = s / n;
          const double dk = (alpha * c * n - s) / (n * n);
          const double xg = x.row(i).dot(g.row(i));
          const double ug = u.row(i).dot(g.row(i));
          du->row(i) += k * g.row(i) + ((dk * ug - alpha * s * xg) / n) * u.row(i);
        }
      }
      return;
    }

    case Op::SoftmaxCrossEntropy: {
      if (!wants(0)) return;
      Matrix& dst = grad_slot(in[0]);
      const Matrix& probs = *node.aux.tensor;
      const auto& rows = *node.aux.index;
      const auto& labels = *node.aux.segments;
      const double w = g(0, 0) / static_cast<double>(rows.size());
      for (std::size_t q = 0; q < rows.size(); ++q) {
        const auto r = static_cast<Eigen::Index>(rows[q]);
        dst.row(r) += w * probs.row(static_cast<Eigen::Index>(q));
        dst(r, static_cast<Eigen::Index>(labels[q])) -= w;
      }
      return;
    }

    case Op::BceWithLogits: {
      if (!wants(0)) return;
      const Matrix& targets = *node.aux.tensor;
      const Matrix& s = val(0);
      const double w = g(0, 0) / static_cast<double>(s.rows());
      Matrix& dst = grad_slot(in[0]);
      for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const double sigma = 1.0 / (1.0 + std::exp(-s(i, 0)));
        dst(i, 0) += w * (sigma - targets(i, 0));
      }
      return;
    }
  }
  fail(ErrorCode::UnsupportedOp, "no reverse rule for primitive #" +
                                     std::to_string(static_cast<int>(node.op)));
}

std::vector<Matrix> grad(Var loss, std::span<Parameter* const> params) {
  Tape& tape = loss.tape();
  for (const Parameter* p : params) {
    if (!p->handle.valid() || &p->handle.tape() != &tape) {
      fail(ErrorCode::ContractViolation, "parameter '" + p->name + "' is not bound to this tape");
    }
  }
  tape.backward(loss);
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (Parameter* p : params) {
    p->grad = tape.gradient(p->handle);
    out.push_back(p->grad);
  }
  return out;
}

}  // namespace geognn::ad
