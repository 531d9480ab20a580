#pragma once

#include "geognn/errors.hpp"
#include "geognn/types.hpp"

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace geognn::ad {

/// Primitive kinds recorded on the tape. Every kind has a forward rule in
/// ops.cpp and a reverse rule in tape.cpp.
enum class Op : std::uint8_t {
  Leaf,
  MatMul,
  Transpose,
  Add,
  Sub,
  Mul,
  Div,
  Scale,
  AddScalar,
  AddRowBroadcast,
  Sum,
  SliceCols,
  ConcatCols,
  ConcatRows,
  GatherRows,
  ScatterAddRows,
  RowDot,
  RowScale,
  RowNormalize,
  Clamp,
  Acos,
  Sin,
  Cos,
  Exp,
  Log,
  Relu,
  SegmentSoftmax,
  SphereExpRows,
  SoftmaxCrossEntropy,
  BceWithLogits,
  ApplyMask,
};

const char* to_string(Op op) noexcept;

using IndexArray = std::shared_ptr<const std::vector<std::size_t>>;

IndexArray make_index(std::vector<std::size_t> values);

/// Per-node side data. Which fields are meaningful depends on the op.
struct OpAux {
  IndexArray index;                      // gather/scatter rows; CE node ids
  IndexArray segments;                   // segment offsets; CE labels
  std::shared_ptr<const Matrix> tensor;  // mask, BCE targets, cached softmax
  double lo = 0.0;
  double hi = 0.0;
  std::size_t start = 0;
  std::size_t count = 0;
};

class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const noexcept { return tape_ != nullptr && id_ != npos; }
  Tape& tape() const;
  std::size_t id() const noexcept { return id_; }

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = npos;
};

/// Trainable matrix. `handle` is refreshed every time the parameter is bound
/// to a new tape.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Matrix initial);

  std::string name;
  Matrix value;
  Matrix grad;
  Var handle;
};

/// Append-only record of matrix-valued operations. Inputs of every node
/// precede it, so one reverse sweep visits each node exactly once.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var variable(Matrix value);
  Var bind(Parameter& param);

  /// Low-level append used by the op functions.
  Var record(Op op, std::vector<std::size_t> inputs, Matrix value, OpAux aux = {});

  const Matrix& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const;
  Op op(std::size_t id) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse sweep from a 1x1 node. Gradients of earlier sweeps are discarded.
  void backward(Var loss);

  /// d loss / d v after backward(); a zero matrix when v does not reach the loss.
  Matrix gradient(Var v) const;

  /// Rows replaced by the e1 fallback inside row_normalize.
  std::size_t degenerate_rows() const noexcept { return degenerate_rows_; }
  void add_degenerate_rows(std::size_t n) noexcept { degenerate_rows_ += n; }

  /// Number of clamp elements strictly inside their interval, summed over
  /// every clamp node. Changes between two evaluations mean a perturbation
  /// crossed a clamp boundary.
  std::size_t clamp_inside() const noexcept { return clamp_inside_; }
  void add_clamp_inside(std::size_t n) noexcept { clamp_inside_ += n; }

 private:
  struct Node {
    Op op = Op::Leaf;
    std::vector<std::size_t> inputs;
    Matrix value;
    OpAux aux;
    bool requires_grad = false;
  };

  void propagate(std::size_t id, const Matrix& g);
  Matrix& grad_slot(std::size_t id);

  std::vector<Node> nodes_;
  std::vector<Matrix> grads_;
  bool has_gradients_ = false;
  std::size_t degenerate_rows_ = 0;
  std::size_t clamp_inside_ = 0;
};

/// Runs backward from `loss` and stores d loss / d p into every p->grad.
/// Returns copies of the gradients in parameter order.
std::vector<Matrix> grad(Var loss, std::span<Parameter* const> params);

}  // namespace geognn::ad
