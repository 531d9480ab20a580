#pragma once

#include "geognn/autodiff/tape.hpp"

#include <span>
#include <vector>

// Differentiable primitives. All of them record onto the tape owning their
// inputs; mixing tapes is a contract violation. Shapes must match exactly,
// there is no implicit broadcasting except where an op says so.
namespace geognn::ad {

Var matmul(Var a, Var b);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var div(Var a, Var b);  // elementwise
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
/// a (m x n) + row (1 x n) added to every row.
Var add_row_broadcast(Var a, Var row);

/// Sum of all entries, 1x1.
Var sum(Var a);
Var mean(Var a);

Var slice_cols(Var a, std::size_t start, std::size_t count);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
/// out[e] = a[index[e]]
Var gather_rows(Var a, IndexArray index);
/// out[index[e]] += a[e], out has `rows` rows.
Var scatter_add_rows(Var a, IndexArray index, std::size_t rows);

/// Row-wise inner product of two m x d matrices, m x 1.
Var row_dot(Var a, Var b);
/// s (m x 1) times every row of a (m x d).
Var row_scale(Var s, Var a);
/// a_i / |a_i|. Rows with zero norm are replaced by e1 (gradient zero) and
/// counted in Tape::degenerate_rows().
Var row_normalize(Var a);

/// Gradient is 1 strictly inside (lo, hi) and 0 at or outside the bounds.
Var clamp(Var a, double lo, double hi);
Var acos(Var a);
Var sin(Var a);
Var cos(Var a);
Var exp(Var a);
Var log(Var a);
Var relu(Var a);

/// Softmax of an E x 1 score column within each segment
/// [offsets[i], offsets[i+1]).
Var segment_softmax(Var scores, IndexArray offsets);

/// Row-wise spherical exponential map: cos(t) x + sin(t) u / |u| with
/// t = alpha |u|; rows with |u| < 1e-12 return x.
Var sphere_exp_rows(Var x, Var u, double alpha);

/// Mean cross-entropy of softmax(logits) over the rows listed in `rows`.
Var softmax_cross_entropy(Var logits, std::span<const std::size_t> labels,
                          std::span<const std::size_t> rows);

/// Mean binary cross-entropy of sigmoid(scores) against 0/1 targets.
Var bce_with_logits(Var scores, std::span<const double> targets);

/// Elementwise product with a constant mask (dropout).
Var apply_mask(Var a, Matrix mask);

/// Inverted dropout mask: entries are 0 with probability p, else 1/(1-p).
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

}  // namespace geognn::ad
