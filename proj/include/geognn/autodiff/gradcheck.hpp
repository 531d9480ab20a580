#pragma once

#include "geognn/autodiff/tape.hpp"

#include <functional>
#include <span>
#include <string>

namespace geognn::ad {

struct GradCheckReport {
  double max_rel_error = 0.0;
  /// Same maximum restricted to entries whose perturbation never moved a
  /// clamp element across its boundary.
  double max_rel_error_unflagged = 0.0;
  std::size_t flagged = 0;
  std::size_t entries = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
};

/// Builds the loss on a fresh tape. All params are already bound when it is
/// called; use p->handle to reach them.
using LossBuilder = std::function<Var(Tape&)>;

/// Compares reverse-mode gradients with central differences of step h:
/// |analytic - fd| / max(|analytic|, |fd|, 1e-12), maximised over every entry.
GradCheckReport check_gradients(const LossBuilder& builder, std::span<Parameter* const> params,
                                double h = 1e-5);

}  // namespace geognn::ad
