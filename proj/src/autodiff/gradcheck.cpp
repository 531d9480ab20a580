#include "geognn/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace geognn::ad {
namespace {

struct Eval {
  double loss;
  std::size_t clamp_inside;
};

Eval evaluate(const LossBuilder& builder, std::span<Parameter* const> params) {
  Tape tape;
  for (Parameter* p : params) tape.bind(*p);
  const Var loss = builder(tape);
  const double value = loss.scalar();
  if (!std::isfinite(value)) fail(ErrorCode::NumericFailure, "gradient check: non-finite loss");
  return {value, tape.clamp_inside()};
}

}  // namespace

GradCheckReport check_gradients(const LossBuilder& builder, std::span<Parameter* const> params,
                                double h) {
  if (!(h > 0.0)) fail(ErrorCode::ContractViolation, "gradient check: step must be positive");

  std::vector<Matrix> analytic;
  std::size_t base_inside = 0;
  {
    Tape tape;
    for (Parameter* p : params) tape.bind(*p);
    const Var loss = builder(tape);
    if (!std::isfinite(loss.scalar())) {
      fail(ErrorCode::NumericFailure, "gradient check: non-finite loss");
    }
    base_inside = tape.clamp_inside();
    analytic = grad(loss, params);
  }

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    for (Eigen::Index j = 0; j < p.value.size(); ++j) {
      double& entry = p.value.data()[j];
      const double saved = entry;
      entry = saved + h;
      const Eval plus = evaluate(builder, params);
      entry = saved - h;
      const Eval minus = evaluate(builder, params);
      entry = saved;

      const double fd = (plus.loss - minus.loss) / (2.0 * h);
      const double a = analytic[k].data()[j];
      const double err = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-12});
      const bool flagged = plus.clamp_inside != base_inside || minus.clamp_inside != base_inside;

      ++report.entries;
      if (flagged) ++report.flagged;
      else report.max_rel_error_unflagged = std::max(report.max_rel_error_unflagged, err);
      if (err > report.max_rel_error || report.entries == 1) {
        report.max_rel_error = std::max(report.max_rel_error, err);
        report.worst_param = p.name;
        report.worst_index = static_cast<std::size_t>(j);
      }
    }
  }
  return report;
}

}  // namespace geognn::ad
