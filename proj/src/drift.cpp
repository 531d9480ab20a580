#include "geognn/drift.hpp"

#include "geognn/errors.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace geognn::drift {

void DriftConfig::validate(std::size_t n, std::size_t d) const {
  if (r < 1) fail(ErrorCode::InvalidConfig, "drift: r must be at least 1");
  if (r >= std::min(k, d)) {
    fail(ErrorCode::InvalidConfig, "drift: r = " + std::to_string(r) + " must be below min(k, d) = " +
                                       std::to_string(std::min(k, d)));
  }
  const std::size_t max_k = include_self_in_knn ? n : (n == 0 ? 0 : n - 1);
  if (k > max_k) {
    fail(ErrorCode::InvalidConfig, "drift: k = " + std::to_string(k) + " exceeds the " +
                                       std::to_string(max_k) + " available neighbors");
  }
  if (!(epsilon > 0.0)) fail(ErrorCode::InvalidConfig, "drift: epsilon must be positive");
}

KnnTable knn_reference(const Matrix& plm, const DriftConfig& config) {
  const auto n = static_cast<std::size_t>(plm.rows());
  Matrix unit = plm;
  for (Eigen::Index i = 0; i < plm.rows(); ++i) {
    const double norm = plm.row(i).norm();
    if (!(norm > 0.0)) {
      throw DegenerateInputError("zero-norm reference row at node " + std::to_string(i),
                                 static_cast<std::size_t>(i));
    }
    unit.row(i) /= norm;
  }
  const Matrix sim = unit * unit.transpose();
  const std::size_t k = config.k;

  KnnTable table(n);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    order.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i || config.include_self_in_knn) order.push_back(j);
    }
    const auto row = sim.row(static_cast<Eigen::Index>(i));
    auto better = [&](std::size_t a, std::size_t b) {
      const double sa = row(static_cast<Eigen::Index>(a));
      const double sb = row(static_cast<Eigen::Index>(b));
      return sa != sb ? sa > sb : a < b;
    };
    const std::size_t take = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      better);
    table[i].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return table;
}

LocalTangentModel fit_local_tangent(const Matrix& plm, const std::vector<std::size_t>& neighbor_ids,
                                    std::size_t r, std::size_t owner) {
  const std::size_t k = neighbor_ids.size();
  const auto d = static_cast<std::size_t>(plm.cols());
  if (r < 1 || k < r + 1) {
    fail(ErrorCode::InvalidConfig, "local tangent fit needs at least r + 1 neighbors");
  }
  Eigen::MatrixXd z(static_cast<Eigen::Index>(k), plm.cols());
  double max_row_norm = 0.0;
  for (std::size_t q = 0; q < k; ++q) {
    z.row(static_cast<Eigen::Index>(q)) = plm.row(static_cast<Eigen::Index>(neighbor_ids[q]));
    max_row_norm = std::max(max_row_norm, z.row(static_cast<Eigen::Index>(q)).norm());
  }
  LocalTangentModel model;
  model.owner = owner;
  model.mean = z.colwise().mean().transpose();
  z.rowwise() -= model.mean.transpose();

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double scale = std::max(sigma.size() > 0 ? sigma(0) : 0.0, max_row_norm);
  const double tol = static_cast<double>(std::max(k, d)) * std::numeric_limits<double>::epsilon() * scale;
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) rank += sigma(i) > tol ? 1 : 0;
  if (rank < r) {
    throw RankDeficientError("neighborhood of node " + std::to_string(owner) + " has rank " +
                                 std::to_string(rank) + " < " + std::to_string(r),
                             rank);
  }
  model.basis = svd.matrixV().leftCols(static_cast<Eigen::Index>(r));
  for (Eigen::Index c = 0; c < model.basis.cols(); ++c) {
    Eigen::Index arg = 0;
    model.basis.col(c).cwiseAbs().maxCoeff(&arg);
    if (model.basis(arg, c) < 0.0) model.basis.col(c) *= -1.0;
  }
  return model;
}

DriftScore drift_score(const Vector& h, const LocalTangentModel& model, double epsilon) {
  if (h.size() != model.mean.size()) fail(ErrorCode::ContractViolation, "drift_score: dimension mismatch");
  const Vector z = h - model.mean;
  const Vector coeff = model.basis.transpose() * z;
  const Vector residual = z - model.basis * coeff;
  DriftScore s;
  s.residual = residual.squaredNorm();
  s.centered_norm2 = z.squaredNorm();
  s.drift = s.residual / (s.centered_norm2 + epsilon);
  return s;
}

DriftReport drift_report(const Matrix& current, const Matrix& plm, const DriftConfig& config,
                         std::size_t layer) {
  if (current.rows() != plm.rows()) {
    fail(ErrorCode::InvalidConfig, "drift: current and reference features differ in row count");
  }
  config.validate(static_cast<std::size_t>(plm.rows()), static_cast<std::size_t>(plm.cols()));
  return drift_report(current, plm, knn_reference(plm, config), config, layer);
}

DriftReport drift_report(const Matrix& current, const Matrix& plm, const KnnTable& knn,
                         const DriftConfig& config, std::size_t layer) {
  const auto n = static_cast<std::size_t>(plm.rows());
  if (static_cast<std::size_t>(current.rows()) != n || knn.size() != n) {
    fail(ErrorCode::InvalidConfig, "drift: current, reference and kNN table differ in row count");
  }
  if (current.cols() != plm.cols()) {
    fail(ErrorCode::InvalidConfig, "drift: current features have d = " + std::to_string(current.cols()) +
                                       " but the reference has d = " + std::to_string(plm.cols()) +
                                       "; drift needs matching dimensions");
  }
  config.validate(n, static_cast<std::size_t>(plm.cols()));

  DriftReport report;
  report.config = config;
  report.layer = layer;
  report.per_node.assign(n, std::numeric_limits<double>::quiet_NaN());
  double total = 0.0;
  std::size_t scored = 0;
  for (std::size_t i = 0; i < n; ++i) {
    LocalTangentModel model;
    try {
      model = fit_local_tangent(plm, knn[i], config.r, i);
    } catch (const RankDeficientError& e) {
      if (e.achieved_rank() == 0) {
        report.excluded_nodes.push_back(i);
        continue;
      }
      model = fit_local_tangent(plm, knn[i], e.achieved_rank(), i);
      report.reduced_rank_nodes.push_back(i);
    }
    const Vector h = current.row(static_cast<Eigen::Index>(i)).transpose();
    const double d = drift_score(h, model, config.epsilon).drift;
    report.per_node[i] = d;
    total += d;
    ++scored;
  }
  if (scored == 0) fail(ErrorCode::InvalidConfig, "drift: no node could be scored");
  report.mean_drift = total / static_cast<double>(scored);
  return report;
}

nlohmann::json to_json(const DriftReport& report) {
  nlohmann::json per_node = nlohmann::json::array();
  for (double d : report.per_node) {
    if (std::isnan(d)) per_node.push_back(nullptr);
    else per_node.push_back(d);
  }
  return {
      {"mean_drift", report.mean_drift},
      {"k", report.config.k},
      {"r", report.config.r},
      {"epsilon", report.config.epsilon},
      {"layer", report.layer},
      {"excluded_nodes", report.excluded_nodes},
      {"reduced_rank_nodes", report.reduced_rank_nodes},
      {"per_node", per_node},
  };
}

}  // namespace geognn::drift
