#include "geognn/smoothing.hpp"

#include "geognn/errors.hpp"
#include "geognn/sphere.hpp"

#include <cmath>
#include <string>

namespace geognn::smoothing {

const char* to_string(Aggregator kind) noexcept {
  switch (kind) {
    case Aggregator::Mean: return "mean";
    case Aggregator::Laplacian: return "laplacian";
    case Aggregator::Attention: return "attention";
    case Aggregator::Geodesic: return "geodesic";
  }
  return "unknown";
}

Aggregator parse_aggregator(const std::string& name) {
  if (name == "mean") return Aggregator::Mean;
  if (name == "laplacian") return Aggregator::Laplacian;
  if (name == "attention") return Aggregator::Attention;
  if (name == "geodesic") return Aggregator::Geodesic;
  fail(ErrorCode::Validation, "unknown aggregator '" + name + "'");
}

namespace {

Matrix mean_step(const Matrix& h, const Graph& g) {
  Matrix out = h;
  for (NodeId i = 0; i < g.n; ++i) {
    const auto nb = g.neighbors(i);
    if (nb.empty()) continue;
    RowVector acc = RowVector::Zero(h.cols());
    for (NodeId j : nb) acc += h.row(static_cast<Eigen::Index>(j));
    out.row(static_cast<Eigen::Index>(i)) = acc / static_cast<double>(nb.size());
  }
  return out;
}

Matrix laplacian_step(const Matrix& h, const Graph& g) {
  // Ā = A + I: nodes without a stored self-loop get one implicitly.
  std::vector<bool> implicit_loop(g.n);
  std::vector<double> inv_sqrt_deg(g.n);
  for (NodeId i = 0; i < g.n; ++i) {
    implicit_loop[i] = !g.has_edge(i, i);
    const double deg = static_cast<double>(g.degree(i)) + (implicit_loop[i] ? 1.0 : 0.0);
    inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
  }
  Matrix out = Matrix::Zero(h.rows(), h.cols());
  for (NodeId i = 0; i < g.n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (NodeId j : g.neighbors(i)) {
      out.row(r) += inv_sqrt_deg[i] * inv_sqrt_deg[j] * h.row(static_cast<Eigen::Index>(j));
    }
    if (implicit_loop[i]) out.row(r) += inv_sqrt_deg[i] * inv_sqrt_deg[i] * h.row(r);
  }
  return out;
}

std::vector<double> row_norms(const Matrix& h) {
  std::vector<double> norms(static_cast<std::size_t>(h.rows()));
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    norms[static_cast<std::size_t>(i)] = h.row(i).norm();
    if (!(norms[static_cast<std::size_t>(i)] > sphere::kZeroNorm)) {
      throw DegenerateInputError("zero-norm feature row at node " + std::to_string(i),
                                 static_cast<std::size_t>(i));
    }
  }
  return norms;
}

/// Softmax of scores[k] / tau, stable.
std::vector<double> softmax(const std::vector<double>& scores, double tau) {
  double top = -INFINITY;
  for (double s : scores) top = std::max(top, s / tau);
  std::vector<double> w(scores.size());
  double total = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    w[k] = std::exp(scores[k] / tau - top);
    total += w[k];
  }
  for (double& x : w) x /= total;
  return w;
}

Matrix attention_step(const Matrix& h, const Graph& g, double tau) {
  const std::vector<double> norms = row_norms(h);
  Matrix out = h;
  std::vector<double> scores;
  for (NodeId i = 0; i < g.n; ++i) {
    const auto nb = g.neighbors(i);
    if (nb.empty()) continue;
    const auto r = static_cast<Eigen::Index>(i);
    scores.clear();
    for (NodeId j : nb) {
      const auto c = static_cast<Eigen::Index>(j);
      scores.push_back(h.row(r).dot(h.row(c)) / (norms[i] * norms[j]));
    }
    const std::vector<double> w = softmax(scores, tau);
    RowVector acc = RowVector::Zero(h.cols());
    for (std::size_t k = 0; k < nb.size(); ++k) acc += w[k] * h.row(static_cast<Eigen::Index>(nb[k]));
    out.row(r) = acc;
  }
  return out;
}

Matrix geodesic_step(const Matrix& x, const Graph& g, double tau, double alpha,
                     std::size_t* antipodal) {
  Matrix out = x;
  std::vector<double> scores;
  for (NodeId i = 0; i < g.n; ++i) {
    const auto nb = g.neighbors(i);
    if (nb.empty()) continue;
    const auto r = static_cast<Eigen::Index>(i);
    const Vector xi = x.row(r).transpose();
    scores.clear();
    for (NodeId j : nb) scores.push_back(sphere::clamp_cos(x.row(r).dot(x.row(static_cast<Eigen::Index>(j)))));
    const std::vector<double> w = softmax(scores, tau);
    Vector u = Vector::Zero(x.cols());
    for (std::size_t k = 0; k < nb.size(); ++k) {
      const Vector xj = x.row(static_cast<Eigen::Index>(nb[k])).transpose();
      u += w[k] * sphere::log_map(xi, xj, sphere::AntipodalPolicy::Clamp, antipodal);
    }
    out.row(r) = sphere::exp_map(xi, u, alpha).transpose();
  }
  return out;
}

}  // namespace

Matrix smooth_step(const Matrix& h, const Graph& graph, const AggregatorKind& kind,
                   std::size_t* antipodal_pairs) {
  if (static_cast<std::size_t>(h.rows()) != graph.n) {
    fail(ErrorCode::ContractViolation, "feature rows do not match the graph node count");
  }
  switch (kind.kind) {
    case Aggregator::Mean: return mean_step(h, graph);
    case Aggregator::Laplacian: return laplacian_step(h, graph);
    case Aggregator::Attention: return attention_step(h, graph, kind.tau);
    case Aggregator::Geodesic: return geodesic_step(h, graph, kind.tau, kind.alpha, antipodal_pairs);
  }
  fail(ErrorCode::UnsupportedOp, "unknown aggregator");
}

LayerTrace smooth(const Matrix& features, const Graph& graph, const AggregatorKind& kind,
                  std::size_t layers) {
  if (layers < 1) fail(ErrorCode::InvalidConfig, "smoothing needs at least one layer");
  if (static_cast<std::size_t>(features.rows()) != graph.n) {
    fail(ErrorCode::InvalidInput, "feature rows (" + std::to_string(features.rows()) +
                                      ") do not match graph nodes (" + std::to_string(graph.n) + ")");
  }
  if ((kind.kind == Aggregator::Attention || kind.kind == Aggregator::Geodesic) && !(kind.tau > 0.0)) {
    fail(ErrorCode::InvalidConfig, "temperature must be positive");
  }
  if (kind.kind == Aggregator::Geodesic && !(kind.alpha >= 0.0)) {
    fail(ErrorCode::InvalidConfig, "geodesic step must be non-negative");
  }

  LayerTrace trace;
  trace.snapshots.reserve(layers + 1);
  trace.snapshots.push_back(features);
  Matrix h = features;
  if (kind.kind == Aggregator::Geodesic) {
    const std::vector<double> norms = row_norms(features);
    for (Eigen::Index i = 0; i < h.rows(); ++i) h.row(i) /= norms[static_cast<std::size_t>(i)];
  }
  for (std::size_t l = 0; l < layers; ++l) {
    h = smooth_step(h, graph, kind, &trace.antipodal_pairs);
    trace.snapshots.push_back(h);
  }
  return trace;
}

}  // namespace geognn::smoothing
