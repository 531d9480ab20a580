#include "geognn/synth.hpp"

#include "geognn/errors.hpp"
#include "geognn/sphere.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace geognn::synth {

void SynthSpec::validate() const {
  if (n < 1) fail(ErrorCode::Validation, "synth: need at least one node");
  if (d < 2) fail(ErrorCode::Validation, "synth: dimension must be at least 2");
  if (classes < 1) fail(ErrorCode::Validation, "synth: need at least one class");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) fail(ErrorCode::Validation, "synth: kappa must be positive");
  if (!(p_out >= 0.0) || !(p_in > p_out) || p_in > 1.0) {
    fail(ErrorCode::Validation, "synth: need 0 <= p_out < p_in <= 1");
  }
  if (manifold_dim < 1) fail(ErrorCode::Validation, "synth: manifold dimension must be at least 1");
}

std::size_t SynthSpec::effective_manifold_dim() const { return std::min(manifold_dim, d - 1); }

namespace {

struct Frame {
  Matrix basis;  // d x (m+1), orthonormal columns
  Matrix means;  // C x (m+1), unit rows
};

Frame make_frame(const SynthSpec& spec, Rng& rng) {
  const auto d = static_cast<Eigen::Index>(spec.d);
  const auto m1 = static_cast<Eigen::Index>(spec.effective_manifold_dim() + 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd g(d, m1);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < m1; ++j) g(i, j) = gauss(rng);
  }
  Frame f;
  if (m1 == d) {
    f.basis = Matrix::Identity(d, d);
  } else {
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    f.basis = qr.householderQ() * Eigen::MatrixXd::Identity(d, m1);
  }
  f.means.resize(static_cast<Eigen::Index>(spec.classes), m1);
  for (Eigen::Index c = 0; c < f.means.rows(); ++c) {
    Vector v(m1);
    do {
      for (Eigen::Index j = 0; j < m1; ++j) v(j) = gauss(rng);
    } while (v.norm() < 1e-12);
    f.means.row(c) = v.normalized().transpose();
  }
  return f;
}

/// One draw around `mean` (unit, intrinsic coordinates).
Vector sample_around(const Vector& mean, double kappa, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(kappa));
  Vector t(mean.size());
  for (Eigen::Index j = 0; j < t.size(); ++j) t(j) = gauss(rng);
  t -= t.dot(mean) * mean;
  return sphere::exp_map(mean, t, 1.0);
}

}  // namespace

SynthData generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const Frame frame = make_frame(spec, rng);

  SynthData data;
  data.class_means = frame.means * frame.basis.transpose();
  data.labels.resize(spec.n);
  std::uniform_int_distribution<std::size_t> pick_class(0, spec.classes - 1);
  for (auto& y : data.labels) y = pick_class(rng);

  data.features.resize(static_cast<Eigen::Index>(spec.n), static_cast<Eigen::Index>(spec.d));
  for (std::size_t i = 0; i < spec.n; ++i) {
    const Vector mean = frame.means.row(static_cast<Eigen::Index>(data.labels[i])).transpose();
    const Vector p = frame.basis * sample_around(mean, spec.kappa, rng);
    data.features.row(static_cast<Eigen::Index>(i)) = (p / p.norm()).transpose();
  }

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (std::size_t u = 0; u < spec.n; ++u) {
    for (std::size_t v = u + 1; v < spec.n; ++v) {
      const double p = data.labels[u] == data.labels[v] ? spec.p_in : spec.p_out;
      if (coin(rng) < p) data.edges.push_back({u, v});
    }
  }
  return data;
}

double expected_separability(const SynthSpec& spec, std::size_t samples) {
  spec.validate();
  if (spec.classes == 1) return 1.0;
  Rng rng(spec.seed);
  const Frame frame = make_frame(spec, rng);
  std::uniform_int_distribution<std::size_t> pick_class(0, spec.classes - 1);
  std::size_t correct = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t y = pick_class(rng);
    const Vector mean = frame.means.row(static_cast<Eigen::Index>(y)).transpose();
    const Vector x = sample_around(mean, spec.kappa, rng);
    Eigen::Index best = 0;
    (frame.means * x).maxCoeff(&best);
    correct += static_cast<std::size_t>(best) == y ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(samples);
}

NodeSplit split_nodes(std::size_t n, SplitRatios ratios, std::uint64_t seed) {
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    fail(ErrorCode::InvalidConfig, "split ratios must be non-negative and sum to 1");
  }
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::llround(ratios.val * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::llround(ratios.test * static_cast<double>(n)));
  if (n_val + n_test >= n) fail(ErrorCode::InvalidConfig, "node split leaves no training nodes");
  NodeSplit split;
  split.val.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_val),
                    ids.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  split.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), ids.end());
  return split;
}

nlohmann::json to_json(const SynthSpec& spec) {
  return {{"nodes", spec.n},       {"dim", spec.d},          {"classes", spec.classes},
          {"kappa", spec.kappa},   {"p_in", spec.p_in},      {"p_out", spec.p_out},
          {"manifold_dim", spec.effective_manifold_dim()}, {"seed", spec.seed}};
}

}  // namespace geognn::synth
