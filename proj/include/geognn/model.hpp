#pragma once

#include "geognn/autodiff/ops.hpp"
#include "geognn/graph.hpp"
#include "geognn/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace geognn {

struct ModelConfig {
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t head_dim = 16;
  double tau = 1.0;
  double alpha = 0.5;
  double dropout = 0.5;
  bool no_geodesic = false;
  bool no_cos = false;
  bool no_normalization = false;
  std::uint64_t seed = 0;

  /// Throws InvalidConfig when L, H < 1, d_h < 2, tau <= 0, alpha < 0 or
  /// dropout outside [0, 1).
  void validate() const;
  std::size_t width() const { return heads * head_dim; }
};

nlohmann::json to_json(const ModelConfig& config);

/// Edge arrays derived from a CSR graph for the tape ops: src[e] = i and
/// dst[e] = j for the e-th stored entry (i, j); offsets are the CSR rows.
struct EdgeIndex {
  std::size_t n = 0;
  ad::IndexArray src;
  ad::IndexArray dst;
  ad::IndexArray offsets;
  Matrix uniform_weights;  // E x 1, 1 / |N(i)|

  static EdgeIndex from_graph(const Graph& graph);
  std::size_t num_edges() const { return src->size(); }
};

/// Counters collected during one forward pass.
struct ForwardDiagnostics {
  std::size_t antipodal_pairs = 0;
  std::size_t degenerate_rows = 0;
  /// Called with (layer index, layer output) after every layer.
  std::function<void(std::size_t, const Matrix&)> on_layer;
};

/// One GeoGNN layer on the tape. Returns the n x (H * d_h) concatenation of
/// the head outputs.
ad::Var geo_layer_forward(ad::Tape& tape, ad::Var h_in, ad::Var weight, const EdgeIndex& edges,
                          const ModelConfig& config, ForwardDiagnostics* diag = nullptr);

enum class Similarity { Dot, Cosine };
const char* to_string(Similarity s) noexcept;
Similarity parse_similarity(const std::string& name);

/// sigma(sim(h_u, h_v)).
double score_link(const Vector& hu, const Vector& hv, Similarity similarity);

/// Row-wise softmax.
Matrix softmax_rows(const Matrix& logits);

/// Anything the trainer can fit: a parameter list plus a forward pass that
/// produces logits (classification) or embeddings (link prediction).
class Network {
 public:
  virtual ~Network() = default;
  virtual std::vector<ad::Parameter*> parameters() = 0;
  /// Binds the parameters to `tape`; `rng` drives dropout when `training` is set.
  virtual ad::Var output(ad::Tape& tape, ad::Var features, const EdgeIndex& edges, bool training,
                         Rng& rng, ForwardDiagnostics* diag = nullptr) = 0;
};

/// Stacked GeoGNN layers with an optional linear classification head.
class GeoModel : public Network {
 public:
  GeoModel() = default;
  /// classes == 0 builds an encoder without head (link prediction).
  GeoModel(const ModelConfig& config, std::size_t in_dim, std::size_t classes);

  const ModelConfig& config() const { return config_; }
  std::size_t in_dim() const { return in_dim_; }
  std::size_t classes() const { return classes_; }

  std::vector<ad::Parameter*> parameters() override;
  std::vector<const ad::Parameter*> parameters() const;

  /// Final layer embeddings H^(L).
  ad::Var forward(ad::Tape& tape, ad::Var features, const EdgeIndex& edges, bool training, Rng& rng,
                  ForwardDiagnostics* diag = nullptr);
  ad::Var output(ad::Tape& tape, ad::Var features, const EdgeIndex& edges, bool training, Rng& rng,
                 ForwardDiagnostics* diag = nullptr) override;

  /// Evaluation-mode embeddings without gradients.
  Matrix embed(const Matrix& features, const Graph& graph);
  /// Evaluation-mode class probabilities.
  Matrix classify(const Matrix& features, const Graph& graph);

  ad::Parameter& layer_weight(std::size_t l) { return weights_.at(l); }
  ad::Parameter* head() { return head_ ? &*head_ : nullptr; }

  void save(const std::string& path) const;
  static GeoModel load(const std::string& path);

 private:
  ModelConfig config_;
  std::size_t in_dim_ = 0;
  std::size_t classes_ = 0;
  std::vector<ad::Parameter> weights_;
  std::optional<ad::Parameter> head_;
};

/// Reference without message passing: Linear(d -> hidden) + bias, ReLU,
/// dropout, Linear(hidden -> C) + bias.
class MlpModel : public Network {
 public:
  MlpModel(std::size_t in_dim, std::size_t hidden, std::size_t classes, double dropout,
           std::uint64_t seed);

  std::vector<ad::Parameter*> parameters() override;
  ad::Var output(ad::Tape& tape, ad::Var features, const EdgeIndex& edges, bool training, Rng& rng,
                 ForwardDiagnostics* diag = nullptr) override;

 private:
  double dropout_;
  ad::Parameter w1_, b1_, w2_, b2_;
};

/// Uniform [-s, s] with s = sqrt(6 / (fan_in + fan_out)); shape fan_out x fan_in.
Matrix glorot_uniform(std::size_t fan_out, std::size_t fan_in, Rng& rng);

}  // namespace geognn
