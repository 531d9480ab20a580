#include "geognn/model.hpp"

#include "geognn/errors.hpp"
#include "geognn/io.hpp"
#include "geognn/sphere.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <string>

namespace geognn {

using ad::Var;

void ModelConfig::validate() const {
  if (layers < 1) fail(ErrorCode::InvalidConfig, "model: layers must be at least 1");
  if (heads < 1) fail(ErrorCode::InvalidConfig, "model: heads must be at least 1");
  if (head_dim < 2) fail(ErrorCode::InvalidConfig, "model: head_dim must be at least 2");
  if (!(tau > 0.0)) fail(ErrorCode::InvalidConfig, "model: tau must be positive");
  if (!(alpha >= 0.0)) fail(ErrorCode::InvalidConfig, "model: alpha must be non-negative");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorCode::InvalidConfig, "model: dropout must lie in [0, 1)");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"layers", c.layers},
          {"heads", c.heads},
          {"head_dim", c.head_dim},
          {"tau", c.tau},
          {"alpha", c.alpha},
          {"dropout", c.dropout},
          {"no_geodesic", c.no_geodesic},
          {"no_cos", c.no_cos},
          {"no_normalization", c.no_normalization},
          {"seed", c.seed}};
}

EdgeIndex EdgeIndex::from_graph(const Graph& graph) {
  std::vector<std::size_t> src;
  std::vector<std::size_t> dst;
  src.reserve(graph.num_entries());
  dst.reserve(graph.num_entries());
  EdgeIndex idx;
  idx.n = graph.n;
  idx.uniform_weights.resize(static_cast<Eigen::Index>(graph.num_entries()), 1);
  for (NodeId i = 0; i < graph.n; ++i) {
    const double w = 1.0 / static_cast<double>(std::max<std::size_t>(graph.degree(i), 1));
    for (NodeId j : graph.neighbors(i)) {
      idx.uniform_weights(static_cast<Eigen::Index>(src.size()), 0) = w;
      src.push_back(i);
      dst.push_back(j);
    }
  }
  idx.src = ad::make_index(std::move(src));
  idx.dst = ad::make_index(std::move(dst));
  idx.offsets = ad::make_index(graph.row_offsets);
  return idx;
}

namespace {

constexpr double kCosLo = -1.0 + sphere::kClampEps;
constexpr double kCosHi = 1.0 - sphere::kClampEps;

Var head_forward(ad::Tape& tape, Var z, const EdgeIndex& edges, const ModelConfig& config,
                 ForwardDiagnostics* diag) {
  const std::size_t degenerate_before = tape.degenerate_rows();
  const Var x = ad::row_normalize(z);
  if (diag != nullptr && !config.no_normalization) {
    diag->degenerate_rows += tape.degenerate_rows() - degenerate_before;
  }
  const Var xi = ad::gather_rows(x, edges.src);
  const Var xj = ad::gather_rows(x, edges.dst);
  const Var c = ad::row_dot(xi, xj);
  const Var cc = ad::clamp(c, kCosLo, kCosHi);

  if (diag != nullptr) {
    const Matrix& cv = c.value();
    for (Eigen::Index e = 0; e < cv.rows(); ++e) {
      if (cv(e, 0) < -1.0 + sphere::kAntipodalEps) ++diag->antipodal_pairs;
    }
  }

  const Var a = config.no_cos ? tape.constant(edges.uniform_weights)
                              : ad::segment_softmax(ad::scale(cc, 1.0 / config.tau), edges.offsets);

  if (config.no_normalization) {
    // Euclidean weighted average of the raw projections.
    return ad::scatter_add_rows(ad::row_scale(a, ad::gather_rows(z, edges.dst)), edges.src, edges.n);
  }
  if (config.no_geodesic) {
    return ad::scatter_add_rows(ad::row_scale(a, xj), edges.src, edges.n);
  }
  const Var theta = ad::acos(cc);
  const Var coef = ad::div(theta, ad::sin(theta));
  const Var v = ad::row_scale(coef, ad::sub(xj, ad::row_scale(c, xi)));
  const Var u = ad::scatter_add_rows(ad::row_scale(a, v), edges.src, edges.n);
  return ad::row_normalize(ad::sphere_exp_rows(x, u, config.alpha));
}

}  // namespace

Var geo_layer_forward(ad::Tape& tape, Var h_in, Var weight, const EdgeIndex& edges,
                      const ModelConfig& config, ForwardDiagnostics* diag) {
  if (static_cast<std::size_t>(h_in.rows()) != edges.n) {
    fail(ErrorCode::ContractViolation, "layer input rows do not match the graph");
  }
  if (static_cast<std::size_t>(weight.rows()) != config.width() || weight.cols() != h_in.cols()) {
    fail(ErrorCode::ContractViolation, "layer weight shape does not match the configuration");
  }
  const Var z = ad::matmul(h_in, ad::transpose(weight));
  std::vector<Var> heads;
  heads.reserve(config.heads);
  for (std::size_t hd = 0; hd < config.heads; ++hd) {
    const Var zh = config.heads == 1 ? z : ad::slice_cols(z, hd * config.head_dim, config.head_dim);
    heads.push_back(head_forward(tape, zh, edges, config, diag));
  }
  return heads.size() == 1 ? heads.front() : ad::concat_cols(heads);
}

const char* to_string(Similarity s) noexcept { return s == Similarity::Dot ? "dot" : "cosine"; }

Similarity parse_similarity(const std::string& name) {
  if (name == "dot") return Similarity::Dot;
  if (name == "cosine") return Similarity::Cosine;
  fail(ErrorCode::InvalidConfig, "unknown similarity '" + name + "'");
}

double score_link(const Vector& hu, const Vector& hv, Similarity similarity) {
  if (hu.size() != hv.size()) fail(ErrorCode::ContractViolation, "score_link: length mismatch");
  double s = hu.dot(hv);
  if (similarity == Similarity::Cosine) s /= hu.norm() * hv.norm();
  return 1.0 / (1.0 + std::exp(-s));
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const RowVector e = (logits.row(i).array() - logits.row(i).maxCoeff()).exp().matrix();
    p.row(i) = e / e.sum();
  }
  return p;
}

Matrix glorot_uniform(std::size_t fan_out, std::size_t fan_in, Rng& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-s, s);
  Matrix w(static_cast<Eigen::Index>(fan_out), static_cast<Eigen::Index>(fan_in));
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
  }
  return w;
}

GeoModel::GeoModel(const ModelConfig& config, std::size_t in_dim, std::size_t classes)
    : config_(config), in_dim_(in_dim), classes_(classes) {
  config_.validate();
  if (in_dim < 1) fail(ErrorCode::InvalidConfig, "model: input dimension must be positive");
  Rng rng(config_.seed);
  std::size_t fan_in = in_dim;
  for (std::size_t l = 0; l < config_.layers; ++l) {
    weights_.emplace_back("W" + std::to_string(l), glorot_uniform(config_.width(), fan_in, rng));
    fan_in = config_.width();
  }
  if (classes > 0) head_.emplace("W_out", glorot_uniform(classes, config_.width(), rng));
}

std::vector<ad::Parameter*> GeoModel::parameters() {
  std::vector<ad::Parameter*> out;
  for (auto& w : weights_) out.push_back(&w);
  if (head_) out.push_back(&*head_);
  return out;
}

std::vector<const ad::Parameter*> GeoModel::parameters() const {
  std::vector<const ad::Parameter*> out;
  for (const auto& w : weights_) out.push_back(&w);
  if (head_) out.push_back(&*head_);
  return out;
}

Var GeoModel::forward(ad::Tape& tape, Var features, const EdgeIndex& edges, bool training, Rng& rng,
                      ForwardDiagnostics* diag) {
  Var h = features;
  for (std::size_t l = 0; l < config_.layers; ++l) {
    ad::Parameter& w = weights_[l];
    const Var wv = tape.bind(w);
    h = geo_layer_forward(tape, h, wv, edges, config_, diag);
    if (!h.value().allFinite()) {
      fail(ErrorCode::NumericFailure, "non-finite activations after layer " + std::to_string(l));
    }
    if (diag != nullptr && diag->on_layer) diag->on_layer(l, h.value());
    if (training && config_.dropout > 0.0 && l + 1 < config_.layers) {
      h = ad::apply_mask(h, ad::dropout_mask(h.rows(), h.cols(), config_.dropout, rng));
    }
  }
  return h;
}

Var GeoModel::output(ad::Tape& tape, Var features, const EdgeIndex& edges, bool training, Rng& rng,
                     ForwardDiagnostics* diag) {
  const Var h = forward(tape, features, edges, training, rng, diag);
  if (!head_) return h;
  const Var wo = tape.bind(*head_);
  return ad::matmul(h, ad::transpose(wo));
}

Matrix GeoModel::embed(const Matrix& features, const Graph& graph) {
  ad::Tape tape;
  Rng rng(0);
  const EdgeIndex edges = EdgeIndex::from_graph(graph);
  return forward(tape, tape.constant(features), edges, false, rng).value();
}

Matrix GeoModel::classify(const Matrix& features, const Graph& graph) {
  if (!head_) fail(ErrorCode::ContractViolation, "classify() on a model without a classification head");
  ad::Tape tape;
  Rng rng(0);
  const EdgeIndex edges = EdgeIndex::from_graph(graph);
  return softmax_rows(output(tape, tape.constant(features), edges, false, rng).value());
}

namespace {

constexpr char kCheckpointMagic[8] = {'G', 'E', 'O', 'C', 'K', 'P', 'T', '1'};
static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void append_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.layers = j.at("layers").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.head_dim = j.at("head_dim").get<std::size_t>();
  c.tau = j.at("tau").get<double>();
  c.alpha = j.at("alpha").get<double>();
  c.dropout = j.at("dropout").get<double>();
  c.no_geodesic = j.at("no_geodesic").get<bool>();
  c.no_cos = j.at("no_cos").get<bool>();
  c.no_normalization = j.at("no_normalization").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void GeoModel::save(const std::string& path) const {
  nlohmann::json params = nlohmann::json::array();
  for (const ad::Parameter* p : parameters()) {
    params.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
  }
  const nlohmann::json header = {{"config", to_json(config_)},
                                 {"in_dim", in_dim_},
                                 {"classes", classes_},
                                 {"seed", config_.seed},
                                 {"params", params}};
  const std::string text = header.dump();
  std::string bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  append_u64(bytes, text.size());
  bytes += text;
  for (const ad::Parameter* p : parameters()) {
    bytes.append(reinterpret_cast<const char*>(p->value.data()),
                 static_cast<std::size_t>(p->value.size()) * sizeof(double));
  }
  io::atomic_write(path, bytes);
}

GeoModel GeoModel::load(const std::string& path) {
  const std::string bytes = io::read_file(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    fail(ErrorCode::Format, path + ": not a GeoGNN checkpoint");
  }
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + 8, 8);
  if (header_len > bytes.size() - 16) fail(ErrorCode::Corruption, path + ": truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Corruption, path + ": unreadable checkpoint header: " + e.what());
  }
  GeoModel model;
  try {
    model = GeoModel(config_from_json(header.at("config")), header.at("in_dim").get<std::size_t>(),
                     header.at("classes").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Format, path + ": incomplete checkpoint header: " + e.what());
  }
  std::size_t offset = 16 + header_len;
  const auto& listed = header.at("params");
  auto params = model.parameters();
  if (listed.size() != params.size()) fail(ErrorCode::Format, path + ": parameter list does not match the model");
  for (std::size_t k = 0; k < params.size(); ++k) {
    ad::Parameter& p = *params[k];
    if (listed[k].at("rows").get<Eigen::Index>() != p.value.rows() ||
        listed[k].at("cols").get<Eigen::Index>() != p.value.cols()) {
      fail(ErrorCode::Format, path + ": shape of '" + p.name + "' does not match the model");
    }
    const std::size_t len = static_cast<std::size_t>(p.value.size()) * sizeof(double);
    if (offset + len > bytes.size()) fail(ErrorCode::Corruption, path + ": truncated parameter block");
    std::memcpy(p.value.data(), bytes.data() + offset, len);
    offset += len;
    if (!p.value.allFinite()) fail(ErrorCode::Validation, path + ": non-finite values in '" + p.name + "'");
  }
  if (offset != bytes.size()) fail(ErrorCode::Corruption, path + ": trailing bytes after parameters");
  return model;
}

MlpModel::MlpModel(std::size_t in_dim, std::size_t hidden, std::size_t classes, double dropout,
                   std::uint64_t seed)
    : dropout_(dropout) {
  if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorCode::InvalidConfig, "mlp: dropout must lie in [0, 1)");
  Rng rng(seed);
  w1_ = ad::Parameter("mlp_W1", glorot_uniform(hidden, in_dim, rng));
  b1_ = ad::Parameter("mlp_b1", Matrix::Zero(1, static_cast<Eigen::Index>(hidden)));
  w2_ = ad::Parameter("mlp_W2", glorot_uniform(classes, hidden, rng));
  b2_ = ad::Parameter("mlp_b2", Matrix::Zero(1, static_cast<Eigen::Index>(classes)));
}

std::vector<ad::Parameter*> MlpModel::parameters() { return {&w1_, &b1_, &w2_, &b2_}; }

Var MlpModel::output(ad::Tape& tape, Var features, const EdgeIndex&, bool training, Rng& rng,
                     ForwardDiagnostics*) {
  auto bound = [&](ad::Parameter& p) { return tape.bind(p); };
  Var h = ad::relu(ad::add_row_broadcast(ad::matmul(features, ad::transpose(bound(w1_))), bound(b1_)));
  if (training && dropout_ > 0.0) {
    h = ad::apply_mask(h, ad::dropout_mask(h.rows(), h.cols(), dropout_, rng));
  }
  return ad::add_row_broadcast(ad::matmul(h, ad::transpose(bound(w2_))), bound(b2_));
}

}  // namespace geognn
