#include "geognn/train.hpp"

#include "geognn/autodiff/adam.hpp"
#include "geognn/errors.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

namespace geognn::train {

const char* to_string(Task task) noexcept { return task == Task::Node ? "node" : "link"; }

Task parse_task(const std::string& name) {
  if (name == "node") return Task::Node;
  if (name == "link") return Task::Link;
  fail(ErrorCode::InvalidConfig, "unknown task '" + name + "'");
}

void TrainConfig::validate() const {
  if (epochs < 1) fail(ErrorCode::InvalidConfig, "train: epochs must be at least 1");
  if (!(lr > 0.0)) fail(ErrorCode::InvalidConfig, "train: lr must be positive");
  if (seeds.empty()) fail(ErrorCode::InvalidConfig, "train: need at least one seed");
  if (eval_k < 1) fail(ErrorCode::InvalidConfig, "train: eval_k must be at least 1");
  if (task == Task::Link && neg_per_pos < eval_k) {
    fail(ErrorCode::InvalidConfig, "train: neg_per_pos must be at least eval_k");
  }
  if (mlp_hidden < 1) fail(ErrorCode::InvalidConfig, "train: mlp_hidden must be positive");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"task", to_string(c.task)},
          {"epochs", c.epochs},
          {"lr", c.lr},
          {"seeds", c.seeds},
          {"patience", c.patience},
          {"neg_per_pos", c.neg_per_pos},
          {"eval_k", c.eval_k},
          {"similarity", to_string(c.similarity)},
          {"ratios", {c.ratios.train, c.ratios.val, c.ratios.test}},
          {"split_seed", c.split_seed},
          {"self_loops", c.self_loops},
          {"mlp_hidden", c.mlp_hidden}};
}

nlohmann::json to_json(const MetricsRecord& r, const nlohmann::json& config) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val", e.val}});
  }
  return {{"task", to_string(r.task)},
          {"seed", r.seed},
          {"config", config},
          {"epochs", epochs},
          {"test", r.test},
          {"best_epoch", r.best_epoch},
          {"best_val", r.best_val},
          {"train_metric", r.train_metric},
          {"antipodal_pairs", r.antipodal_pairs},
          {"degenerate_rows", r.degenerate_rows}};
}

double evaluate_accuracy(const Matrix& probabilities, const Labels& labels,
                         const std::vector<std::size_t>& ids) {
  if (ids.empty()) fail(ErrorCode::InvalidInput, "accuracy over an empty id list");
  std::size_t correct = 0;
  for (std::size_t id : ids) {
    if (id >= labels.size() || id >= static_cast<std::size_t>(probabilities.rows())) {
      fail(ErrorCode::InvalidInput, "accuracy: node id " + std::to_string(id) + " out of range");
    }
    const auto row = probabilities.row(static_cast<Eigen::Index>(id));
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < row.size(); ++c) {
      if (row(c) > row(best)) best = c;
    }
    correct += static_cast<std::size_t>(best) == labels[id] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(ids.size());
}

double hit_at_k(const std::vector<double>& pos_scores, const std::vector<double>& neg_scores,
                std::size_t neg_per_pos, std::size_t k) {
  if (neg_per_pos < k) fail(ErrorCode::InvalidConfig, "Hit@k needs at least k negatives per positive");
  if (pos_scores.empty()) fail(ErrorCode::InvalidInput, "Hit@k over an empty positive set");
  if (neg_scores.size() != pos_scores.size() * neg_per_pos) {
    fail(ErrorCode::ContractViolation, "Hit@k: negative count does not match neg_per_pos");
  }
  std::size_t hits = 0;
  for (std::size_t p = 0; p < pos_scores.size(); ++p) {
    std::size_t rank = 1;
    for (std::size_t q = 0; q < neg_per_pos; ++q) {
      if (neg_scores[p * neg_per_pos + q] >= pos_scores[p]) ++rank;
    }
    hits += rank <= k ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(pos_scores.size());
}

std::vector<double> pair_scores(const Matrix& emb, const EdgeList& pairs, Similarity similarity) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const Edge& e : pairs) {
    const auto u = emb.row(static_cast<Eigen::Index>(e.src));
    const auto v = emb.row(static_cast<Eigen::Index>(e.dst));
    double s = u.dot(v);
    if (similarity == Similarity::Cosine) s /= u.norm() * v.norm();
    out.push_back(s);
  }
  return out;
}

double evaluate_hit_at_k(const Matrix& embeddings, const EdgeList& positives, const EdgeList& negatives,
                         std::size_t neg_per_pos, std::size_t k, Similarity similarity) {
  return hit_at_k(pair_scores(embeddings, positives, similarity),
                  pair_scores(embeddings, negatives, similarity), neg_per_pos, k);
}

LinkTaskData make_link_task(Matrix features, const Graph& full, const TrainConfig& config) {
  LinkTaskData data;
  data.features = std::move(features);
  data.split = split_edges(full, config.ratios, config.neg_per_pos, config.split_seed);
  data.train_graph = build_csr(data.split.train, full.n, config.self_loops, true);
  return data;
}

namespace {

struct Snapshot {
  std::vector<Matrix> values;

  static Snapshot take(Network& net) {
    Snapshot s;
    for (ad::Parameter* p : net.parameters()) s.values.push_back(p->value);
    return s;
  }
  void restore(Network& net) const {
    auto params = net.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = values[k];
  }
};

Matrix evaluation_output(Network& net, const Matrix& features, const EdgeIndex& edges) {
  ad::Tape tape;
  Rng unused(0);
  return net.output(tape, tape.constant(features), edges, false, unused).value();
}

/// Shared epoch loop. `step` builds the training loss on a tape; `evaluate`
/// returns (val, test, train) metrics in evaluation mode.
template <typename Step, typename Evaluate>
MetricsRecord fit(Network& net, const TrainConfig& config, Task task, std::uint64_t seed, Step step,
                  Evaluate evaluate) {
  MetricsRecord record;
  record.task = task;
  record.seed = seed;
  auto params = net.parameters();
  std::vector<ad::AdamState> states;
  for (ad::Parameter* p : params) states.push_back(ad::AdamState::for_param(*p, config.lr));
  Rng rng(seed);
  Snapshot best = Snapshot::take(net);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    ForwardDiagnostics diag;
    double loss_value = 0.0;
    try {
      ad::Tape tape;
      const ad::Var loss = step(tape, rng, diag);
      loss_value = loss.scalar();
      if (!std::isfinite(loss_value)) fail(ErrorCode::NumericFailure, "non-finite training loss");
      ad::grad(loss, params);
      for (std::size_t k = 0; k < params.size(); ++k) ad::adam_step(*params[k], states[k]);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NumericFailure) throw;
      fail(ErrorCode::NumericFailure,
           fmt::format("epoch {}: {} (antipodal pairs so far {}, degenerate rows {})", epoch, e.what(),
                       record.antipodal_pairs + diag.antipodal_pairs,
                       record.degenerate_rows + diag.degenerate_rows));
    }
    record.antipodal_pairs += diag.antipodal_pairs;
    record.degenerate_rows += diag.degenerate_rows;

    const auto [val, test, train_metric] = evaluate();
    record.epochs.push_back({epoch, loss_value, val});
    if (val > record.best_val) {
      record.best_val = val;
      record.best_epoch = epoch;
      record.test = test;
      record.train_metric = train_metric;
      best = Snapshot::take(net);
    }
    if (epoch % 100 == 0) {
      spdlog::debug("seed {} epoch {} loss {:.6f} val {:.4f}", seed, epoch, loss_value, val);
    }
    if (config.patience > 0 && epoch - record.best_epoch >= config.patience) break;
  }
  best.restore(net);
  return record;
}

}  // namespace

MetricsRecord train_node_classifier(Network& net, const TrainConfig& config, const NodeTaskData& data,
                                    std::uint64_t seed) {
  config.validate();
  if (data.labels.size() != data.graph.n || static_cast<std::size_t>(data.features.rows()) != data.graph.n) {
    fail(ErrorCode::InvalidInput, "node task: features, labels and graph disagree on the node count");
  }
  const EdgeIndex edges = EdgeIndex::from_graph(data.graph);
  Labels train_labels;
  for (std::size_t id : data.split.train) train_labels.push_back(data.labels.at(id));

  auto step = [&](ad::Tape& tape, Rng& rng, ForwardDiagnostics& diag) {
    const ad::Var logits = net.output(tape, tape.constant(data.features), edges, true, rng, &diag);
    return ad::softmax_cross_entropy(logits, train_labels, data.split.train);
  };
  auto evaluate = [&]() {
    const Matrix probs = softmax_rows(evaluation_output(net, data.features, edges));
    return std::tuple{evaluate_accuracy(probs, data.labels, data.split.val),
                      evaluate_accuracy(probs, data.labels, data.split.test),
                      evaluate_accuracy(probs, data.labels, data.split.train)};
  };
  return fit(net, config, Task::Node, seed, step, evaluate);
}

MetricsRecord train_link_predictor(Network& net, const TrainConfig& config, const LinkTaskData& data,
                                   std::uint64_t seed) {
  config.validate();
  if (static_cast<std::size_t>(data.features.rows()) != data.train_graph.n) {
    fail(ErrorCode::InvalidInput, "link task: features and graph disagree on the node count");
  }
  if (data.split.train.empty()) fail(ErrorCode::InvalidInput, "link task: no training positives");
  const EdgeIndex edges = EdgeIndex::from_graph(data.train_graph);
  const std::size_t m = data.split.train.size();
  std::vector<double> targets(2 * m, 0.0);
  std::fill(targets.begin(), targets.begin() + static_cast<std::ptrdiff_t>(m), 1.0);

  auto step = [&](ad::Tape& tape, Rng& rng, ForwardDiagnostics& diag) {
    ad::Var h = net.output(tape, tape.constant(data.features), edges, true, rng, &diag);
    if (config.similarity == Similarity::Cosine) h = ad::row_normalize(h);
    const EdgeList negatives = sample_negatives(data.train_graph, m, rng);
    std::vector<std::size_t> us;
    std::vector<std::size_t> vs;
    us.reserve(2 * m);
    vs.reserve(2 * m);
    for (const Edge& e : data.split.train) {
      us.push_back(e.src);
      vs.push_back(e.dst);
    }
    for (const Edge& e : negatives) {
      us.push_back(e.src);
      vs.push_back(e.dst);
    }
    const ad::Var scores = ad::row_dot(ad::gather_rows(h, ad::make_index(std::move(us))),
                                       ad::gather_rows(h, ad::make_index(std::move(vs))));
    return ad::bce_with_logits(scores, targets);
  };
  auto evaluate = [&]() {
    const Matrix emb = evaluation_output(net, data.features, edges);
    const double val = data.split.val.empty()
                           ? 0.0
                           : evaluate_hit_at_k(emb, data.split.val, data.split.val_neg, data.split.neg_per_pos,
                                               config.eval_k, config.similarity);
    const double test = evaluate_hit_at_k(emb, data.split.test, data.split.test_neg, data.split.neg_per_pos,
                                          config.eval_k, config.similarity);
    return std::tuple{val, test, 0.0};
  };
  return fit(net, config, Task::Link, seed, step, evaluate);
}

double evaluate_node(Network& net, const NodeTaskData& data, const std::vector<std::size_t>& ids) {
  const EdgeIndex edges = EdgeIndex::from_graph(data.graph);
  return evaluate_accuracy(softmax_rows(evaluation_output(net, data.features, edges)), data.labels, ids);
}

double evaluate_link(Network& net, const TrainConfig& config, const LinkTaskData& data) {
  const EdgeIndex edges = EdgeIndex::from_graph(data.train_graph);
  const Matrix emb = evaluation_output(net, data.features, edges);
  return evaluate_hit_at_k(emb, data.split.test, data.split.test_neg, data.split.neg_per_pos, config.eval_k,
                           config.similarity);
}

RunResult run_geognn(ModelConfig model_config, const TrainConfig& config, const NodeTaskData& data,
                     std::uint64_t seed) {
  model_config.seed = seed;
  RunResult result{GeoModel(model_config, static_cast<std::size_t>(data.features.cols()), data.classes), {}};
  result.metrics = train_node_classifier(result.model, config, data, seed);
  return result;
}

RunResult run_geognn(ModelConfig model_config, const TrainConfig& config, const LinkTaskData& data,
                     std::uint64_t seed) {
  model_config.seed = seed;
  RunResult result{GeoModel(model_config, static_cast<std::size_t>(data.features.cols()), 0), {}};
  result.metrics = train_link_predictor(result.model, config, data, seed);
  return result;
}

MetricsRecord run_mlp(double dropout, const TrainConfig& config, const NodeTaskData& data,
                      std::uint64_t seed) {
  MlpModel mlp(static_cast<std::size_t>(data.features.cols()), config.mlp_hidden, data.classes, dropout, seed);
  return train_node_classifier(mlp, config, data, seed);
}

SeedSummary summarize(std::vector<MetricsRecord> runs) {
  SeedSummary s;
  s.runs = std::move(runs);
  if (s.runs.empty()) return s;
  double total = 0.0;
  for (const auto& r : s.runs) total += r.test;
  s.mean_test = total / static_cast<double>(s.runs.size());
  double sq = 0.0;
  for (const auto& r : s.runs) sq += (r.test - s.mean_test) * (r.test - s.mean_test);
  s.std_test = std::sqrt(sq / static_cast<double>(s.runs.size()));
  return s;
}

std::vector<GridCell> gridsearch(const ModelConfig& base, const TrainConfig& config, const GridSpec& grid,
                                 const NodeTaskData* node_data, const LinkTaskData* link_data) {
  if ((config.task == Task::Node && node_data == nullptr) || (config.task == Task::Link && link_data == nullptr)) {
    fail(ErrorCode::ContractViolation, "gridsearch: missing task data");
  }
  auto or_base = [](const auto& values, auto fallback) {
    return values.empty() ? std::vector<decltype(fallback)>{fallback} : values;
  };
  const auto taus = or_base(grid.taus, base.tau);
  const auto alphas = or_base(grid.alphas, base.alpha);
  const auto layer_list = or_base(grid.layers, base.layers);
  const auto head_list = or_base(grid.heads, base.heads);

  std::vector<GridCell> cells;
  for (std::size_t layers : layer_list) {
    for (std::size_t heads : head_list) {
      for (double tau : taus) {
        for (double alpha : alphas) {
          ModelConfig mc = base;
          mc.tau = tau;
          mc.alpha = alpha;
          mc.layers = layers;
          mc.heads = heads;
          for (std::uint64_t seed : config.seeds) {
            GridCell cell{tau, alpha, layers, heads, seed, 0.0, 0.0, "ok"};
            try {
              const RunResult r = config.task == Task::Node ? run_geognn(mc, config, *node_data, seed)
                                                            : run_geognn(mc, config, *link_data, seed);
              cell.val = r.metrics.best_val;
              cell.test = r.metrics.test;
            } catch (const Error& e) {
              cell.status = geognn::to_string(e.code());
              std::replace(cell.status.begin(), cell.status.end(), ' ', '_');
              cell.val = std::nan("");
              cell.test = std::nan("");
              spdlog::warn("grid cell tau={} alpha={} L={} H={} seed={} failed: {}", tau, alpha, layers, heads,
                           seed, e.what());
            }
            cells.push_back(cell);
          }
        }
      }
    }
  }
  return cells;
}

std::string grid_csv(const std::vector<GridCell>& cells) {
  std::string out = "tau,alpha,layers,heads,seed,val,test,status\n";
  for (const auto& c : cells) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", c.tau, c.alpha, c.layers, c.heads, c.seed, c.val, c.test,
                       c.status);
  }
  return out;
}

}  // namespace geognn::train
