#pragma once

#include "geognn/graph.hpp"
#include "geognn/model.hpp"
#include "geognn/synth.hpp"
#include "geognn/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace geognn::train {

enum class Task { Node, Link };
const char* to_string(Task task) noexcept;
Task parse_task(const std::string& name);

struct TrainConfig {
  Task task = Task::Node;
  std::size_t epochs = 1000;
  double lr = 1e-3;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  /// Epochs without a strictly better validation score before stopping; 0 disables.
  std::size_t patience = 0;
  std::size_t neg_per_pos = 100;
  std::size_t eval_k = 10;
  Similarity similarity = Similarity::Dot;
  SplitRatios ratios;
  std::uint64_t split_seed = 0;
  bool self_loops = true;
  std::size_t mlp_hidden = 64;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val = 0.0;
};

struct MetricsRecord {
  Task task = Task::Node;
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;
  /// Test metric at the best validation epoch.
  double test = 0.0;
  double best_val = -std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  /// Training-set metric at the best validation epoch (accuracy for node tasks).
  double train_metric = 0.0;
  std::size_t antipodal_pairs = 0;
  std::size_t degenerate_rows = 0;
};

nlohmann::json to_json(const MetricsRecord& record, const nlohmann::json& config);

/// Fraction of ids whose argmax (lowest class id on ties) equals the label.
double evaluate_accuracy(const Matrix& probabilities, const Labels& labels,
                         const std::vector<std::size_t>& ids);

/// neg_scores holds neg_per_pos scores per positive, in positive order. A
/// positive hits when 1 + #{negatives >= positive} <= k.
double hit_at_k(const std::vector<double>& pos_scores, const std::vector<double>& neg_scores,
                std::size_t neg_per_pos, std::size_t k);

/// Link logits sim(h_u, h_v) for every pair.
std::vector<double> pair_scores(const Matrix& embeddings, const EdgeList& pairs, Similarity similarity);

double evaluate_hit_at_k(const Matrix& embeddings, const EdgeList& positives, const EdgeList& negatives,
                         std::size_t neg_per_pos, std::size_t k, Similarity similarity);

struct NodeTaskData {
  Matrix features;
  Graph graph;
  Labels labels;
  synth::NodeSplit split;
  std::size_t classes = 0;
};

struct LinkTaskData {
  Matrix features;
  /// Message-passing graph over the training positives.
  Graph train_graph;
  EdgeSplit split;
};

/// Builds the link task: splits the edges of `full` and keeps only the
/// training positives (plus self-loops when requested) for message passing.
LinkTaskData make_link_task(Matrix features, const Graph& full, const TrainConfig& config);

/// Full-batch cross-entropy training with Adam. On return `net` holds the
/// parameters of the best validation epoch.
MetricsRecord train_node_classifier(Network& net, const TrainConfig& config, const NodeTaskData& data,
                                    std::uint64_t seed);

/// BCE over the training positives and as many negatives, resampled every
/// epoch against the training graph; validation and test use Hit@k.
MetricsRecord train_link_predictor(Network& net, const TrainConfig& config, const LinkTaskData& data,
                                   std::uint64_t seed);

/// Evaluation-mode accuracy on `ids` without training.
double evaluate_node(Network& net, const NodeTaskData& data, const std::vector<std::size_t>& ids);
/// Evaluation-mode Hit@k on the test split without training.
double evaluate_link(Network& net, const TrainConfig& config, const LinkTaskData& data);

struct RunResult {
  GeoModel model;
  MetricsRecord metrics;
};

/// One GeoGNN run; `seed` seeds the weights and dropout.
RunResult run_geognn(ModelConfig model_config, const TrainConfig& config, const NodeTaskData& data,
                     std::uint64_t seed);
RunResult run_geognn(ModelConfig model_config, const TrainConfig& config, const LinkTaskData& data,
                     std::uint64_t seed);

/// MLP reference on the node task, hidden width config.mlp_hidden.
MetricsRecord run_mlp(double dropout, const TrainConfig& config, const NodeTaskData& data,
                      std::uint64_t seed);

struct SeedSummary {
  std::vector<MetricsRecord> runs;
  double mean_test = 0.0;
  double std_test = 0.0;
};

SeedSummary summarize(std::vector<MetricsRecord> runs);

struct GridCell {
  double tau = 0.0;
  double alpha = 0.0;
  std::size_t layers = 0;
  std::size_t heads = 0;
  std::uint64_t seed = 0;
  double val = 0.0;
  double test = 0.0;
  std::string status;  // "ok" or the error category
};

struct GridSpec {
  std::vector<double> taus;
  std::vector<double> alphas;
  std::vector<std::size_t> layers;
  std::vector<std::size_t> heads;
};

/// Every combination of the grid, one run per seed of `config`. Failed runs
/// are recorded with their error category instead of aborting the sweep.
std::vector<GridCell> gridsearch(const ModelConfig& base, const TrainConfig& config, const GridSpec& grid,
                                 const NodeTaskData* node_data, const LinkTaskData* link_data);

std::string grid_csv(const std::vector<GridCell>& cells);

}  // namespace geognn::train
