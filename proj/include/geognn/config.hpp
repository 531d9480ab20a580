#pragma once

#include "geognn/drift.hpp"
#include "geognn/model.hpp"
#include "geognn/train.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace geognn {

struct DataConfig {
  std::string features;
  std::string edges;
  std::string labels;
  std::string out = "run";
  /// Optional split files, one node id per line. When absent the nodes are
  /// split by train.ratios with train.split_seed.
  std::string train_ids;
  std::string val_ids;
  std::string test_ids;
  bool symmetrize = true;
};

/// The JSON run configuration: {"model": {...}, "train": {...},
/// "drift": {...}, "data": {...}}. Every section and key is optional, but
/// unknown ones are rejected.
struct RunConfig {
  ModelConfig model;
  train::TrainConfig train;
  drift::DriftConfig drift;
  DataConfig data;
  /// "section.key" for every value that fell back to its default.
  std::vector<std::string> defaulted;
};

RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);
nlohmann::json to_json(const RunConfig& config);

}  // namespace geognn
