#include "geognn/config.hpp"

#include "geognn/errors.hpp"
#include "geognn/io.hpp"

#include <set>
#include <type_traits>

namespace geognn {
namespace {

class Section {
 public:
  Section(const nlohmann::json& doc, std::string name, std::vector<std::string>& defaulted)
      : name_(std::move(name)), defaulted_(defaulted) {
    if (doc.contains(name_)) {
      node_ = &doc.at(name_);
      if (!node_->is_object()) fail(ErrorCode::InvalidConfig, "config section '" + name_ + "' must be an object");
    }
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    used_.insert(key);
    if (node_ == nullptr || !node_->contains(key)) {
      defaulted_.push_back(name_ + "." + key);
      return;
    }
    const auto& value = node_->at(key);
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!value.is_number_unsigned()) {
        fail(ErrorCode::InvalidConfig, "config key '" + name_ + "." + key + "' must be a non-negative integer");
      }
    }
    try {
      out = value.get<T>();
    } catch (const nlohmann::json::exception&) {
      fail(ErrorCode::InvalidConfig, "config key '" + name_ + "." + key + "' has the wrong type");
    }
  }

  void reject_unknown() const {
    if (node_ == nullptr) return;
    for (const auto& [key, value] : node_->items()) {
      if (used_.count(key) == 0) fail(ErrorCode::InvalidConfig, "unknown config key '" + name_ + "." + key + "'");
    }
  }

 private:
  std::string name_;
  std::vector<std::string>& defaulted_;
  const nlohmann::json* node_ = nullptr;
  std::set<std::string> used_;
};

}  // namespace

RunConfig parse_run_config(const nlohmann::json& doc) {
  if (!doc.is_object()) fail(ErrorCode::InvalidConfig, "config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "model" && key != "train" && key != "drift" && key != "data") {
      fail(ErrorCode::InvalidConfig, "unknown config section '" + key + "'");
    }
  }
  RunConfig rc;

  Section model(doc, "model", rc.defaulted);
  model.get("layers", rc.model.layers);
  model.get("heads", rc.model.heads);
  model.get("head_dim", rc.model.head_dim);
  model.get("tau", rc.model.tau);
  model.get("alpha", rc.model.alpha);
  model.get("dropout", rc.model.dropout);
  model.get("no_geodesic", rc.model.no_geodesic);
  model.get("no_cos", rc.model.no_cos);
  model.get("no_normalization", rc.model.no_normalization);
  model.reject_unknown();

  Section train(doc, "train", rc.defaulted);
  std::string task = train::to_string(rc.train.task);
  train.get("task", task);
  rc.train.task = train::parse_task(task);
  train.get("epochs", rc.train.epochs);
  train.get("lr", rc.train.lr);
  train.get("seeds", rc.train.seeds);
  train.get("patience", rc.train.patience);
  train.get("neg_per_pos", rc.train.neg_per_pos);
  train.get("eval_k", rc.train.eval_k);
  std::string similarity = to_string(rc.train.similarity);
  train.get("similarity", similarity);
  rc.train.similarity = parse_similarity(similarity);
  std::vector<double> ratios{rc.train.ratios.train, rc.train.ratios.val, rc.train.ratios.test};
  train.get("ratios", ratios);
  if (ratios.size() != 3) fail(ErrorCode::InvalidConfig, "train.ratios needs three values");
  rc.train.ratios = {ratios[0], ratios[1], ratios[2]};
  train.get("split_seed", rc.train.split_seed);
  train.get("self_loops", rc.train.self_loops);
  train.get("mlp_hidden", rc.train.mlp_hidden);
  train.reject_unknown();

  Section drift(doc, "drift", rc.defaulted);
  drift.get("k", rc.drift.k);
  drift.get("r", rc.drift.r);
  drift.get("epsilon", rc.drift.epsilon);
  drift.get("include_self_in_knn", rc.drift.include_self_in_knn);
  drift.reject_unknown();

  Section data(doc, "data", rc.defaulted);
  data.get("features", rc.data.features);
  data.get("edges", rc.data.edges);
  data.get("labels", rc.data.labels);
  data.get("out", rc.data.out);
  data.get("train_ids", rc.data.train_ids);
  data.get("val_ids", rc.data.val_ids);
  data.get("test_ids", rc.data.test_ids);
  data.get("symmetrize", rc.data.symmetrize);
  data.reject_unknown();

  rc.model.validate();
  rc.train.validate();
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  const nlohmann::json doc = io::read_json(path);
  try {
    return parse_run_config(doc);
  } catch (const Error& e) {
    fail(e.code(), path + ": " + e.what());
  }
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json model = to_json(c.model);
  model.erase("seed");
  return {{"model", model},
          {"train", train::to_json(c.train)},
          {"drift",
           {{"k", c.drift.k},
            {"r", c.drift.r},
            {"epsilon", c.drift.epsilon},
            {"include_self_in_knn", c.drift.include_self_in_knn}}},
          {"data",
           {{"features", c.data.features},
            {"edges", c.data.edges},
            {"labels", c.data.labels},
            {"out", c.data.out},
            {"train_ids", c.data.train_ids},
            {"val_ids", c.data.val_ids},
            {"test_ids", c.data.test_ids},
            {"symmetrize", c.data.symmetrize}}}};
}

}  // namespace geognn
