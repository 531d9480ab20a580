#include "geognn/cli.hpp"

#include "geognn/checks.hpp"
#include "geognn/config.hpp"
#include "geognn/drift.hpp"
#include "geognn/errors.hpp"
#include "geognn/io.hpp"
#include "geognn/smoothing.hpp"
#include "geognn/synth.hpp"
#include "geognn/train.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace geognn {
namespace {

namespace fs = std::filesystem;

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
  synth::SynthSpec spec;
  std::string out;
};

void run_synth(const SynthArgs& a) {
  const synth::SynthData data = synth::generate(a.spec);
  io::write_embeddings(data.features, join(a.out, "features.gemb"));
  io::write_labels(data.labels, join(a.out, "labels.tsv"));
  io::write_edges(data.edges, join(a.out, "edges.tsv"));
  nlohmann::json sidecar = synth::to_json(a.spec);
  sidecar["edges"] = data.edges.size();
  io::write_json(join(a.out, "spec.json"), sidecar);
  spdlog::info("wrote {} nodes, {} edges to {}", a.spec.n, data.edges.size(), a.out);
}

// ---- smooth ----------------------------------------------------------------

struct SmoothArgs {
  std::string features;
  std::string edges;
  std::string aggregator = "mean";
  std::size_t layers = 4;
  double tau = 1.0;
  double alpha = 1.0;
  bool no_self_loops = false;
  std::string out;
};

void run_smooth(const SmoothArgs& a) {
  const Matrix x = io::read_embeddings(a.features);
  const Graph g = build_csr(io::read_edges(a.edges), static_cast<std::size_t>(x.rows()), !a.no_self_loops, true);
  const smoothing::AggregatorKind kind{smoothing::parse_aggregator(a.aggregator), a.tau, a.alpha};
  const smoothing::LayerTrace trace = smoothing::smooth(x, g, kind, a.layers);
  nlohmann::json files = nlohmann::json::array();
  for (std::size_t l = 0; l < trace.snapshots.size(); ++l) {
    const std::string name = fmt::format("layer_{}.gemb", l);
    io::write_embeddings(trace.snapshots[l], join(a.out, name));
    files.push_back(name);
  }
  io::write_json(join(a.out, "manifest.json"), {{"aggregator", a.aggregator},
                                                {"layers", a.layers},
                                                {"tau", a.tau},
                                                {"alpha", a.alpha},
                                                {"self_loops", !a.no_self_loops},
                                                {"features", fs::absolute(a.features).string()},
                                                {"edges", fs::absolute(a.edges).string()},
                                                {"snapshots", files},
                                                {"antipodal_pairs", trace.antipodal_pairs}});
  if (trace.antipodal_pairs > 0) spdlog::warn("{} near-antipodal pairs were clamped", trace.antipodal_pairs);
}

// ---- drift -----------------------------------------------------------------

struct DriftArgs {
  std::string reference;
  std::string current;
  std::string manifest;
  std::string edges;
  std::string aggregator = "all";
  std::size_t layers = 4;
  double tau = 1.0;
  double alpha = 1.0;
  bool no_self_loops = false;
  std::string config;
  std::optional<std::size_t> k;
  std::optional<std::size_t> r;
  std::optional<double> epsilon;
  bool include_self = false;
  bool csv = false;
  std::string out;
};

void write_report(const drift::DriftReport& report, const std::string& dir, const std::string& stem, bool csv) {
  io::write_json(join(dir, stem + ".json"), drift::to_json(report));
  if (!csv) return;
  std::string text = "node_id,drift\n";
  for (std::size_t i = 0; i < report.per_node.size(); ++i) {
    const double d = report.per_node[i];
    text += fmt::format("{},{}\n", i, std::isnan(d) ? std::string() : io::format_double(d));
  }
  io::atomic_write(join(dir, stem + ".csv"), text);
}

void run_drift(const DriftArgs& a) {
  drift::DriftConfig cfg;
  if (!a.config.empty()) cfg = load_run_config(a.config).drift;
  if (a.k) cfg.k = *a.k;
  if (a.r) cfg.r = *a.r;
  if (a.epsilon) cfg.epsilon = *a.epsilon;
  if (a.include_self) cfg.include_self_in_knn = true;

  const int modes = (a.current.empty() ? 0 : 1) + (a.manifest.empty() ? 0 : 1) + (a.edges.empty() ? 0 : 1);
  if (modes != 1) fail(ErrorCode::Validation, "drift: give exactly one of --current, --manifest or --edges");

  if (!a.current.empty()) {
    if (a.reference.empty()) fail(ErrorCode::Validation, "drift: --current needs --reference");
    const drift::DriftReport report =
        drift::drift_report(io::read_embeddings(a.current), io::read_embeddings(a.reference), cfg);
    write_report(report, a.out, "drift", a.csv);
    spdlog::info("mean drift {:.6f}", report.mean_drift);
    return;
  }

  std::string curve = "layer,aggregator,mean_drift\n";
  auto emit_curve = [&](const std::string& name, const std::vector<Matrix>& snapshots, const Matrix& plm) {
    cfg.validate(static_cast<std::size_t>(plm.rows()), static_cast<std::size_t>(plm.cols()));
    const drift::KnnTable knn = drift::knn_reference(plm, cfg);
    for (std::size_t l = 0; l < snapshots.size(); ++l) {
      const drift::DriftReport report = drift::drift_report(snapshots[l], plm, knn, cfg, l);
      write_report(report, a.out, fmt::format("drift_{}_layer{}", name, l), a.csv);
      curve += fmt::format("{},{},{}\n", l, name, io::format_double(report.mean_drift));
    }
  };

  if (!a.manifest.empty()) {
    const nlohmann::json manifest = io::read_json(a.manifest);
    const fs::path base = fs::path(a.manifest).parent_path();
    const std::string reference =
        a.reference.empty() ? manifest.at("features").get<std::string>() : a.reference;
    const Matrix plm = io::read_embeddings(reference);
    std::vector<Matrix> snapshots;
    for (const auto& file : manifest.at("snapshots")) {
      snapshots.push_back(io::read_embeddings((base / file.get<std::string>()).string()));
    }
    emit_curve(manifest.at("aggregator").get<std::string>(), snapshots, plm);
  } else {
    if (a.reference.empty()) fail(ErrorCode::Validation, "drift: --edges needs --reference");
    const Matrix plm = io::read_embeddings(a.reference);
    const Graph g = build_csr(io::read_edges(a.edges), static_cast<std::size_t>(plm.rows()), !a.no_self_loops, true);
    std::vector<std::string> names;
    if (a.aggregator == "all") names = {"mean", "laplacian", "attention", "geodesic"};
    else names = {a.aggregator};
    for (const std::string& name : names) {
      const smoothing::AggregatorKind kind{smoothing::parse_aggregator(name), a.tau, a.alpha};
      emit_curve(name, smoothing::smooth(plm, g, kind, a.layers).snapshots, plm);
    }
  }
  io::atomic_write(join(a.out, "curve.csv"), curve);
}

// ---- train / eval / gridsearch --------------------------------------------

struct LoadedData {
  Matrix features;
  EdgeList edges;
  Labels labels;
};

LoadedData load_data(const RunConfig& rc) {
  if (rc.data.features.empty() || rc.data.edges.empty()) {
    fail(ErrorCode::InvalidConfig, "data.features and data.edges are required");
  }
  LoadedData d;
  d.features = io::read_embeddings(rc.data.features);
  d.edges = io::read_edges(rc.data.edges);
  if (rc.train.task == train::Task::Node) {
    if (rc.data.labels.empty()) fail(ErrorCode::InvalidConfig, "data.labels is required for the node task");
    d.labels = io::read_labels(rc.data.labels);
    if (d.labels.size() != static_cast<std::size_t>(d.features.rows())) {
      fail(ErrorCode::Validation, "labels cover " + std::to_string(d.labels.size()) + " nodes but features have " +
                                      std::to_string(d.features.rows()) + " rows");
    }
  }
  return d;
}

train::NodeTaskData node_task(const RunConfig& rc, const LoadedData& d) {
  train::NodeTaskData t;
  const auto n = static_cast<std::size_t>(d.features.rows());
  t.features = d.features;
  t.graph = build_csr(d.edges, n, rc.train.self_loops, rc.data.symmetrize);
  t.labels = d.labels;
  t.classes = d.labels.empty() ? 0 : *std::max_element(d.labels.begin(), d.labels.end()) + 1;
  const int given = (rc.data.train_ids.empty() ? 0 : 1) + (rc.data.val_ids.empty() ? 0 : 1) +
                    (rc.data.test_ids.empty() ? 0 : 1);
  if (given == 3) {
    t.split.train = io::read_ids(rc.data.train_ids);
    t.split.val = io::read_ids(rc.data.val_ids);
    t.split.test = io::read_ids(rc.data.test_ids);
  } else if (given == 0) {
    t.split = synth::split_nodes(n, rc.train.ratios, rc.train.split_seed);
  } else {
    fail(ErrorCode::InvalidConfig, "give all three of data.train_ids, data.val_ids and data.test_ids, or none");
  }
  return t;
}

train::LinkTaskData link_task(const RunConfig& rc, const LoadedData& d) {
  const Graph full = build_csr(d.edges, static_cast<std::size_t>(d.features.rows()), false, rc.data.symmetrize);
  return train::make_link_task(d.features, full, rc.train);
}

struct TrainArgs {
  std::string config;
  std::string task;
  std::string out;
  bool mlp = false;
};

RunConfig load_config_with_overrides(const std::string& path, const std::string& task, const std::string& out) {
  nlohmann::json doc = io::read_json(path);
  RunConfig rc;
  try {
    rc = parse_run_config(doc);
  } catch (const Error& e) {
    fail(e.code(), path + ": " + e.what());
  }
  if (!task.empty()) {
    rc.train.task = train::parse_task(task);
    rc.train.validate();
  }
  if (!out.empty()) rc.data.out = out;
  for (const auto& key : rc.defaulted) spdlog::debug("config: {} uses its default", key);
  if (!rc.defaulted.empty()) spdlog::info("config: {} keys use their defaults", rc.defaulted.size());
  return rc;
}

void run_train(const TrainArgs& a) {
  const RunConfig rc = load_config_with_overrides(a.config, a.task, a.out);
  const LoadedData d = load_data(rc);
  const nlohmann::json config_json = to_json(rc);
  const std::string& out = rc.data.out;

  std::vector<train::MetricsRecord> runs;
  std::vector<train::MetricsRecord> mlp_runs;
  std::optional<train::NodeTaskData> node;
  std::optional<train::LinkTaskData> link;
  if (rc.train.task == train::Task::Node) node = node_task(rc, d);
  else link = link_task(rc, d);
  if (a.mlp && !node) fail(ErrorCode::Validation, "train: the MLP reference exists for the node task only");

  for (std::uint64_t seed : rc.train.seeds) {
    train::RunResult r = node ? train::run_geognn(rc.model, rc.train, *node, seed)
                              : train::run_geognn(rc.model, rc.train, *link, seed);
    io::write_json(join(out, fmt::format("metrics_seed{}.json", seed)), train::to_json(r.metrics, config_json));
    r.model.save(join(out, fmt::format("model_seed{}.ckpt", seed)));
    spdlog::info("seed {}: best epoch {}, val {:.4f}, test {:.4f}", seed, r.metrics.best_epoch, r.metrics.best_val,
                 r.metrics.test);
    runs.push_back(std::move(r.metrics));
    if (a.mlp) {
      train::MetricsRecord m = train::run_mlp(rc.model.dropout, rc.train, *node, seed);
      io::write_json(join(out, fmt::format("mlp_metrics_seed{}.json", seed)), train::to_json(m, config_json));
      mlp_runs.push_back(std::move(m));
    }
  }

  std::string csv = "model,seed,best_epoch,best_val,test\n";
  nlohmann::json summary;
  auto add_rows = [&](const std::string& name, const std::vector<train::MetricsRecord>& list) {
    if (list.empty()) return;
    double val_total = 0.0;
    for (const auto& m : list) {
      csv += fmt::format("{},{},{},{},{}\n", name, m.seed, m.best_epoch, io::format_double(m.best_val),
                         io::format_double(m.test));
      val_total += m.best_val;
    }
    const train::SeedSummary s = train::summarize(list);
    csv += fmt::format("{},mean,,{},{}\n", name, io::format_double(val_total / static_cast<double>(list.size())),
                       io::format_double(s.mean_test));
    summary[name] = {{"mean_test", s.mean_test}, {"std_test", s.std_test}, {"seeds", list.size()}};
  };
  add_rows("geognn", runs);
  add_rows("mlp", mlp_runs);
  io::atomic_write(join(out, "aggregate.csv"), csv);
  io::write_json(join(out, "summary.json"), summary);
  spdlog::info("mean test {:.4f} over {} seeds", summary["geognn"]["mean_test"].get<double>(), runs.size());
}

struct EvalArgs {
  std::string checkpoint;
  std::string config;
  std::string split = "test";
  std::string out;
};

void run_eval(const EvalArgs& a) {
  const RunConfig rc = load_config_with_overrides(a.config, "", "");
  const LoadedData d = load_data(rc);
  GeoModel model = GeoModel::load(a.checkpoint);
  double value = 0.0;
  std::string metric;
  if (rc.train.task == train::Task::Node) {
    const train::NodeTaskData t = node_task(rc, d);
    const std::vector<std::size_t>* ids = a.split == "train" ? &t.split.train
                                          : a.split == "val" ? &t.split.val
                                          : a.split == "test" ? &t.split.test
                                                              : nullptr;
    if (ids == nullptr) fail(ErrorCode::Validation, "eval: --split must be train, val or test");
    value = train::evaluate_node(model, t, *ids);
    metric = "accuracy";
  } else {
    train::LinkTaskData t = link_task(rc, d);
    if (a.split == "val") {
      t.split.test = t.split.val;
      t.split.test_neg = t.split.val_neg;
    } else if (a.split != "test") {
      fail(ErrorCode::Validation, "eval: link prediction supports --split val or test");
    }
    value = train::evaluate_link(model, rc.train, t);
    metric = fmt::format("hit@{}", rc.train.eval_k);
  }
  const std::string out = a.out.empty() ? join(rc.data.out, "eval.json") : a.out;
  io::write_json(out, {{"task", train::to_string(rc.train.task)},
                       {"split", a.split},
                       {"metric", metric},
                       {"value", value},
                       {"checkpoint", a.checkpoint}});
  std::cout << metric << " " << io::format_double(value) << "\n";
}

struct GridArgs {
  std::string config;
  std::string task;
  std::vector<double> taus{1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};
  std::vector<double> alphas{1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};
  std::vector<std::size_t> layers;
  std::vector<std::size_t> heads;
  std::optional<std::size_t> epochs;
  std::vector<std::uint64_t> seeds;
  std::string out;
};

void run_gridsearch(const GridArgs& a) {
  RunConfig rc = load_config_with_overrides(a.config, a.task, "");
  if (a.epochs) rc.train.epochs = *a.epochs;
  if (!a.seeds.empty()) rc.train.seeds = a.seeds;
  rc.train.validate();
  const LoadedData d = load_data(rc);
  std::optional<train::NodeTaskData> node;
  std::optional<train::LinkTaskData> link;
  if (rc.train.task == train::Task::Node) node = node_task(rc, d);
  else link = link_task(rc, d);
  const train::GridSpec grid{a.taus, a.alphas, a.layers, a.heads};
  const auto cells = train::gridsearch(rc.model, rc.train, grid, node ? &*node : nullptr, link ? &*link : nullptr);
  const std::string out = a.out.empty() ? join(rc.data.out, "grid.csv") : a.out;
  io::atomic_write(out, train::grid_csv(cells));
  const auto failed = std::count_if(cells.begin(), cells.end(), [](const auto& c) { return c.status != "ok"; });
  spdlog::info("{} grid runs, {} failed, written to {}", cells.size(), failed, out);
}

struct GradArgs {
  std::uint64_t seed = 0;
  double threshold = 1e-4;
};

int run_gradcheck(const GradArgs& a) {
  const ad::GradCheckReport r = model_gradient_check(a.seed);
  std::cout << fmt::format("max relative error {:.3e} over {} entries ({} flagged at clamp boundaries, "
                           "max unflagged {:.3e}, worst {}[{}])\n",
                           r.max_rel_error, r.entries, r.flagged, r.max_rel_error_unflagged, r.worst_param,
                           r.worst_index);
  if (r.max_rel_error < a.threshold) return 0;
  std::cerr << "error: gradient check above threshold " << a.threshold << "\n";
  return exit_code_for(ErrorCode::NumericFailure);
}

}  // namespace

int run_cli(int argc, char** argv) {
  spdlog::drop("geognn");
  auto logger = spdlog::stderr_color_st("geognn");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"GeoGNN: semantic drift measurement and spherical geodesic graph networks"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic sphere dataset");
  synth_cmd->add_option("--nodes", synth_args.spec.n, "Node count")->capture_default_str();
  synth_cmd->add_option("--dim", synth_args.spec.d, "Feature dimension")->capture_default_str();
  synth_cmd->add_option("--classes", synth_args.spec.classes, "Class count")->capture_default_str();
  synth_cmd->add_option("--kappa", synth_args.spec.kappa, "Concentration")->capture_default_str();
  synth_cmd->add_option("--p-in", synth_args.spec.p_in, "Intra-class edge probability")->capture_default_str();
  synth_cmd->add_option("--p-out", synth_args.spec.p_out, "Inter-class edge probability")->capture_default_str();
  synth_cmd->add_option("--manifold-dim", synth_args.spec.manifold_dim, "Intrinsic sphere dimension")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth_args.spec.seed, "Seed")->capture_default_str();
  synth_cmd->add_option("--out", synth_args.out, "Output directory")->required();

  SmoothArgs smooth_args;
  auto* smooth_cmd = app.add_subcommand("smooth", "Parameter-free propagation, one embedding file per layer");
  smooth_cmd->add_option("--features", smooth_args.features)->required();
  smooth_cmd->add_option("--edges", smooth_args.edges)->required();
  smooth_cmd->add_option("--aggregator", smooth_args.aggregator, "mean, laplacian, attention or geodesic")
      ->capture_default_str();
  smooth_cmd->add_option("--layers", smooth_args.layers)->capture_default_str();
  smooth_cmd->add_option("--tau", smooth_args.tau)->capture_default_str();
  smooth_cmd->add_option("--alpha", smooth_args.alpha)->capture_default_str();
  smooth_cmd->add_flag("--no-self-loops", smooth_args.no_self_loops);
  smooth_cmd->add_option("--out", smooth_args.out, "Output directory")->required();

  DriftArgs drift_args;
  auto* drift_cmd = app.add_subcommand("drift", "Local-PCA drift reports and per-layer drift curves");
  drift_cmd->add_option("--reference", drift_args.reference, "Reference (PLM) embeddings");
  drift_cmd->add_option("--current", drift_args.current, "Embeddings to score against the reference");
  drift_cmd->add_option("--manifest", drift_args.manifest, "Manifest written by smooth");
  drift_cmd->add_option("--edges", drift_args.edges, "Smooth the reference in-process over this graph");
  drift_cmd->add_option("--aggregator", drift_args.aggregator, "Aggregator for --edges, or 'all'")
      ->capture_default_str();
  drift_cmd->add_option("--layers", drift_args.layers)->capture_default_str();
  drift_cmd->add_option("--tau", drift_args.tau)->capture_default_str();
  drift_cmd->add_option("--alpha", drift_args.alpha)->capture_default_str();
  drift_cmd->add_flag("--no-self-loops", drift_args.no_self_loops);
  drift_cmd->add_option("--config", drift_args.config, "Run config; its drift section sets k, r, epsilon");
  drift_cmd->add_option("--k", drift_args.k);
  drift_cmd->add_option("--r", drift_args.r);
  drift_cmd->add_option("--epsilon", drift_args.epsilon);
  drift_cmd->add_flag("--include-self", drift_args.include_self);
  drift_cmd->add_flag("--csv", drift_args.csv, "Also write node_id,drift CSV files");
  drift_cmd->add_option("--out", drift_args.out, "Output directory")->required();

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train GeoGNN for every configured seed");
  train_cmd->add_option("--config", train_args.config)->required();
  train_cmd->add_option("--task", train_args.task, "node or link (overrides the config)");
  train_cmd->add_option("--out", train_args.out, "Output directory (overrides data.out)");
  train_cmd->add_flag("--mlp", train_args.mlp, "Also train the MLP reference");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint)->required();
  eval_cmd->add_option("--config", eval_args.config)->required();
  eval_cmd->add_option("--split", eval_args.split)->capture_default_str();
  eval_cmd->add_option("--out", eval_args.out, "Metrics JSON path");

  GridArgs grid_args;
  auto* grid_cmd = app.add_subcommand("gridsearch", "Sweep tau, alpha, layers and heads");
  grid_cmd->add_option("--config", grid_args.config)->required();
  grid_cmd->add_option("--task", grid_args.task);
  grid_cmd->add_option("--taus", grid_args.taus)->delimiter(',')->capture_default_str();
  grid_cmd->add_option("--alphas", grid_args.alphas)->delimiter(',')->capture_default_str();
  grid_cmd->add_option("--layers", grid_args.layers)->delimiter(',');
  grid_cmd->add_option("--heads", grid_args.heads)->delimiter(',');
  grid_cmd->add_option("--epochs", grid_args.epochs);
  grid_cmd->add_option("--seeds", grid_args.seeds)->delimiter(',');
  grid_cmd->add_option("--out", grid_args.out, "CSV path");

  GradArgs grad_args;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the full model gradient");
  grad_cmd->add_option("--seed", grad_args.seed)->capture_default_str();
  grad_cmd->add_option("--threshold", grad_args.threshold)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (synth_cmd->parsed()) run_synth(synth_args);
    else if (smooth_cmd->parsed()) run_smooth(smooth_args);
    else if (drift_cmd->parsed()) run_drift(drift_args);
    else if (train_cmd->parsed()) run_train(train_args);
    else if (eval_cmd->parsed()) run_eval(eval_args);
    else if (grid_cmd->parsed()) run_gridsearch(grid_args);
    else if (grad_cmd->parsed()) return run_gradcheck(grad_args);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace geognn
