// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phylotrace/consensus.hpp"
#include "phylotrace/detail/text.hpp"
#include "phylotrace/distance_matrix.hpp"
#include "phylotrace/error.hpp"
#include "phylotrace/genotype.hpp"
#include "phylotrace/metrics.hpp"
#include "phylotrace/neighbor_joining.hpp"
#include "phylotrace/permutation_test.hpp"
#include "phylotrace/rng.hpp"
#include "phylotrace/robinson_foulds.hpp"
#include "phylotrace/tree.hpp"

// Desk-scale controlled experiment: draw random training trees, evolve
// synthetic genotypes down the tree (drift per dataset + isotropic noise as a
// stand-in for fine-tuning), reconstruct the tree from the leaf models, and
// aggregate the reconstruction statistics.

namespace phylotrace {

/// A training plan read as a breadth-first binary tree: the base model is the
/// root, entries fill child slots level by level, and an EMPTY entry
/// (std::nullopt) terminates its branch. Entries that no longer fit once
/// their ancestors are terminated are simply never trained.
struct TrainingTreeConfig {
  std::vector<std::string> dataset_ids;
  std::vector<std::optional<std::string>> entries;
  std::uint64_t seed = 0;
};

inline const std::vector<std::string>& default_dataset_ids() {
  static const std::vector<std::string> ids = {
      "billsum", "xsum",      "cnn_dailymail", "arxiv",  "bigpatent",
      "dialogsum", "govreport", "pubmed",        "samsum", "debatesum"};
  return ids;
}

/// Builds a config by (optionally) permuting the dataset list and inserting
/// k ~ Poisson(lambda) EMPTY markers before each dataset entry.
inline TrainingTreeConfig generate_config(std::vector<std::string> base, bool permute, double lambda,
                                          std::uint64_t seed) {
  if (base.empty())
    throw Error(ErrorCode::InvalidArgument, "simulate: need at least one dataset id");
  if (!(lambda >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "simulate: lambda must be >= 0");
  TrainingTreeConfig config;
  config.seed = seed;
  config.dataset_ids = base;
  Rng rng(seed);
  if (permute) rng.shuffle(base);
  for (const auto& dataset : base) {
    const int empties = rng.next_poisson(lambda);
    for (int k = 0; k < empties; ++k) config.entries.push_back(std::nullopt);
    config.entries.push_back(dataset);
  }
  return config;
}

// Config JSON: {"datasets": [...], "entries": [... with null = EMPTY], "seed": N}

inline TrainingTreeConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("datasets") || !j.contains("entries"))
    throw Error(ErrorCode::ParseError, "simulate: config must carry datasets and entries");
  TrainingTreeConfig config;
  for (const auto& d : j["datasets"]) config.dataset_ids.push_back(d.get<std::string>());
  for (const auto& e : j["entries"]) {
    if (e.is_null())
      config.entries.push_back(std::nullopt);
    else
      config.entries.push_back(e.get<std::string>());
  }
  if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();
  return config;
}

inline nlohmann::json config_to_json(const TrainingTreeConfig& config) {
  nlohmann::json j;
  j["datasets"] = config.dataset_ids;
  auto entries = nlohmann::json::array();
  for (const auto& e : config.entries) {
    if (e)
      entries.push_back(*e);
    else
      entries.push_back(nullptr);
  }
  j["entries"] = std::move(entries);
  j["seed"] = config.seed;
  return j;
}

inline TrainingTreeConfig load_config(const std::filesystem::path& path) {
  try {
    return config_from_json(nlohmann::json::parse(detail::read_text_file(path, "simulate")));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("simulate: bad config JSON (") + e.what() + ")");
  }
}

inline void save_config(const TrainingTreeConfig& config, const std::filesystem::path& path) {
  detail::write_text_file(path, config_to_json(config).dump(2) + "\n", "simulate");
}

struct TrainingNode {
  std::string id;
  std::optional<std::string> dataset;  // nullopt for the base model
  int parent = -1;
  std::vector<int> children;
};

/// Places entries into child slots in breadth-first order; EMPTY terminates a
/// branch, so children of EMPTY slots are skipped.
inline std::vector<TrainingNode> build_training_nodes(const TrainingTreeConfig& config) {
  std::vector<TrainingNode> nodes;
  nodes.push_back({"base", std::nullopt, -1, {}});
  std::set<std::string> used{"base"};
  std::vector<int> queue{0};
  std::size_t head = 0;
  std::size_t cursor = 0;
  while (head < queue.size() && cursor < config.entries.size()) {
    const int parent = queue[head++];
    for (int slot = 0; slot < 2 && cursor < config.entries.size(); ++slot) {
      const auto& entry = config.entries[cursor++];
      if (!entry) continue;  // EMPTY: branch ends here
      std::string id = *entry;
      for (int suffix = 2; used.count(id); ++suffix) id = *entry + "." + std::to_string(suffix);
      used.insert(id);
      const int node = static_cast<int>(nodes.size());
      nodes.push_back({std::move(id), *entry, parent, {}});
      nodes[parent].children.push_back(node);
      queue.push_back(node);
    }
  }
  return nodes;
}

inline int training_leaf_count(const std::vector<TrainingNode>& nodes) {
  int count = 0;
  for (const auto& n : nodes)
    if (n.children.empty()) ++count;
  return count;
}

/// Ground-truth tree over the training nodes: every model is labeled, unit
/// branch lengths.
inline PhyloTree truth_tree(const std::vector<TrainingNode>& nodes) {
  PhyloTree tree;
  std::vector<int> mapped(nodes.size(), -1);
  mapped[0] = tree.add_root(nodes[0].id);
  for (std::size_t i = 1; i < nodes.size(); ++i)
    mapped[i] = tree.add_child(mapped[nodes[i].parent], nodes[i].id, 1.0);
  return tree;
}

/// For all-node reconstructions every observed model must sit at a leaf:
/// labeled internal nodes donate their label to a new pendant leaf.
inline PhyloTree pendant_leaf_expansion(const PhyloTree& tree) {
  PhyloTree expanded;
  std::vector<int> mapped(tree.node_count(), -1);
  mapped[tree.root()] = expanded.add_root();
  for (int v : tree.preorder()) {
    if (v != tree.root())
      mapped[v] = expanded.add_child(mapped[tree.node(v).parent],
                                     tree.is_leaf(v) ? tree.node(v).label : std::string(),
                                     tree.node(v).length);
    if (!tree.is_leaf(v) && !tree.node(v).label.empty())
      expanded.add_child(mapped[v], tree.node(v).label, 1.0);
  }
  expanded.validate();
  return expanded;
}

/// Synthetic stand-in for fine-tuning. Every child model is its parent plus a
/// deterministic per-dataset drift direction (unit vector derived from the
/// dataset id, so repeats along a path accumulate consistent movement) plus
/// fresh isotropic noise with unit total variance (E||g||^2 = 1), scaled by
/// noise_scale. drift_scale and noise_scale are therefore both expected
/// whole-model L2 displacements and directly comparable.
struct EvolutionParams {
  std::size_t layer_count = 10;
  std::vector<std::size_t> layer_sizes;  // empty = layer_count x 1000
  double drift_scale = 1.0;
  double noise_scale = 0.05;
  std::uint64_t seed = 0;
};

struct EvolvedModels {
  PhyloTree truth;
  std::vector<ModelGenotype> models;  // breadth-first node order, base first
  std::vector<bool> is_leaf;
};

namespace detail {

inline std::vector<std::size_t> resolved_layer_sizes(const EvolutionParams& params) {
  if (!params.layer_sizes.empty()) {
    if (params.layer_sizes.size() != params.layer_count)
      throw Error(ErrorCode::InvalidArgument, "simulate: layer_sizes must match layer_count");
    return params.layer_sizes;
  }
  return std::vector<std::size_t>(params.layer_count, 1000);
}

inline std::string layer_name(std::size_t index, std::size_t count) {
  int width = 2;
  for (std::size_t c = count; c > 100; c /= 10) ++width;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "layer.%0*zu", width, index);
  return buf;
}

inline std::vector<double> unit_drift_direction(const std::string& dataset, std::uint64_t seed,
                                                std::size_t dims) {
  Rng rng(derive_seed(seed, {0xd21f7ULL, fnv1a64(dataset)}));
  std::vector<double> u(dims);
  double norm_sq = 0.0;
  for (double& x : u) {
    x = rng.next_normal();
    norm_sq += x * x;
  }
  const double norm = std::sqrt(norm_sq);
  for (double& x : u) x /= norm;
  return u;
}

inline ModelGenotype slice_genotype(const std::string& id, const std::vector<double>& flat,
                                    const std::vector<std::size_t>& sizes) {
  ModelGenotype g;
  g.model_id = id;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    g.layers.emplace_back(layer_name(l, sizes.size()),
                          std::vector<double>(flat.begin() + offset, flat.begin() + offset + sizes[l]));
    offset += sizes[l];
  }
  return g;
}

}  // namespace detail

inline EvolvedModels evolve(const TrainingTreeConfig& config, const EvolutionParams& params) {
  if (params.layer_count == 0)
    throw Error(ErrorCode::InvalidArgument, "simulate: need at least one layer");
  if (params.drift_scale < 0.0 || params.noise_scale < 0.0)
    throw Error(ErrorCode::InvalidArgument, "simulate: scales must be >= 0");
  const std::vector<std::size_t> sizes = detail::resolved_layer_sizes(params);
  std::size_t dims = 0;
  for (std::size_t s : sizes) dims += s;
  if (dims == 0)
    throw Error(ErrorCode::InvalidArgument, "simulate: zero total parameter count");

  const std::vector<TrainingNode> nodes = build_training_nodes(config);

  std::vector<std::vector<double>> weights(nodes.size());
  {
    Rng rng(derive_seed(params.seed, {0xb00ULL}));
    weights[0].resize(dims);
    for (double& x : weights[0]) x = rng.next_normal();
  }
  const double inv_sqrt_dims = 1.0 / std::sqrt(static_cast<double>(dims));
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const auto& parent = weights[nodes[i].parent];
    const auto drift = detail::unit_drift_direction(*nodes[i].dataset, params.seed, dims);
    Rng noise_rng(derive_seed(params.seed, {0x7e15ULL, i}));
    auto& w = weights[i];
    w.resize(dims);
    for (std::size_t k = 0; k < dims; ++k) {
      const double noise = noise_rng.next_normal() * inv_sqrt_dims;
      w[k] = parent[k] + params.drift_scale * drift[k] + params.noise_scale * noise;
    }
  }

  EvolvedModels result;
  result.truth = truth_tree(nodes);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    result.models.push_back(detail::slice_genotype(nodes[i].id, weights[i], sizes));
    result.is_leaf.push_back(nodes[i].children.empty());
  }
  return result;
}

enum class NodesMode { Leaves, All };

inline std::string_view nodes_mode_name(NodesMode mode) {
  return mode == NodesMode::Leaves ? "leaves" : "all";
}

struct SimRunRecord {
  int run = 0;
  std::uint64_t config_seed = 0;
  int leaf_count = 0;
  int node_count = 0;
  std::string metric;
  double total_rf = 0.0;
  double consensus_rf = 0.0;
  double match_pct = 0.0;            // share of per-layer trees with RF 0 to the truth
  double random_lt_consensus = 0.0;  // permutation-test fraction
};

struct SimAggregate {
  int leaf_count = 0;
  int n = 0;
  std::string metric;
  double total_rf_mean = 0.0, total_rf_sd = 0.0;
  double consensus_rf_mean = 0.0, consensus_rf_sd = 0.0;
  double match_pct_mean = 0.0;
  double random_lt_consensus_mean = 0.0;
};

struct SimulationReport {
  NodesMode nodes = NodesMode::Leaves;
  std::vector<SimRunRecord> runs;         // one per run x metric
  std::vector<SimAggregate> aggregates;   // grouped by leaf count x metric
};

struct ExperimentParams {
  std::vector<std::string> datasets = default_dataset_ids();
  double lambda = 0.7;
  EvolutionParams evolution;
  std::optional<TrainingTreeConfig> config;  // fixed plan instead of random draws
};

namespace detail {

inline std::vector<SimRunRecord> run_single(const TrainingTreeConfig& config,
                                            const EvolutionParams& evo,
                                            std::span<const MetricKind> metrics, NodesMode mode,
                                            int trials, std::uint64_t perm_seed, int run_index) {
  const EvolvedModels evolved = evolve(config, evo);
  std::vector<ModelGenotype> selected;
  for (std::size_t i = 0; i < evolved.models.size(); ++i)
    if (mode == NodesMode::All || evolved.is_leaf[i]) selected.push_back(evolved.models[i]);

  const PhyloTree reference =
      mode == NodesMode::All ? pendant_leaf_expansion(evolved.truth) : evolved.truth;

  const auto totals = build_total_multi(metrics, selected);
  const auto per_layer = build_per_layer_multi(metrics, selected);

  int leaf_count = 0;
  for (bool b : evolved.is_leaf) leaf_count += b ? 1 : 0;

  std::vector<SimRunRecord> records;
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    SimRunRecord record;
    record.run = run_index;
    record.config_seed = config.seed;
    record.leaf_count = leaf_count;
    record.node_count = static_cast<int>(evolved.models.size());
    record.metric = format_metric(metrics[m]);

    record.total_rf = rf_distance(neighbor_joining(totals[m]), reference);

    std::vector<PhyloTree> layer_trees;
    int exact = 0;
    for (const auto& matrix : per_layer[m]) {
      PhyloTree tree = neighbor_joining(matrix);
      if (rf_distance(tree, reference) == 0) ++exact;
      layer_trees.push_back(std::move(tree));
    }
    record.match_pct = 100.0 * static_cast<double>(exact) / static_cast<double>(layer_trees.size());

    const PhyloTree layer_consensus = consensus(layer_trees, ConsensusRule::Majority, 0.5);
    record.consensus_rf = rf_distance(layer_consensus, reference);
    record.random_lt_consensus =
        permutation_test(layer_consensus, reference, trials, derive_seed(perm_seed, {m}));
    records.push_back(std::move(record));
  }
  return records;
}

inline void aggregate_report(SimulationReport& report) {
  std::map<std::pair<int, std::string>, std::vector<const SimRunRecord*>> groups;
  for (const auto& r : report.runs) groups[{r.leaf_count, r.metric}].push_back(&r);
  auto mean_of = [](const std::vector<const SimRunRecord*>& rs, auto field) {
    double s = 0.0;
    for (const auto* r : rs) s += r->*field;
    return s / static_cast<double>(rs.size());
  };
  auto sd_of = [](const std::vector<const SimRunRecord*>& rs, auto field, double mean) {
    if (rs.size() < 2) return 0.0;
    double s = 0.0;
    for (const auto* r : rs) s += (r->*field - mean) * (r->*field - mean);
    return std::sqrt(s / static_cast<double>(rs.size() - 1));
  };
  for (const auto& [key, rs] : groups) {
    SimAggregate agg;
    agg.leaf_count = key.first;
    agg.metric = key.second;
    agg.n = static_cast<int>(rs.size());
    agg.total_rf_mean = mean_of(rs, &SimRunRecord::total_rf);
    agg.total_rf_sd = sd_of(rs, &SimRunRecord::total_rf, agg.total_rf_mean);
    agg.consensus_rf_mean = mean_of(rs, &SimRunRecord::consensus_rf);
    agg.consensus_rf_sd = sd_of(rs, &SimRunRecord::consensus_rf, agg.consensus_rf_mean);
    agg.match_pct_mean = mean_of(rs, &SimRunRecord::match_pct);
    agg.random_lt_consensus_mean = mean_of(rs, &SimRunRecord::random_lt_consensus);
    report.aggregates.push_back(std::move(agg));
  }
}

}  // namespace detail

/// B independent runs (run 0 keeps the base dataset order, later runs permute
/// it). Configs that truncate below 3 leaves cannot be reconstructed and are
/// deterministically redrawn from a derived seed. Per-run RNG streams derive
/// from (seed, run), so the report is identical however the runs are executed.
inline SimulationReport run_experiment(int runs, const ExperimentParams& params,
                                       std::span<const MetricKind> metrics, NodesMode mode,
                                       int trials, std::uint64_t seed) {
  if (runs < 1)
    throw Error(ErrorCode::InvalidArgument, "simulate: need at least one run");
  if (metrics.empty())
    throw Error(ErrorCode::InvalidArgument, "simulate: need at least one metric");

  SimulationReport report;
  report.nodes = mode;
  if (params.config) {
    const auto nodes = build_training_nodes(*params.config);
    if (training_leaf_count(nodes) < 3)
      throw Error(ErrorCode::TooFewTaxa, "simulate: fixed config yields fewer than 3 leaves");
    EvolutionParams evo = params.evolution;
    auto records = detail::run_single(*params.config, evo, metrics, mode, trials,
                                      derive_seed(seed, {3, 0}), 0);
    report.runs.insert(report.runs.end(), records.begin(), records.end());
  } else {
    for (int b = 0; b < runs; ++b) {
      TrainingTreeConfig config;
      for (std::uint64_t attempt = 0;; ++attempt) {
        const std::uint64_t config_seed = derive_seed(seed, {1, static_cast<std::uint64_t>(b), attempt});
        config = generate_config(params.datasets, b > 0, params.lambda, config_seed);
        if (training_leaf_count(build_training_nodes(config)) >= 3) break;
      }
      EvolutionParams evo = params.evolution;
      evo.seed = derive_seed(seed, {2, static_cast<std::uint64_t>(b)});
      auto records = detail::run_single(config, evo, metrics, mode, trials,
                                        derive_seed(seed, {3, static_cast<std::uint64_t>(b)}), b);
      report.runs.insert(report.runs.end(), records.begin(), records.end());
    }
  }
  detail::aggregate_report(report);
  return report;
}

inline std::string report_to_csv(const SimulationReport& report) {
  char buf[160];
  std::string out = "#nodes=" + std::string(nodes_mode_name(report.nodes)) +
                    ";match_pct=percent of per-layer trees with RF 0 to the training tree\n";
  out += "leaves,n,metric,total_rf_mean,total_rf_sd,consensus_rf_mean,consensus_rf_sd,match_pct,"
         "random_lt_consensus\n";
  for (const auto& a : report.aggregates) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%s,%.2f,%.2f,%.2f,%.2f,%.1f,%.3f\n", a.leaf_count, a.n,
                  a.metric.c_str(), a.total_rf_mean, a.total_rf_sd, a.consensus_rf_mean,
                  a.consensus_rf_sd, a.match_pct_mean, a.random_lt_consensus_mean);
    out += buf;
  }
  return out;
}

inline std::string report_to_jsonl(const SimulationReport& report) {
  std::string out;
  for (const auto& r : report.runs) {
    nlohmann::json j;
    j["run"] = r.run;
    j["config_seed"] = r.config_seed;
    j["leaves"] = r.leaf_count;
    j["node_count"] = r.node_count;
    j["nodes"] = std::string(nodes_mode_name(report.nodes));
    j["metric"] = r.metric;
    j["total_rf"] = r.total_rf;
    j["consensus_rf"] = r.consensus_rf;
    j["match_pct"] = r.match_pct;
    j["random_lt_consensus"] = r.random_lt_consensus;
    out += j.dump() + "\n";
  }
  return out;
}

inline void write_report_csv(const SimulationReport& report, const std::filesystem::path& path) {
  detail::write_text_file(path, report_to_csv(report), "simulate");
}

inline void write_report_jsonl(const SimulationReport& report, const std::filesystem::path& path) {
  detail::write_text_file(path, report_to_jsonl(report), "simulate");
}

}  // namespace phylotrace
