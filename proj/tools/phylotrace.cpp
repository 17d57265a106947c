// SPDX-License-Identifier: Apache-2.0
//
// phylotrace CLI: reconstruct and analyze lineage trees of fine-tuned models
// from checkpoint weight differences (genotype side) and response-embedding
// differences (phenotype side).
//
// Every subcommand is a pure function of (inputs, flags, seed): identical
// invocations produce identical artifacts, and a provenance manifest is
// written next to every file output.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "phylotrace/phylotrace.hpp"

namespace fs = std::filesystem;
using namespace phylotrace;

namespace {

std::string sanitize_filename(const std::string& name) {
  std::string out;
  for (char c : name)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_') ? c : '_';
  return out.empty() ? std::string("_") : out;
}

std::vector<ModelGenotype> load_genotypes(const std::vector<std::string>& paths,
                                          const std::vector<std::string>& labels) {
  if (!labels.empty() && labels.size() != paths.size())
    throw Error(ErrorCode::InvalidArgument, "cli: --labels count must match the archive count");
  std::vector<ModelGenotype> models;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const TensorArchive archive = read_archive(paths[i]);
    const std::string id = labels.empty() ? fs::path(paths[i]).stem().string() : labels[i];
    models.push_back(to_genotype(archive, id));
  }
  return models;
}

RunManifest make_manifest(const std::string& subcommand, nlohmann::json options,
                          const std::vector<std::string>& inputs,
                          std::optional<std::uint64_t> seed = std::nullopt) {
  RunManifest manifest;
  manifest.subcommand = subcommand;
  manifest.options = std::move(options);
  manifest.seed = seed;
  for (const auto& path : inputs) manifest.input_digests[path] = file_digest(path);
  return manifest;
}

ConsensusRule parse_rule(const std::string& rule, double& p) {
  if (rule == "strict") return ConsensusRule::Strict;
  if (rule == "majority") {
    p = 0.5;
    return ConsensusRule::Majority;
  }
  if (rule.rfind("majority:", 0) == 0) {
    p = detail::parse_double(rule.substr(9), "cli");
    return ConsensusRule::Majority;
  }
  throw Error(ErrorCode::InvalidArgument, "cli: --rule must be strict or majority[:p]");
}

// ---------------------------------------------------------------- distances

struct DistancesOptions {
  std::vector<std::string> archives;
  std::vector<std::string> labels;
  std::string metric = "l1";
  bool per_layer = false;
  std::string output;
};

void run_distances(const DistancesOptions& opt) {
  const MetricKind metric = parse_metric(opt.metric);
  const auto models = load_genotypes(opt.archives, opt.labels);
  nlohmann::json options{{"metric", opt.metric}, {"per_layer", opt.per_layer}};

  if (opt.per_layer) {
    if (opt.output.empty())
      throw Error(ErrorCode::InvalidArgument, "cli: --per-layer needs -o <directory>");
    fs::create_directories(opt.output);
    const auto matrices = build_per_layer(metric, models);
    for (std::size_t l = 0; l < matrices.size(); ++l) {
      char index[16];
      std::snprintf(index, sizeof(index), "layer_%03zu_", l);
      const std::string layer_name = matrices[l].source.substr(6);  // strip "layer:"
      write_matrix(matrices[l], fs::path(opt.output) / (index + sanitize_filename(layer_name) + ".csv"));
    }
    options["layers"] = matrices.size();
    write_manifest(make_manifest("distances", options, opt.archives),
                   fs::path(opt.output) / "manifest.json");
    std::cout << matrices.size() << " layer matrices written to " << opt.output << "\n";
    return;
  }

  const DistanceMatrix matrix = build_total(metric, models);
  if (opt.output.empty()) {
    std::cout << matrix_to_csv(matrix);
  } else {
    write_matrix(matrix, opt.output);
    write_manifest(make_manifest("distances", options, opt.archives), opt.output + ".manifest.json");
  }
}

// --------------------------------------------------------------------- tree

struct TreeOptions {
  std::string matrix;
  std::string output;
  std::string svg;
  std::string dot;
  bool ascii = false;
};

void run_tree(const TreeOptions& opt) {
  const DistanceMatrix matrix = read_matrix(opt.matrix);
  const PhyloTree tree = neighbor_joining(matrix);
  const std::string newick = to_newick(tree);
  if (opt.output.empty())
    std::cout << newick << "\n";
  else
    detail::write_text_file(opt.output, newick + "\n", "cli");
  if (!opt.svg.empty()) detail::write_text_file(opt.svg, render_tree_svg(tree), "cli");
  if (!opt.dot.empty()) detail::write_text_file(opt.dot, render_tree_dot(tree), "cli");
  if (opt.ascii) std::cout << render_tree_ascii(tree);

  const std::string anchor = !opt.output.empty() ? opt.output : (!opt.svg.empty() ? opt.svg : opt.dot);
  if (!anchor.empty()) {
    nlohmann::json options{{"svg", opt.svg}, {"dot", opt.dot}};
    write_manifest(make_manifest("tree", options, {opt.matrix}), anchor + ".manifest.json");
  }
}

// ---------------------------------------------------------------- consensus

struct ConsensusOptions {
  std::vector<std::string> trees;
  std::string rule = "majority:0.5";
  std::string output;
};

void run_consensus(const ConsensusOptions& opt) {
  double p = 0.5;
  const ConsensusRule rule = parse_rule(opt.rule, p);
  std::vector<PhyloTree> trees;
  for (const auto& path : opt.trees) trees.push_back(read_newick_file(path));
  const PhyloTree result = consensus(trees, rule, p);
  const std::string newick = to_newick(result);
  if (opt.output.empty()) {
    std::cout << newick << "\n";
  } else {
    detail::write_text_file(opt.output, newick + "\n", "cli");
    write_manifest(make_manifest("consensus", {{"rule", opt.rule}}, opt.trees),
                   opt.output + ".manifest.json");
  }
}

// ----------------------------------------------------------------------- rf

struct RfOptions {
  std::string tree_a;
  std::string tree_b;
  std::string mode = "unrooted";
};

void run_rf(const RfOptions& opt) {
  if (opt.mode != "unrooted" && opt.mode != "rooted")
    throw Error(ErrorCode::InvalidArgument, "cli: --mode must be unrooted or rooted");
  const RfMode mode = opt.mode == "rooted" ? RfMode::Rooted : RfMode::Unrooted;
  std::cout << rf_distance(read_newick_file(opt.tree_a), read_newick_file(opt.tree_b), mode) << "\n";
}

// ----------------------------------------------------------------- permtest

struct PermtestOptions {
  std::string estimated;
  std::string truth;
  int trials = 1000;
  std::uint64_t seed = 0;
};

void run_permtest(const PermtestOptions& opt) {
  const double fraction =
      permutation_test(read_newick_file(opt.estimated), read_newick_file(opt.truth), opt.trials, opt.seed);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.3f", fraction);
  std::cout << buf << "\n";
}

// ------------------------------------------------------------------- layers

struct LayersOptions {
  std::vector<std::string> archives;
  std::vector<std::string> labels;
  std::string metric = "l1";
  int top = 10;
  std::string output = "layers";
};

void run_layers(const LayersOptions& opt) {
  const MetricKind metric = parse_metric(opt.metric);
  const auto models = load_genotypes(opt.archives, opt.labels);
  const LayerImportanceReport report = rank_layers(metric, models);
  write_importance_csv(report, opt.output + ".csv");
  detail::write_text_file(opt.output + ".svg", render_importance_svg(report, opt.top), "cli");
  write_manifest(make_manifest("layers", {{"metric", opt.metric}, {"top", opt.top}}, opt.archives),
                 opt.output + ".csv.manifest.json");

  const int shown = std::min<int>(opt.top, static_cast<int>(report.rows.size()));
  for (int i = 0; i < shown; ++i) {
    const auto& row = report.rows[i];
    std::printf("%4d  %-48s  %.6g%s\n", row.rank, row.layer.c_str(), row.mean,
                row.flagged ? "  *" : "");
  }
}

// ----------------------------------------------------------------- simulate

struct SimulateOptions {
  int random_runs = 0;
  std::string config;
  int dataset_count = 10;
  std::string dataset_names;
  double lambda = 0.7;
  double drift = 1.0;
  double noise = 0.05;
  int layers = 10;
  int layer_size = 1000;
  std::string metrics = "l1,l2,cosine,correlation,threshold";
  std::string nodes = "leaves";
  int trials = 1000;
  std::uint64_t seed = 0;
  std::string output = "simulation";
};

void run_simulate(const SimulateOptions& opt) {
  if ((opt.random_runs > 0) == !opt.config.empty())
    throw Error(ErrorCode::InvalidArgument, "cli: give exactly one of --random B or --config FILE");
  if (opt.nodes != "leaves" && opt.nodes != "all")
    throw Error(ErrorCode::InvalidArgument, "cli: --nodes must be leaves or all");
  if (opt.layers < 1 || opt.layer_size < 1)
    throw Error(ErrorCode::InvalidArgument, "cli: --layers and --layer-size must be >= 1");

  ExperimentParams params;
  params.lambda = opt.lambda;
  params.evolution.layer_count = static_cast<std::size_t>(opt.layers);
  params.evolution.layer_sizes.assign(static_cast<std::size_t>(opt.layers),
                                      static_cast<std::size_t>(opt.layer_size));
  params.evolution.drift_scale = opt.drift;
  params.evolution.noise_scale = opt.noise;
  params.evolution.seed = opt.seed;

  if (!opt.dataset_names.empty()) {
    params.datasets = detail::split(opt.dataset_names, ',');
  } else {
    if (opt.dataset_count < 1)
      throw Error(ErrorCode::InvalidArgument, "cli: --datasets must be >= 1");
    params.datasets.clear();
    for (int i = 0; i < opt.dataset_count; ++i) {
      if (i < static_cast<int>(default_dataset_ids().size()))
        params.datasets.push_back(default_dataset_ids()[i]);
      else
        params.datasets.push_back("dataset_" + std::to_string(i + 1));
    }
  }

  std::vector<MetricKind> metrics;
  for (const auto& name : detail::split(opt.metrics, ',')) metrics.push_back(parse_metric(name));
  const NodesMode mode = opt.nodes == "all" ? NodesMode::All : NodesMode::Leaves;

  std::vector<std::string> inputs;
  if (!opt.config.empty()) {
    params.config = load_config(opt.config);
    inputs.push_back(opt.config);
  }

  const SimulationReport report =
      run_experiment(std::max(opt.random_runs, 1), params, metrics, mode, opt.trials, opt.seed);

  write_report_csv(report, opt.output + ".csv");
  write_report_jsonl(report, opt.output + ".jsonl");
  nlohmann::json options{{"random", opt.random_runs}, {"config", opt.config},
                         {"lambda", opt.lambda},      {"drift", opt.drift},
                         {"noise", opt.noise},        {"layers", opt.layers},
                         {"layer_size", opt.layer_size}, {"metrics", opt.metrics},
                         {"nodes", opt.nodes},        {"trials", opt.trials}};
  write_manifest(make_manifest("simulate", options, inputs, opt.seed),
                 opt.output + ".csv.manifest.json");
  std::cout << report_to_csv(report);
}

// -------------------------------------------------------------------- embed

struct EmbedOptions {
  std::string corpus;
  std::string metric = "cosine";
  std::string scope = "per-dataset";
  std::string truth;
  std::string output = "embed_out";
};

void run_embed(const EmbedOptions& opt) {
  const MetricKind metric = parse_metric(opt.metric);
  const EmbeddingCorpus corpus = load_corpus(opt.corpus);
  std::optional<PhyloTree> truth;
  if (!opt.truth.empty()) truth = read_newick_file(opt.truth);

  fs::create_directories(opt.output);
  std::vector<std::pair<std::string, PhyloTree>> scoped;
  if (opt.scope == "per-dataset") {
    DatasetTreeAnalysis analysis = per_dataset_trees(corpus, metric, truth ? &*truth : nullptr);
    scoped = std::move(analysis.trees);
  } else if (opt.scope == "per-prompt") {
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& r : corpus) keys.insert({r.dataset, r.prompt});
    for (const auto& [dataset, prompt] : keys) {
      const DistanceMatrix matrix =
          model_distance_matrix(corpus, metric, EmbedScope::PerPrompt, dataset, prompt);
      scoped.emplace_back(dataset + "," + prompt, neighbor_joining(matrix));
    }
  } else if (opt.scope == "global") {
    const DistanceMatrix matrix = model_distance_matrix(corpus, metric, EmbedScope::Global);
    scoped.emplace_back("global", neighbor_joining(matrix));
  } else {
    throw Error(ErrorCode::InvalidArgument, "cli: --scope must be per-dataset, per-prompt or global");
  }

  for (const auto& [key, tree] : scoped)
    write_newick_file(tree, fs::path(opt.output) / (sanitize_filename(key) + ".nwk"));

  std::vector<PhyloTree> trees_only;
  for (auto& [key, tree] : scoped) trees_only.push_back(tree);
  const PhyloTree combined = consensus(trees_only, ConsensusRule::Majority, 0.5);
  write_newick_file(combined, fs::path(opt.output) / "consensus.nwk");

  if (truth) {
    std::string csv = "scope,rf\n";
    for (const auto& [key, tree] : scoped)
      csv += detail::csv_escape(key) + "," + std::to_string(rf_distance(tree, *truth)) + "\n";
    csv += "consensus," + std::to_string(rf_distance(combined, *truth)) + "\n";
    detail::write_text_file(fs::path(opt.output) / "rf.csv", csv, "cli");
  }

  std::vector<std::string> inputs{opt.corpus};
  if (!opt.truth.empty()) inputs.push_back(opt.truth);
  write_manifest(make_manifest("embed", {{"metric", opt.metric}, {"scope", opt.scope}}, inputs),
                 fs::path(opt.output) / "manifest.json");
  std::cout << scoped.size() << " trees + consensus written to " << opt.output << "\n";
}

// ---------------------------------------------------------------------- pca

struct PcaOptions {
  std::string corpus;
  std::string dataset;
  std::string prompt;
  std::string output = "pca";
};

void run_pca(const PcaOptions& opt) {
  const EmbeddingCorpus corpus = load_corpus(opt.corpus);
  std::vector<std::pair<std::pair<std::string, int>, const EmbeddingRecord*>> selected;
  for (const auto& r : corpus)
    if (r.dataset == opt.dataset && r.prompt == opt.prompt)
      selected.push_back({{r.model, r.run}, &r});
  if (selected.empty())
    throw Error(ErrorCode::MissingModel,
                "cli: no records for dataset \"" + opt.dataset + "\", prompt \"" + opt.prompt + "\"");
  std::sort(selected.begin(), selected.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<std::string> labels;
  std::vector<std::vector<double>> points;
  for (const auto& [key, record] : selected) {
    labels.push_back(record->model);
    points.push_back(record->vector);
  }
  const PcaProjection projection = pca2(labels, points);

  std::string csv = "label,pc1,pc2\n";
  for (std::size_t i = 0; i < projection.labels.size(); ++i)
    csv += detail::csv_escape(projection.labels[i]) + "," + detail::fmt_g17(projection.coords[i][0]) +
           "," + detail::fmt_g17(projection.coords[i][1]) + "\n";
  detail::write_text_file(opt.output + ".csv", csv, "cli");

  nlohmann::json sidecar{{"explained_pc1", projection.explained[0]},
                         {"explained_pc2", projection.explained[1]}};
  detail::write_text_file(opt.output + ".json", sidecar.dump(2) + "\n", "cli");
  detail::write_text_file(opt.output + ".svg", render_pca_svg(projection), "cli");
  write_manifest(make_manifest("pca", {{"dataset", opt.dataset}, {"prompt", opt.prompt}},
                               {opt.corpus}),
                 opt.output + ".csv.manifest.json");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phylotrace: evolutionary trees of fine-tuned models from weights and embeddings"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  DistancesOptions distances_opt;
  auto* distances = app.add_subcommand("distances", "pairwise distance matrix from checkpoint archives");
  distances->add_option("archives", distances_opt.archives, "checkpoint archives (>= 3)")
      ->required()
      ->check(CLI::ExistingFile);
  distances->add_option("--metric", distances_opt.metric,
                        "l1 | l2 | cosine | correlation | threshold[:eps]");
  distances->add_flag("--per-layer", distances_opt.per_layer, "one matrix per weight layer");
  distances->add_option("--labels", distances_opt.labels, "model ids (default: file stems)")
      ->delimiter(',');
  distances->add_option("-o,--output", distances_opt.output, "output CSV file (or directory with --per-layer)");
  distances->callback([&] { run_distances(distances_opt); });

  TreeOptions tree_opt;
  auto* tree = app.add_subcommand("tree", "neighbor-joining tree from a distance matrix CSV");
  tree->add_option("matrix", tree_opt.matrix, "distance matrix CSV")->required()->check(CLI::ExistingFile);
  tree->add_option("-o,--output", tree_opt.output, "output Newick file (default: stdout)");
  tree->add_option("--svg", tree_opt.svg, "also render an SVG cladogram");
  tree->add_option("--dot", tree_opt.dot, "also export Graphviz DOT");
  tree->add_flag("--ascii", tree_opt.ascii, "print an ASCII rendering");
  tree->callback([&] { run_tree(tree_opt); });

  ConsensusOptions consensus_opt;
  auto* cons = app.add_subcommand("consensus", "consensus tree from Newick files");
  cons->add_option("trees", consensus_opt.trees, "input Newick files")->required()->check(CLI::ExistingFile);
  cons->add_option("--rule", consensus_opt.rule, "strict | majority[:p] (default majority:0.5)");
  cons->add_option("-o,--output", consensus_opt.output, "output Newick file (default: stdout)");
  cons->callback([&] { run_consensus(consensus_opt); });

  RfOptions rf_opt;
  auto* rf = app.add_subcommand("rf", "Robinson-Foulds distance between two trees");
  rf->add_option("tree_a", rf_opt.tree_a)->required()->check(CLI::ExistingFile);
  rf->add_option("tree_b", rf_opt.tree_b)->required()->check(CLI::ExistingFile);
  rf->add_option("--mode", rf_opt.mode, "unrooted | rooted (default unrooted)");
  rf->callback([&] { run_rf(rf_opt); });

  PermtestOptions permtest_opt;
  auto* permtest = app.add_subcommand("permtest", "fraction of random trees beating the estimate");
  permtest->add_option("estimated", permtest_opt.estimated)->required()->check(CLI::ExistingFile);
  permtest->add_option("truth", permtest_opt.truth)->required()->check(CLI::ExistingFile);
  permtest->add_option("--trials", permtest_opt.trials, "random trees to draw (default 1000)");
  permtest->add_option("--seed", permtest_opt.seed, "RNG seed");
  permtest->callback([&] { run_permtest(permtest_opt); });

  LayersOptions layers_opt;
  auto* layers = app.add_subcommand("layers", "rank layers by mean pairwise weight distance");
  layers->add_option("archives", layers_opt.archives, "checkpoint archives (>= 2)")
      ->required()
      ->check(CLI::ExistingFile);
  layers->add_option("--metric", layers_opt.metric);
  layers->add_option("--top", layers_opt.top, "rows in the chart/table (default 10)");
  layers->add_option("--labels", layers_opt.labels)->delimiter(',');
  layers->add_option("-o,--output", layers_opt.output, "output prefix (default: layers)");
  layers->callback([&] { run_layers(layers_opt); });

  SimulateOptions simulate_opt;
  auto* simulate = app.add_subcommand("simulate", "controlled experiment on synthetic lineages");
  simulate->add_option("--random", simulate_opt.random_runs, "number of random training trees");
  simulate->add_option("--config", simulate_opt.config, "fixed training-tree config JSON")
      ->check(CLI::ExistingFile);
  simulate->add_option("--datasets", simulate_opt.dataset_count, "dataset count (default 10)");
  simulate->add_option("--dataset-names", simulate_opt.dataset_names, "comma-separated dataset ids");
  simulate->add_option("--lambda", simulate_opt.lambda, "Poisson rate for EMPTY entries (default 0.7)");
  simulate->add_option("--drift", simulate_opt.drift, "per-dataset drift step (default 1.0)");
  simulate->add_option("--noise", simulate_opt.noise, "per-child isotropic noise (default 0.05)");
  simulate->add_option("--layers", simulate_opt.layers, "layer count (default 10)");
  simulate->add_option("--layer-size", simulate_opt.layer_size, "weights per layer (default 1000)");
  simulate->add_option("--metrics", simulate_opt.metrics, "comma-separated metric list");
  simulate->add_option("--nodes", simulate_opt.nodes, "reconstruct from leaves | all (default leaves)");
  simulate->add_option("--trials", simulate_opt.trials, "permutation-test trials (default 1000)");
  simulate->add_option("--seed", simulate_opt.seed, "master seed");
  simulate->add_option("-o,--output", simulate_opt.output, "report prefix (default: simulation)");
  simulate->callback([&] { run_simulate(simulate_opt); });

  EmbedOptions embed_opt;
  auto* embed = app.add_subcommand("embed", "trees from response-embedding distances");
  embed->add_option("corpus", embed_opt.corpus, "embedding corpus JSONL")->required()->check(CLI::ExistingFile);
  embed->add_option("--metric", embed_opt.metric, "default cosine");
  embed->add_option("--scope", embed_opt.scope, "per-dataset | per-prompt | global");
  embed->add_option("--truth", embed_opt.truth, "ground-truth Newick for RF reporting")
      ->check(CLI::ExistingFile);
  embed->add_option("-o,--output", embed_opt.output, "output directory (default: embed_out)");
  embed->callback([&] { run_embed(embed_opt); });

  PcaOptions pca_opt;
  auto* pca = app.add_subcommand("pca", "2-component PCA of embeddings for one dataset/prompt");
  pca->add_option("corpus", pca_opt.corpus, "embedding corpus JSONL")->required()->check(CLI::ExistingFile);
  pca->add_option("--dataset", pca_opt.dataset)->required();
  pca->add_option("--prompt", pca_opt.prompt)->required();
  pca->add_option("-o,--output", pca_opt.output, "output prefix (default: pca)");
  pca->callback([&] { run_pca(pca_opt); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::cerr << "phylotrace: " << e.what() << "\n";
    return e.code() == ErrorCode::InvalidArgument ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "phylotrace: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
