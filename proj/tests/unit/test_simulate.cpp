// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "phylotrace/metrics.hpp"
#include "phylotrace/simulate.hpp"
#include "../support/temp.hpp"

using namespace phylotrace;
using test_support::TempDir;

TEST_CASE("lambda zero keeps the full left-complete layout") {
  const TrainingTreeConfig config = generate_config({"d1", "d2", "d3"}, false, 0.0, 1);
  REQUIRE(config.entries.size() == 3);
  for (const auto& e : config.entries) CHECK(e.has_value());

  const auto nodes = build_training_nodes(config);
  REQUIRE(nodes.size() == 4);  // base + 3 training nodes
  CHECK(nodes[0].children == std::vector<int>{1, 2});  // d1, d2 under the root
  CHECK(nodes[1].children == std::vector<int>{3});     // d3 under d1
  CHECK(nodes[1].id == "d1");
  CHECK(nodes[3].id == "d3");
  CHECK(training_leaf_count(nodes) == 2);  // d2 and d3
}

TEST_CASE("EMPTY entries terminate branches and orphan later entries") {
  TrainingTreeConfig config;
  config.dataset_ids = {"d1", "d2", "d3"};
  config.entries = {std::nullopt, std::nullopt, std::string("d1")};
  const auto nodes = build_training_nodes(config);
  CHECK(nodes.size() == 1);  // both root slots EMPTY: d1 never trains
}

TEST_CASE("config generation is deterministic in the seed") {
  const auto a = generate_config(default_dataset_ids(), true, 0.7, 42);
  const auto b = generate_config(default_dataset_ids(), true, 0.7, 42);
  const auto c = generate_config(default_dataset_ids(), true, 0.7, 43);
  CHECK(a.entries == b.entries);
  CHECK(a.entries != c.entries);
}

TEST_CASE("config JSON round-trip") {
  TempDir dir;
  const auto config = generate_config(default_dataset_ids(), true, 0.7, 9);
  save_config(config, dir.file("c.json"));
  const auto reread = load_config(dir.file("c.json"));
  CHECK(reread.dataset_ids == config.dataset_ids);
  CHECK(reread.entries == config.entries);
  CHECK(reread.seed == config.seed);
}

TEST_CASE("Poisson insertion rate matches its mean") {
  // 10,000 configs x 10 slots; EMPTY count per slot should average lambda
  const double lambda = 0.7;
  std::size_t empties = 0, slots = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const auto config = generate_config(default_dataset_ids(), false, lambda, seed);
    slots += config.dataset_ids.size();
    for (const auto& e : config.entries) empties += e ? 0 : 1;
  }
  const double mean = static_cast<double>(empties) / static_cast<double>(slots);
  CHECK(mean == Catch::Approx(lambda).margin(0.03));
}

TEST_CASE("noise-free geometry: sibling distance is drift * |u1 - u2|") {
  TrainingTreeConfig config;
  config.dataset_ids = {"d1", "d2"};
  config.entries = {std::string("d1"), std::string("d2")};
  EvolutionParams params;
  params.layer_count = 4;
  params.layer_sizes = {16, 16, 16, 16};
  params.drift_scale = 2.5;
  params.noise_scale = 0.0;
  params.seed = 17;

  const EvolvedModels evolved = evolve(config, params);
  REQUIRE(evolved.models.size() == 3);

  // reconstruct the two unit directions via (child - parent) / drift
  std::vector<double> u1, u2;
  for (std::size_t l = 0; l < evolved.models[0].layers.size(); ++l)
    for (std::size_t k = 0; k < evolved.models[0].layers[l].second.size(); ++k) {
      u1.push_back((evolved.models[1].layers[l].second[k] - evolved.models[0].layers[l].second[k]) /
                   params.drift_scale);
      u2.push_back((evolved.models[2].layers[l].second[k] - evolved.models[0].layers[l].second[k]) /
                   params.drift_scale);
    }
  double norm1 = 0, norm2 = 0, diff_sq = 0;
  for (std::size_t k = 0; k < u1.size(); ++k) {
    norm1 += u1[k] * u1[k];
    norm2 += u2[k] * u2[k];
    diff_sq += (u1[k] - u2[k]) * (u1[k] - u2[k]);
  }
  CHECK(norm1 == Catch::Approx(1.0).epsilon(1e-12));  // drift directions are unit vectors
  CHECK(norm2 == Catch::Approx(1.0).epsilon(1e-12));

  const double sibling_l2 =
      total_distance(MetricKind::l2(), evolved.models[1], evolved.models[2]);
  CHECK(sibling_l2 == Catch::Approx(params.drift_scale * std::sqrt(diff_sq)).epsilon(1e-9));
}

TEST_CASE("zero drift and zero noise collapse every model onto the base") {
  TrainingTreeConfig config;
  config.dataset_ids = {"d1", "d2", "d3"};
  config.entries = {std::string("d1"), std::string("d2"), std::string("d3")};
  EvolutionParams params;
  params.layer_count = 2;
  params.layer_sizes = {8, 8};
  params.drift_scale = 0.0;
  params.noise_scale = 0.0;
  const EvolvedModels evolved = evolve(config, params);
  for (std::size_t i = 1; i < evolved.models.size(); ++i)
    CHECK(total_distance(MetricKind::l1(), evolved.models[0], evolved.models[i]) == 0.0);
}

TEST_CASE("drift-dominant regime recovers the truth from totals") {
  // the analog of high-match reconstruction: strong drift, tiny noise
  int exact = 0;
  const int seeds = 30;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    ExperimentParams params;
    params.datasets = {"a", "b", "c", "d", "e", "f"};
    params.lambda = 0.0;  // full tree: 6 training nodes, deterministic shape
    params.evolution.layer_count = 5;
    params.evolution.layer_sizes = {50, 50, 50, 50, 50};
    params.evolution.drift_scale = 1.0;
    params.evolution.noise_scale = 0.01;
    const MetricKind metrics[] = {MetricKind::l2()};
    const SimulationReport report =
        run_experiment(1, params, metrics, NodesMode::Leaves, 100, seed);
    REQUIRE(report.runs.size() == 1);
    if (report.runs[0].total_rf == 0.0) ++exact;
  }
  CHECK(exact >= 27);  // >= 90% of seeds
}

TEST_CASE("reports are bit-identical across reruns and thread budgets") {
  TempDir dir;
  ExperimentParams params;
  params.evolution.layer_count = 3;
  params.evolution.layer_sizes = {20, 20, 20};
  const MetricKind metrics[] = {MetricKind::l1(), MetricKind::cosine()};

  setenv("PHYLOTRACE_THREADS", "1", 1);
  const SimulationReport first = run_experiment(3, params, metrics, NodesMode::Leaves, 100, 7);
  setenv("PHYLOTRACE_THREADS", "4", 1);
  const SimulationReport second = run_experiment(3, params, metrics, NodesMode::Leaves, 100, 7);
  unsetenv("PHYLOTRACE_THREADS");

  CHECK(report_to_csv(first) == report_to_csv(second));
  CHECK(report_to_jsonl(first) == report_to_jsonl(second));
}

TEST_CASE("all-nodes reconstruction has larger single-tree RF than leaves-only") {
  ExperimentParams params;
  params.evolution.layer_count = 4;
  params.evolution.layer_sizes = {40, 40, 40, 40};
  const MetricKind metrics[] = {MetricKind::l2()};
  double leaves_mean = 0, all_mean = 0;
  const int seeds = 10;
  for (std::uint64_t seed = 100; seed < 100 + seeds; ++seed) {
    const auto leaves = run_experiment(1, params, metrics, NodesMode::Leaves, 50, seed);
    const auto all = run_experiment(1, params, metrics, NodesMode::All, 50, seed);
    leaves_mean += leaves.runs[0].total_rf / seeds;
    all_mean += all.runs[0].total_rf / seeds;
  }
  CHECK(all_mean > leaves_mean);
}

TEST_CASE("match percentage does not increase with noise") {
  ExperimentParams params;
  params.evolution.layer_count = 4;
  params.evolution.layer_sizes = {30, 30, 30, 30};
  const MetricKind metrics[] = {MetricKind::l2()};
  std::vector<double> match;
  for (double noise : {0.0, 1.0, 25.0}) {
    params.evolution.noise_scale = noise;
    const SimulationReport report = run_experiment(6, params, metrics, NodesMode::Leaves, 50, 11);
    double mean = 0;
    for (const auto& r : report.runs) mean += r.match_pct / static_cast<double>(report.runs.size());
    match.push_back(mean);
  }
  CHECK(match[0] >= match[1]);
  CHECK(match[1] >= match[2]);
}

TEST_CASE("report invariants: fractions and RF ranges") {
  ExperimentParams params;
  params.evolution.layer_count = 3;
  params.evolution.layer_sizes = {15, 15, 15};
  const MetricKind metrics[] = {MetricKind::l1(), MetricKind::l2()};
  const SimulationReport report = run_experiment(5, params, metrics, NodesMode::Leaves, 100, 3);
  CHECK(report.runs.size() == 10);
  for (const auto& r : report.runs) {
    CHECK(r.total_rf >= 0.0);
    CHECK(r.consensus_rf >= 0.0);
    CHECK((r.match_pct >= 0.0 && r.match_pct <= 100.0));
    CHECK((r.random_lt_consensus >= 0.0 && r.random_lt_consensus <= 1.0));
    CHECK(r.leaf_count >= 3);
  }
  int total_n = 0;
  for (const auto& a : report.aggregates) total_n += a.n;
  CHECK(total_n == static_cast<int>(report.runs.size()));
}

TEST_CASE("fixed config runs reject under-sized trees") {
  ExperimentParams params;
  TrainingTreeConfig config;
  config.dataset_ids = {"d1"};
  config.entries = {std::string("d1")};
  params.config = config;
  const MetricKind metrics[] = {MetricKind::l1()};
  try {
    run_experiment(1, params, metrics, NodesMode::Leaves, 10, 1);
    FAIL("expected TooFewTaxa");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooFewTaxa);
  }
}
