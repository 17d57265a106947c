// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "phylotrace/embeddings.hpp"
#include "phylotrace/newick.hpp"
#include "phylotrace/rng.hpp"
#include "../support/oracles.hpp"
#include "../support/temp.hpp"

using namespace phylotrace;
using test_support::TempDir;

namespace {

std::string record_line(const std::string& model, const std::string& dataset,
                        const std::string& prompt, int run, const std::vector<double>& embedding) {
  nlohmann::json j{{"model", model}, {"dataset", dataset}, {"prompt", prompt}, {"run", run},
                   {"embedding", embedding}};
  return j.dump() + "\n";
}

EmbeddingCorpus corpus_from(const std::string& jsonl) {
  TempDir dir;
  test_support::write_bytes(dir.file("c.jsonl"), jsonl);
  return load_corpus(dir.file("c.jsonl"));
}

}  // namespace

TEST_CASE("two valid records load") {
  const auto corpus = corpus_from(record_line("m1", "d", "p", 0, {1, 2, 3, 4}) +
                                  record_line("m2", "d", "p", 0, {4, 3, 2, 1}));
  REQUIRE(corpus.size() == 2);
  CHECK(corpus[0].model == "m1");
  CHECK(corpus[1].vector == std::vector<double>{4, 3, 2, 1});
}

TEST_CASE("corpus validation errors") {
  try {
    corpus_from(record_line("m1", "d", "p", 0, {1, 2, 3, 4}) +
                record_line("m2", "d", "p", 0, {1, 2, 3, 4, 5}));
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
  try {
    corpus_from(record_line("m1", "d", "p", 0, {1, 2}) + record_line("m1", "d", "p", 0, {3, 4}));
    FAIL("expected DuplicateKey");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DuplicateKey);
  }
  try {
    corpus_from("{\"model\":\"m\",\"dataset\":\"d\",\"prompt\":\"p\",\"run\":0,\"embedding\":[1,\"x\"]}\n");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
  }
  // a duplicate key on a different run index is fine
  CHECK(corpus_from(record_line("m1", "d", "p", 0, {1, 2}) + record_line("m1", "d", "p", 1, {3, 4}))
            .size() == 2);
}

TEST_CASE("identical embeddings give zero distance") {
  const auto corpus = corpus_from(record_line("m1", "d", "p", 0, {1, 2, 3}) +
                                  record_line("m2", "d", "p", 0, {1, 2, 3}) +
                                  record_line("m3", "d", "p", 0, {1, 2, 3}));
  const DistanceMatrix m = model_distance_matrix(corpus, MetricKind::l2(), EmbedScope::Global);
  for (double v : m.values) CHECK(v == 0.0);
}

TEST_CASE("cross-pair mean with repeated runs") {
  // model a has the same embedding twice, model b one at L2 distance 1
  const auto corpus = corpus_from(record_line("a", "d", "p", 0, {0, 0}) +
                                  record_line("a", "d", "p", 1, {0, 0}) +
                                  record_line("b", "d", "p", 0, {1, 0}));
  const DistanceMatrix m =
      model_distance_matrix(corpus, MetricKind::l2(), EmbedScope::PerDataset, "d");
  REQUIRE(m.labels == std::vector<std::string>{"a", "b"});
  CHECK(m.at(0, 1) == 1.0);  // mean of two identical cross pairs
  CHECK(m.at(0, 0) == 0.0);
}

TEST_CASE("matches the explicit enumeration oracle on random corpora") {
  Rng rng(61);
  std::string jsonl;
  std::vector<std::vector<std::vector<double>>> vectors(3);  // [model][run]
  for (int m = 0; m < 3; ++m)
    for (int r = 0; r < 2; ++r) {
      vectors[m].push_back(oracles::random_vector(rng, 6));
      jsonl += record_line("m" + std::to_string(m), "d", "p", r, vectors[m].back());
    }
  const auto corpus = corpus_from(jsonl);
  const DistanceMatrix got = model_distance_matrix(corpus, MetricKind::l2(), EmbedScope::Global);
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b) {
      double sum = 0;
      for (const auto& va : vectors[a])
        for (const auto& vb : vectors[b]) sum += oracles::ref_l2(va, vb);
      CHECK(got.at(a, b) == Catch::Approx(sum / 4.0).epsilon(1e-12));
    }
}

TEST_CASE("missing model in scope is an error") {
  const auto corpus = corpus_from(record_line("a", "d1", "p", 0, {1, 2}) +
                                  record_line("b", "d1", "p", 0, {2, 1}) +
                                  record_line("b", "d2", "p", 0, {2, 1}));
  try {
    model_distance_matrix(corpus, MetricKind::l2(), EmbedScope::PerDataset, "d2");
    FAIL("expected MissingModel");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingModel);
  }
}

TEST_CASE("per-prompt matrices mean-aggregate to the per-dataset matrix") {
  Rng rng(62);
  std::string jsonl;
  const std::vector<std::string> prompts{"p1", "p2", "p3"};
  for (int m = 0; m < 3; ++m)
    for (const auto& prompt : prompts)
      for (int run = 0; run < 2; ++run)  // equal run counts across prompts
        jsonl += record_line("m" + std::to_string(m), "d", prompt, run, oracles::random_vector(rng, 5));
  const auto corpus = corpus_from(jsonl);
  const DistanceMatrix per_dataset =
      model_distance_matrix(corpus, MetricKind::l2(), EmbedScope::PerDataset, "d");
  std::vector<DistanceMatrix> per_prompt;
  for (const auto& prompt : prompts)
    per_prompt.push_back(model_distance_matrix(corpus, MetricKind::l2(), EmbedScope::PerPrompt, "d", prompt));
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) {
      double mean = 0;
      for (const auto& m : per_prompt) mean += m.at(a, b) / static_cast<double>(prompts.size());
      CHECK(per_dataset.at(a, b) == Catch::Approx(mean).margin(1e-12));
    }
}

TEST_CASE("exactly tree-additive embeddings reconstruct the generating tree") {
  // symmetric quartet: A=(1,0,h) B=(-1,0,h) C=(0,1,-h) D=(0,-1,-h) with h=1
  // gives d(A,B)=d(C,D)=2 and all cross distances sqrt(6); additive on
  // ((A:1,B:1):e,(C:1,D:1)) with e = sqrt(6)-2 > 0
  const double h = 1.0;
  std::string jsonl;
  jsonl += record_line("A", "exact", "p", 0, {1, 0, h});
  jsonl += record_line("B", "exact", "p", 0, {-1, 0, h});
  jsonl += record_line("C", "exact", "p", 0, {0, 1, -h});
  jsonl += record_line("D", "exact", "p", 0, {0, -1, -h});
  const auto corpus = corpus_from(jsonl);

  const DistanceMatrix m = model_distance_matrix(corpus, MetricKind::l2(), EmbedScope::PerDataset, "exact");
  REQUIRE(oracles::four_point_condition(m.values, 4, 1e-12));

  const PhyloTree truth = parse_newick("((A,B),(C,D));");
  const DatasetTreeAnalysis analysis = per_dataset_trees(corpus, MetricKind::l2(), &truth);
  REQUIRE(analysis.rf.size() == 1);
  CHECK(analysis.rf[0].second == 0);
  CHECK(analysis.consensus_rf == 0);
}

TEST_CASE("identical corpora across datasets give identical trees and consensus") {
  Rng rng(63);
  std::vector<std::vector<double>> points;
  for (int m = 0; m < 5; ++m) points.push_back(oracles::random_vector(rng, 8));
  std::string jsonl;
  for (const auto& dataset : {"d1", "d2", "d3"})
    for (int m = 0; m < 5; ++m)
      jsonl += record_line("m" + std::to_string(m), dataset, "p", 0, points[m]);
  const auto corpus = corpus_from(jsonl);
  const DatasetTreeAnalysis analysis = per_dataset_trees(corpus, MetricKind::cosine());
  REQUIRE(analysis.trees.size() == 3);
  const auto reference = analysis.trees[0].second.splits();
  for (const auto& [dataset, tree] : analysis.trees) CHECK(tree.splits() == reference);
  CHECK(analysis.consensus.splits() == reference);
}

TEST_CASE("clustered families appear as a consensus split") {
  Rng rng(64);
  // two families of 3 models, separated by a large offset
  std::string jsonl;
  for (const auto& dataset : {"d1", "d2"}) {
    for (int m = 0; m < 6; ++m) {
      std::vector<double> center(10, m < 3 ? 0.0 : 50.0);
      auto p = oracles::random_vector(rng, 10);
      for (std::size_t j = 0; j < p.size(); ++j) p[j] += center[j];
      jsonl += record_line("fam" + std::to_string(m / 3) + "_m" + std::to_string(m % 3), dataset,
                           "p", 0, p);
    }
  }
  const auto corpus = corpus_from(jsonl);
  const DatasetTreeAnalysis analysis = per_dataset_trees(corpus, MetricKind::l2());
  const auto splits = analysis.consensus.splits();
  const std::set<std::string> family1{"fam1_m0", "fam1_m1", "fam1_m2"};
  CHECK(splits.count(family1) == 1);
}
