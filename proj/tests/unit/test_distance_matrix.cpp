// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <vector>

#include "phylotrace/distance_matrix.hpp"
#include "phylotrace/rng.hpp"
#include "../support/oracles.hpp"
#include "../support/temp.hpp"

using namespace phylotrace;
using test_support::TempDir;

namespace {

ModelGenotype random_genotype(const std::string& id, Rng& rng,
                              const std::vector<std::pair<std::string, std::size_t>>& layout) {
  ModelGenotype g;
  g.model_id = id;
  for (const auto& [name, len] : layout) g.layers.emplace_back(name, oracles::random_vector(rng, len));
  return g;
}

DistanceMatrix random_matrix(Rng& rng, std::size_t n) {
  DistanceMatrix m;
  m.metric = rng.next_below(2) ? MetricKind::l2() : MetricKind::threshold(rng.next_double());
  m.source = rng.next_below(2) ? "total" : "embedding:xsum,prompt 1";  // comma forces CSV quoting
  for (std::size_t i = 0; i < n; ++i) m.labels.push_back("model_" + std::to_string(i));
  m.values.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = rng.next_in(0.0, 100.0);
      m.at(i, j) = v;
      m.at(j, i) = v;
    }
  return m;
}

}  // namespace

TEST_CASE("three identical models give the zero matrix") {
  Rng rng(1);
  const auto layout = std::vector<std::pair<std::string, std::size_t>>{{"w", 16}};
  const auto a = random_genotype("a", rng, layout);
  auto b = a;
  b.model_id = "b";
  auto c = a;
  c.model_id = "c";
  const std::vector<ModelGenotype> models{a, b, c};
  const DistanceMatrix m = build_total(MetricKind::l1(), models);
  for (double v : m.values) CHECK(v == 0.0);
}

TEST_CASE("collinear construction under L1") {
  ModelGenotype a{"a", {{"w", {0.0, 0.0}}}};
  ModelGenotype b{"b", {{"w", {0.5, 0.0}}}};  // a + delta e1
  ModelGenotype c{"c", {{"w", {1.0, 0.0}}}};  // a + 2 delta e1
  const std::vector<ModelGenotype> models{a, b, c};
  const DistanceMatrix m = build_total(MetricKind::l1(), models);
  CHECK(m.at(0, 1) == 0.5);
  CHECK(m.at(0, 2) == 1.0);
  CHECK(m.at(1, 2) == 0.5);
  CHECK(m.at(1, 0) == 0.5);
}

TEST_CASE("build_total matches a brute-force pairwise loop") {
  Rng rng(2);
  const std::vector<std::pair<std::string, std::size_t>> layout{{"w1", 12}, {"w2", 7}};
  std::vector<ModelGenotype> models;
  for (int i = 0; i < 4; ++i) models.push_back(random_genotype("m" + std::to_string(i), rng, layout));
  const DistanceMatrix m = build_total(MetricKind::l2(), models);
  for (std::size_t i = 0; i < models.size(); ++i)
    for (std::size_t j = 0; j < models.size(); ++j) {
      if (i == j) {
        CHECK(m.at(i, j) == 0.0);
        continue;
      }
      std::vector<double> flat_i, flat_j;
      for (const auto& name : models[i].sorted_layer_names()) {
        const auto* vi = models[i].find_layer(name);
        const auto* vj = models[j].find_layer(name);
        flat_i.insert(flat_i.end(), vi->begin(), vi->end());
        flat_j.insert(flat_j.end(), vj->begin(), vj->end());
      }
      CHECK(m.at(i, j) == Catch::Approx(oracles::ref_l2(flat_i, flat_j)).epsilon(1e-12));
    }
}

TEST_CASE("per-layer matrix count equals the layer count") {
  // 131 layers, mirroring the layer-wise tree count for the studied model
  Rng rng(3);
  std::vector<std::pair<std::string, std::size_t>> layout;
  for (int l = 0; l < 131; ++l) layout.emplace_back("layer." + std::to_string(1000 + l), 3);
  std::vector<ModelGenotype> models;
  for (int i = 0; i < 3; ++i) models.push_back(random_genotype("m" + std::to_string(i), rng, layout));
  const auto matrices = build_per_layer(MetricKind::l1(), models);
  CHECK(matrices.size() == 131);
  // canonical layer order in the source tags
  CHECK(matrices.front().source == "layer:layer.1000");
  CHECK(matrices.back().source == "layer:layer.1130");
}

TEST_CASE("models differing only in one layer localize the signal") {
  Rng rng(4);
  const std::vector<std::pair<std::string, std::size_t>> layout{{"q", 8}, {"k", 8}, {"v", 8}};
  const auto base = random_genotype("base", rng, layout);
  auto b = base;
  b.model_id = "b";
  auto c = base;
  c.model_id = "c";
  for (double& v : b.layers[0].second) v += 1.0;  // layer "q"
  for (double& v : c.layers[0].second) v += 2.0;
  const std::vector<ModelGenotype> models{base, b, c};
  for (const auto& matrix : build_per_layer(MetricKind::l2(), models)) {
    const bool is_q = matrix.source == "layer:q";
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) {
        if (i == j || is_q) continue;
        CHECK(matrix.at(i, j) == 0.0);
      }
    if (is_q) CHECK(matrix.at(0, 1) > 0.0);
  }
}

TEST_CASE("per-layer L1 matrices sum elementwise to the total L1 matrix") {
  Rng rng(5);
  const std::vector<std::pair<std::string, std::size_t>> layout{{"a", 6}, {"b", 9}, {"c", 4}};
  std::vector<ModelGenotype> models;
  for (int i = 0; i < 4; ++i) models.push_back(random_genotype("m" + std::to_string(i), rng, layout));
  const DistanceMatrix total = build_total(MetricKind::l1(), models);
  const auto per_layer = build_per_layer(MetricKind::l1(), models);
  for (std::size_t i = 0; i < models.size(); ++i)
    for (std::size_t j = 0; j < models.size(); ++j) {
      double sum = 0;
      for (const auto& matrix : per_layer) sum += matrix.at(i, j);
      CHECK(total.at(i, j) == Catch::Approx(sum).margin(1e-12));
    }
}

TEST_CASE("build_total is permutation-equivariant") {
  Rng rng(6);
  const std::vector<std::pair<std::string, std::size_t>> layout{{"w", 10}};
  std::vector<ModelGenotype> models;
  for (int i = 0; i < 5; ++i) models.push_back(random_genotype("m" + std::to_string(i), rng, layout));
  const DistanceMatrix original = build_total(MetricKind::l2(), models);

  std::vector<ModelGenotype> shuffled = models;
  std::reverse(shuffled.begin(), shuffled.end());
  const DistanceMatrix permuted = build_total(MetricKind::l2(), shuffled);
  const std::size_t n = models.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      CHECK(permuted.at(i, j) == original.at(n - 1 - i, n - 1 - j));
}

TEST_CASE("fewer than three models is an error") {
  Rng rng(7);
  const std::vector<std::pair<std::string, std::size_t>> layout{{"w", 4}};
  std::vector<ModelGenotype> models{random_genotype("a", rng, layout),
                                    random_genotype("b", rng, layout)};
  try {
    build_total(MetricKind::l1(), models);
    FAIL("expected InvalidArgument");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("metric errors carry the offending pair") {
  ModelGenotype a{"alpha", {{"w", {0.0, 0.0}}}};  // zero vector breaks cosine
  ModelGenotype b{"beta", {{"w", {1.0, 2.0}}}};
  ModelGenotype c{"gamma", {{"w", {2.0, 1.0}}}};
  try {
    build_total(MetricKind::cosine(), std::vector<ModelGenotype>{a, b, c});
    FAIL("expected DegenerateVector");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateVector);
    CHECK(e.message().find("alpha") != std::string::npos);
  }
}

TEST_CASE("CSV round-trip preserves labels, metric, source and exact values") {
  TempDir dir;
  Rng rng(8);
  for (int i = 0; i < 20; ++i) {
    const DistanceMatrix m = random_matrix(rng, 3 + rng.next_below(6));
    const auto path = dir.file("m" + std::to_string(i) + ".csv");
    write_matrix(m, path);
    const DistanceMatrix r = read_matrix(path);
    CHECK(r.labels == m.labels);
    CHECK(r.values == m.values);  // %.17g round-trips doubles exactly
    CHECK(r.metric == m.metric);
    CHECK(r.source == m.source);
    // idempotent second write
    const auto path2 = dir.file("m" + std::to_string(i) + "b.csv");
    write_matrix(r, path2);
    CHECK(test_support::read_bytes(path) == test_support::read_bytes(path2));
  }
}

TEST_CASE("asymmetric and negative matrices are rejected on read") {
  TempDir dir;
  test_support::write_bytes(dir.file("asym.csv"),
                            "#metric=l1;source=total,A,B\nA,0,1\nB,2,0\n");
  try {
    read_matrix(dir.file("asym.csv"));
    FAIL("expected InvalidMatrix");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidMatrix);
  }
  test_support::write_bytes(dir.file("neg.csv"),
                            "#metric=l1;source=total,A,B\nA,0,-1\nB,-1,0\n");
  try {
    read_matrix(dir.file("neg.csv"));
    FAIL("expected InvalidMatrix");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidMatrix);
  }
}
