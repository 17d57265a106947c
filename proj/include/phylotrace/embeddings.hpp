// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "phylotrace/consensus.hpp"
#include "phylotrace/detail/text.hpp"
#include "phylotrace/distance_matrix.hpp"
#include "phylotrace/error.hpp"
#include "phylotrace/metrics.hpp"
#include "phylotrace/neighbor_joining.hpp"
#include "phylotrace/robinson_foulds.hpp"
#include "phylotrace/tree.hpp"

namespace phylotrace {

/// One response embedding: which model produced it, on which dataset/prompt,
/// and which repeat run (0-based). All records of a corpus share one
/// dimension (384 for the expected encoder, but any is accepted).
struct EmbeddingRecord {
  std::string model;
  std::string dataset;
  std::string prompt;
  int run = 0;
  std::vector<double> vector;
};

using EmbeddingCorpus = std::vector<EmbeddingRecord>;

/// JSONL ingestion, one record per line:
///   {"model": str, "dataset": str, "prompt": str, "run": int, "embedding": [floats]}
inline EmbeddingCorpus load_corpus(const std::filesystem::path& path) {
  const auto lines = detail::to_lines(detail::read_text_file(path, "embeddings"));
  EmbeddingCorpus corpus;
  std::set<std::tuple<std::string, std::string, std::string, int>> keys;
  std::size_t dimension = 0;
  std::size_t line_no = 0;
  for (const auto& line : lines) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError,
                  "embeddings: line " + std::to_string(line_no) + " is not valid JSON (" + e.what() + ")");
    }
    if (!record.is_object() || !record.contains("model") || !record.contains("dataset") ||
        !record.contains("prompt") || !record.contains("run") || !record.contains("embedding") ||
        !record["model"].is_string() || !record["dataset"].is_string() ||
        !record["prompt"].is_string() || !record["run"].is_number_integer() ||
        !record["embedding"].is_array())
      throw Error(ErrorCode::ParseError,
                  "embeddings: line " + std::to_string(line_no) + " lacks the required fields");

    EmbeddingRecord r;
    r.model = record["model"].get<std::string>();
    r.dataset = record["dataset"].get<std::string>();
    r.prompt = record["prompt"].get<std::string>();
    r.run = record["run"].get<int>();
    if (r.run < 0)
      throw Error(ErrorCode::ParseError, "embeddings: negative run index on line " + std::to_string(line_no));
    for (const auto& x : record["embedding"]) {
      if (!x.is_number())
        throw Error(ErrorCode::ParseError,
                    "embeddings: non-numeric embedding component on line " + std::to_string(line_no));
      const double v = x.get<double>();
      if (!std::isfinite(v))
        throw Error(ErrorCode::NonFiniteValue,
                    "embeddings: non-finite embedding component on line " + std::to_string(line_no));
      r.vector.push_back(v);
    }
    if (r.vector.empty())
      throw Error(ErrorCode::DimensionMismatch,
                  "embeddings: empty embedding on line " + std::to_string(line_no));
    if (dimension == 0) dimension = r.vector.size();
    if (r.vector.size() != dimension)
      throw Error(ErrorCode::DimensionMismatch,
                  "embeddings: dimension " + std::to_string(r.vector.size()) + " on line " +
                      std::to_string(line_no) + " differs from " + std::to_string(dimension));
    if (!keys.insert({r.model, r.dataset, r.prompt, r.run}).second)
      throw Error(ErrorCode::DuplicateKey,
                  "embeddings: duplicate (model, dataset, prompt, run) on line " + std::to_string(line_no));
    corpus.push_back(std::move(r));
  }
  return corpus;
}

enum class EmbedScope { PerPrompt, PerDataset, Global };

inline std::vector<std::string> corpus_models(const EmbeddingCorpus& corpus) {
  std::set<std::string> models;
  for (const auto& r : corpus) models.insert(r.model);
  return {models.begin(), models.end()};
}

inline std::vector<std::string> corpus_datasets(const EmbeddingCorpus& corpus) {
  std::set<std::string> datasets;
  for (const auto& r : corpus) datasets.insert(r.dataset);
  return {datasets.begin(), datasets.end()};
}

/// Pairwise model distances within a scope. Responses are only comparable
/// when they answer the same (dataset, prompt) cell, so entry (a, b) is the
/// mean metric distance over all same-cell cross pairs (every embedding of a
/// against every embedding of b, per cell) pooled across the cells the scope
/// selects. With equal run counts per prompt this makes the per-dataset
/// matrix the mean of the per-prompt matrices. The diagonal is 0 by
/// definition.
inline DistanceMatrix model_distance_matrix(const EmbeddingCorpus& corpus, const MetricKind& metric,
                                            EmbedScope scope, const std::string& dataset = "",
                                            const std::string& prompt = "") {
  const std::vector<std::string> models = corpus_models(corpus);
  using Cell = std::pair<std::string, std::string>;  // (dataset, prompt)
  std::map<Cell, std::map<std::string, std::vector<const std::vector<double>*>>> cells;
  std::set<std::string> models_in_scope;
  for (const auto& r : corpus) {
    if (scope != EmbedScope::Global && r.dataset != dataset) continue;
    if (scope == EmbedScope::PerPrompt && r.prompt != prompt) continue;
    cells[{r.dataset, r.prompt}][r.model].push_back(&r.vector);
    models_in_scope.insert(r.model);
  }
  std::string tag = "embedding:";
  switch (scope) {
    case EmbedScope::Global: tag += "all"; break;
    case EmbedScope::PerDataset: tag += dataset; break;
    case EmbedScope::PerPrompt: tag += dataset + "," + prompt; break;
  }
  for (const auto& model : models)
    if (!models_in_scope.count(model))
      throw Error(ErrorCode::MissingModel,
                  "embeddings: model \"" + model + "\" has no records in scope " + tag);

  DistanceMatrix matrix;
  matrix.metric = metric;
  matrix.source = tag;
  matrix.labels = models;
  const std::size_t n = models.size();
  matrix.values.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      KahanSum total;
      std::uint64_t pairs = 0;
      for (const auto& [cell, per_model] : cells) {
        const auto it_i = per_model.find(models[i]);
        const auto it_j = per_model.find(models[j]);
        if (it_i == per_model.end() || it_j == per_model.end()) continue;
        for (const auto* a : it_i->second)
          for (const auto* b : it_j->second) {
            total.add(distance(metric, *a, *b));
            ++pairs;
          }
      }
      if (pairs == 0)
        throw Error(ErrorCode::MissingModel,
                    "embeddings: models \"" + models[i] + "\" and \"" + models[j] +
                        "\" share no prompt in scope " + tag);
      const double mean = total.value() / static_cast<double>(pairs);
      matrix.at(i, j) = mean;
      matrix.at(j, i) = mean;
    }
  }
  matrix.validate();
  return matrix;
}

struct DatasetTreeAnalysis {
  std::vector<std::pair<std::string, PhyloTree>> trees;  // dataset -> NJ tree
  PhyloTree consensus;                                   // majority over datasets
  std::vector<std::pair<std::string, int>> rf;           // vs truth, when given
  int consensus_rf = -1;
};

/// One NJ tree per dataset plus their majority consensus. When a ground-truth
/// tree is supplied the per-dataset RF column identifies which evaluation
/// dataset reconstructs the lineage best.
inline DatasetTreeAnalysis per_dataset_trees(const EmbeddingCorpus& corpus, const MetricKind& metric,
                                             const PhyloTree* truth = nullptr) {
  DatasetTreeAnalysis analysis;
  std::vector<PhyloTree> trees_only;
  for (const auto& dataset : corpus_datasets(corpus)) {
    DistanceMatrix matrix = model_distance_matrix(corpus, metric, EmbedScope::PerDataset, dataset);
    PhyloTree tree = neighbor_joining(matrix);
    if (truth) analysis.rf.emplace_back(dataset, rf_distance(tree, *truth));
    trees_only.push_back(tree);
    analysis.trees.emplace_back(dataset, std::move(tree));
  }
  analysis.consensus = consensus(trees_only, ConsensusRule::Majority, 0.5);
  if (truth) analysis.consensus_rf = rf_distance(analysis.consensus, *truth);
  return analysis;
}

}  // namespace phylotrace
