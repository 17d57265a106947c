// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "phylotrace/detail/text.hpp"
#include "phylotrace/error.hpp"
#include "phylotrace/genotype.hpp"
#include "phylotrace/metrics.hpp"
#include "phylotrace/parallel.hpp"

namespace phylotrace {

/// Symmetric nonnegative pairwise distances over a labeled model set, tagged
/// with the metric and the feature source that produced it
/// ("total", "layer:<name>", "embedding:<dataset>,<prompt>", ...).
struct DistanceMatrix {
  std::vector<std::string> labels;
  std::vector<double> values;  // n*n row-major
  MetricKind metric;
  std::string source = "total";

  std::size_t size() const { return labels.size(); }
  double at(std::size_t i, std::size_t j) const { return values[i * labels.size() + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * labels.size() + j]; }

  void validate() const {
    const std::size_t n = labels.size();
    if (values.size() != n * n)
      throw Error(ErrorCode::InvalidMatrix, "distmat: value count does not match label count");
    std::set<std::string> seen;
    for (const auto& label : labels) {
      if (label.empty())
        throw Error(ErrorCode::InvalidMatrix, "distmat: empty label");
      if (!seen.insert(label).second)
        throw Error(ErrorCode::DuplicateLabel, "distmat: duplicate label \"" + label + "\"");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (at(i, i) != 0.0)
        throw Error(ErrorCode::InvalidMatrix, "distmat: nonzero diagonal at " + labels[i]);
      for (std::size_t j = 0; j < n; ++j) {
        const double v = at(i, j);
        if (!std::isfinite(v) || v < 0.0)
          throw Error(ErrorCode::InvalidMatrix,
                      "distmat: negative or non-finite entry (" + labels[i] + ", " + labels[j] + ")");
        if (at(i, j) != at(j, i))
          throw Error(ErrorCode::InvalidMatrix,
                      "distmat: asymmetry at (" + labels[i] + ", " + labels[j] + ")");
      }
    }
  }
};

namespace detail {

inline void check_model_set(std::span<const ModelGenotype> models) {
  if (models.size() < 3)
    throw Error(ErrorCode::InvalidArgument,
                "distmat: need at least 3 models, got " + std::to_string(models.size()));
  std::set<std::string> ids;
  for (const auto& m : models)
    if (!ids.insert(m.model_id).second)
      throw Error(ErrorCode::DuplicateLabel, "distmat: duplicate model id \"" + m.model_id + "\"");
  // Layer compatibility against the first model; pairwise follows.
  for (std::size_t i = 1; i < models.size(); ++i) matched_layer_names(models[0], models[i]);
}

template <typename PairFn>
void for_upper_pairs(std::size_t n, PairFn&& fn) {
  // Flatten the upper triangle so the pair work can run in one pool.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  parallel_for(pairs.size(), [&](std::size_t k) { fn(pairs[k].first, pairs[k].second); });
}

}  // namespace detail

/// One call per metric; use build_total_multi when several metrics are wanted
/// over the same model set (one accumulation pass, shared across metrics).
inline std::vector<DistanceMatrix> build_total_multi(std::span<const MetricKind> metrics,
                                                     std::span<const ModelGenotype> models) {
  detail::check_model_set(models);
  const std::size_t n = models.size();
  std::vector<DistanceMatrix> result(metrics.size());
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    result[m].metric = metrics[m];
    result[m].source = "total";
    result[m].values.assign(n * n, 0.0);
    for (const auto& genotype : models) result[m].labels.push_back(genotype.model_id);
  }
  detail::for_upper_pairs(n, [&](std::size_t i, std::size_t j) {
    try {
      const PairAccumulator acc = total_accumulator(models[i], models[j]);
      for (std::size_t m = 0; m < metrics.size(); ++m) {
        const double d = acc.finalize(metrics[m]);
        result[m].at(i, j) = d;
        result[m].at(j, i) = d;
      }
    } catch (const Error& e) {
      throw Error(e.code(), e.message() + " (pair " + models[i].model_id + ", " +
                                models[j].model_id + ")");
    }
  });
  for (auto& matrix : result) matrix.validate();
  return result;
}

inline DistanceMatrix build_total(const MetricKind& metric, std::span<const ModelGenotype> models) {
  const MetricKind one[] = {metric};
  return std::move(build_total_multi(one, models).front());
}

/// One matrix per shared layer per metric, indexed [metric][layer]; layers in
/// canonical (sorted-name) order.
inline std::vector<std::vector<DistanceMatrix>> build_per_layer_multi(
    std::span<const MetricKind> metrics, std::span<const ModelGenotype> models) {
  detail::check_model_set(models);
  const std::size_t n = models.size();
  const std::vector<std::string> layer_names = models[0].sorted_layer_names();
  const std::size_t layer_count = layer_names.size();

  std::vector<std::vector<DistanceMatrix>> result(metrics.size());
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    result[m].resize(layer_count);
    for (std::size_t l = 0; l < layer_count; ++l) {
      auto& matrix = result[m][l];
      matrix.metric = metrics[m];
      matrix.source = "layer:" + layer_names[l];
      matrix.values.assign(n * n, 0.0);
      for (const auto& genotype : models) matrix.labels.push_back(genotype.model_id);
    }
  }
  detail::for_upper_pairs(n, [&](std::size_t i, std::size_t j) {
    try {
      const auto per_layer = layer_accumulators(models[i], models[j]);
      std::size_t l = 0;
      for (const auto& [name, acc] : per_layer) {
        for (std::size_t m = 0; m < metrics.size(); ++m) {
          const double d = acc.finalize(metrics[m]);
          result[m][l].at(i, j) = d;
          result[m][l].at(j, i) = d;
        }
        ++l;
      }
    } catch (const Error& e) {
      throw Error(e.code(), e.message() + " (pair " + models[i].model_id + ", " +
                                models[j].model_id + ")");
    }
  });
  for (auto& per_metric : result)
    for (auto& matrix : per_metric) matrix.validate();
  return result;
}

inline std::vector<DistanceMatrix> build_per_layer(const MetricKind& metric,
                                                   std::span<const ModelGenotype> models) {
  const MetricKind one[] = {metric};
  return std::move(build_per_layer_multi(one, models).front());
}

// CSV layout: first cell "#metric=<name>;source=<tag>", then the label header;
// each row is a label followed by n %.17g floats.

inline std::string matrix_to_csv(const DistanceMatrix& matrix) {
  matrix.validate();
  std::string out =
      detail::csv_escape("#metric=" + format_metric(matrix.metric) + ";source=" + matrix.source);
  for (const auto& label : matrix.labels) out += "," + detail::csv_escape(label);
  out += '\n';
  const std::size_t n = matrix.size();
  for (std::size_t i = 0; i < n; ++i) {
    out += detail::csv_escape(matrix.labels[i]);
    for (std::size_t j = 0; j < n; ++j) out += "," + detail::fmt_g17(matrix.at(i, j));
    out += '\n';
  }
  return out;
}

inline void write_matrix(const DistanceMatrix& matrix, const std::filesystem::path& path) {
  detail::write_text_file(path, matrix_to_csv(matrix), "distmat");
}

inline DistanceMatrix matrix_from_csv(const std::string& text) {
  const auto lines = detail::to_lines(text);
  if (lines.empty())
    throw Error(ErrorCode::InvalidMatrix, "distmat: empty matrix file");
  const auto header = detail::csv_split(lines[0], "distmat");
  if (header.empty() || header[0].rfind("#metric=", 0) != 0)
    throw Error(ErrorCode::InvalidMatrix, "distmat: missing #metric header cell");

  DistanceMatrix matrix;
  {
    const std::string& meta = header[0];
    const auto semi = meta.find(";source=");
    if (semi == std::string::npos)
      throw Error(ErrorCode::InvalidMatrix, "distmat: header cell lacks source tag");
    matrix.metric = parse_metric(meta.substr(8, semi - 8));
    matrix.source = meta.substr(semi + 8);
  }
  matrix.labels.assign(header.begin() + 1, header.end());
  const std::size_t n = matrix.labels.size();
  if (lines.size() != n + 1)
    throw Error(ErrorCode::InvalidMatrix,
                "distmat: expected " + std::to_string(n) + " rows, got " + std::to_string(lines.size() - 1));
  matrix.values.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto cells = detail::csv_split(lines[i + 1], "distmat");
    if (cells.size() != n + 1)
      throw Error(ErrorCode::InvalidMatrix, "distmat: row " + std::to_string(i + 1) + " has " +
                                                std::to_string(cells.size()) + " cells");
    if (cells[0] != matrix.labels[i])
      throw Error(ErrorCode::InvalidMatrix,
                  "distmat: row label \"" + cells[0] + "\" does not match header \"" +
                      matrix.labels[i] + "\"");
    for (std::size_t j = 0; j < n; ++j)
      matrix.at(i, j) = detail::parse_double(cells[j + 1], "distmat");
  }
  matrix.validate();
  return matrix;
}

inline DistanceMatrix read_matrix(const std::filesystem::path& path) {
  return matrix_from_csv(detail::read_text_file(path, "distmat"));
}

}  // namespace phylotrace
