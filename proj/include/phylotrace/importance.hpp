// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "phylotrace/detail/text.hpp"
#include "phylotrace/error.hpp"
#include "phylotrace/genotype.hpp"
#include "phylotrace/metrics.hpp"

namespace phylotrace {

struct LayerImportanceRow {
  std::string layer;
  double mean = 0.0;    // mean distance over all unordered model pairs
  double stddev = 0.0;  // population std over the same pairs
  int rank = 0;         // 1 = strongest change
  bool flagged = false; // shared/embedding layers are marked, not excluded
};

/// Layers ranked by how strongly they change across a model collection.
/// Rankings are metric-dependent by design, so the metric tag travels with
/// the report; mean_min/mean_max summarize the scale of the distance column
/// (magnitudes differ by orders across metrics).
struct LayerImportanceReport {
  MetricKind metric;
  std::vector<LayerImportanceRow> rows;  // sorted by mean descending
  double mean_min = 0.0;
  double mean_max = 0.0;
};

namespace detail {

inline bool is_shared_or_embedding_layer(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return lower.find("shared") != std::string::npos || lower.find("embed") != std::string::npos;
}

}  // namespace detail

inline LayerImportanceReport rank_layers(const MetricKind& metric,
                                         std::span<const ModelGenotype> models) {
  if (models.size() < 2)
    throw Error(ErrorCode::InvalidArgument, "importance: need at least 2 models");
  for (std::size_t i = 1; i < models.size(); ++i)
    detail::matched_layer_names(models[0], models[i]);

  const std::vector<std::string> names = models[0].sorted_layer_names();
  std::vector<double> sum(names.size(), 0.0), sum_sq(names.size(), 0.0);
  std::size_t pair_count = 0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    for (std::size_t j = i + 1; j < models.size(); ++j) {
      ++pair_count;
      const auto per_layer = layer_accumulators(models[i], models[j]);
      std::size_t l = 0;
      for (const auto& [name, acc] : per_layer) {
        const double d = acc.finalize(metric);
        sum[l] += d;
        sum_sq[l] += d * d;
        ++l;
      }
    }
  }

  LayerImportanceReport report;
  report.metric = metric;
  for (std::size_t l = 0; l < names.size(); ++l) {
    LayerImportanceRow row;
    row.layer = names[l];
    row.mean = sum[l] / static_cast<double>(pair_count);
    const double variance = sum_sq[l] / static_cast<double>(pair_count) - row.mean * row.mean;
    row.stddev = std::sqrt(std::max(0.0, variance));
    row.flagged = detail::is_shared_or_embedding_layer(names[l]);
    report.rows.push_back(std::move(row));
  }
  std::sort(report.rows.begin(), report.rows.end(), [](const auto& a, const auto& b) {
    if (a.mean != b.mean) return a.mean > b.mean;
    return a.layer < b.layer;  // deterministic tie-break
  });
  for (std::size_t l = 0; l < report.rows.size(); ++l)
    report.rows[l].rank = static_cast<int>(l + 1);
  report.mean_min = report.rows.empty() ? 0.0 : report.rows.back().mean;
  report.mean_max = report.rows.empty() ? 0.0 : report.rows.front().mean;
  return report;
}

inline std::string importance_to_csv(const LayerImportanceReport& report) {
  std::string flagged;
  for (const auto& row : report.rows)
    if (row.flagged) flagged += (flagged.empty() ? "" : " ") + row.layer;
  std::string out = "#metric=" + format_metric(report.metric) +
                    ";mean_min=" + detail::fmt_g17(report.mean_min) +
                    ";mean_max=" + detail::fmt_g17(report.mean_max) + ";flagged=" + flagged + "\n";
  out += "layer,mean,std,rank\n";
  for (const auto& row : report.rows) {
    out += detail::csv_escape(row.layer) + "," + detail::fmt_g17(row.mean) + "," +
           detail::fmt_g17(row.stddev) + "," + std::to_string(row.rank) + "\n";
  }
  return out;
}

inline void write_importance_csv(const LayerImportanceReport& report,
                                 const std::filesystem::path& path) {
  detail::write_text_file(path, importance_to_csv(report), "importance");
}

}  // namespace phylotrace
