// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phylotrace/error.hpp"
#include "phylotrace/genotype.hpp"

namespace phylotrace {

enum class MetricTag { L1, L2, Cosine, Correlation, Threshold };

struct MetricKind {
  MetricTag tag = MetricTag::L2;
  double epsilon = 0.0;  // Threshold only

  static constexpr double kDefaultThresholdEpsilon = 1e-6;

  static MetricKind l1() { return {MetricTag::L1, 0.0}; }
  static MetricKind l2() { return {MetricTag::L2, 0.0}; }
  static MetricKind cosine() { return {MetricTag::Cosine, 0.0}; }
  static MetricKind correlation() { return {MetricTag::Correlation, 0.0}; }
  static MetricKind threshold(double epsilon = kDefaultThresholdEpsilon) {
    if (!(epsilon >= 0.0))
      throw Error(ErrorCode::InvalidArgument, "metrics: threshold epsilon must be >= 0");
    return {MetricTag::Threshold, epsilon};
  }

  bool operator==(const MetricKind& other) const {
    return tag == other.tag && (tag != MetricTag::Threshold || epsilon == other.epsilon);
  }
};

inline std::string format_metric(const MetricKind& metric) {
  switch (metric.tag) {
    case MetricTag::L1: return "l1";
    case MetricTag::L2: return "l2";
    case MetricTag::Cosine: return "cosine";
    case MetricTag::Correlation: return "correlation";
    case MetricTag::Threshold: {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "threshold:%.17g", metric.epsilon);
      return buf;
    }
  }
  return "?";
}

inline MetricKind parse_metric(std::string_view name) {
  if (name == "l1") return MetricKind::l1();
  if (name == "l2") return MetricKind::l2();
  if (name == "cosine") return MetricKind::cosine();
  if (name == "correlation") return MetricKind::correlation();
  if (name == "threshold") return MetricKind::threshold();
  if (name.starts_with("threshold:")) {
    const std::string eps(name.substr(10));
    char* end = nullptr;
    const double value = std::strtod(eps.c_str(), &end);
    if (end != eps.c_str() + eps.size() || !(value >= 0.0))
      throw Error(ErrorCode::InvalidArgument, "metrics: bad threshold epsilon \"" + eps + "\"");
    return MetricKind::threshold(value);
  }
  throw Error(ErrorCode::InvalidArgument, "metrics: unknown metric \"" + std::string(name) + "\"");
}

/// Neumaier-compensated running sum.
struct KahanSum {
  double sum = 0.0;
  double compensation = 0.0;

  void add(double value) {
    const double t = sum + value;
    if (std::abs(sum) >= std::abs(value))
      compensation += (sum - t) + value;
    else
      compensation += (value - t) + sum;
    sum = t;
  }

  double value() const { return sum + compensation; }
};

/// Streams the moments needed by all five measures over a pair of equal-length
/// float sequences, so one pass over a layer (or a whole model) can be
/// finalized under any metric. Layer vectors reach ~1e7 elements, hence the
/// compensated sums.
class PairAccumulator {
 public:
  void update(double x, double y) {
    const double d = x - y;
    abs_diff_.add(std::abs(d));
    sq_diff_.add(d * d);
    sum_x_.add(x);
    sum_y_.add(y);
    sum_xx_.add(x * x);
    sum_yy_.add(y * y);
    sum_xy_.add(x * y);
    min_x_ = std::min(min_x_, x);
    max_x_ = std::max(max_x_, x);
    min_y_ = std::min(min_y_, y);
    max_y_ = std::max(max_y_, y);
    ++count_;
  }

  void update(std::span<const double> x, std::span<const double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) update(x[i], y[i]);
  }

  std::uint64_t count() const { return count_; }

  double l1() const { return abs_diff_.value(); }

  double finalize(const MetricKind& metric) const {
    if (count_ == 0)
      throw Error(ErrorCode::LengthMismatch, "metrics: cannot compare empty vectors");
    switch (metric.tag) {
      case MetricTag::L1:
        return abs_diff_.value();
      case MetricTag::L2:
        return std::sqrt(std::max(0.0, sq_diff_.value()));
      case MetricTag::Threshold: {
        const double d = abs_diff_.value();
        return d > metric.epsilon ? d : 0.0;
      }
      case MetricTag::Cosine: {
        const double xx = sum_xx_.value();
        const double yy = sum_yy_.value();
        const double dot = sum_xy_.value();
        if (xx == 0.0 || yy == 0.0)
          throw Error(ErrorCode::DegenerateVector, "metrics: cosine distance of a zero vector");
        if (dot > 0.0 && dot * dot >= xx * yy) return 0.0;  // exact zero for identical inputs
        const double similarity = std::clamp(dot / std::sqrt(xx * yy), -1.0, 1.0);
        return 1.0 - similarity;
      }
      case MetricTag::Correlation: {
        if (min_x_ == max_x_ || min_y_ == max_y_)
          throw Error(ErrorCode::DegenerateVector, "metrics: correlation distance of a constant vector");
        const double n = static_cast<double>(count_);
        const double cov = n * sum_xy_.value() - sum_x_.value() * sum_y_.value();
        const double var_x = n * sum_xx_.value() - sum_x_.value() * sum_x_.value();
        const double var_y = n * sum_yy_.value() - sum_y_.value() * sum_y_.value();
        if (var_x <= 0.0 || var_y <= 0.0)
          throw Error(ErrorCode::DegenerateVector,
                      "metrics: vector is numerically constant under correlation");
        if (cov > 0.0 && cov * cov >= var_x * var_y) return 0.0;
        const double r = std::clamp(cov / std::sqrt(var_x * var_y), -1.0, 1.0);
        return 1.0 - r;
      }
    }
    throw Error(ErrorCode::InvalidArgument, "metrics: unhandled metric");
  }

 private:
  KahanSum abs_diff_, sq_diff_, sum_x_, sum_y_, sum_xx_, sum_yy_, sum_xy_;
  double min_x_ = std::numeric_limits<double>::infinity();
  double max_x_ = -std::numeric_limits<double>::infinity();
  double min_y_ = std::numeric_limits<double>::infinity();
  double max_y_ = -std::numeric_limits<double>::infinity();
  std::uint64_t count_ = 0;
};

inline double distance(const MetricKind& metric, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw Error(ErrorCode::LengthMismatch,
                "metrics: vectors of length " + std::to_string(x.size()) + " and " +
                    std::to_string(y.size()));
  if (x.empty())
    throw Error(ErrorCode::LengthMismatch, "metrics: vectors must be non-empty");
  PairAccumulator acc;
  acc.update(x, y);
  return acc.finalize(metric);
}

namespace detail {

/// Shared layer names in canonical (sorted) order; rejects mismatched sets
/// and per-layer length differences.
inline std::vector<std::string> matched_layer_names(const ModelGenotype& a, const ModelGenotype& b) {
  std::vector<std::string> names_a = a.sorted_layer_names();
  std::vector<std::string> names_b = b.sorted_layer_names();
  if (names_a != names_b) {
    std::string missing, extra;
    for (const auto& n : names_a)
      if (!std::binary_search(names_b.begin(), names_b.end(), n)) missing += " " + n;
    for (const auto& n : names_b)
      if (!std::binary_search(names_a.begin(), names_a.end(), n)) extra += " " + n;
    throw Error(ErrorCode::LayerMismatch,
                "metrics: models " + a.model_id + " and " + b.model_id +
                    " disagree on layers; missing from second:[" + missing + " ] extra in second:[" +
                    extra + " ]");
  }
  for (const auto& name : names_a) {
    const auto* va = a.find_layer(name);
    const auto* vb = b.find_layer(name);
    if (va->size() != vb->size())
      throw Error(ErrorCode::ShapeMismatch,
                  "metrics: layer \"" + name + "\" has " + std::to_string(va->size()) +
                      " weights in " + a.model_id + " but " + std::to_string(vb->size()) + " in " +
                      b.model_id);
  }
  return names_a;
}

}  // namespace detail

/// One accumulator per shared layer, keyed and ordered by layer name.
inline std::map<std::string, PairAccumulator> layer_accumulators(const ModelGenotype& a,
                                                                 const ModelGenotype& b) {
  std::map<std::string, PairAccumulator> result;
  for (const auto& name : detail::matched_layer_names(a, b)) {
    PairAccumulator acc;
    acc.update(*a.find_layer(name), *b.find_layer(name));
    result.emplace(name, acc);
  }
  return result;
}

/// Single accumulator over the virtual concatenation of all layers in
/// canonical order; no whole-model copy is materialized.
inline PairAccumulator total_accumulator(const ModelGenotype& a, const ModelGenotype& b) {
  PairAccumulator acc;
  for (const auto& name : detail::matched_layer_names(a, b))
    acc.update(*a.find_layer(name), *b.find_layer(name));
  return acc;
}

inline std::map<std::string, double> layer_distances(const MetricKind& metric, const ModelGenotype& a,
                                                     const ModelGenotype& b) {
  std::map<std::string, double> result;
  for (const auto& [name, acc] : layer_accumulators(a, b)) result[name] = acc.finalize(metric);
  return result;
}

inline double total_distance(const MetricKind& metric, const ModelGenotype& a, const ModelGenotype& b) {
  return total_accumulator(a, b).finalize(metric);
}

}  // namespace phylotrace
