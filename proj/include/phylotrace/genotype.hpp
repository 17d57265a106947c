// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

namespace phylotrace {

/// A model's "genotype": its named weight layers, each flattened row-major to
/// a 64-bit float vector. Layer order is the originating archive's entry
/// order. Immutable after construction in practice; safe to share.
struct ModelGenotype {
  std::string model_id;
  std::vector<std::pair<std::string, std::vector<double>>> layers;

  const std::vector<double>* find_layer(const std::string& name) const {
    for (const auto& [layer_name, values] : layers)
      if (layer_name == name) return &values;
    return nullptr;
  }

  /// Canonical enumeration order for cross-model comparisons.
  std::vector<std::string> sorted_layer_names() const {
    std::vector<std::string> names;
    names.reserve(layers.size());
    for (const auto& [name, values] : layers) names.push_back(name);
    std::sort(names.begin(), names.end());
    return names;
  }

  std::size_t parameter_count() const {
    std::size_t total = 0;
    for (const auto& [name, values] : layers) total += values.size();
    return total;
  }
};

}  // namespace phylotrace
