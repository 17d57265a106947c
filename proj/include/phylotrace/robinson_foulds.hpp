// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <set>
#include <string>

#include "phylotrace/error.hpp"
#include "phylotrace/tree.hpp"

namespace phylotrace {

enum class RfMode { Unrooted, Rooted };

namespace detail {

inline int symmetric_difference_size(const std::set<std::set<std::string>>& a,
                                     const std::set<std::set<std::string>>& b) {
  int shared = 0;
  for (const auto& s : a)
    if (b.count(s)) ++shared;
  return static_cast<int>(a.size()) + static_cast<int>(b.size()) - 2 * shared;
}

}  // namespace detail

/// Robinson-Foulds distance. Unrooted mode compares nontrivial bipartitions;
/// rooted mode compares clades with the stored root respected.
inline int rf_distance(const PhyloTree& a, const PhyloTree& b, RfMode mode = RfMode::Unrooted) {
  if (a.leaf_labels_sorted() != b.leaf_labels_sorted())
    throw Error(ErrorCode::LeafSetMismatch, "phylo: trees have different leaf label sets");
  if (mode == RfMode::Unrooted)
    return detail::symmetric_difference_size(a.splits(), b.splits());
  return detail::symmetric_difference_size(a.clades(), b.clades());
}

}  // namespace phylotrace
