// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "phylotrace/error.hpp"
#include "phylotrace/tree.hpp"

namespace phylotrace {

enum class ConsensusRule { Strict, Majority };

/// Consensus over trees sharing one leaf set. Strict keeps splits present in
/// every tree; majority keeps splits in more than a fraction p of the trees
/// (default p = 0.5). Retained splits are mutually compatible for p >= 0.5,
/// so they assemble into one (possibly multifurcating) tree. Branch lengths
/// are dropped.
inline PhyloTree consensus(std::span<const PhyloTree> trees, ConsensusRule rule, double p = 0.5) {
  if (trees.empty())
    throw Error(ErrorCode::InvalidArgument, "phylo: consensus of zero trees");
  if (rule == ConsensusRule::Majority && !(p >= 0.5 && p < 1.0))
    throw Error(ErrorCode::InvalidArgument, "phylo: majority threshold must be in [0.5, 1)");

  const std::vector<std::string> labels = trees.front().leaf_labels_sorted();
  for (const auto& t : trees)
    if (t.leaf_labels_sorted() != labels)
      throw Error(ErrorCode::LeafSetMismatch, "phylo: consensus inputs have different leaf sets");

  std::map<std::set<std::string>, std::size_t> counts;
  for (const auto& t : trees)
    for (const auto& split : t.splits()) ++counts[split];

  // Canonical splits never contain the smallest label, so retained splits
  // form a laminar family of clusters under compatibility.
  std::vector<std::set<std::string>> clusters;
  const double total = static_cast<double>(trees.size());
  for (const auto& [split, count] : counts) {
    const bool keep = rule == ConsensusRule::Strict
                          ? count == trees.size()
                          : static_cast<double>(count) > p * total;
    if (keep) clusters.push_back(split);
  }
  std::sort(clusters.begin(), clusters.end(),
            [](const auto& a, const auto& b) { return a.size() > b.size(); });

  // parent of each cluster = the smallest strict superset (or the root)
  PhyloTree tree;
  const int root = tree.add_root();
  std::vector<int> cluster_node(clusters.size(), -1);
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    int parent = root;
    for (std::size_t j = 0; j < i; ++j) {
      if (std::includes(clusters[j].begin(), clusters[j].end(), clusters[i].begin(),
                        clusters[i].end())) {
        parent = cluster_node[j];  // descending size: last superset is the smallest
      }
    }
    cluster_node[i] = tree.add_child(parent);
  }
  for (const auto& label : labels) {
    int parent = root;
    std::size_t best_size = labels.size() + 1;
    for (std::size_t j = 0; j < clusters.size(); ++j) {
      if (clusters[j].count(label) && clusters[j].size() < best_size) {
        best_size = clusters[j].size();
        parent = cluster_node[j];
      }
    }
    tree.add_child(parent, label);
  }
  tree.validate();
  return tree;
}

}  // namespace phylotrace
