// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "phylotrace/distance_matrix.hpp"
#include "phylotrace/error.hpp"

namespace phylotrace {

/// Rooted representation of a phylogenetic tree; unrooted semantics are
/// obtained by ignoring root placement (splits rather than clades). Leaves
/// carry unique labels; internal labels are allowed and ignored by the
/// topology comparisons. Branch lengths are optional (absent means "unit").
class PhyloTree {
 public:
  struct Node {
    std::string label;
    int parent = -1;
    std::vector<int> children;
    std::optional<double> length;  // edge to parent
  };

  int add_root(std::string label = "") {
    if (!nodes_.empty())
      throw Error(ErrorCode::InvalidTree, "phylo: tree already has a root");
    nodes_.push_back(Node{std::move(label), -1, {}, std::nullopt});
    return 0;
  }

  int add_child(int parent, std::string label = "", std::optional<double> length = std::nullopt) {
    if (parent < 0 || parent >= static_cast<int>(nodes_.size()))
      throw Error(ErrorCode::InvalidTree, "phylo: bad parent index");
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{std::move(label), parent, {}, length});
    nodes_[parent].children.push_back(id);
    return id;
  }

  const Node& node(int id) const { return nodes_[id]; }
  Node& node(int id) { return nodes_[id]; }
  int root() const { return nodes_.empty() ? -1 : 0; }
  std::size_t node_count() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  bool is_leaf(int id) const { return nodes_[id].children.empty(); }

  std::vector<int> leaf_indices() const {
    std::vector<int> leaves;
    for (int i = 0; i < static_cast<int>(nodes_.size()); ++i)
      if (is_leaf(i)) leaves.push_back(i);
    return leaves;
  }

  std::vector<std::string> leaf_labels_sorted() const {
    std::vector<std::string> labels;
    for (int i : leaf_indices()) labels.push_back(nodes_[i].label);
    std::sort(labels.begin(), labels.end());
    return labels;
  }

  std::size_t leaf_count() const { return leaf_indices().size(); }

  void validate() const {
    if (nodes_.empty())
      throw Error(ErrorCode::InvalidTree, "phylo: empty tree");
    std::set<std::string> seen;
    for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
      const Node& n = nodes_[i];
      if (i == 0 && n.parent != -1)
        throw Error(ErrorCode::InvalidTree, "phylo: root has a parent");
      if (i != 0 && (n.parent < 0 || n.parent >= static_cast<int>(nodes_.size())))
        throw Error(ErrorCode::InvalidTree, "phylo: dangling node");
      if (n.length && (!std::isfinite(*n.length) || *n.length < 0.0))
        throw Error(ErrorCode::InvalidTree, "phylo: branch lengths must be finite and >= 0");
      if (is_leaf(i)) {
        if (n.label.empty())
          throw Error(ErrorCode::InvalidTree, "phylo: unlabeled leaf");
        if (!seen.insert(n.label).second)
          throw Error(ErrorCode::InvalidTree, "phylo: duplicate leaf label \"" + n.label + "\"");
      }
    }
  }

  std::vector<std::string> subtree_leaf_labels(int id) const {
    std::vector<std::string> labels;
    collect_leaves(id, labels);
    std::sort(labels.begin(), labels.end());
    return labels;
  }

  /// Nontrivial bipartitions of the leaf set, canonicalized so the stored
  /// side is the one NOT containing the lexicographically smallest label.
  std::set<std::set<std::string>> splits() const {
    const std::vector<std::string> all = leaf_labels_sorted();
    const std::size_t n = all.size();
    std::set<std::set<std::string>> result;
    if (n < 4) return result;  // 3-leaf unrooted trees have no nontrivial splits
    const std::string& smallest = all.front();
    for (int v = 1; v < static_cast<int>(nodes_.size()); ++v) {
      std::vector<std::string> side = subtree_leaf_labels(v);
      if (side.size() < 2 || side.size() > n - 2) continue;
      if (std::binary_search(side.begin(), side.end(), smallest)) {
        std::set<std::string> complement;
        std::set_difference(all.begin(), all.end(), side.begin(), side.end(),
                            std::inserter(complement, complement.end()));
        result.insert(std::move(complement));
      } else {
        result.insert(std::set<std::string>(side.begin(), side.end()));
      }
    }
    return result;
  }

  /// Clades (leaf sets of internal nodes, root excluded) for rooted
  /// comparisons.
  std::set<std::set<std::string>> clades() const {
    std::set<std::set<std::string>> result;
    for (int v = 1; v < static_cast<int>(nodes_.size()); ++v) {
      if (is_leaf(v)) continue;
      const auto side = subtree_leaf_labels(v);
      result.insert(std::set<std::string>(side.begin(), side.end()));
    }
    return result;
  }

  /// Leaf-to-leaf path lengths; absent branch lengths count as 1. The metric
  /// tag is a carrier only (path lengths are not produced by a vector metric).
  DistanceMatrix leaf_path_matrix() const {
    const std::vector<int> leaves = leaf_indices();
    std::vector<std::pair<std::string, int>> ordered;
    for (int id : leaves) ordered.emplace_back(nodes_[id].label, id);
    std::sort(ordered.begin(), ordered.end());

    DistanceMatrix matrix;
    matrix.metric = MetricKind::l2();
    matrix.source = "tree-paths";
    for (const auto& [label, id] : ordered) matrix.labels.push_back(label);
    const std::size_t n = ordered.size();
    matrix.values.assign(n * n, 0.0);

    // depth from root + LCA by parent walk; fine at these sizes
    std::vector<double> depth(nodes_.size(), 0.0);
    std::vector<int> order = preorder();
    for (int id : order)
      if (id != 0)
        depth[id] = depth[nodes_[id].parent] + nodes_[id].length.value_or(1.0);
    auto ancestors = [&](int id) {
      std::vector<int> chain;
      for (int v = id; v != -1; v = nodes_[v].parent) chain.push_back(v);
      return chain;
    };
    for (std::size_t i = 0; i < n; ++i) {
      const auto chain_i = ancestors(ordered[i].second);
      const std::set<int> set_i(chain_i.begin(), chain_i.end());
      for (std::size_t j = i + 1; j < n; ++j) {
        int lca = ordered[j].second;
        while (!set_i.count(lca)) lca = nodes_[lca].parent;
        const double d = depth[ordered[i].second] + depth[ordered[j].second] - 2.0 * depth[lca];
        matrix.at(i, j) = d;
        matrix.at(j, i) = d;
      }
    }
    return matrix;
  }

  std::vector<int> preorder() const {
    std::vector<int> order;
    std::vector<int> stack{0};
    if (nodes_.empty()) return order;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      order.push_back(v);
      for (auto it = nodes_[v].children.rbegin(); it != nodes_[v].children.rend(); ++it)
        stack.push_back(*it);
    }
    return order;
  }

  bool same_topology(const PhyloTree& other) const {
    return leaf_labels_sorted() == other.leaf_labels_sorted() && splits() == other.splits();
  }

 private:
  void collect_leaves(int id, std::vector<std::string>& out) const {
    if (is_leaf(id)) {
      out.push_back(nodes_[id].label);
      return;
    }
    for (int c : nodes_[id].children) collect_leaves(c, out);
  }

  std::vector<Node> nodes_;
};

}  // namespace phylotrace
