// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "phylotrace/error.hpp"
#include "phylotrace/rng.hpp"
#include "phylotrace/tree.hpp"

namespace phylotrace {

/// Fully resolved random topology by sequential leaf addition with a uniform
/// edge choice at every step (every labeled unrooted binary topology is
/// equally likely). Unit branch lengths.
inline PhyloTree random_tree(std::span<const std::string> labels, Rng& rng) {
  const std::size_t n = labels.size();
  if (n < 3)
    throw Error(ErrorCode::TooFewTaxa, "phylo: random tree needs >= 3 labels");

  // Grow rooted at labels[0]; every non-anchor node then stands for exactly
  // one unrooted edge (the edge to its parent).
  struct Grow {
    int parent = -1;
    int label = -1;  // index into labels, -1 for internal
  };
  std::vector<Grow> nodes;
  nodes.push_back({-1, 0});  // anchor leaf
  nodes.push_back({0, 1});
  std::vector<int> edges{1};  // candidate nodes (== edges)

  for (std::size_t next = 2; next < n; ++next) {
    const int at = edges[static_cast<std::size_t>(rng.next_below(edges.size()))];
    const int split_node = static_cast<int>(nodes.size());
    nodes.push_back({nodes[at].parent, -1});
    nodes[at].parent = split_node;
    const int leaf = static_cast<int>(nodes.size());
    nodes.push_back({split_node, static_cast<int>(next)});
    edges.push_back(split_node);
    edges.push_back(leaf);
  }

  // Re-root at the anchor's single child so the anchor hangs as a pendant
  // leaf and the root is the usual degree-3 internal node.
  int center = -1;
  for (int v = 1; v < static_cast<int>(nodes.size()); ++v)
    if (nodes[v].parent == 0) center = v;
  std::vector<std::vector<int>> children(nodes.size());
  for (int v = 1; v < static_cast<int>(nodes.size()); ++v)
    if (v != center) children[nodes[v].parent].push_back(v);
  children[center].push_back(0);  // anchor becomes a child of the new root

  PhyloTree tree;
  std::vector<int> mapped(nodes.size(), -1);
  mapped[center] = tree.add_root();
  std::vector<int> stack{center};
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int c : children[v]) {
      const std::string label = nodes[c].label >= 0 ? labels[nodes[c].label] : std::string();
      mapped[c] = tree.add_child(mapped[v], label, 1.0);
      stack.push_back(c);
    }
  }
  tree.validate();
  return tree;
}

inline PhyloTree random_tree(std::span<const std::string> labels, std::uint64_t seed) {
  Rng rng(seed);
  return random_tree(labels, rng);
}

}  // namespace phylotrace
