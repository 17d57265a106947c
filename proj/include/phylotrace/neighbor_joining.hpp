// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <string>
#include <vector>

#include "phylotrace/distance_matrix.hpp"
#include "phylotrace/error.hpp"
#include "phylotrace/tree.hpp"

namespace phylotrace {

// Saitou-Nei neighbor joining.
//   Q(i,j) = (n-2) d(i,j) - sum_k d(i,k) - sum_k d(j,k)
// The argmin-Q pair is joined; on exact Q ties the lexicographically smallest
// index pair in the current working matrix wins, so results are reproducible.
// Limb lengths use the standard formulas with negative values clamped to 0;
// the last three clusters are joined at a single internal node, which becomes
// the (arbitrary) root of the returned unrooted binary tree.
inline PhyloTree neighbor_joining(const DistanceMatrix& input) {
  input.validate();
  const std::size_t n = input.size();
  if (n < 3)
    throw Error(ErrorCode::TooFewTaxa,
                "phylo: neighbor joining needs >= 3 taxa, got " + std::to_string(n));

  // Scratch forest: nodes 0..n-1 are leaves; joins append new nodes.
  struct Scratch {
    int parent = -1;
    double length = 0.0;
  };
  const std::size_t total_nodes = 2 * n - 2;
  std::vector<Scratch> forest(total_nodes);
  std::vector<double> dist(total_nodes * total_nodes, 0.0);
  auto d = [&](std::size_t i, std::size_t j) -> double& { return dist[i * total_nodes + j]; };

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d(i, j) = input.at(i, j);

  std::vector<std::size_t> active(n);
  for (std::size_t i = 0; i < n; ++i) active[i] = i;
  std::size_t next_id = n;

  while (active.size() > 3) {
    const std::size_t m = active.size();
    std::vector<double> row_sum(m, 0.0);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b) row_sum[a] += d(active[a], active[b]);

    double best_q = std::numeric_limits<double>::infinity();
    std::size_t best_a = 0, best_b = 1;
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = a + 1; b < m; ++b) {
        const double q =
            (static_cast<double>(m) - 2.0) * d(active[a], active[b]) - row_sum[a] - row_sum[b];
        if (q < best_q) {  // strict: first (lexicographic) minimum wins
          best_q = q;
          best_a = a;
          best_b = b;
        }
      }
    }

    const std::size_t i = active[best_a];
    const std::size_t j = active[best_b];
    const double dij = d(i, j);
    const double denominator = static_cast<double>(m) - 2.0;
    double limb_i = 0.5 * dij + 0.5 * (row_sum[best_a] - row_sum[best_b]) / denominator;
    double limb_j = 0.5 * dij + 0.5 * (row_sum[best_b] - row_sum[best_a]) / denominator;
    if (limb_i < 0.0) limb_i = 0.0;
    if (limb_j < 0.0) limb_j = 0.0;

    const std::size_t u = next_id++;
    forest[i] = {static_cast<int>(u), limb_i};
    forest[j] = {static_cast<int>(u), limb_j};
    for (std::size_t k : active) {
      if (k == i || k == j) continue;
      const double v = 0.5 * (d(i, k) + d(j, k) - dij);
      d(u, k) = v;
      d(k, u) = v;
    }
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_b));
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_a));
    active.push_back(u);
  }

  // Join the final three at the center; three-point limb formulas.
  const std::size_t a = active[0], b = active[1], c = active[2];
  const std::size_t center = next_id++;
  auto limb = [&](std::size_t x, std::size_t y, std::size_t z) {
    const double v = 0.5 * (d(x, y) + d(x, z) - d(y, z));
    return v < 0.0 ? 0.0 : v;
  };
  forest[a] = {static_cast<int>(center), limb(a, b, c)};
  forest[b] = {static_cast<int>(center), limb(b, a, c)};
  forest[c] = {static_cast<int>(center), limb(c, a, b)};

  // Assemble the PhyloTree rooted at the center node.
  std::vector<std::vector<int>> children(total_nodes);
  for (std::size_t v = 0; v < total_nodes; ++v)
    if (v != center && forest[v].parent >= 0)
      children[forest[v].parent].push_back(static_cast<int>(v));

  PhyloTree tree;
  std::vector<int> mapped(total_nodes, -1);
  mapped[center] = tree.add_root();
  std::vector<std::size_t> stack{center};
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    for (int child : children[v]) {
      const bool leaf = static_cast<std::size_t>(child) < n;
      mapped[child] = tree.add_child(mapped[v], leaf ? input.labels[child] : std::string(),
                                     forest[child].length);
      stack.push_back(static_cast<std::size_t>(child));
    }
  }
  tree.validate();
  return tree;
}

}  // namespace phylotrace
