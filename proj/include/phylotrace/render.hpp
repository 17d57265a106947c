// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "phylotrace/importance.hpp"
#include "phylotrace/pca.hpp"
#include "phylotrace/tree.hpp"

// Deterministic text/SVG renderers for the CLI. No timestamps, no generated
// ids, fixed float formatting, so identical inputs give identical bytes.
// Presentation only; the algorithm modules stay free of it.

namespace phylotrace {

namespace detail {

inline std::string xml_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string fmt_sig(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// canonical child order shared by all renderers
inline std::vector<int> ordered_children(const PhyloTree& tree, int node) {
  std::vector<std::pair<std::string, int>> keyed;
  for (int c : tree.node(node).children)
    keyed.emplace_back(tree.subtree_leaf_labels(c).front(), c);
  std::sort(keyed.begin(), keyed.end());
  std::vector<int> out;
  for (const auto& [key, c] : keyed) out.push_back(c);
  return out;
}

struct TreeLayout {
  std::vector<double> x, y;  // per node
  std::vector<int> leaf_order;
  double max_x = 0.0;
};

inline void layout_walk(const PhyloTree& tree, int node, double depth, TreeLayout& layout) {
  layout.x[node] = depth;
  layout.max_x = std::max(layout.max_x, depth);
  if (tree.is_leaf(node)) {
    layout.y[node] = static_cast<double>(layout.leaf_order.size());
    layout.leaf_order.push_back(node);
    return;
  }
  double lo = 1e300, hi = -1e300;
  for (int c : ordered_children(tree, node)) {
    layout_walk(tree, c, depth + tree.node(c).length.value_or(1.0), layout);
    lo = std::min(lo, layout.y[c]);
    hi = std::max(hi, layout.y[c]);
  }
  layout.y[node] = 0.5 * (lo + hi);
}

inline TreeLayout layout_tree(const PhyloTree& tree) {
  TreeLayout layout;
  layout.x.assign(tree.node_count(), 0.0);
  layout.y.assign(tree.node_count(), 0.0);
  layout_walk(tree, tree.root(), 0.0, layout);
  return layout;
}

}  // namespace detail

/// Rectangular cladogram; branch lengths to scale when present, unit
/// otherwise; leaf labels right of their tips.
inline std::string render_tree_svg(const PhyloTree& tree) {
  tree.validate();
  const detail::TreeLayout layout = detail::layout_tree(tree);
  const double row_height = 18.0;
  const double plot_width = 420.0;
  const double margin = 12.0;
  std::size_t label_chars = 0;
  for (int leaf : layout.leaf_order)
    label_chars = std::max(label_chars, tree.node(leaf).label.size());
  const double label_width = 8.0 * static_cast<double>(label_chars) + 10.0;
  const double width = margin * 2 + plot_width + label_width;
  const double height = margin * 2 + row_height * static_cast<double>(layout.leaf_order.size());
  const double scale = layout.max_x > 0.0 ? plot_width / layout.max_x : 1.0;

  auto px = [&](int node) { return margin + layout.x[node] * scale; };
  auto py = [&](int node) { return margin + (layout.y[node] + 0.5) * row_height; };

  std::string svg;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                "viewBox=\"0 0 %.0f %.0f\">\n",
                width, height, width, height);
  svg += buf;
  svg += "<g stroke=\"#333\" stroke-width=\"1.25\" fill=\"none\">\n";
  for (int v : tree.preorder()) {
    if (v == tree.root()) continue;
    const int parent = tree.node(v).parent;
    // horizontal from parent depth to own depth, vertical connector at parent depth
    svg += "<path d=\"M " + detail::fmt2(px(parent)) + " " + detail::fmt2(py(parent)) + " V " +
           detail::fmt2(py(v)) + " H " + detail::fmt2(px(v)) + "\"/>\n";
  }
  svg += "</g>\n<g font-family=\"monospace\" font-size=\"12\" fill=\"#000\">\n";
  for (int leaf : layout.leaf_order) {
    svg += "<text x=\"" + detail::fmt2(px(leaf) + 5.0) + "\" y=\"" + detail::fmt2(py(leaf) + 4.0) +
           "\">" + detail::xml_escape(tree.node(leaf).label) + "</text>\n";
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

inline std::string render_tree_ascii(const PhyloTree& tree) {
  tree.validate();
  std::string out;
  auto walk = [&](auto&& self, int node, const std::string& prefix, bool last) -> void {
    const auto& n = tree.node(node);
    if (node == tree.root()) {
      out += n.label.empty() ? "*" : n.label;
    } else {
      out += prefix + (last ? "`-- " : "|-- ");
      out += n.label.empty() ? "*" : n.label;
      if (n.length) out += ":" + detail::fmt_sig(*n.length);
    }
    out += "\n";
    const auto children = detail::ordered_children(tree, node);
    for (std::size_t i = 0; i < children.size(); ++i) {
      const std::string next_prefix =
          node == tree.root() ? "" : prefix + (last ? "    " : "|   ");
      self(self, children[i], next_prefix, i + 1 == children.size());
    }
  };
  walk(walk, tree.root(), "", true);
  return out;
}

inline std::string render_tree_dot(const PhyloTree& tree) {
  tree.validate();
  std::string out = "graph phylo {\n  node [shape=point];\n";
  for (int v : tree.preorder()) {
    const auto& n = tree.node(v);
    if (tree.is_leaf(v))
      out += "  n" + std::to_string(v) + " [shape=plaintext,label=\"" + n.label + "\"];\n";
  }
  for (int v : tree.preorder()) {
    if (v == tree.root()) continue;
    out += "  n" + std::to_string(tree.node(v).parent) + " -- n" + std::to_string(v);
    if (tree.node(v).length) out += " [label=\"" + detail::fmt_sig(*tree.node(v).length) + "\"]";
    out += ";\n";
  }
  out += "}\n";
  return out;
}

/// Horizontal bar chart of the strongest-changing layers; flagged
/// (shared/embedding) layers are marked with an asterisk.
inline std::string render_importance_svg(const LayerImportanceReport& report, int top_k) {
  const std::size_t rows =
      std::min<std::size_t>(report.rows.size(), top_k <= 0 ? report.rows.size() : top_k);
  const double row_height = 22.0;
  const double bar_width = 360.0;
  const double margin = 12.0;
  std::size_t label_chars = 10;
  for (std::size_t i = 0; i < rows; ++i)
    label_chars = std::max(label_chars, report.rows[i].layer.size() + 2);
  const double label_width = 7.5 * static_cast<double>(label_chars);
  const double value_width = 80.0;
  const double width = margin * 2 + label_width + bar_width + value_width;
  const double height = margin * 2 + row_height * static_cast<double>(rows) + 18.0;
  const double max_mean = rows == 0 ? 1.0 : std::max(report.rows.front().mean, 1e-300);

  std::string svg;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                "viewBox=\"0 0 %.0f %.0f\">\n",
                width, height, width, height);
  svg += buf;
  svg += "<text x=\"" + detail::fmt2(margin) + "\" y=\"" + detail::fmt2(margin + 6.0) +
         "\" font-family=\"monospace\" font-size=\"12\">metric=" +
         detail::xml_escape(format_metric(report.metric)) + "</text>\n";
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& row = report.rows[i];
    const double y = margin + 18.0 + row_height * static_cast<double>(i);
    const double w = bar_width * (max_mean > 0.0 ? row.mean / max_mean : 0.0);
    std::string label = row.layer + (row.flagged ? " *" : "");
    svg += "<text x=\"" + detail::fmt2(margin) + "\" y=\"" + detail::fmt2(y + 14.0) +
           "\" font-family=\"monospace\" font-size=\"11\">" + detail::xml_escape(label) +
           "</text>\n";
    svg += "<rect x=\"" + detail::fmt2(margin + label_width) + "\" y=\"" + detail::fmt2(y + 4.0) +
           "\" width=\"" + detail::fmt2(std::max(w, 0.5)) + "\" height=\"12\" fill=\"#4878a8\"/>\n";
    svg += "<text x=\"" + detail::fmt2(margin + label_width + std::max(w, 0.5) + 6.0) + "\" y=\"" +
           detail::fmt2(y + 14.0) + "\" font-family=\"monospace\" font-size=\"11\">" +
           detail::fmt_sig(row.mean) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

/// Scatter of PCA coordinates; one fixed color per distinct label, deterministic
/// assignment by sorted label order.
inline std::string render_pca_svg(const PcaProjection& projection) {
  static const char* kPalette[] = {"#4878a8", "#d1605e", "#6aa56e", "#e49444", "#8358a4",
                                   "#85594c", "#d57fbe", "#777777", "#b8a33b", "#6aa8b8"};
  std::map<std::string, std::size_t> color_of;
  for (const auto& label : projection.labels) color_of.emplace(label, 0);
  {
    std::size_t k = 0;
    for (auto& [label, idx] : color_of) idx = k++ % 10;
  }

  double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
  for (const auto& c : projection.coords) {
    min_x = std::min(min_x, c[0]);
    max_x = std::max(max_x, c[0]);
    min_y = std::min(min_y, c[1]);
    max_y = std::max(max_y, c[1]);
  }
  const double pad_x = (max_x - min_x) * 0.08 + 1e-9;
  const double pad_y = (max_y - min_y) * 0.08 + 1e-9;
  min_x -= pad_x; max_x += pad_x; min_y -= pad_y; max_y += pad_y;

  const double plot = 420.0, margin = 40.0, legend = 150.0;
  const double width = margin * 2 + plot + legend;
  const double height = margin * 2 + plot;
  auto sx = [&](double v) { return margin + (v - min_x) / (max_x - min_x) * plot; };
  auto sy = [&](double v) { return margin + plot - (v - min_y) / (max_y - min_y) * plot; };

  std::string svg;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                "viewBox=\"0 0 %.0f %.0f\">\n",
                width, height, width, height);
  svg += buf;
  svg += "<rect x=\"" + detail::fmt2(margin) + "\" y=\"" + detail::fmt2(margin) + "\" width=\"" +
         detail::fmt2(plot) + "\" height=\"" + detail::fmt2(plot) +
         "\" fill=\"none\" stroke=\"#999\"/>\n";
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.2f\" y=\"%.2f\" font-family=\"monospace\" font-size=\"12\">PC1 "
                "(%.1f%%)</text>\n",
                margin + plot / 2 - 40.0, margin + plot + 24.0, 100.0 * projection.explained[0]);
  svg += buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.2f\" y=\"%.2f\" font-family=\"monospace\" font-size=\"12\" "
                "transform=\"rotate(-90 %.2f %.2f)\">PC2 (%.1f%%)</text>\n",
                margin - 24.0, margin + plot / 2 + 40.0, margin - 24.0, margin + plot / 2 + 40.0,
                100.0 * projection.explained[1]);
  svg += buf;
  for (std::size_t i = 0; i < projection.coords.size(); ++i) {
    svg += "<circle cx=\"" + detail::fmt2(sx(projection.coords[i][0])) + "\" cy=\"" +
           detail::fmt2(sy(projection.coords[i][1])) + "\" r=\"3.5\" fill=\"" +
           kPalette[color_of[projection.labels[i]]] + "\"/>\n";
  }
  std::size_t row = 0;
  for (const auto& [label, idx] : color_of) {
    const double y = margin + 10.0 + 18.0 * static_cast<double>(row++);
    svg += "<circle cx=\"" + detail::fmt2(margin + plot + 16.0) + "\" cy=\"" + detail::fmt2(y) +
           "\" r=\"4\" fill=\"" + kPalette[idx] + "\"/>\n";
    svg += "<text x=\"" + detail::fmt2(margin + plot + 26.0) + "\" y=\"" + detail::fmt2(y + 4.0) +
           "\" font-family=\"monospace\" font-size=\"11\">" + detail::xml_escape(label) +
           "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace phylotrace
