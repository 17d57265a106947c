// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "phylotrace/detail/text.hpp"
#include "phylotrace/error.hpp"
#include "phylotrace/tree.hpp"

namespace phylotrace {

namespace detail {

class NewickParser {
 public:
  explicit NewickParser(std::string_view text) : text_(text) {}

  PhyloTree parse() {
    PhyloTree tree;
    skip_space();
    if (at_end())
      fail("empty input");
    parse_subtree(tree, -1);
    skip_space();
    expect(';');
    skip_space();
    if (!at_end())
      fail("trailing characters after ';'");
    tree.validate();
    return tree;
  }

 private:
  void parse_subtree(PhyloTree& tree, int parent) {
    int node;
    if (peek() == '(') {
      node = parent < 0 ? tree.add_root() : tree.add_child(parent);
      consume();  // '('
      parse_subtree(tree, node);
      while (peek() == ',') {
        consume();
        parse_subtree(tree, node);
      }
      expect(')');
      tree.node(node).label = parse_label();
    } else {
      const std::string label = parse_label();
      if (label.empty())
        fail("expected a label");
      node = parent < 0 ? tree.add_root(label) : tree.add_child(parent, label);
    }
    if (peek() == ':') {
      consume();
      tree.node(node).length = parse_number();
    }
  }

  std::string parse_label() {
    std::string label;
    while (!at_end()) {
      const char c = text_[pos_];
      if (c == '(' || c == ')' || c == ',' || c == ':' || c == ';' || c == '[' || c == ']' ||
          std::isspace(static_cast<unsigned char>(c)))
        break;
      label += c;
      ++pos_;
    }
    return label;
  }

  double parse_number() {
    const std::size_t start = pos_;
    while (!at_end()) {
      const char c = text_[pos_];
      if (c == '(' || c == ')' || c == ',' || c == ':' || c == ';' ||
          std::isspace(static_cast<unsigned char>(c)))
        break;
      ++pos_;
    }
    const std::string token(text_.substr(start, pos_ - start));
    char* end = nullptr;
    const double value = std::strtod(token.c_str(), &end);
    if (token.empty() || end != token.c_str() + token.size())
      fail("bad branch length \"" + token + "\"", start);
    return value;
  }

  char peek() {
    skip_space();
    return at_end() ? '\0' : text_[pos_];
  }
  void consume() { ++pos_; }
  void expect(char c) {
    if (peek() != c)
      fail(std::string("expected '") + c + "'");
    consume();
  }
  bool at_end() const { return pos_ >= text_.size(); }
  void skip_space() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  [[noreturn]] void fail(const std::string& why) { fail(why, pos_); }
  [[noreturn]] void fail(const std::string& why, std::size_t at) {
    throw Error(ErrorCode::ParseError, "newick: " + why + " at byte " + std::to_string(at));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

inline void append_newick(const PhyloTree& tree, int node, std::string& out) {
  const auto& n = tree.node(node);
  if (!n.children.empty()) {
    // canonical child order: by smallest descendant leaf label
    std::vector<std::pair<std::string, int>> ordered;
    for (int c : n.children) ordered.emplace_back(tree.subtree_leaf_labels(c).front(), c);
    std::sort(ordered.begin(), ordered.end());
    out += '(';
    for (std::size_t i = 0; i < ordered.size(); ++i) {
      if (i) out += ',';
      append_newick(tree, ordered[i].second, out);
    }
    out += ')';
  }
  out += n.label;
  if (n.length) {
    out += ':';
    out += fmt_g17(*n.length);
  }
}

}  // namespace detail

inline PhyloTree parse_newick(std::string_view text) {
  return detail::NewickParser(text).parse();
}

/// Canonical form: children ordered by smallest descendant label, branch
/// lengths emitted only when present, %.17g so lengths round-trip exactly.
inline std::string to_newick(const PhyloTree& tree) {
  tree.validate();
  std::string out;
  detail::append_newick(tree, tree.root(), out);
  out += ';';
  return out;
}

inline PhyloTree read_newick_file(const std::filesystem::path& path) {
  return parse_newick(detail::read_text_file(path, "newick"));
}

inline void write_newick_file(const PhyloTree& tree, const std::filesystem::path& path) {
  detail::write_text_file(path, to_newick(tree) + "\n", "newick");
}

}  // namespace phylotrace
