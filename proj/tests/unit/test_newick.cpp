// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "phylotrace/newick.hpp"
#include "phylotrace/random_tree.hpp"
#include "phylotrace/rng.hpp"

using namespace phylotrace;

TEST_CASE("direct grammar case with branch lengths") {
  const PhyloTree tree = parse_newick("((A:1,B:2):1,C:3);");
  CHECK(tree.leaf_count() == 3);
  CHECK(tree.leaf_labels_sorted() == std::vector<std::string>{"A", "B", "C"});
  // lengths as given
  bool saw_b = false;
  for (int i = 0; i < static_cast<int>(tree.node_count()); ++i) {
    if (tree.node(i).label == "B") {
      saw_b = true;
      CHECK(tree.node(i).length == 2.0);
    }
  }
  CHECK(saw_b);
}

TEST_CASE("serialization is canonical") {
  CHECK(to_newick(parse_newick("((A:1,B:2):1,C:3);")) == "((A:1,B:2):1,C:3);");
  // children reordered into canonical (smallest-descendant) order
  CHECK(to_newick(parse_newick("(C:3,(B:2,A:1):1);")) == "((A:1,B:2):1,C:3);");
  // lengths are optional and omitted when absent
  CHECK(to_newick(parse_newick("(C,(B,A));")) == "((A,B),C);");
}

TEST_CASE("parse errors carry a byte offset") {
  try {
    parse_newick("((A:1,B:2):1,C:3;");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(e.message().find("byte") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_newick("(A,B)"), Error);   // missing ';'
  CHECK_THROWS_AS(parse_newick("(,A);"), Error);   // empty sibling
  CHECK_THROWS_AS(parse_newick("(A:x,B);"), Error);  // bad length
  CHECK_THROWS_AS(parse_newick("(A,A,B);"), Error);  // duplicate leaf labels
  CHECK_THROWS_AS(parse_newick(""), Error);
}

TEST_CASE("whitespace is tolerated between tokens") {
  const PhyloTree tree = parse_newick("( (A:1 , B:2) :1, C:3 ) ;");
  CHECK(to_newick(tree) == "((A:1,B:2):1,C:3);");
}

TEST_CASE("round-trip preserves topology, labels and lengths on random trees") {
  Rng rng(77);
  for (int i = 0; i < 60; ++i) {
    const std::size_t n = 3 + rng.next_below(14);
    std::vector<std::string> labels;
    for (std::size_t k = 0; k < n; ++k) labels.push_back("t" + std::to_string(k));
    PhyloTree tree = random_tree(labels, rng);
    // randomize lengths, occasionally drop them entirely
    const bool with_lengths = rng.next_below(4) != 0;
    for (int v = 0; v < static_cast<int>(tree.node_count()); ++v) {
      if (v == tree.root()) continue;
      tree.node(v).length = with_lengths ? std::optional<double>(rng.next_in(0.01, 5.0)) : std::nullopt;
    }
    const std::string first = to_newick(tree);
    const PhyloTree reparsed = parse_newick(first);
    CHECK(to_newick(reparsed) == first);  // serialize . parse is identity on canonical strings
    CHECK(reparsed.same_topology(tree));
    if (with_lengths) {
      // exact length preservation, matched through the path matrix
      CHECK(reparsed.leaf_path_matrix().values == tree.leaf_path_matrix().values);
    }
  }
}

TEST_CASE("internal labels survive a round-trip") {
  const std::string s = "((A:1,B:2)ab:1,C:3)root;";
  CHECK(to_newick(parse_newick(s)) == s);
}
