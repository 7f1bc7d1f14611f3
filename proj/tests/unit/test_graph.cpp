#include <gtest/gtest.h>

#include <sstream>

#include "grace/graph/hypergraph.hpp"

namespace grace::graph {
namespace {

TEST(Hypergraph, EmptyEdgesHaveZeroDegree) {
  const auto g = build_hypergraph({}, 4, 2, 1, true);
  EXPECT_EQ(g.degrees().sum(), 0);
  EXPECT_EQ(g.relation_vector(0, 1).norm(), 0.0);
}

TEST(Hypergraph, SingleEdge) {
  const auto g = build_hypergraph({{0, 1, 0}}, 3, 0, 2, false);
  EXPECT_EQ(g.degrees()(0), 1);
  EXPECT_EQ(g.degrees()(1), 1);
  EXPECT_EQ(g.degrees()(2), 0);
  const Vector a = g.relation_vector(0, 1);
  ASSERT_EQ(a.size(), 2);
  EXPECT_EQ(a(0), 1.0);
  EXPECT_EQ(a(1), 0.0);
  EXPECT_TRUE(a.isApprox(g.relation_vector(1, 0)));
}

TEST(Hypergraph, FullyConnectedUnderTwoRelations) {
  std::vector<StockEdge> edges;
  for (Index m = 0; m < 2; ++m)
    for (Index i = 0; i < 3; ++i)
      for (Index j = i + 1; j < 3; ++j) edges.push_back({i, j, m});
  const auto g = build_hypergraph(edges, 3, 0, 2, false);
  for (Index j = 0; j < 3; ++j) EXPECT_EQ(g.degrees()(j), 4);
}

TEST(Hypergraph, DuplicatesAndReversedPairsCollapse) {
  const auto g = build_hypergraph({{0, 1, 0}, {1, 0, 0}, {0, 1, 0}}, 2, 0, 1, false);
  EXPECT_EQ(g.degrees()(0), 1);
  EXPECT_EQ(g.relation_set().edges[0].size(), 1u);
}

TEST(Hypergraph, FactorVertexVector) {
  const auto g = build_hypergraph({}, 4, 5, 3, true);
  const Vector a = g.relation_vector(1, 4 + 2);
  ASSERT_EQ(a.size(), 3 + 5);
  for (Index k = 0; k < a.size(); ++k) EXPECT_EQ(a(k), k == 3 + 2 ? 1.0 : 0.0);
}

TEST(Hypergraph, RelationSubset) {
  const auto g = build_hypergraph({{0, 2, 0}, {0, 2, 3}, {1, 2, 1}}, 3, 0, 4, false);
  const Vector a = g.relation_vector(2, 0);
  Vector expect = Vector::Zero(4);
  expect << 1, 0, 0, 1;
  EXPECT_EQ(a, expect);
  EXPECT_EQ(g.relation_vector(0, 1).norm(), 0.0);
}

TEST(Hypergraph, InvalidEdgesThrow) {
  EXPECT_THROW(build_hypergraph({{0, 5, 0}}, 3, 0, 1, false), Error);
  EXPECT_THROW(build_hypergraph({{0, 1, 2}}, 3, 0, 1, false), Error);
  EXPECT_THROW(build_hypergraph({{1, 1, 0}}, 3, 0, 1, false), Error);
}

TEST(Hypergraph, ParsesEdgeAndMetaFiles) {
  std::istringstream edges("i,j,relation_id\n0,1,0\n1,2,1\n");
  std::istringstream meta("relation_id,name\n0,sector\n1,supplier\n");
  const auto e = parse_relations(edges, "mem");
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[1].relation, 1);
  const auto m = parse_relation_meta(meta, "mem");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[1].second, "supplier");
}

TEST(Collapse, RowNormalizedAdjacency) {
  // Chain 0-1-2 plus isolated 3.
  const auto g = build_hypergraph({{0, 1, 0}, {1, 2, 0}}, 4, 0, 1, false);
  const Matrix w = collapse(g);
  EXPECT_DOUBLE_EQ(w(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(w(1, 2), 0.5);
  EXPECT_DOUBLE_EQ(w(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(w(2, 1), 1.0);
  EXPECT_EQ(w.row(3).norm(), 0.0);
}

TEST(Collapse, MultipleRelationsCountOnce) {
  const auto g = build_hypergraph({{0, 1, 0}, {0, 1, 1}, {0, 2, 1}}, 3, 0, 2, false);
  const Matrix w = collapse(g);
  EXPECT_DOUBLE_EQ(w(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(w(0, 2), 0.5);
}

}  // namespace
}  // namespace grace::graph
