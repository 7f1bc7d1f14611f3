#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "grace/core/types.hpp"

namespace grace::graph {

// Undirected stock-to-stock relations. edges[m] lists each linked pair (i, j)
// of relation m once, with i < j, sorted.
struct RelationSet {
  std::vector<std::string> names;
  std::vector<std::vector<std::pair<Index, Index>>> edges;

  Index relations() const { return static_cast<Index>(edges.size()); }
  bool linked(Index i, Index j, Index relation) const;
};

struct StockEdge {
  Index i = 0;
  Index j = 0;
  Index relation = 0;
};

// Stocks 0..N-1, factor vertices N..N+B-1, M stock relations plus B implicit
// factor-to-stock relations. Factor vertices link to every stock and never to
// each other. With include_factors == false the factor relations are absent
// (B is still recorded because the feature tensor keeps factor entities).
class Hypergraph {
public:
  Hypergraph() = default;
  Hypergraph(Index stocks, Index factors, RelationSet relations, bool include_factors);

  Index stocks() const { return stocks_; }
  Index factors() const { return factors_; }
  Index relations() const { return relations_.relations(); }
  bool include_factors() const { return include_factors_; }
  const RelationSet& relation_set() const { return relations_; }

  // d_j: number of (relation, stock) links of stock j, counted per relation.
  const Eigen::VectorXi& degrees() const { return degrees_; }
  // Per-relation degree of every stock: stocks x M.
  const Eigen::MatrixXi& relation_degrees() const { return relation_degrees_; }

  // Binary (M + B)-vector a_{i,j}.
  Vector relation_vector(Index i, Index j) const;

private:
  Index stocks_ = 0;
  Index factors_ = 0;
  RelationSet relations_;
  bool include_factors_ = true;
  Eigen::VectorXi degrees_;
  Eigen::MatrixXi relation_degrees_;
};

// Builds the graph from edge triples; symmetric closure and de-duplication
// are applied. `relation_count` fixes M so empty relations are retained;
// names default to "relation_<m>".
Hypergraph build_hypergraph(const std::vector<StockEdge>& edges, Index stocks, Index factors,
                            Index relation_count, bool include_factors,
                            std::vector<std::string> names = {});

// `i,j,relation_id` edge list plus optional `relation_id,name` metadata.
std::vector<StockEdge> parse_relations(std::istream& in, const std::string& source);
std::vector<std::pair<Index, std::string>> parse_relation_meta(std::istream& in,
                                                               const std::string& source);
Hypergraph load_hypergraph(const std::filesystem::path& relations,
                           const std::filesystem::path& meta, Index stocks, Index factors,
                           bool include_factors);

// Row-normalized any-relation adjacency: w_ij = a_ij / n_i.
Matrix collapse(const Hypergraph& g);

}  // namespace grace::graph
