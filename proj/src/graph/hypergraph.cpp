#include "grace/graph/hypergraph.hpp"

#include <algorithm>
#include <fstream>

#include "grace/data/csv.hpp"

namespace grace::graph {

bool RelationSet::linked(Index i, Index j, Index relation) const {
  if (i == j) return false;
  const std::pair<Index, Index> key{std::min(i, j), std::max(i, j)};
  const auto& list = edges[relation];
  return std::binary_search(list.begin(), list.end(), key);
}

Hypergraph::Hypergraph(Index stocks, Index factors, RelationSet relations, bool include_factors)
    : stocks_(stocks), factors_(factors), relations_(std::move(relations)),
      include_factors_(include_factors) {
  relation_degrees_ = Eigen::MatrixXi::Zero(stocks_, relations_.relations());
  for (Index m = 0; m < relations_.relations(); ++m)
    for (const auto& [i, j] : relations_.edges[m]) {
      ++relation_degrees_(i, m);
      ++relation_degrees_(j, m);
    }
  degrees_ = relation_degrees_.rowwise().sum();
}

Vector Hypergraph::relation_vector(Index i, Index j) const {
  const Index m_count = relations();
  Vector a = Vector::Zero(m_count + factors_);
  if (i == j) throw UsageError("relation_vector: i and j must differ");
  const bool i_stock = i < stocks_;
  const bool j_stock = j < stocks_;
  if (i_stock && j_stock) {
    for (Index m = 0; m < m_count; ++m) a(m) = relations_.linked(i, j, m) ? 1.0 : 0.0;
  } else if (include_factors_ && (i_stock || j_stock)) {
    const Index factor_vertex = i_stock ? j : i;
    a(m_count + (factor_vertex - stocks_)) = 1.0;
  }
  return a;
}

Hypergraph build_hypergraph(const std::vector<StockEdge>& edges, Index stocks, Index factors,
                            Index relation_count, bool include_factors,
                            std::vector<std::string> names) {
  if (stocks < 1) throw UsageError("build_hypergraph: need at least one stock");
  RelationSet set;
  set.edges.resize(relation_count);
  for (const StockEdge& e : edges) {
    if (e.i < 0 || e.i >= stocks || e.j < 0 || e.j >= stocks)
      throw LoadError("relation edge (" + std::to_string(e.i) + "," + std::to_string(e.j) +
                      ") has a vertex outside [0," + std::to_string(stocks) + ")");
    if (e.relation < 0 || e.relation >= relation_count)
      throw LoadError("relation id " + std::to_string(e.relation) + " outside [0," +
                      std::to_string(relation_count) + ")");
    if (e.i == e.j) throw LoadError("self-loop on stock " + std::to_string(e.i));
    set.edges[e.relation].emplace_back(std::min(e.i, e.j), std::max(e.i, e.j));
  }
  for (auto& list : set.edges) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  if (names.empty())
    for (Index m = 0; m < relation_count; ++m) names.push_back("relation_" + std::to_string(m));
  if (static_cast<Index>(names.size()) != relation_count)
    throw LoadError("relation metadata names " + std::to_string(names.size()) + " relations, expected " +
                    std::to_string(relation_count));
  set.names = std::move(names);
  return Hypergraph(stocks, factors, std::move(set), include_factors);
}

std::vector<StockEdge> parse_relations(std::istream& in, const std::string& source) {
  const csv::Table table = csv::read(in);
  const int ci = table.require_column("i", source);
  const int cj = table.require_column("j", source);
  const int cr = table.require_column("relation_id", source);
  std::vector<StockEdge> edges;
  for (const csv::Row& row : table.rows) {
    const std::string where = source + ":" + std::to_string(row.line);
    if (row.fields.size() < 3) throw LoadError(where + ": expected i,j,relation_id");
    edges.push_back(StockEdge{csv::parse_long(row.fields[ci], where),
                              csv::parse_long(row.fields[cj], where),
                              csv::parse_long(row.fields[cr], where)});
  }
  return edges;
}

std::vector<std::pair<Index, std::string>> parse_relation_meta(std::istream& in,
                                                               const std::string& source) {
  const csv::Table table = csv::read(in);
  const int cr = table.require_column("relation_id", source);
  const int cn = table.require_column("name", source);
  std::vector<std::pair<Index, std::string>> out;
  for (const csv::Row& row : table.rows) {
    const std::string where = source + ":" + std::to_string(row.line);
    if (row.fields.size() < 2) throw LoadError(where + ": expected relation_id,name");
    out.emplace_back(csv::parse_long(row.fields[cr], where), row.fields[cn]);
  }
  std::sort(out.begin(), out.end());
  for (std::size_t m = 0; m < out.size(); ++m)
    if (out[m].first != static_cast<Index>(m))
      throw LoadError(source + ": relation ids must be 0..M-1 without gaps");
  return out;
}

Hypergraph load_hypergraph(const std::filesystem::path& relations,
                           const std::filesystem::path& meta, Index stocks, Index factors,
                           bool include_factors) {
  std::ifstream rin(relations);
  if (!rin) throw LoadError("cannot open " + relations.string());
  const auto edges = parse_relations(rin, relations.string());

  std::vector<std::string> names;
  Index relation_count = 0;
  if (!meta.empty() && std::filesystem::exists(meta)) {
    std::ifstream min(meta);
    for (auto& [id, name] : parse_relation_meta(min, meta.string())) names.push_back(name);
    relation_count = static_cast<Index>(names.size());
  } else {
    for (const auto& e : edges) relation_count = std::max(relation_count, e.relation + 1);
  }
  return build_hypergraph(edges, stocks, factors, relation_count, include_factors, std::move(names));
}

Matrix collapse(const Hypergraph& g) {
  const Index n = g.stocks();
  Matrix w = Matrix::Zero(n, n);
  for (const auto& list : g.relation_set().edges)
    for (const auto& [i, j] : list) {
      w(i, j) = 1.0;
      w(j, i) = 1.0;
    }
  for (Index i = 0; i < n; ++i) {
    const double links = w.row(i).sum();
    if (links > 0) w.row(i) /= links;
  }
  return w;
}

}  // namespace grace::graph
