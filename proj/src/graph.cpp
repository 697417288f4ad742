#include "rgcn/graph.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "rgcn/error.hpp"

namespace rgcn {

namespace {

std::uint64_t fnv1a(std::uint64_t hash, std::uint64_t value) {
  for (int byte = 0; byte < 8; ++byte) {
    hash ^= (value >> (8 * byte)) & 0xffu;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

}  // namespace

KnowledgeGraph KnowledgeGraph::build(std::vector<Triple> triples,
                                     std::int32_t num_nodes,
                                     std::int32_t num_relations) {
  if (num_nodes < 0 || num_relations < 0) {
    throw DataError("graph: negative node or relation count");
  }
  for (std::size_t t = 0; t < triples.size(); ++t) {
    const Triple& tr = triples[t];
    if (tr.subject < 0 || tr.subject >= num_nodes || tr.object < 0 ||
        tr.object >= num_nodes || tr.relation < 0 ||
        tr.relation >= num_relations) {
      std::ostringstream msg;
      msg << "graph: triple #" << t << " (" << tr.subject << ", " << tr.relation
          << ", " << tr.object << ") out of range for " << num_nodes
          << " nodes and " << num_relations << " relations";
      throw DataError(msg.str());
    }
  }

  KnowledgeGraph g;
  g.num_nodes_ = num_nodes;
  g.num_relations_ = num_relations;
  g.triples_ = std::move(triples);

  struct Entry {
    NodeId target;
    RelId relation;
    NodeId source;
    auto operator<=>(const Entry&) const = default;
  };
  std::vector<Entry> entries;
  entries.reserve(2 * g.triples_.size());
  for (const Triple& tr : g.triples_) {
    entries.push_back({tr.object, tr.relation, tr.subject});
    entries.push_back({tr.subject, tr.relation + num_relations, tr.object});
  }
  std::sort(entries.begin(), entries.end());

  const std::size_t n = static_cast<std::size_t>(num_nodes);
  g.row_ptr_.assign(n + 1, 0);
  g.edge_source_.resize(entries.size());
  g.edge_relation_.resize(entries.size());
  g.total_degree_.assign(n, 0);
  for (std::size_t e = 0; e < entries.size(); ++e) {
    g.row_ptr_[entries[e].target + 1]++;
    g.edge_source_[e] = entries[e].source;
    g.edge_relation_[e] = entries[e].relation;
    g.total_degree_[entries[e].target]++;
  }
  std::partial_sum(g.row_ptr_.begin(), g.row_ptr_.end(), g.row_ptr_.begin());

  // Group entry indices by relation, keeping ascending target order.
  const std::size_t num_aug = 2 * static_cast<std::size_t>(num_relations);
  g.relation_ptr_.assign(num_aug + 1, 0);
  for (RelId r : g.edge_relation_) g.relation_ptr_[r + 1]++;
  std::partial_sum(g.relation_ptr_.begin(), g.relation_ptr_.end(),
                   g.relation_ptr_.begin());
  g.relation_edge_.resize(entries.size());
  std::vector<std::int64_t> cursor(g.relation_ptr_.begin(),
                                   g.relation_ptr_.end() - 1);
  for (std::size_t e = 0; e < entries.size(); ++e) {
    g.relation_edge_[cursor[g.edge_relation_[e]]++] = static_cast<std::int64_t>(e);
  }

  g.identity_.resize(n);
  std::iota(g.identity_.begin(), g.identity_.end(), 0);

  std::uint64_t hash = 0xcbf29ce484222325ull;
  hash = fnv1a(hash, static_cast<std::uint64_t>(num_nodes));
  hash = fnv1a(hash, static_cast<std::uint64_t>(num_relations));
  for (std::size_t e = 0; e < entries.size(); ++e) {
    hash = fnv1a(hash, (static_cast<std::uint64_t>(entries[e].target) << 32) |
                           static_cast<std::uint32_t>(entries[e].source));
    hash = fnv1a(hash, static_cast<std::uint64_t>(entries[e].relation));
  }
  g.fingerprint_ = hash;
  return g;
}

RelId KnowledgeGraph::inverse_of(RelId r) const {
  if (r < 0 || r >= 2 * num_relations_) {
    throw UsageError("graph: relation " + std::to_string(r) +
                     " has no inverse partner");
  }
  return r < num_relations_ ? r + num_relations_ : r - num_relations_;
}

RelationInfo KnowledgeGraph::relation_info(RelId r) const {
  if (r < 0 || r > self_loop()) {
    throw UsageError("graph: relation id " + std::to_string(r) + " out of range");
  }
  if (r == self_loop()) return {r, RelationKind::self_loop, std::nullopt};
  if (r < num_relations_) return {r, RelationKind::canonical, std::nullopt};
  return {r, RelationKind::inverse, r - num_relations_};
}

std::span<const NodeId> KnowledgeGraph::neighbors(NodeId target, RelId r) const {
  if (target < 0 || target >= num_nodes_ || r < 0 || r > self_loop()) {
    throw UsageError("graph: neighbor query (" + std::to_string(target) + ", " +
                     std::to_string(r) + ") out of range");
  }
  if (r == self_loop()) return {identity_.data() + target, 1};
  const auto begin = edge_relation_.begin() + row_ptr_[target];
  const auto end = edge_relation_.begin() + row_ptr_[target + 1];
  const auto [lo, hi] = std::equal_range(begin, end, r);
  const auto offset = lo - edge_relation_.begin();
  return {edge_source_.data() + offset, static_cast<std::size_t>(hi - lo)};
}

std::span<const std::int64_t> KnowledgeGraph::relation_edges(RelId r) const {
  if (r < 0 || r >= 2 * num_relations_) {
    throw UsageError("graph: relation_edges(" + std::to_string(r) + ") out of range");
  }
  return {relation_edge_.data() + relation_ptr_[r],
          static_cast<std::size_t>(relation_ptr_[r + 1] - relation_ptr_[r])};
}

Normalization::Normalization(const KnowledgeGraph& graph, NormalizationMode mode)
    : graph_fingerprint_(graph.fingerprint()), mode_(mode) {
  const auto row_ptr = graph.row_ptr();
  const auto relation = graph.edge_relation();
  edge_scale_.resize(graph.num_edges());
  if (mode == NormalizationMode::across_relations) {
    node_constant_.resize(static_cast<std::size_t>(graph.num_nodes()));
    for (NodeId i = 0; i < graph.num_nodes(); ++i) {
      const double c = static_cast<double>(graph.total_degree(i)) + 1.0;
      node_constant_[i] = c;
      for (auto e = row_ptr[i]; e < row_ptr[i + 1]; ++e) edge_scale_[e] = 1.0 / c;
    }
    return;
  }
  for (NodeId i = 0; i < graph.num_nodes(); ++i) {
    auto e = row_ptr[i];
    while (e < row_ptr[i + 1]) {
      auto run_end = e;
      while (run_end < row_ptr[i + 1] && relation[run_end] == relation[e]) ++run_end;
      const double scale = 1.0 / static_cast<double>(run_end - e);
      for (; e < run_end; ++e) edge_scale_[e] = scale;
    }
  }
}

std::optional<double> Normalization::constant(const KnowledgeGraph& graph,
                                              NodeId node, RelId r) const {
  if (!matches(graph)) {
    throw UsageError("normalization: constants were computed on a different graph");
  }
  const auto count = graph.degree(node, r);
  if (count == 0) return std::nullopt;
  if (mode_ == NormalizationMode::across_relations) return node_constant_[node];
  return static_cast<double>(count);
}

bool Normalization::matches(const KnowledgeGraph& graph) const {
  return graph.fingerprint() == graph_fingerprint_ &&
         graph.num_edges() == edge_scale_.size();
}

double degree_of_triple(const KnowledgeGraph& graph, const Triple& triple) {
  const auto n = graph.num_nodes();
  if (triple.subject < 0 || triple.subject >= n || triple.object < 0 ||
      triple.object >= n) {
    throw UsageError("degree_of_triple: entity id out of range for a graph with " +
                     std::to_string(n) + " nodes");
  }
  return 0.5 * (graph.total_degree(triple.subject) + graph.total_degree(triple.object));
}

std::string to_string(NormalizationMode mode) {
  return mode == NormalizationMode::per_relation ? "per-relation" : "across-relations";
}

NormalizationMode parse_normalization(const std::string& text) {
  if (text == "per-relation") return NormalizationMode::per_relation;
  if (text == "across-relations") return NormalizationMode::across_relations;
  throw UsageError("normalization: unknown value '" + text +
                   "' (accepted: per-relation, across-relations)");
}

}  // namespace rgcn
