#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rgcn {

using NodeId = std::int32_t;
using RelId = std::int32_t;

enum class RelationKind { canonical, inverse, self_loop };

struct RelationInfo {
  RelId index = 0;
  RelationKind kind = RelationKind::canonical;
  std::optional<RelId> base;  // canonical partner of an inverse relation
};

/// A stored fact. `relation` is always a canonical relation id.
struct Triple {
  NodeId subject = 0;
  RelId relation = 0;
  NodeId object = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

/// Directed labeled multigraph with inverse and self-loop augmentation.
///
/// With R canonical relations the augmented vocabulary has 2R + 1 members:
/// canonical r keeps id r, its inverse gets id R + r, and the self-loop is
/// 2R. Every stored triple (s, r, o) yields two directed edges, s -> o under
/// r and o -> s under r's inverse. Edges are stored as compressed rows keyed
/// by target node; inside a row the entries are sorted by (relation, source)
/// so N_i^r is a contiguous slice. The self-loop is implicit.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  /// Throws DataError naming the first triple with an out-of-range id.
  static KnowledgeGraph build(std::vector<Triple> triples, std::int32_t num_nodes,
                              std::int32_t num_relations);

  std::int32_t num_nodes() const { return num_nodes_; }
  std::int32_t num_relations() const { return num_relations_; }
  std::int32_t num_augmented_relations() const { return 2 * num_relations_ + 1; }
  RelId self_loop() const { return 2 * num_relations_; }
  RelId inverse_of(RelId r) const;
  RelationInfo relation_info(RelId r) const;

  const std::vector<Triple>& triples() const { return triples_; }

  /// Number of stored directed non-self-loop edges (2 x triples).
  std::size_t num_edges() const { return edge_source_.size(); }

  /// Source neighbors of `target` under augmented relation `r`.
  std::span<const NodeId> neighbors(NodeId target, RelId r) const;
  std::int32_t degree(NodeId target, RelId r) const {
    return static_cast<std::int32_t>(neighbors(target, r).size());
  }
  /// In-degree plus out-degree over stored triples, self-loop excluded.
  std::int32_t total_degree(NodeId node) const { return total_degree_[node]; }

  // Raw compressed-row view. Entry e in [row_ptr[i], row_ptr[i+1]) is the
  // edge edge_source[e] -> i labeled edge_relation[e].
  std::span<const std::int64_t> row_ptr() const { return row_ptr_; }
  std::span<const NodeId> edge_source() const { return edge_source_; }
  std::span<const RelId> edge_relation() const { return edge_relation_; }

  /// Edge entries of augmented relation r (excluding the self-loop), in
  /// ascending target order.
  std::span<const std::int64_t> relation_edges(RelId r) const;

  /// Hash of the edge structure; identifies the graph a normalization or
  /// dropout mask was computed on.
  std::uint64_t fingerprint() const { return fingerprint_; }

  friend bool operator==(const KnowledgeGraph&, const KnowledgeGraph&) = default;

 private:
  std::int32_t num_nodes_ = 0;
  std::int32_t num_relations_ = 0;
  std::vector<Triple> triples_;
  std::vector<std::int64_t> row_ptr_{0};
  std::vector<NodeId> edge_source_;
  std::vector<RelId> edge_relation_;
  std::vector<std::int64_t> relation_ptr_;
  std::vector<std::int64_t> relation_edge_;
  std::vector<std::int32_t> total_degree_;
  std::vector<NodeId> identity_;
  std::uint64_t fingerprint_ = 0;
};

enum class NormalizationMode { per_relation, across_relations };

/// "per-relation" / "across-relations".
std::string to_string(NormalizationMode mode);
/// Inverse of to_string; throws UsageError naming the accepted values.
NormalizationMode parse_normalization(const std::string& text);

/// Normalization constants c_{i,r}, computed once on the full graph.
///
/// Per-relation mode: c_{i,r} = |N_i^r| wherever that set is non-empty.
/// Across-relations mode: c_{i,r} = c_i = sum over all augmented relations of
/// |N_i^r|, counting the self-loop as one neighbor, so c_i >= 1.
class Normalization {
 public:
  Normalization() = default;
  Normalization(const KnowledgeGraph& graph, NormalizationMode mode);

  NormalizationMode mode() const { return mode_; }
  /// Absent when node i has no neighbor under r. `graph` must be the graph
  /// the scheme was computed on.
  std::optional<double> constant(const KnowledgeGraph& graph, NodeId node,
                                 RelId r) const;
  /// 1 / c for every compressed-row entry of the graph it was built on.
  std::span<const double> edge_scale() const { return edge_scale_; }

  /// Whether this scheme was computed on `graph`.
  bool matches(const KnowledgeGraph& graph) const;

 private:
  std::uint64_t graph_fingerprint_ = 0;
  NormalizationMode mode_ = NormalizationMode::per_relation;
  std::vector<double> node_constant_;  // across-relations only
  std::vector<double> edge_scale_;
};

/// Average of the subject's and object's total degree (self-loops excluded).
double degree_of_triple(const KnowledgeGraph& graph, const Triple& triple);

}  // namespace rgcn
