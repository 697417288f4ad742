#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rgcn/classify.hpp"
#include "rgcn/graph.hpp"

namespace rgcn {

/// Bijective name <-> id map with ids in insertion order.
class Vocabulary {
 public:
  std::int32_t size() const { return static_cast<std::int32_t>(names_.size()); }
  /// Id of `name`, adding it when new.
  std::int32_t intern(const std::string& name);
  std::optional<std::int32_t> find(const std::string& name) const;
  const std::string& name(std::int32_t id) const { return names_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& names() const { return names_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::int32_t> index_;
};

struct DatasetBundle {
  std::string name;
  Vocabulary entities;
  Vocabulary relations;
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;

  // Classification datasets only.
  std::vector<std::string> class_names;
  LabelSet train_labels;
  LabelSet test_labels;

  /// Valid/test entities and relations that never occur in train.
  std::size_t unseen_entities = 0;
  std::size_t unseen_relations = 0;
  /// Human-readable notes from preprocessing (removed triples and the like).
  std::vector<std::string> log;

  /// Graph over the training triples with every vocabulary entity as a node.
  KnowledgeGraph train_graph() const;
  /// Every split concatenated, for filtered ranking.
  std::vector<Triple> all_triples() const;
};

enum class UnseenPolicy { allow, reject };

/// Reads subject<TAB>relation<TAB>object files. Ids are assigned in
/// first-seen order over train, then valid, then test. Duplicate lines are
/// kept. Throws DataError with file and line for malformed lines, for an
/// empty file, and (under `reject`) for valid/test names missing from train.
DatasetBundle load_triple_tsv(const std::filesystem::path& train,
                              const std::filesystem::path& valid,
                              const std::filesystem::path& test,
                              UnseenPolicy unseen = UnseenPolicy::allow);

/// train.txt / valid.txt / test.txt inside `dir`.
DatasetBundle load_triple_dir(const std::filesystem::path& dir,
                              UnseenPolicy unseen = UnseenPolicy::allow);

// N-Triples -----------------------------------------------------------------

struct RdfTerm {
  enum class Kind { iri, blank, literal };
  Kind kind = Kind::iri;
  /// IRIs without angle brackets; blank nodes as "_:label"; literals as the
  /// full source token including quotes and any language tag or datatype.
  std::string text;

  friend bool operator==(const RdfTerm&, const RdfTerm&) = default;
};

struct RdfStatement {
  RdfTerm subject;
  RdfTerm predicate;
  RdfTerm object;
};

/// Parses one N-Triples line. Returns nullopt for blank and comment lines.
/// Throws DataError mentioning `line_number` for anything else it cannot
/// read.
std::optional<RdfStatement> parse_ntriples_line(std::string_view line,
                                                std::size_t line_number);

/// Text after the last '#' or '/' of an IRI (the whole text if neither).
std::string local_name(std::string_view iri);

struct LabelSpec {
  std::filesystem::path train_file;
  std::filesystem::path test_file;
  std::string entity_column;
  std::string label_column;
};

enum class LeakMode { remove_relation_entirely, remove_target_triples_only };

/// Relations matched by local name or by full IRI.
struct LabelLeakPolicy {
  std::set<std::string> relations_to_remove;
  LeakMode mode = LeakMode::remove_relation_entirely;
};

/// Whether equal literal values under different predicates share a node.
enum class LiteralScope { global, per_predicate };

struct RdfOptions {
  LiteralScope literal_scope = LiteralScope::global;
};

/// Loads an N-Triples graph plus benchmark label files (tab-separated with a
/// header row naming `entity_column` and `label_column`). Exact duplicate
/// statements collapse to one edge. Leak removal is applied before ids are
/// assigned, so nodes and relations that only occurred in removed statements
/// vanish, except labeled entities, which stay as isolated nodes. Classes
/// are the sorted distinct label values. All statements go to `train`.
DatasetBundle load_rdf_classification(const std::filesystem::path& graph_file,
                                      const LabelSpec& labels,
                                      const LabelLeakPolicy& leak,
                                      const RdfOptions& options = {});

/// File layout and leak policy of a named classification benchmark
/// ("aifb", "mutag", "bgs", "am") under `root`.
struct RdfBenchmark {
  std::string name;
  std::filesystem::path graph_file;
  LabelSpec labels;
  LabelLeakPolicy leak;
};
RdfBenchmark rdf_benchmark(const std::string& name, const std::filesystem::path& root);

// Statistics -----------------------------------------------------------------

struct DatasetStats {
  std::optional<std::int64_t> entities;
  std::optional<std::int64_t> relations;
  std::optional<std::int64_t> train_edges;
  std::optional<std::int64_t> valid_edges;
  std::optional<std::int64_t> test_edges;
  std::optional<std::int64_t> labeled;
  std::optional<std::int64_t> classes;
};

DatasetStats compute_stats(const DatasetBundle& bundle);

/// Published counts for aifb, mutag, bgs, am, wn18, fb15k and fb15k-237.
std::optional<DatasetStats> published_stats(const std::string& name);

struct StatsDiff {
  bool pass = true;
  /// One line per mismatching field: "edges: expected 10, got 9 (-1)".
  std::vector<std::string> mismatches;
};

/// Compares only the fields present in `expected`.
StatsDiff validate_stats(const DatasetStats& actual, const DatasetStats& expected);

/// Stats record as a JSON object string.
std::string stats_to_json(const DatasetStats& stats);

// Canonical serialization ----------------------------------------------------

/// Writes entities.tsv and relations.tsv (id<TAB>name), the three splits as
/// name triples, and for labeled bundles classes.tsv plus
/// labels_train.tsv / labels_test.tsv (entity<TAB>class).
void write_canonical_tsv(const DatasetBundle& bundle, const std::filesystem::path& dir);

/// Reads a directory written by write_canonical_tsv; ids are preserved.
DatasetBundle load_canonical_tsv(const std::filesystem::path& dir);

}  // namespace rgcn
