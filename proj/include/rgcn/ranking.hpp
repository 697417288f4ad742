#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rgcn/autodiff.hpp"
#include "rgcn/graph.hpp"

namespace rgcn {

/// Which end of a triple is replaced by candidates.
enum class Side { subject, object };

std::string to_string(Side side);

/// Known-true triples (usually train + valid + test) indexed for filtered
/// ranking.
class FilterSet {
 public:
  FilterSet() = default;
  explicit FilterSet(std::span<const Triple> triples) { add(triples); }

  void add(std::span<const Triple> triples);
  bool contains(const Triple& t) const;
  std::size_t size() const { return size_; }

  /// Known objects o with (s, r, o) true, ascending and unique.
  std::span<const NodeId> objects(NodeId s, RelId r) const;
  /// Known subjects s with (s, r, o) true, ascending and unique.
  std::span<const NodeId> subjects(RelId r, NodeId o) const;

 private:
  static std::uint64_t key(std::int32_t a, std::int32_t b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
  }
  std::unordered_map<std::uint64_t, std::vector<NodeId>> by_subject_;
  std::unordered_map<std::uint64_t, std::vector<NodeId>> by_object_;
  std::size_t size_ = 0;
};

/// Scores every candidate replacement of one side of a triple.
class CandidateScorer {
 public:
  virtual ~CandidateScorer() = default;
  virtual std::int32_t num_entities() const = 0;
  virtual std::int32_t num_relations() const = 0;
  /// out[c] = f(c, r, o) for side subject, f(s, r, c) for side object.
  virtual void score_candidates(const Triple& t, Side side, std::vector<double>& out) const = 0;
  double score(const Triple& t) const;
};

/// DistMult over fixed entity embeddings and relation diagonals.
template <typename Scalar>
class DistMultScorer : public CandidateScorer {
 public:
  DistMultScorer(Matrix<Scalar> entities, Matrix<Scalar> diagonals);

  std::int32_t num_entities() const override {
    return static_cast<std::int32_t>(entities_.rows());
  }
  std::int32_t num_relations() const override {
    return static_cast<std::int32_t>(diagonals_.rows());
  }
  void score_candidates(const Triple& t, Side side, std::vector<double>& out) const override;

  const Matrix<Scalar>& entities() const { return entities_; }
  const Matrix<Scalar>& diagonals() const { return diagonals_; }

 private:
  Matrix<Scalar> entities_;
  Matrix<Scalar> diagonals_;
};

/// alpha * first + (1 - alpha) * second.
class EnsembleScorer : public CandidateScorer {
 public:
  EnsembleScorer(const CandidateScorer& first, const CandidateScorer& second, double alpha);

  std::int32_t num_entities() const override { return first_.num_entities(); }
  std::int32_t num_relations() const override { return first_.num_relations(); }
  void score_candidates(const Triple& t, Side side, std::vector<double>& out) const override;

 private:
  const CandidateScorer& first_;
  const CandidateScorer& second_;
  double alpha_;
};

/// Arbitrary score function; used for hand-assigned scores.
class FunctionScorer : public CandidateScorer {
 public:
  FunctionScorer(std::int32_t num_entities, std::int32_t num_relations,
                 std::function<double(const Triple&)> fn)
      : num_entities_(num_entities), num_relations_(num_relations), fn_(std::move(fn)) {}

  std::int32_t num_entities() const override { return num_entities_; }
  std::int32_t num_relations() const override { return num_relations_; }
  void score_candidates(const Triple& t, Side side, std::vector<double>& out) const override;

 private:
  std::int32_t num_entities_;
  std::int32_t num_relations_;
  std::function<double(const Triple&)> fn_;
};

struct RankPair {
  std::int64_t raw = 0;
  std::int64_t filtered = 0;
};

/// Rank of scores[truth] among all candidates: 1 + #greater + ceil(#equal / 2),
/// where #equal excludes the truth itself. Candidates listed in `excluded`
/// (other than the truth) are left out of the filtered count.
RankPair rank_from_scores(std::span<const double> scores, NodeId truth,
                          std::span<const NodeId> excluded);

/// Raw and filtered rank of one triple under one corruption side. With no
/// filter, filtered equals raw.
RankPair rank_triple(const CandidateScorer& scorer, const Triple& t, Side side,
                     const FilterSet* filter);

struct RankingEntry {
  Triple triple;
  Side side = Side::object;
  double score = 0.0;
  std::int64_t raw_rank = 0;
  std::int64_t filtered_rank = 0;
};

struct RankingReport {
  std::vector<RankingEntry> entries;
};

/// Ranks both sides of every triple. Entries come out in (triple, subject,
/// object) order regardless of `threads`.
RankingReport rank_triples(const CandidateScorer& scorer, std::span<const Triple> triples,
                           const FilterSet* filter, unsigned threads = 1);

struct RankingMetrics {
  std::size_t queries = 0;
  double mrr_raw = 0.0;
  double mrr_filtered = 0.0;
  double hits1 = 0.0;  // filtered
  double hits3 = 0.0;
  double hits10 = 0.0;
  double hits1_raw = 0.0;
  double hits3_raw = 0.0;
  double hits10_raw = 0.0;
};

/// Throws UsageError on an empty report.
RankingMetrics aggregate(const RankingReport& report);

struct DegreeBucket {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  std::size_t count = 0;      // ranking queries in the bucket
  double mrr_filtered = 0.0;  // 0 when empty
  double mrr_raw = 0.0;
  double center = 0.0;        // mean degree of members; NaN when empty
};

/// Splits the report by degree_of_triple at the given interior boundaries:
/// k boundaries give k + 1 buckets [b_{j-1}, b_j) with open outer ends.
/// Throws UsageError unless boundaries strictly increase.
std::vector<DegreeBucket> degree_bucket_mrr(const RankingReport& report,
                                            const KnowledgeGraph& graph,
                                            std::span<const double> boundaries);

/// One JSON object per ranking entry. Names are used when provided.
void write_ranking_jsonl(std::ostream& out, const RankingReport& report,
                         const std::vector<std::string>* entity_names = nullptr,
                         const std::vector<std::string>* relation_names = nullptr);

/// Fixed-width table with MRR (raw, filtered) and filtered Hits@1/3/10.
std::string format_metrics_table(
    const std::vector<std::pair<std::string, RankingMetrics>>& rows);

/// Whitespace-separated columns: center mrr_filtered mrr_raw count lo hi.
std::string format_degree_table(const std::vector<DegreeBucket>& buckets);

}  // namespace rgcn
