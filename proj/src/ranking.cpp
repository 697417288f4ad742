#include "rgcn/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "rgcn/error.hpp"

namespace rgcn {

std::string to_string(Side side) { return side == Side::subject ? "subject" : "object"; }

void FilterSet::add(std::span<const Triple> triples) {
  for (const auto& t : triples) {
    auto& objs = by_subject_[key(t.subject, t.relation)];
    auto pos = std::lower_bound(objs.begin(), objs.end(), t.object);
    if (pos != objs.end() && *pos == t.object) continue;
    objs.insert(pos, t.object);
    auto& subs = by_object_[key(t.relation, t.object)];
    subs.insert(std::lower_bound(subs.begin(), subs.end(), t.subject), t.subject);
    ++size_;
  }
}

bool FilterSet::contains(const Triple& t) const {
  const auto objs = objects(t.subject, t.relation);
  return std::binary_search(objs.begin(), objs.end(), t.object);
}

std::span<const NodeId> FilterSet::objects(NodeId s, RelId r) const {
  auto it = by_subject_.find(key(s, r));
  if (it == by_subject_.end()) return {};
  return it->second;
}

std::span<const NodeId> FilterSet::subjects(RelId r, NodeId o) const {
  auto it = by_object_.find(key(r, o));
  if (it == by_object_.end()) return {};
  return it->second;
}

double CandidateScorer::score(const Triple& t) const {
  std::vector<double> all;
  score_candidates(t, Side::object, all);
  return all.at(static_cast<std::size_t>(t.object));
}

namespace {

void check_triple(const CandidateScorer& scorer, const Triple& t) {
  if (t.subject < 0 || t.subject >= scorer.num_entities() || t.object < 0 ||
      t.object >= scorer.num_entities()) {
    throw DataError("ranking: triple (" + std::to_string(t.subject) + ", " +
                    std::to_string(t.relation) + ", " + std::to_string(t.object) +
                    ") names an entity outside the model's " +
                    std::to_string(scorer.num_entities()));
  }
  if (t.relation < 0 || t.relation >= scorer.num_relations()) {
    throw DataError("ranking: relation " + std::to_string(t.relation) +
                    " outside the model's " + std::to_string(scorer.num_relations()));
  }
}

}  // namespace

template <typename S>
DistMultScorer<S>::DistMultScorer(Matrix<S> entities, Matrix<S> diagonals)
    : entities_(std::move(entities)), diagonals_(std::move(diagonals)) {
  if (entities_.cols() != diagonals_.cols()) {
    throw ShapeError("DistMultScorer: entity width " + std::to_string(entities_.cols()) +
                     " vs relation width " + std::to_string(diagonals_.cols()));
  }
}

template <typename S>
void DistMultScorer<S>::score_candidates(const Triple& t, Side side,
                                         std::vector<double>& out) const {
  check_triple(*this, t);
  const NodeId fixed = side == Side::object ? t.subject : t.object;
  const Eigen::Matrix<S, Eigen::Dynamic, 1> query =
      entities_.row(fixed).cwiseProduct(diagonals_.row(t.relation)).transpose();
  const Eigen::Matrix<S, Eigen::Dynamic, 1> scores = entities_ * query;
  out.resize(static_cast<std::size_t>(scores.size()));
  for (std::int64_t c = 0; c < scores.size(); ++c) out[c] = static_cast<double>(scores[c]);
}

template class DistMultScorer<float>;
template class DistMultScorer<double>;

EnsembleScorer::EnsembleScorer(const CandidateScorer& first, const CandidateScorer& second,
                               double alpha)
    : first_(first), second_(second), alpha_(alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("ensemble: alpha must lie in [0, 1]");
  if (first.num_entities() != second.num_entities() ||
      first.num_relations() != second.num_relations()) {
    throw DataError("ensemble: vocabulary mismatch (" + std::to_string(first.num_entities()) +
                    "/" + std::to_string(first.num_relations()) + " vs " +
                    std::to_string(second.num_entities()) + "/" +
                    std::to_string(second.num_relations()) + " entities/relations)");
  }
}

void EnsembleScorer::score_candidates(const Triple& t, Side side,
                                      std::vector<double>& out) const {
  std::vector<double> other;
  first_.score_candidates(t, side, out);
  second_.score_candidates(t, side, other);
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c] = alpha_ * out[c] + (1.0 - alpha_) * other[c];
  }
}

void FunctionScorer::score_candidates(const Triple& t, Side side,
                                      std::vector<double>& out) const {
  check_triple(*this, t);
  out.resize(static_cast<std::size_t>(num_entities_));
  Triple q = t;
  for (NodeId c = 0; c < num_entities_; ++c) {
    (side == Side::subject ? q.subject : q.object) = c;
    out[c] = fn_(q);
  }
}

RankPair rank_from_scores(std::span<const double> scores, NodeId truth,
                          std::span<const NodeId> excluded) {
  if (truth < 0 || static_cast<std::size_t>(truth) >= scores.size()) {
    throw UsageError("rank_from_scores: truth index out of range");
  }
  const double target = scores[truth];
  if (std::isnan(target)) throw NumericalError("ranking: score of the true triple is NaN");
  std::int64_t greater = 0;
  std::int64_t equal = 0;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    if (static_cast<NodeId>(c) == truth) continue;
    if (scores[c] > target) ++greater;
    else if (scores[c] == target) ++equal;
  }
  RankPair pair;
  pair.raw = 1 + greater + (equal + 1) / 2;
  for (NodeId c : excluded) {
    if (c == truth) continue;
    if (scores[c] > target) --greater;
    else if (scores[c] == target) --equal;
  }
  pair.filtered = 1 + greater + (equal + 1) / 2;
  return pair;
}

RankPair rank_triple(const CandidateScorer& scorer, const Triple& t, Side side,
                     const FilterSet* filter) {
  std::vector<double> scores;
  scorer.score_candidates(t, side, scores);
  std::span<const NodeId> excluded;
  if (filter) {
    excluded = side == Side::object ? filter->objects(t.subject, t.relation)
                                    : filter->subjects(t.relation, t.object);
  }
  return rank_from_scores(scores, side == Side::object ? t.object : t.subject, excluded);
}

RankingReport rank_triples(const CandidateScorer& scorer, std::span<const Triple> triples,
                           const FilterSet* filter, unsigned threads) {
  RankingReport report;
  report.entries.resize(2 * triples.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<double> scores;
    for (std::size_t k = begin; k < end; ++k) {
      for (int s = 0; s < 2; ++s) {
        const Side side = s == 0 ? Side::subject : Side::object;
        const auto& t = triples[k];
        scorer.score_candidates(t, side, scores);
        std::span<const NodeId> excluded;
        if (filter) {
          excluded = side == Side::object ? filter->objects(t.subject, t.relation)
                                          : filter->subjects(t.relation, t.object);
        }
        const NodeId truth = side == Side::object ? t.object : t.subject;
        const auto pair = rank_from_scores(scores, truth, excluded);
        report.entries[2 * k + s] = {t, side, scores[truth], pair.raw, pair.filtered};
      }
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(triples.size())));
  if (threads <= 1) {
    work(0, triples.size());
    return report;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> failures(threads);
  const std::size_t chunk = (triples.size() + threads - 1) / threads;
  for (unsigned w = 0; w < threads; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(triples.size(), begin + chunk);
    pool.emplace_back([&, w, begin, end] {
      try {
        work(begin, end);
      } catch (...) {
        failures[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return report;
}

RankingMetrics aggregate(const RankingReport& report) {
  if (report.entries.empty()) throw UsageError("aggregate: empty ranking report");
  RankingMetrics m;
  m.queries = report.entries.size();
  for (const auto& e : report.entries) {
    m.mrr_raw += 1.0 / static_cast<double>(e.raw_rank);
    m.mrr_filtered += 1.0 / static_cast<double>(e.filtered_rank);
    m.hits1 += e.filtered_rank <= 1;
    m.hits3 += e.filtered_rank <= 3;
    m.hits10 += e.filtered_rank <= 10;
    m.hits1_raw += e.raw_rank <= 1;
    m.hits3_raw += e.raw_rank <= 3;
    m.hits10_raw += e.raw_rank <= 10;
  }
  const double n = static_cast<double>(m.queries);
  for (double* v : {&m.mrr_raw, &m.mrr_filtered, &m.hits1, &m.hits3, &m.hits10, &m.hits1_raw,
                    &m.hits3_raw, &m.hits10_raw}) {
    *v /= n;
  }
  return m;
}

std::vector<DegreeBucket> degree_bucket_mrr(const RankingReport& report,
                                            const KnowledgeGraph& graph,
                                            std::span<const double> boundaries) {
  for (std::size_t k = 1; k < boundaries.size(); ++k) {
    if (!(boundaries[k] > boundaries[k - 1])) {
      throw UsageError("degree buckets: boundaries must strictly increase");
    }
  }
  std::vector<DegreeBucket> buckets(boundaries.size() + 1);
  for (std::size_t k = 0; k < buckets.size(); ++k) {
    if (k > 0) buckets[k].lo = boundaries[k - 1];
    if (k < boundaries.size()) buckets[k].hi = boundaries[k];
  }
  std::vector<double> degree_sum(buckets.size(), 0.0);
  for (const auto& e : report.entries) {
    const double d = degree_of_triple(graph, e.triple);
    const auto k = static_cast<std::size_t>(
        std::upper_bound(boundaries.begin(), boundaries.end(), d) - boundaries.begin());
    auto& b = buckets[k];
    ++b.count;
    b.mrr_filtered += 1.0 / static_cast<double>(e.filtered_rank);
    b.mrr_raw += 1.0 / static_cast<double>(e.raw_rank);
    degree_sum[k] += d;
  }
  for (std::size_t k = 0; k < buckets.size(); ++k) {
    auto& b = buckets[k];
    if (b.count == 0) {
      b.center = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double n = static_cast<double>(b.count);
    b.mrr_filtered /= n;
    b.mrr_raw /= n;
    b.center = degree_sum[k] / n;
  }
  return buckets;
}

void write_ranking_jsonl(std::ostream& out, const RankingReport& report,
                         const std::vector<std::string>* entity_names,
                         const std::vector<std::string>* relation_names) {
  for (const auto& e : report.entries) {
    nlohmann::json row;
    if (entity_names) {
      row["subject"] = entity_names->at(e.triple.subject);
      row["object"] = entity_names->at(e.triple.object);
    } else {
      row["subject"] = e.triple.subject;
      row["object"] = e.triple.object;
    }
    if (relation_names) {
      row["relation"] = relation_names->at(e.triple.relation);
    } else {
      row["relation"] = e.triple.relation;
    }
    row["side"] = to_string(e.side);
    row["score"] = e.score;
    row["raw_rank"] = e.raw_rank;
    row["filtered_rank"] = e.filtered_rank;
    out << row.dump() << '\n';
  }
}

std::string format_metrics_table(
    const std::vector<std::pair<std::string, RankingMetrics>>& rows) {
  std::size_t width = 5;
  for (const auto& [name, m] : rows) width = std::max(width, name.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(width)) << "Model" << std::right
      << std::setw(10) << "MRR Raw" << std::setw(10) << "MRR Filt" << std::setw(10)
      << "Hits@1" << std::setw(10) << "Hits@3" << std::setw(10) << "Hits@10" << '\n';
  out << std::fixed << std::setprecision(3);
  for (const auto& [name, m] : rows) {
    out << std::left << std::setw(static_cast<int>(width)) << name << std::right
        << std::setw(10) << m.mrr_raw << std::setw(10) << m.mrr_filtered << std::setw(10)
        << m.hits1 << std::setw(10) << m.hits3 << std::setw(10) << m.hits10 << '\n';
  }
  return out.str();
}

std::string format_degree_table(const std::vector<DegreeBucket>& buckets) {
  std::ostringstream out;
  out << "center mrr_filtered mrr_raw count lo hi\n";
  out << std::setprecision(6);
  for (const auto& b : buckets) {
    out << b.center << ' ' << b.mrr_filtered << ' ' << b.mrr_raw << ' ' << b.count << ' '
        << b.lo << ' ' << b.hi << '\n';
  }
  return out.str();
}

}  // namespace rgcn
