#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rgcn/autodiff.hpp"
#include "rgcn/encoder.hpp"
#include "rgcn/graph.hpp"
#include "rgcn/random.hpp"
#include "rgcn/ranking.hpp"

namespace rgcn {

struct LinkPredConfig {
  std::int32_t num_layers = 1;  // 0 gives the plain DistMult model
  std::int64_t embedding_dim = 200;
  Decomposition decomposition = Decomposition::basis;
  std::int64_t num_components = 2;
  /// Feed a learned |V| x embedding_dim table into the first layer instead
  /// of one-hot vectors. Forced on for zero layers.
  bool projection_input = false;
  double self_loop_dropout = 0.2;
  double edge_dropout = 0.4;
  double decoder_l2 = 0.01;
  double embedding_l2 = 0.0;  // on the projection table, if any
  double learning_rate = 0.01;
  std::int32_t epochs = 500;
  std::int32_t omega = 1;
  NormalizationMode normalization = NormalizationMode::across_relations;
  std::int32_t eval_every = 10;      // 0 disables validation
  std::size_t validation_limit = 0;  // 0 uses every validation triple
  std::uint64_t seed = 0;

  void validate() const;
  /// Layer stack: ReLU between layers, identity on the last one.
  std::vector<LayerSpec> layer_specs(std::int32_t num_nodes) const;
  InputMode input_mode() const;
};

/// Named settings: "fb15k", "wn18", "fb15k-237", "distmult". Throws
/// UsageError for anything else.
LinkPredConfig linkpred_preset(const std::string& name);

template <typename Scalar>
struct LinkPredModel {
  Encoder<Scalar> encoder;
  Tensor<Scalar> diagonals;  // one row per canonical relation
  NormalizationMode normalization = NormalizationMode::across_relations;

  static LinkPredModel create(const KnowledgeGraph& graph, const LinkPredConfig& config);

  std::vector<Tensor<Scalar>> parameters() const;
  std::int64_t parameter_count() const;
  /// Encoder output with dropout off.
  Matrix<Scalar> embeddings(const KnowledgeGraph& graph) const;
  DistMultScorer<Scalar> scorer(const KnowledgeGraph& graph) const;
};

/// sum_k e_s[k] * diag[k] * e_o[k]. Throws ShapeError on unequal lengths.
template <typename Scalar>
Scalar distmult_score(std::span<const Scalar> e_s, std::span<const Scalar> diag,
                      std::span<const Scalar> e_o);

/// omega corruptions of `positive`: a fair coin picks the side, then a
/// uniform entity replaces it. True triples are not filtered out.
std::vector<Triple> sample_negatives(const Triple& positive, std::int32_t num_nodes,
                                     std::int32_t omega, Rng& rng);
/// Concatenation of sample_negatives over `positives`, in order.
std::vector<Triple> sample_negatives(std::span<const Triple> positives, std::int32_t num_nodes,
                                     std::int32_t omega, Rng& rng);

/// Mean binary cross-entropy over positives (label 1) and negatives
/// (label 0) plus decoder_l2 * sum ||diag_r||^2.
template <typename Scalar>
Tensor<Scalar> linkpred_loss(Tape<Scalar>& tape, const Tensor<Scalar>& embeddings,
                             const Tensor<Scalar>& diagonals, std::span<const Triple> positives,
                             std::span<const Triple> negatives, double decoder_l2);

struct LinkPredEpoch {
  std::int32_t epoch = 0;
  double loss = 0.0;
  std::optional<double> validation_mrr;  // filtered
};

template <typename Scalar>
struct LinkPredRun {
  LinkPredModel<Scalar> model;  // best validation snapshot, else final
  std::vector<LinkPredEpoch> trace;
  std::int32_t best_epoch = 0;
  std::optional<double> best_validation_mrr;
};

/// Full-batch training on graph.triples(). Every epoch resamples the edge
/// mask and the negatives, then takes one Adam step. When validation triples
/// are given, filtered MRR is measured every eval_every epochs (and after
/// the last one) and the best snapshot is kept.
template <typename Scalar>
LinkPredRun<Scalar> train_linkpred(const KnowledgeGraph& graph, const LinkPredConfig& config,
                                   std::span<const Triple> validation = {},
                                   const FilterSet* filter = nullptr);

/// alpha * first + (1 - alpha) * second.
double ensemble_score(double first, double second, double alpha);
/// Combined score of one triple under two models over the same vocabulary.
/// Throws DataError when the vocabularies differ.
double ensemble_score(const Triple& t, const CandidateScorer& rgcn,
                      const CandidateScorer& distmult, double alpha);

}  // namespace rgcn
