#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rgcn/autodiff.hpp"
#include "rgcn/encoder.hpp"
#include "rgcn/graph.hpp"

namespace rgcn {

/// Labeled nodes with one class each.
struct LabelSet {
  std::vector<NodeId> nodes;
  std::vector<std::int32_t> classes;
  std::int32_t num_classes = 0;

  std::size_t size() const { return nodes.size(); }
  bool empty() const { return nodes.empty(); }
  /// Throws DataError for K < 2, ragged vectors, or out-of-range classes.
  void validate() const;
};

/// Deterministic split of `labels` into (train, validation) with
/// round(fraction * |labels|) nodes held out.
std::pair<LabelSet, LabelSet> split_validation(const LabelSet& labels, double fraction,
                                               std::uint64_t seed);

struct ClassifierConfig {
  std::int64_t hidden_dim = 16;
  std::int32_t num_layers = 2;
  std::int32_t epochs = 50;
  double learning_rate = 0.01;
  double l2_first_layer = 0.0;
  std::int64_t basis_count = 0;  // 0 = full weights
  NormalizationMode normalization = NormalizationMode::per_relation;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Settings for "aifb", "mutag", "bgs" and "am": 2 layers, 50 epochs, lr
/// 0.01, c_{i,r} = |N_i^r|, with per-dataset l2, basis count and width.
/// Throws UsageError for other names.
ClassifierConfig classifier_preset(const std::string& name);

template <typename Scalar>
struct ClassifierModel {
  Encoder<Scalar> encoder;  // last layer: softmax over classes
  std::int32_t num_classes = 0;
  NormalizationMode normalization = NormalizationMode::per_relation;

  /// One-hot input, (num_layers - 1) ReLU layers of hidden_dim, then a
  /// softmax layer with K outputs.
  static ClassifierModel create(const KnowledgeGraph& graph, std::int32_t num_classes,
                                const ClassifierConfig& config);
};

/// -sum_{i in Y} ln probs(i, class_i). Unlabeled rows contribute nothing.
template <typename Scalar>
Tensor<Scalar> classification_loss(Tape<Scalar>& tape, const Tensor<Scalar>& probs,
                                   const LabelSet& labels);

struct ClassifierEpoch {
  std::int32_t epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> validation_accuracy;
};

template <typename Scalar>
struct ClassifierRun {
  ClassifierModel<Scalar> model;
  std::vector<ClassifierEpoch> trace;
};

/// Full-batch Adam on the classification loss plus
/// l2_first_layer * ||first-layer weights||^2. Returns the final-epoch model.
template <typename Scalar>
ClassifierRun<Scalar> train_classifier(const KnowledgeGraph& graph, const LabelSet& train,
                                       const ClassifierConfig& config,
                                       const LabelSet* validation = nullptr);

struct ClassPredictions {
  std::vector<std::int32_t> predicted;        // per node
  Matrix<double> probabilities;               // |V| x K
};

/// Argmax per node, ties to the lowest class index. Dropout never applies.
template <typename Scalar>
ClassPredictions predict_classes(const ClassifierModel<Scalar>& model,
                                 const KnowledgeGraph& graph);

/// Index of the largest entry; first one wins ties.
std::int32_t argmax_lowest(const double* row, std::int64_t size);

double accuracy(const ClassPredictions& predictions, const LabelSet& labels);

struct SelectionOutcome {
  ClassifierConfig chosen;
  struct Row {
    double l2_first_layer;
    std::int64_t basis_count;
    double validation_accuracy;
  };
  std::vector<Row> table;
};

/// Grid search over (l2, basis count) on a held-out validation split of the
/// training labels; ties keep the earlier grid entry.
template <typename Scalar>
SelectionOutcome select_classifier_hyperparameters(
    const KnowledgeGraph& graph, const LabelSet& train, const ClassifierConfig& base,
    const std::vector<double>& l2_grid, const std::vector<std::int64_t>& basis_grid,
    double validation_fraction = 0.2);

}  // namespace rgcn
