#include "rgcn/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rgcn/adam.hpp"
#include "rgcn/error.hpp"
#include "rgcn/random.hpp"

namespace rgcn {

void LabelSet::validate() const {
  if (num_classes < 2) {
    throw DataError("labels: need at least two classes, got " + std::to_string(num_classes));
  }
  if (nodes.size() != classes.size()) {
    throw DataError("labels: " + std::to_string(nodes.size()) + " nodes but " +
                    std::to_string(classes.size()) + " classes");
  }
  for (std::size_t k = 0; k < classes.size(); ++k) {
    if (classes[k] < 0 || classes[k] >= num_classes) {
      throw DataError("labels: node " + std::to_string(nodes[k]) + " has class " +
                      std::to_string(classes[k]) + ", expected < " +
                      std::to_string(num_classes));
    }
  }
}

std::pair<LabelSet, LabelSet> split_validation(const LabelSet& labels, double fraction,
                                               std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0) {
    throw UsageError("split_validation: fraction must lie in [0, 1)");
  }
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed, 0x76616c);
  for (std::size_t k = order.size(); k > 1; --k) {
    std::swap(order[k - 1], order[rng.index(k)]);
  }
  const auto held = static_cast<std::size_t>(std::lround(fraction * labels.size()));
  LabelSet train{{}, {}, labels.num_classes};
  LabelSet valid{{}, {}, labels.num_classes};
  for (std::size_t k = 0; k < order.size(); ++k) {
    auto& dst = k < held ? valid : train;
    dst.nodes.push_back(labels.nodes[order[k]]);
    dst.classes.push_back(labels.classes[order[k]]);
  }
  return {std::move(train), std::move(valid)};
}

ClassifierConfig classifier_preset(const std::string& name) {
  ClassifierConfig c;
  if (name == "aifb") {
    c.l2_first_layer = 0.0;
    c.basis_count = 0;
  } else if (name == "mutag") {
    c.l2_first_layer = 5e-4;
    c.basis_count = 30;
  } else if (name == "bgs") {
    c.l2_first_layer = 5e-4;
    c.basis_count = 40;
  } else if (name == "am") {
    c.l2_first_layer = 5e-4;
    c.basis_count = 40;
    c.hidden_dim = 10;
  } else {
    throw UsageError("unknown classification preset '" + name +
                     "' (accepted: aifb, mutag, bgs, am)");
  }
  return c;
}

void ClassifierConfig::validate() const {
  if (num_layers < 1) throw UsageError("classifier: num_layers must be >= 1");
  if (hidden_dim < 1) throw UsageError("classifier: hidden_dim must be >= 1");
  if (epochs < 0) throw UsageError("classifier: epochs must be >= 0");
  if (learning_rate < 0.0) throw UsageError("classifier: learning_rate must be >= 0");
  if (l2_first_layer < 0.0) throw UsageError("classifier: l2_first_layer must be >= 0");
  if (basis_count < 0) throw UsageError("classifier: basis_count must be >= 0");
}

template <typename S>
ClassifierModel<S> ClassifierModel<S>::create(const KnowledgeGraph& graph,
                                              std::int32_t num_classes,
                                              const ClassifierConfig& config) {
  config.validate();
  std::vector<LayerSpec> specs;
  std::int64_t width = graph.num_nodes();
  for (std::int32_t l = 0; l < config.num_layers; ++l) {
    const bool last = l + 1 == config.num_layers;
    LayerSpec spec;
    spec.in_dim = width;
    spec.out_dim = last ? num_classes : config.hidden_dim;
    spec.decomposition = config.basis_count > 0 ? Decomposition::basis : Decomposition::full;
    spec.num_components = config.basis_count;
    spec.activation = last ? Activation::softmax : Activation::relu;
    specs.push_back(spec);
    width = spec.out_dim;
  }
  ClassifierModel model;
  model.encoder = Encoder<S>::create(graph.num_nodes(), graph.num_relations(),
                                     InputMode::one_hot(), std::move(specs), config.seed);
  model.num_classes = num_classes;
  model.normalization = config.normalization;
  return model;
}

template <typename S>
Tensor<S> classification_loss(Tape<S>& tape, const Tensor<S>& probs, const LabelSet& labels) {
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels.classes[k] < 0 || labels.classes[k] >= probs.cols()) {
      throw DataError("classification_loss: label " + std::to_string(labels.classes[k]) +
                      " of node " + std::to_string(labels.nodes[k]) + " not below " +
                      std::to_string(probs.cols()));
    }
  }
  return ad::negative_log_likelihood(tape, probs, labels.nodes, labels.classes);
}

std::int32_t argmax_lowest(const double* row, std::int64_t size) {
  std::int32_t best = 0;
  for (std::int64_t k = 1; k < size; ++k) {
    if (row[k] > row[best]) best = static_cast<std::int32_t>(k);
  }
  return best;
}

namespace {

template <typename S>
double labeled_accuracy(const Matrix<S>& probs, const LabelSet& labels) {
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  std::vector<double> row(static_cast<std::size_t>(probs.cols()));
  for (std::size_t k = 0; k < labels.size(); ++k) {
    for (std::int64_t c = 0; c < probs.cols(); ++c) row[c] = probs(labels.nodes[k], c);
    if (argmax_lowest(row.data(), probs.cols()) == labels.classes[k]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace

template <typename S>
ClassifierRun<S> train_classifier(const KnowledgeGraph& graph, const LabelSet& train,
                                  const ClassifierConfig& config, const LabelSet* validation) {
  if (train.empty()) throw DataError("train_classifier: no training labels");
  train.validate();
  ClassifierRun<S> run{ClassifierModel<S>::create(graph, train.num_classes, config), {}};
  const Normalization norm(graph, config.normalization);
  Adam<S> adam(run.model.encoder.parameters(), AdamOptions{config.learning_rate});
  const auto penalized = run.model.encoder.layers().front().weight_matrices();

  for (std::int32_t epoch = 1; epoch <= config.epochs; ++epoch) {
    adam.zero_grad();
    Tape<S> tape;
    auto probs = run.model.encoder.encode(tape, graph, norm, true,
                                          static_cast<std::uint64_t>(epoch));
    auto loss = classification_loss(tape, probs, train);
    if (config.l2_first_layer > 0.0) {
      for (const auto& w : penalized) {
        loss = ad::add(tape, loss,
                       ad::scale(tape, ad::l2_norm_sq(tape, w),
                                 static_cast<S>(config.l2_first_layer)));
      }
    }
    tape.backward(loss);

    ClassifierEpoch entry;
    entry.epoch = epoch;
    entry.loss = static_cast<double>(loss.item());
    entry.train_accuracy = labeled_accuracy(probs.value(), train);
    if (validation && !validation->empty()) {
      entry.validation_accuracy = labeled_accuracy(probs.value(), *validation);
    }
    run.trace.push_back(entry);
    adam.step();
  }
  return run;
}

template <typename S>
ClassPredictions predict_classes(const ClassifierModel<S>& model, const KnowledgeGraph& graph) {
  const Normalization norm(graph, model.normalization);
  Tape<S> tape(false);
  const auto probs = model.encoder.encode(tape, graph, norm, false);
  ClassPredictions out;
  out.probabilities = probs.value().template cast<double>();
  out.predicted.resize(static_cast<std::size_t>(probs.rows()));
  for (std::int64_t i = 0; i < probs.rows(); ++i) {
    out.predicted[i] = argmax_lowest(out.probabilities.row(i).data(), probs.cols());
  }
  return out;
}

double accuracy(const ClassPredictions& predictions, const LabelSet& labels) {
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (predictions.predicted.at(labels.nodes[k]) == labels.classes[k]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

template <typename S>
SelectionOutcome select_classifier_hyperparameters(
    const KnowledgeGraph& graph, const LabelSet& train, const ClassifierConfig& base,
    const std::vector<double>& l2_grid, const std::vector<std::int64_t>& basis_grid,
    double validation_fraction) {
  const auto [fit, held] = split_validation(train, validation_fraction, base.seed);
  if (held.empty()) throw DataError("hyperparameter selection: validation split is empty");
  SelectionOutcome outcome;
  outcome.chosen = base;
  double best = -1.0;
  for (double l2 : l2_grid) {
    for (std::int64_t bases : basis_grid) {
      ClassifierConfig cfg = base;
      cfg.l2_first_layer = l2;
      cfg.basis_count = bases;
      const auto run = train_classifier<S>(graph, fit, cfg);
      const double acc = accuracy(predict_classes(run.model, graph), held);
      outcome.table.push_back({l2, bases, acc});
      if (acc > best) {
        best = acc;
        outcome.chosen = cfg;
      }
    }
  }
  return outcome;
}

#define RGCN_INSTANTIATE_CLASSIFY(S)                                                      \
  template struct ClassifierModel<S>;                                                     \
  template Tensor<S> classification_loss(Tape<S>&, const Tensor<S>&, const LabelSet&);    \
  template ClassifierRun<S> train_classifier(const KnowledgeGraph&, const LabelSet&,      \
                                             const ClassifierConfig&, const LabelSet*);   \
  template ClassPredictions predict_classes(const ClassifierModel<S>&,                    \
                                            const KnowledgeGraph&);                       \
  template SelectionOutcome select_classifier_hyperparameters<S>(                         \
      const KnowledgeGraph&, const LabelSet&, const ClassifierConfig&,                    \
      const std::vector<double>&, const std::vector<std::int64_t>&, double);

RGCN_INSTANTIATE_CLASSIFY(float)
RGCN_INSTANTIATE_CLASSIFY(double)

}  // namespace rgcn
