#include "rgcn/linkpred.hpp"

#include <cmath>

#include "rgcn/adam.hpp"
#include "rgcn/error.hpp"

namespace rgcn {

void LinkPredConfig::validate() const {
  if (num_layers < 0) throw UsageError("linkpred: num_layers must be >= 0");
  if (embedding_dim < 1) throw UsageError("linkpred: embedding_dim must be >= 1");
  if (omega < 1) throw UsageError("linkpred: omega must be >= 1");
  if (epochs < 0) throw UsageError("linkpred: epochs must be >= 0");
  if (learning_rate < 0.0) throw UsageError("linkpred: learning_rate must be >= 0");
  if (decoder_l2 < 0.0 || embedding_l2 < 0.0) {
    throw UsageError("linkpred: l2 penalties must be >= 0");
  }
  if (eval_every < 0) throw UsageError("linkpred: eval_every must be >= 0");
  DropoutPolicy{self_loop_dropout, edge_dropout}.validate();
  for (const auto& spec : layer_specs(embedding_dim)) spec.validate();
}

InputMode LinkPredConfig::input_mode() const {
  if (num_layers == 0 || projection_input) return InputMode::projection(embedding_dim);
  return InputMode::one_hot();
}

std::vector<LayerSpec> LinkPredConfig::layer_specs(std::int32_t num_nodes) const {
  std::vector<LayerSpec> specs;
  std::int64_t width = input_mode().kind == InputMode::Kind::projection ? embedding_dim
                                                                          : num_nodes;
  for (std::int32_t l = 0; l < num_layers; ++l) {
    LayerSpec spec;
    spec.in_dim = width;
    spec.out_dim = embedding_dim;
    spec.decomposition = decomposition;
    spec.num_components = num_components;
    spec.activation = l + 1 == num_layers ? Activation::identity : Activation::relu;
    specs.push_back(spec);
    width = embedding_dim;
  }
  return specs;
}

LinkPredConfig linkpred_preset(const std::string& name) {
  LinkPredConfig c;
  if (name == "fb15k" || name == "wn18") {
    c.num_layers = 1;
    c.embedding_dim = 200;
    c.decomposition = Decomposition::basis;
    c.num_components = 2;
  } else if (name == "fb15k-237") {
    c.num_layers = 2;
    c.embedding_dim = 500;
    c.decomposition = Decomposition::block;
    c.num_components = 100;
    c.projection_input = true;
  } else if (name == "distmult") {
    c.num_layers = 0;
    c.embedding_dim = 200;
    c.projection_input = true;
  } else {
    throw UsageError("unknown link-prediction preset '" + name +
                     "' (accepted: fb15k, wn18, fb15k-237, distmult)");
  }
  return c;
}

template <typename S>
LinkPredModel<S> LinkPredModel<S>::create(const KnowledgeGraph& graph,
                                          const LinkPredConfig& config) {
  config.validate();
  LinkPredModel model;
  model.encoder = Encoder<S>::create(graph.num_nodes(), graph.num_relations(),
                                     config.input_mode(), config.layer_specs(graph.num_nodes()),
                                     config.seed);
  if (config.num_layers > 0) {
    model.encoder.set_dropout(DropoutPolicy{config.self_loop_dropout, config.edge_dropout,
                                            mix_seed(config.seed, 0x64726f70)});
  }
  Rng rng(config.seed, 0x646961);
  const auto rows = static_cast<std::int64_t>(graph.num_relations());
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + config.embedding_dim));
  Matrix<S> diag(rows, config.embedding_dim);
  for (std::int64_t k = 0; k < diag.size(); ++k) {
    diag.data()[k] = static_cast<S>(rng.uniform(-bound, bound));
  }
  model.diagonals = Tensor<S>::parameter(std::move(diag), "relation_diagonals");
  model.normalization = config.normalization;
  return model;
}

template <typename S>
std::vector<Tensor<S>> LinkPredModel<S>::parameters() const {
  auto all = encoder.parameters();
  all.push_back(diagonals);
  return all;
}

template <typename S>
std::int64_t LinkPredModel<S>::parameter_count() const {
  return encoder.parameter_count() + diagonals.rows() * diagonals.cols();
}

template <typename S>
Matrix<S> LinkPredModel<S>::embeddings(const KnowledgeGraph& graph) const {
  const Normalization norm(graph, normalization);
  Tape<S> tape(false);
  return encoder.encode(tape, graph, norm, false).value();
}

template <typename S>
DistMultScorer<S> LinkPredModel<S>::scorer(const KnowledgeGraph& graph) const {
  return DistMultScorer<S>(embeddings(graph), diagonals.value());
}

template <typename S>
S distmult_score(std::span<const S> e_s, std::span<const S> diag, std::span<const S> e_o) {
  if (e_s.size() != diag.size() || e_o.size() != diag.size()) {
    throw ShapeError("distmult_score: lengths " + std::to_string(e_s.size()) + ", " +
                     std::to_string(diag.size()) + ", " + std::to_string(e_o.size()));
  }
  S total = 0;
  for (std::size_t k = 0; k < diag.size(); ++k) total += e_s[k] * diag[k] * e_o[k];
  return total;
}

std::vector<Triple> sample_negatives(const Triple& positive, std::int32_t num_nodes,
                                     std::int32_t omega, Rng& rng) {
  if (omega < 1) throw UsageError("sample_negatives: omega must be >= 1");
  if (num_nodes < 1) throw UsageError("sample_negatives: empty entity set");
  std::vector<Triple> out;
  out.reserve(static_cast<std::size_t>(omega));
  for (std::int32_t k = 0; k < omega; ++k) {
    Triple t = positive;
    const bool subject_side = rng.bernoulli(0.5);
    const auto entity = static_cast<NodeId>(rng.index(static_cast<std::uint64_t>(num_nodes)));
    (subject_side ? t.subject : t.object) = entity;
    out.push_back(t);
  }
  return out;
}

std::vector<Triple> sample_negatives(std::span<const Triple> positives, std::int32_t num_nodes,
                                     std::int32_t omega, Rng& rng) {
  std::vector<Triple> out;
  out.reserve(positives.size() * static_cast<std::size_t>(std::max(omega, 0)));
  for (const auto& p : positives) {
    for (const auto& t : sample_negatives(p, num_nodes, omega, rng)) out.push_back(t);
  }
  return out;
}

template <typename S>
Tensor<S> linkpred_loss(Tape<S>& tape, const Tensor<S>& embeddings,
                        const Tensor<S>& diagonals, std::span<const Triple> positives,
                        std::span<const Triple> negatives, double decoder_l2) {
  if (positives.empty()) throw UsageError("linkpred_loss: empty batch");
  const std::size_t n = positives.size() + negatives.size();
  std::vector<std::int32_t> s(n), r(n), o(n);
  std::vector<std::uint8_t> y(n, 0);
  std::size_t k = 0;
  for (auto batch : {positives, negatives}) {
    for (const auto& t : batch) {
      s[k] = t.subject;
      r[k] = t.relation;
      o[k] = t.object;
      y[k] = k < positives.size() ? 1 : 0;
      ++k;
    }
  }
  const auto scores = ad::trilinear_score(tape, embeddings, diagonals, s, r, o);
  auto loss = ad::binary_cross_entropy_with_logits(tape, scores, y);
  if (decoder_l2 > 0.0) {
    loss = ad::add(tape, loss,
                   ad::scale(tape, ad::l2_norm_sq(tape, diagonals), static_cast<S>(decoder_l2)));
  }
  return loss;
}

template <typename S>
LinkPredRun<S> train_linkpred(const KnowledgeGraph& graph, const LinkPredConfig& config,
                              std::span<const Triple> validation, const FilterSet* filter) {
  if (graph.triples().empty()) throw DataError("train_linkpred: no training triples");
  LinkPredRun<S> run{LinkPredModel<S>::create(graph, config), {}, 0, std::nullopt};
  LinkPredModel<S> live = run.model;
  const Normalization norm(graph, config.normalization);
  Adam<S> adam(live.parameters(), AdamOptions{config.learning_rate});
  Rng negatives_rng(config.seed, 0x6e6567);
  if (config.validation_limit > 0 && validation.size() > config.validation_limit) {
    validation = validation.first(config.validation_limit);
  }
  const bool validating = !validation.empty() && config.eval_every > 0;
  const auto& positives = graph.triples();

  for (std::int32_t epoch = 1; epoch <= config.epochs; ++epoch) {
    adam.zero_grad();
    Tape<S> tape;
    const auto emb = live.encoder.encode(tape, graph, norm, true,
                                         static_cast<std::uint64_t>(epoch));
    const auto negatives =
        sample_negatives(positives, graph.num_nodes(), config.omega, negatives_rng);
    auto loss = linkpred_loss(tape, emb, live.diagonals, positives, negatives,
                              config.decoder_l2);
    if (config.embedding_l2 > 0.0 && live.encoder.embedding()) {
      loss = ad::add(tape, loss,
                     ad::scale(tape, ad::l2_norm_sq(tape, *live.encoder.embedding()),
                               static_cast<S>(config.embedding_l2)));
    }
    tape.backward(loss);
    LinkPredEpoch entry{epoch, static_cast<double>(loss.item()), std::nullopt};
    adam.step();

    if (validating && (epoch % config.eval_every == 0 || epoch == config.epochs)) {
      const auto scorer = live.scorer(graph);
      const double mrr = aggregate(rank_triples(scorer, validation, filter)).mrr_filtered;
      entry.validation_mrr = mrr;
      if (!run.best_validation_mrr || mrr > *run.best_validation_mrr) {
        run.best_validation_mrr = mrr;
        run.best_epoch = epoch;
        run.model.encoder = live.encoder.clone();
        run.model.diagonals =
            Tensor<S>::parameter(live.diagonals.value(), live.diagonals.name());
      }
    }
    run.trace.push_back(entry);
  }
  if (!run.best_validation_mrr) run.best_epoch = config.epochs;
  return run;
}

double ensemble_score(double first, double second, double alpha) {
  return alpha * first + (1.0 - alpha) * second;
}

double ensemble_score(const Triple& t, const CandidateScorer& rgcn,
                      const CandidateScorer& distmult, double alpha) {
  return EnsembleScorer(rgcn, distmult, alpha).score(t);
}

#define RGCN_INSTANTIATE_LINKPRED(S)                                                        \
  template struct LinkPredModel<S>;                                                         \
  template S distmult_score<S>(std::span<const S>, std::span<const S>, std::span<const S>); \
  template Tensor<S> linkpred_loss(Tape<S>&, const Tensor<S>&, const Tensor<S>&,            \
                                   std::span<const Triple>, std::span<const Triple>, double); \
  template LinkPredRun<S> train_linkpred<S>(const KnowledgeGraph&, const LinkPredConfig&,   \
                                            std::span<const Triple>, const FilterSet*);

RGCN_INSTANTIATE_LINKPRED(float)
RGCN_INSTANTIATE_LINKPRED(double)

}  // namespace rgcn
