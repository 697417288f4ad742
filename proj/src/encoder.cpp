#include "rgcn/encoder.hpp"

#include <cmath>

#include "rgcn/error.hpp"
#include "rgcn/random.hpp"

namespace rgcn {

template <typename S>
Encoder<S> Encoder<S>::create(std::int32_t num_nodes, std::int32_t num_relations,
                              InputMode input, std::vector<LayerSpec> layers,
                              std::uint64_t seed) {
  Encoder enc;
  enc.num_nodes_ = num_nodes;
  enc.num_relations_ = num_relations;
  enc.input_ = input;
  Rng rng(seed, 0x656e63);
  if (input.kind == InputMode::Kind::projection) {
    if (input.dim <= 0) throw UsageError("encoder: projection width must be positive");
    const double bound = std::sqrt(6.0 / static_cast<double>(num_nodes + input.dim));
    Matrix<S> table(num_nodes, input.dim);
    for (std::int64_t k = 0; k < table.size(); ++k) {
      table.data()[k] = static_cast<S>(rng.uniform(-bound, bound));
    }
    enc.embedding_ = Tensor<S>::parameter(std::move(table), "embedding");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    enc.layers_.push_back(LayerParams<S>::initialize(layers[l], 2 * num_relations, rng,
                                                     "layer" + std::to_string(l)));
  }
  enc.validate();
  return enc;
}

template <typename S>
Encoder<S> Encoder<S>::assemble(std::int32_t num_nodes, std::int32_t num_relations,
                                InputMode input, std::optional<Tensor<S>> embedding,
                                std::vector<LayerParams<S>> layers) {
  Encoder enc;
  enc.num_nodes_ = num_nodes;
  enc.num_relations_ = num_relations;
  enc.input_ = input;
  enc.embedding_ = std::move(embedding);
  enc.layers_ = std::move(layers);
  enc.validate();
  return enc;
}

template <typename S>
void Encoder<S>::validate() const {
  const bool projection = input_.kind == InputMode::Kind::projection;
  if (projection != embedding_.has_value()) {
    throw UsageError("encoder: embedding table present iff input mode is projection");
  }
  if (projection && (embedding_->rows() != num_nodes_ || embedding_->cols() != input_.dim)) {
    throw ShapeError("encoder: embedding table does not match " + std::to_string(num_nodes_) +
                     " x " + std::to_string(input_.dim));
  }
  if (layers_.empty() && !projection) {
    throw UsageError("encoder: a zero-layer encoder needs a projection input");
  }
  std::int64_t width = projection ? input_.dim : num_nodes_;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& spec = layers_[l].spec;
    spec.validate();
    if (spec.in_dim != width) {
      throw UsageError("encoder: layer " + std::to_string(l) + " expects input width " +
                       std::to_string(spec.in_dim) + " but receives " + std::to_string(width));
    }
    if (l == 0 && !projection && spec.decomposition == Decomposition::block) {
      throw UsageError("encoder: a block-decomposed first layer needs a projection input");
    }
    if (layers_[l].num_relations != 2 * num_relations_) {
      throw UsageError("encoder: layer " + std::to_string(l) + " covers " +
                       std::to_string(layers_[l].num_relations) + " relations, expected " +
                       std::to_string(2 * num_relations_));
    }
    width = spec.out_dim;
  }
}

template <typename S>
void Encoder<S>::set_dropout(std::optional<DropoutPolicy> policy) {
  if (policy) policy->validate();
  dropout_ = policy;
}

template <typename S>
std::int64_t Encoder<S>::output_dim() const {
  if (layers_.empty()) return input_.dim;
  return layers_.back().spec.out_dim;
}

template <typename S>
Tensor<S> Encoder<S>::encode(Tape<S>& tape, const KnowledgeGraph& graph,
                             const Normalization& norm, bool training,
                             std::uint64_t epoch_seed) const {
  if (graph.num_nodes() != num_nodes_ || graph.num_relations() != num_relations_) {
    throw ShapeError("encode: encoder built for " + std::to_string(num_nodes_) + " nodes / " +
                     std::to_string(num_relations_) + " relations, graph has " +
                     std::to_string(graph.num_nodes()) + " / " +
                     std::to_string(graph.num_relations()));
  }
  if (layers_.empty()) return *embedding_;

  bool routing = false;
  for (const auto& layer : layers_) {
    routing = routing || layer.spec.decomposition != Decomposition::basis;
  }
  const bool drop = training && dropout_ && dropout_->active();
  std::optional<EdgeMask> mask;
  if (drop) mask = apply_edge_dropout(graph, *dropout_, epoch_seed);
  const MessagePlan<S> plan(graph, norm, mask ? &*mask : nullptr,
                            drop ? &*dropout_ : nullptr, routing);

  LayerInput<S> input = embedding_ ? LayerInput<S>::dense(*embedding_) : LayerInput<S>::one_hot();
  Tensor<S> h;
  for (const auto& layer : layers_) {
    h = layer_forward(tape, plan, layer, input);
    input = LayerInput<S>::dense(h);
  }
  return h;
}

template <typename S>
std::vector<Tensor<S>> Encoder<S>::parameters() const {
  std::vector<Tensor<S>> all;
  if (embedding_) all.push_back(*embedding_);
  for (const auto& layer : layers_) {
    for (auto& t : layer.parameters()) all.push_back(t);
  }
  return all;
}

template <typename S>
std::int64_t Encoder<S>::parameter_count() const {
  std::int64_t total = 0;
  for (const auto& t : parameters()) total += t.rows() * t.cols();
  return total;
}

template <typename S>
Encoder<S> Encoder<S>::clone() const {
  Encoder copy = *this;
  if (embedding_) copy.embedding_ = Tensor<S>::parameter(embedding_->value(), embedding_->name());
  for (auto& layer : copy.layers_) layer = layer.clone();
  return copy;
}

template class Encoder<float>;
template class Encoder<double>;

}  // namespace rgcn
