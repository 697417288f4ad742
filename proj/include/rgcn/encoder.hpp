#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rgcn/autodiff.hpp"
#include "rgcn/graph.hpp"
#include "rgcn/layer.hpp"

namespace rgcn {

/// How featureless nodes enter the first layer.
struct InputMode {
  enum class Kind { one_hot, projection };
  Kind kind = Kind::one_hot;
  std::int64_t dim = 0;  // projection width

  static InputMode one_hot() { return {Kind::one_hot, 0}; }
  static InputMode projection(std::int64_t dim) { return {Kind::projection, dim}; }
  friend bool operator==(const InputMode&, const InputMode&) = default;
};

/// Stack of R-GCN layers over a fixed node set. The projection input is an
/// embedding table, i.e. a linear map applied to one-hot node vectors; with
/// zero layers the table itself is the encoder output.
template <typename Scalar>
class Encoder {
 public:
  Encoder() = default;

  /// Validates the dimension chain and initializes every parameter from
  /// `seed`. `num_relations` counts canonical relations.
  static Encoder create(std::int32_t num_nodes, std::int32_t num_relations, InputMode input,
                        std::vector<LayerSpec> layers, std::uint64_t seed);

  /// Assembles an encoder from existing parameters (checkpoint loading).
  static Encoder assemble(std::int32_t num_nodes, std::int32_t num_relations, InputMode input,
                          std::optional<Tensor<Scalar>> embedding,
                          std::vector<LayerParams<Scalar>> layers);

  /// Final-layer states. With `training` set and a dropout policy present,
  /// edges are dropped with a mask drawn from (policy.seed, epoch_seed).
  Tensor<Scalar> encode(Tape<Scalar>& tape, const KnowledgeGraph& graph,
                        const Normalization& norm, bool training,
                        std::uint64_t epoch_seed = 0) const;

  void set_dropout(std::optional<DropoutPolicy> policy);
  const std::optional<DropoutPolicy>& dropout() const { return dropout_; }

  std::int32_t num_nodes() const { return num_nodes_; }
  std::int32_t num_relations() const { return num_relations_; }
  const InputMode& input() const { return input_; }
  const std::optional<Tensor<Scalar>>& embedding() const { return embedding_; }
  const std::vector<LayerParams<Scalar>>& layers() const { return layers_; }
  std::vector<LayerParams<Scalar>>& mutable_layers() { return layers_; }
  std::int64_t output_dim() const;

  std::vector<Tensor<Scalar>> parameters() const;
  std::int64_t parameter_count() const;
  /// Deep copy with fresh parameter storage; keeps the dropout policy.
  Encoder clone() const;

 private:
  void validate() const;

  std::int32_t num_nodes_ = 0;
  std::int32_t num_relations_ = 0;
  InputMode input_;
  std::optional<Tensor<Scalar>> embedding_;
  std::vector<LayerParams<Scalar>> layers_;
  std::optional<DropoutPolicy> dropout_;
};

}  // namespace rgcn
