#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rgcn/autodiff.hpp"
#include "rgcn/graph.hpp"
#include "rgcn/random.hpp"

namespace rgcn {

enum class Decomposition { full, basis, block };
enum class Activation { relu, softmax, identity };

std::string to_string(Decomposition d);
std::string to_string(Activation a);
Decomposition parse_decomposition(const std::string& text);
Activation parse_activation(const std::string& text);

struct LayerSpec {
  std::int64_t in_dim = 0;
  std::int64_t out_dim = 0;
  Decomposition decomposition = Decomposition::full;
  std::int64_t num_components = 0;  // B: bases or blocks; unused for full
  Activation activation = Activation::relu;

  /// Throws UsageError when B is invalid for the decomposition.
  void validate() const;
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct DropoutPolicy {
  double self_loop_rate = 0.0;
  double edge_rate = 0.0;
  std::uint64_t seed = 0;
  /// Scale kept messages by 1 / (1 - rate) at train time.
  bool rescale = false;

  void validate() const;
  bool active() const { return self_loop_rate > 0.0 || edge_rate > 0.0; }
};

/// Kept/dropped flag for every directed edge entry of a graph and for every
/// node's self-loop.
struct EdgeMask {
  std::vector<std::uint8_t> edge_kept;
  std::vector<std::uint8_t> self_kept;
  std::uint64_t graph_fingerprint = 0;

  std::size_t kept_edges() const;
};

/// Independent Bernoulli draw per directed augmented edge and per self-loop;
/// a deterministic function of (policy.seed, epoch_seed).
EdgeMask apply_edge_dropout(const KnowledgeGraph& graph, const DropoutPolicy& policy,
                            std::uint64_t epoch_seed);

/// Normalized message routing for one forward pass: which edges are live and
/// with what weight 1/c_{i,r} (times an optional inverted-dropout factor).
template <typename Scalar>
class MessagePlan {
 public:
  /// `mask` may be null (keep everything). Relation-grouped routing is only
  /// built when `per_relation_routing` is set (full and block layers need it).
  MessagePlan(const KnowledgeGraph& graph, const Normalization& norm,
              const EdgeMask* mask, const DropoutPolicy* rescale_policy,
              bool per_relation_routing);

  std::int32_t num_nodes() const { return num_nodes_; }
  std::int32_t num_relations() const { return num_relations_; }

  /// n x n, entry (i, j) per live edge j -> i, grouped by relation id.
  const std::shared_ptr<const SparseMatrix<Scalar>>& grouped() const { return grouped_; }

  bool has_relation_routing() const { return has_routing_; }
  /// Unique live sources of relation r, ascending.
  const std::vector<std::int32_t>& relation_sources(RelId r) const { return sources_[r]; }
  /// n x (sum_r |sources_r|): scatters per-relation messages, stacked in
  /// relation order, onto their targets with normalization applied.
  const std::shared_ptr<const SparseMatrix<Scalar>>& scatter() const { return scatter_; }

  /// Null when every self-loop is kept unscaled.
  const std::shared_ptr<const SparseMatrix<Scalar>>& self_selector() const {
    return self_selector_;
  }

 private:
  std::int32_t num_nodes_ = 0;
  std::int32_t num_relations_ = 0;
  bool has_routing_ = false;
  std::shared_ptr<const SparseMatrix<Scalar>> grouped_;
  std::vector<std::vector<std::int32_t>> sources_;
  std::shared_ptr<const SparseMatrix<Scalar>> scatter_;
  std::shared_ptr<const SparseMatrix<Scalar>> self_selector_;
};

/// Weights of one propagation layer. Relation weights are stored transposed
/// (in x out) so a message is a row-vector product h_j^T W_r^T.
///
///   full:  weights[r]          in x out, one per non-self-loop relation
///   basis: weights[b]          in x out, B shared bases
///          coefficients        (2R) x B
///   block: weights[r]          out x (in / B), the B blocks Q_br stacked
///   self_weight (W_0^T)        in x out, never decomposed
template <typename Scalar>
struct LayerParams {
  LayerSpec spec;
  std::int32_t num_relations = 0;  // non-self-loop augmented relations (2R)
  std::vector<Tensor<Scalar>> weights;
  Tensor<Scalar> coefficients;
  Tensor<Scalar> self_weight;

  /// Uniform init on [-s, s], s = sqrt(6 / (fan_in + fan_out)).
  static LayerParams initialize(const LayerSpec& spec, std::int32_t num_relations,
                                Rng& rng, const std::string& prefix);

  std::vector<Tensor<Scalar>> parameters() const;
  /// Weight matrices only (no basis coefficients); target of l2 penalties.
  std::vector<Tensor<Scalar>> weight_matrices() const;
  std::int64_t parameter_count() const;
  /// Deep copy with fresh storage.
  LayerParams clone() const;
};

/// Closed-form parameter count for a layer spec.
std::int64_t expected_parameter_count(const LayerSpec& spec, std::int32_t num_relations);

/// W_r (out x in) materialized from the decomposition. Throws UsageError for
/// the self-loop id; use self_weight instead.
template <typename Scalar>
Matrix<Scalar> effective_weight(const LayerParams<Scalar>& params, RelId r);

/// Layer input: dense features or the implicit |V| x |V| identity.
template <typename Scalar>
struct LayerInput {
  std::optional<Tensor<Scalar>> features;

  static LayerInput one_hot() { return {}; }
  static LayerInput dense(Tensor<Scalar> h) { return {std::move(h)}; }
  bool is_one_hot() const { return !features.has_value(); }
};

/// One propagation step:
///   out_i = act( sum_r sum_{j in N_i^r} (1/c_{i,r}) W_r h_j + W_0 h_i ).
template <typename Scalar>
Tensor<Scalar> layer_forward(Tape<Scalar>& tape, const MessagePlan<Scalar>& plan,
                             const LayerParams<Scalar>& params,
                             const LayerInput<Scalar>& input);

/// Convenience overload that builds the message plan itself.
template <typename Scalar>
Tensor<Scalar> layer_forward(Tape<Scalar>& tape, const KnowledgeGraph& graph,
                             const Normalization& norm, const LayerParams<Scalar>& params,
                             const LayerInput<Scalar>& input,
                             const EdgeMask* mask = nullptr);

}  // namespace rgcn
