#include "rgcn/layer.hpp"

#include <algorithm>
#include <cmath>

#include "rgcn/error.hpp"

namespace rgcn {

std::string to_string(Decomposition d) {
  switch (d) {
    case Decomposition::full: return "full";
    case Decomposition::basis: return "basis";
    case Decomposition::block: return "block";
  }
  return "full";
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::softmax: return "softmax";
    case Activation::identity: return "identity";
  }
  return "identity";
}

Decomposition parse_decomposition(const std::string& text) {
  if (text == "full") return Decomposition::full;
  if (text == "basis") return Decomposition::basis;
  if (text == "block") return Decomposition::block;
  throw UsageError("decomposition '" + text + "' not one of {full, basis, block}");
}

Activation parse_activation(const std::string& text) {
  if (text == "relu") return Activation::relu;
  if (text == "softmax") return Activation::softmax;
  if (text == "identity") return Activation::identity;
  throw UsageError("activation '" + text + "' not one of {relu, softmax, identity}");
}

void LayerSpec::validate() const {
  if (in_dim <= 0 || out_dim <= 0) {
    throw UsageError("layer: dimensions must be positive, got " + std::to_string(in_dim) +
                     " -> " + std::to_string(out_dim));
  }
  if (decomposition == Decomposition::basis && num_components < 1) {
    throw UsageError("layer: basis decomposition needs at least one basis");
  }
  if (decomposition == Decomposition::block &&
      (num_components < 1 || in_dim % num_components != 0 ||
       out_dim % num_components != 0)) {
    throw UsageError("layer: " + std::to_string(num_components) +
                     " blocks must divide both " + std::to_string(in_dim) + " and " +
                     std::to_string(out_dim));
  }
}

void DropoutPolicy::validate() const {
  auto ok = [](double rate) { return rate >= 0.0 && rate < 1.0; };
  if (!ok(self_loop_rate) || !ok(edge_rate)) {
    throw UsageError("dropout: rates must lie in [0, 1)");
  }
}

std::size_t EdgeMask::kept_edges() const {
  return static_cast<std::size_t>(std::count(edge_kept.begin(), edge_kept.end(), 1));
}

EdgeMask apply_edge_dropout(const KnowledgeGraph& graph, const DropoutPolicy& policy,
                            std::uint64_t epoch_seed) {
  policy.validate();
  EdgeMask mask;
  mask.graph_fingerprint = graph.fingerprint();
  mask.edge_kept.assign(graph.num_edges(), 1);
  mask.self_kept.assign(static_cast<std::size_t>(graph.num_nodes()), 1);
  Rng rng(mix_seed(policy.seed, epoch_seed));
  if (policy.edge_rate > 0.0) {
    for (auto& kept : mask.edge_kept) kept = rng.bernoulli(policy.edge_rate) ? 0 : 1;
  }
  if (policy.self_loop_rate > 0.0) {
    for (auto& kept : mask.self_kept) kept = rng.bernoulli(policy.self_loop_rate) ? 0 : 1;
  }
  return mask;
}

template <typename S>
MessagePlan<S>::MessagePlan(const KnowledgeGraph& graph, const Normalization& norm,
                            const EdgeMask* mask, const DropoutPolicy* rescale_policy,
                            bool per_relation_routing)
    : num_nodes_(graph.num_nodes()), num_relations_(2 * graph.num_relations()) {
  if (!norm.matches(graph)) {
    throw UsageError("message plan: normalization was computed on a different graph");
  }
  if (mask && mask->graph_fingerprint != graph.fingerprint()) {
    throw UsageError("message plan: edge mask was drawn for a different graph");
  }
  double edge_factor = 1.0;
  double self_factor = 1.0;
  if (rescale_policy && rescale_policy->rescale) {
    edge_factor = 1.0 / (1.0 - rescale_policy->edge_rate);
    self_factor = 1.0 / (1.0 - rescale_policy->self_loop_rate);
  }
  auto kept = [&](std::int64_t e) { return !mask || mask->edge_kept[e] != 0; };

  const auto row_ptr = graph.row_ptr();
  const auto source = graph.edge_source();
  const auto relation = graph.edge_relation();
  const auto scale = norm.edge_scale();

  auto grouped = std::make_shared<SparseMatrix<S>>();
  grouped->rows = num_nodes_;
  grouped->cols = num_nodes_;
  grouped->row_ptr.assign(static_cast<std::size_t>(num_nodes_) + 1, 0);
  for (NodeId i = 0; i < num_nodes_; ++i) {
    for (auto e = row_ptr[i]; e < row_ptr[i + 1]; ++e) {
      if (!kept(e)) continue;
      grouped->col.push_back(source[e]);
      grouped->value.push_back(static_cast<S>(scale[e] * edge_factor));
      grouped->group.push_back(relation[e]);
    }
    grouped->row_ptr[i + 1] = static_cast<std::int64_t>(grouped->col.size());
  }
  grouped_ = std::move(grouped);

  if (per_relation_routing) {
    has_routing_ = true;
    sources_.resize(static_cast<std::size_t>(num_relations_));
    std::vector<std::int64_t> offset(static_cast<std::size_t>(num_relations_) + 1, 0);
    for (RelId r = 0; r < num_relations_; ++r) {
      auto& list = sources_[r];
      for (auto e : graph.relation_edges(r)) {
        if (kept(e)) list.push_back(source[e]);
      }
      std::sort(list.begin(), list.end());
      list.erase(std::unique(list.begin(), list.end()), list.end());
      offset[r + 1] = offset[r] + static_cast<std::int64_t>(list.size());
    }
    auto scatter = std::make_shared<SparseMatrix<S>>();
    scatter->rows = num_nodes_;
    scatter->cols = offset.back();
    scatter->row_ptr.assign(static_cast<std::size_t>(num_nodes_) + 1, 0);
    for (NodeId i = 0; i < num_nodes_; ++i) {
      for (auto e = row_ptr[i]; e < row_ptr[i + 1]; ++e) {
        if (!kept(e)) continue;
        const auto& list = sources_[relation[e]];
        const auto local = std::lower_bound(list.begin(), list.end(), source[e]) - list.begin();
        scatter->col.push_back(static_cast<std::int32_t>(offset[relation[e]] + local));
        scatter->value.push_back(static_cast<S>(scale[e] * edge_factor));
      }
      scatter->row_ptr[i + 1] = static_cast<std::int64_t>(scatter->col.size());
    }
    scatter_ = std::move(scatter);
  }

  const bool drops_self =
      mask && std::find(mask->self_kept.begin(), mask->self_kept.end(), 0) != mask->self_kept.end();
  if (drops_self || self_factor != 1.0) {
    auto selector = std::make_shared<SparseMatrix<S>>();
    selector->rows = num_nodes_;
    selector->cols = num_nodes_;
    selector->row_ptr.assign(static_cast<std::size_t>(num_nodes_) + 1, 0);
    for (NodeId i = 0; i < num_nodes_; ++i) {
      if (!mask || mask->self_kept[i]) {
        selector->col.push_back(i);
        selector->value.push_back(static_cast<S>(self_factor));
      }
      selector->row_ptr[i + 1] = static_cast<std::int64_t>(selector->col.size());
    }
    self_selector_ = std::move(selector);
  }
}

namespace {

template <typename S>
Matrix<S> uniform_matrix(std::int64_t rows, std::int64_t cols, double bound, Rng& rng) {
  Matrix<S> m(rows, cols);
  for (std::int64_t k = 0; k < m.size(); ++k) {
    m.data()[k] = static_cast<S>(rng.uniform(-bound, bound));
  }
  return m;
}

double glorot_bound(std::int64_t fan_in, std::int64_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

template <typename S>
LayerParams<S> LayerParams<S>::initialize(const LayerSpec& spec, std::int32_t num_relations,
                                          Rng& rng, const std::string& prefix) {
  spec.validate();
  LayerParams p;
  p.spec = spec;
  p.num_relations = num_relations;
  const auto in = spec.in_dim;
  const auto out = spec.out_dim;
  const double dense_bound = glorot_bound(in, out);
  switch (spec.decomposition) {
    case Decomposition::full:
      for (std::int32_t r = 0; r < num_relations; ++r) {
        p.weights.push_back(Tensor<S>::parameter(uniform_matrix<S>(in, out, dense_bound, rng),
                                                 prefix + ".relation" + std::to_string(r)));
      }
      break;
    case Decomposition::basis:
      for (std::int64_t b = 0; b < spec.num_components; ++b) {
        p.weights.push_back(Tensor<S>::parameter(uniform_matrix<S>(in, out, dense_bound, rng),
                                                 prefix + ".basis" + std::to_string(b)));
      }
      p.coefficients = Tensor<S>::parameter(
          uniform_matrix<S>(num_relations, spec.num_components,
                            glorot_bound(num_relations, spec.num_components), rng),
          prefix + ".coefficients");
      break;
    case Decomposition::block: {
      const auto in_b = in / spec.num_components;
      const auto out_b = out / spec.num_components;
      for (std::int32_t r = 0; r < num_relations; ++r) {
        p.weights.push_back(Tensor<S>::parameter(
            uniform_matrix<S>(out, in_b, glorot_bound(in_b, out_b), rng),
            prefix + ".blocks" + std::to_string(r)));
      }
      break;
    }
  }
  p.self_weight = Tensor<S>::parameter(uniform_matrix<S>(in, out, dense_bound, rng),
                                       prefix + ".self");
  return p;
}

template <typename S>
std::vector<Tensor<S>> LayerParams<S>::parameters() const {
  std::vector<Tensor<S>> all = weights;
  if (coefficients.defined()) all.push_back(coefficients);
  all.push_back(self_weight);
  return all;
}

template <typename S>
std::vector<Tensor<S>> LayerParams<S>::weight_matrices() const {
  std::vector<Tensor<S>> all = weights;
  all.push_back(self_weight);
  return all;
}

template <typename S>
LayerParams<S> LayerParams<S>::clone() const {
  auto copy = [](const Tensor<S>& t) { return Tensor<S>::parameter(t.value(), t.name()); };
  LayerParams out;
  out.spec = spec;
  out.num_relations = num_relations;
  for (const auto& w : weights) out.weights.push_back(copy(w));
  if (coefficients.defined()) out.coefficients = copy(coefficients);
  out.self_weight = copy(self_weight);
  return out;
}

template <typename S>
std::int64_t LayerParams<S>::parameter_count() const {
  std::int64_t total = 0;
  for (const auto& t : parameters()) total += t.rows() * t.cols();
  return total;
}

std::int64_t expected_parameter_count(const LayerSpec& spec, std::int32_t num_relations) {
  const std::int64_t in = spec.in_dim;
  const std::int64_t out = spec.out_dim;
  const std::int64_t rels = num_relations;
  const std::int64_t b = spec.num_components;
  switch (spec.decomposition) {
    case Decomposition::full: return rels * out * in + out * in;
    case Decomposition::basis: return b * out * in + rels * b + out * in;
    case Decomposition::block: return rels * b * (out / b) * (in / b) + out * in;
  }
  return 0;
}

template <typename S>
Matrix<S> effective_weight(const LayerParams<S>& params, RelId r) {
  if (r == params.num_relations) {
    throw UsageError("effective_weight: relation " + std::to_string(r) +
                     " is the self-loop; use self_weight");
  }
  if (r < 0 || r > params.num_relations) {
    throw UsageError("effective_weight: relation " + std::to_string(r) + " out of range");
  }
  const auto& spec = params.spec;
  switch (spec.decomposition) {
    case Decomposition::full:
      return params.weights[r].value().transpose();
    case Decomposition::basis: {
      Matrix<S> w = Matrix<S>::Zero(spec.out_dim, spec.in_dim);
      for (std::int64_t b = 0; b < spec.num_components; ++b) {
        w += params.coefficients.value()(r, b) * params.weights[b].value().transpose();
      }
      return w;
    }
    case Decomposition::block: {
      const auto blocks = spec.num_components;
      const auto in_b = spec.in_dim / blocks;
      const auto out_b = spec.out_dim / blocks;
      Matrix<S> w = Matrix<S>::Zero(spec.out_dim, spec.in_dim);
      for (std::int64_t b = 0; b < blocks; ++b) {
        w.block(b * out_b, b * in_b, out_b, in_b) =
            params.weights[r].value().middleRows(b * out_b, out_b);
      }
      return w;
    }
  }
  return {};
}

template <typename S>
Tensor<S> layer_forward(Tape<S>& tape, const MessagePlan<S>& plan,
                        const LayerParams<S>& params, const LayerInput<S>& input) {
  const auto& spec = params.spec;
  const auto n = plan.num_nodes();
  if (params.num_relations != plan.num_relations()) {
    throw ShapeError("layer_forward: parameters cover " +
                     std::to_string(params.num_relations) + " relations, graph has " +
                     std::to_string(plan.num_relations()));
  }
  if (input.is_one_hot()) {
    if (spec.in_dim != n) {
      throw ShapeError("layer_forward: one-hot input needs in_dim == " + std::to_string(n) +
                       ", layer has " + std::to_string(spec.in_dim));
    }
    if (spec.decomposition == Decomposition::block) {
      throw UsageError("layer_forward: block layers need a dense input projection");
    }
  } else {
    const auto& h = *input.features;
    if (h.rows() != n || h.cols() != spec.in_dim) {
      throw ShapeError("layer_forward: input [" + std::to_string(h.rows()) + "x" +
                       std::to_string(h.cols()) + "] does not match " + std::to_string(n) +
                       " nodes x in_dim " + std::to_string(spec.in_dim));
    }
  }

  // Self-connection.
  Tensor<S> total = input.is_one_hot() ? params.self_weight
                                       : ad::matmul(tape, *input.features, params.self_weight);
  if (plan.self_selector()) total = ad::sparse_matmul(tape, plan.self_selector(), total);

  if (spec.decomposition == Decomposition::basis) {
    for (std::int64_t b = 0; b < spec.num_components; ++b) {
      const auto& basis = params.weights[b];
      Tensor<S> term;
      if (input.is_one_hot()) {
        term = ad::sparse_matmul_grouped(tape, plan.grouped(), params.coefficients, b, basis);
      } else if (spec.in_dim <= spec.out_dim) {
        auto mixed = ad::sparse_matmul_grouped(tape, plan.grouped(), params.coefficients, b,
                                               *input.features);
        term = ad::matmul(tape, mixed, basis);
      } else {
        auto projected = ad::matmul(tape, *input.features, basis);
        term = ad::sparse_matmul_grouped(tape, plan.grouped(), params.coefficients, b, projected);
      }
      total = ad::add(tape, total, term);
    }
  } else {
    if (!plan.has_relation_routing()) {
      throw UsageError("layer_forward: message plan lacks per-relation routing");
    }
    std::vector<Tensor<S>> messages;
    for (RelId r = 0; r < plan.num_relations(); ++r) {
      const auto& sources = plan.relation_sources(r);
      if (sources.empty()) continue;
      if (spec.decomposition == Decomposition::full) {
        if (input.is_one_hot()) {
          messages.push_back(ad::row_gather(tape, params.weights[r], sources));
        } else {
          auto gathered = ad::row_gather(tape, *input.features, sources);
          messages.push_back(ad::matmul(tape, gathered, params.weights[r]));
        }
      } else {
        auto gathered = ad::row_gather(tape, *input.features, sources);
        messages.push_back(
            ad::block_diag_apply(tape, gathered, params.weights[r], spec.num_components));
      }
    }
    if (!messages.empty()) {
      auto stacked = messages.size() == 1 ? messages.front() : ad::concat_rows(tape, messages);
      total = ad::add(tape, total, ad::sparse_matmul(tape, plan.scatter(), stacked));
    }
  }

  switch (spec.activation) {
    case Activation::relu: return ad::relu(tape, total);
    case Activation::softmax: return ad::softmax_rows(tape, total);
    case Activation::identity: break;
  }
  if (total.same_storage(params.self_weight)) {
    // Identity activation over a bare one-hot self term: hand out a copy so
    // callers never alias a parameter.
    return ad::scale(tape, total, S(1));
  }
  return total;
}

template <typename S>
Tensor<S> layer_forward(Tape<S>& tape, const KnowledgeGraph& graph, const Normalization& norm,
                        const LayerParams<S>& params, const LayerInput<S>& input,
                        const EdgeMask* mask) {
  const MessagePlan<S> plan(graph, norm, mask, nullptr,
                            params.spec.decomposition != Decomposition::basis);
  return layer_forward(tape, plan, params, input);
}

#define RGCN_INSTANTIATE_LAYER(S)                                                        \
  template class MessagePlan<S>;                                                         \
  template struct LayerParams<S>;                                                        \
  template Matrix<S> effective_weight(const LayerParams<S>&, RelId);                     \
  template Tensor<S> layer_forward(Tape<S>&, const MessagePlan<S>&, const LayerParams<S>&, \
                                   const LayerInput<S>&);                                \
  template Tensor<S> layer_forward(Tape<S>&, const KnowledgeGraph&, const Normalization&, \
                                   const LayerParams<S>&, const LayerInput<S>&,          \
                                   const EdgeMask*);

RGCN_INSTANTIATE_LAYER(float)
RGCN_INSTANTIATE_LAYER(double)

}  // namespace rgcn
