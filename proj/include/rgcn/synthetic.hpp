#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rgcn/classify.hpp"
#include "rgcn/dataset.hpp"
#include "rgcn/graph.hpp"
#include "rgcn/linkpred.hpp"
#include "rgcn/random.hpp"

namespace rgcn {

/// Knowledge base whose held-out facts are only explained two hops away.
///
/// Entities are hubs [0, hubs), middles [hubs, hubs + middles) and sources
/// after that. Middle m belongs to hub m % hubs via relation 1 (m -> hub).
/// Each source s points to `paths` distinct middles of one hub h via
/// relation 0, and receives relation-0 edges from `decoys` distinct middles
/// of a single other hub. Relation 2 holds s -> h. The last `held_out`
/// fraction of sources have their relation-2 fact alternately moved to
/// test and valid.
///
/// The decoy edges point the other way, so a model that ignores edge
/// direction sees two equally plausible hubs per source.
struct TwoHopOptions {
  std::int32_t hubs = 6;
  std::int32_t middles = 30;
  std::int32_t sources = 300;
  std::int32_t paths = 2;
  std::int32_t decoys = 2;
  double held_out = 0.2;
};

struct TwoHopKB {
  std::int32_t num_entities = 0;
  std::int32_t num_relations = 3;
  TwoHopOptions options;
  std::vector<NodeId> hub_of_source;
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
};

TwoHopKB two_hop_kb(const TwoHopOptions& options, std::uint64_t seed);

/// Shared training budget used to compare encoders on two_hop_kb: 32-dim
/// embeddings, full weights, per-relation normalization, 500 epochs.
LinkPredConfig two_hop_budget(std::int32_t num_layers, std::uint64_t seed);

/// Two disjoint components with `per_component` nodes each. Component k is a
/// random tree whose edges all carry relation k; nodes are labeled with
/// their component.
struct ToyClassification {
  std::vector<Triple> triples;
  std::int32_t num_nodes = 0;
  std::int32_t num_relations = 2;
  LabelSet labels;
};

ToyClassification two_component_graph(std::int32_t per_component, std::uint64_t seed);

/// `num_triples` uniformly random triples (self-edges and repeats allowed).
std::vector<Triple> random_triples(std::int32_t num_nodes, std::int32_t num_relations,
                                   std::size_t num_triples, Rng& rng);

/// Named bundles for demos and CLI tests: "two-hop" (link prediction) and
/// "two-component" (classification; labels alternate between train and
/// test).
DatasetBundle synthetic_bundle(const std::string& name, std::uint64_t seed);

}  // namespace rgcn
