#include "rgcn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rgcn/error.hpp"

namespace rgcn {

namespace {

// Distinct middles of hub `hub`, in random order.
std::vector<NodeId> pick_middles(const TwoHopOptions& o, std::int32_t hub, std::int32_t count,
                                 Rng& rng) {
  std::vector<NodeId> pool;
  for (std::int32_t m = hub; m < o.middles; m += o.hubs) pool.push_back(o.hubs + m);
  for (std::int32_t k = 0; k < count; ++k) {
    const auto j = k + static_cast<std::int32_t>(rng.index(pool.size() - k));
    std::swap(pool[k], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(count));
  return pool;
}

}  // namespace

TwoHopKB two_hop_kb(const TwoHopOptions& o, std::uint64_t seed) {
  if (o.hubs < 2) throw UsageError("two_hop_kb: need at least two hubs");
  if (o.paths < 1 || o.decoys < 0) throw UsageError("two_hop_kb: paths must be >= 1, decoys >= 0");
  if (o.middles < o.hubs * std::max(o.paths, o.decoys)) {
    throw UsageError("two_hop_kb: too few middles per hub for paths/decoys");
  }
  if (o.sources < 2) throw UsageError("two_hop_kb: need at least two sources");
  if (!(o.held_out > 0.0 && o.held_out < 1.0)) {
    throw UsageError("two_hop_kb: held_out must lie in (0, 1)");
  }
  Rng rng(seed, 0x32686f70);
  TwoHopKB kb;
  kb.options = o;
  kb.num_entities = o.hubs + o.middles + o.sources;
  for (std::int32_t m = 0; m < o.middles; ++m) kb.train.push_back({o.hubs + m, 1, m % o.hubs});
  const auto first_held =
      o.sources - static_cast<std::int32_t>(std::lround(o.held_out * o.sources));
  for (std::int32_t k = 0; k < o.sources; ++k) {
    const NodeId s = o.hubs + o.middles + k;
    const auto hub = static_cast<std::int32_t>(rng.index(static_cast<std::uint64_t>(o.hubs)));
    kb.hub_of_source.push_back(hub);
    for (NodeId m : pick_middles(o, hub, o.paths, rng)) kb.train.push_back({s, 0, m});
    if (o.decoys > 0) {
      auto other = static_cast<std::int32_t>(rng.index(static_cast<std::uint64_t>(o.hubs - 1)));
      if (other >= hub) ++other;
      for (NodeId m : pick_middles(o, other, o.decoys, rng)) kb.train.push_back({m, 0, s});
    }
    const Triple t{s, 2, hub};
    if (k < first_held) {
      kb.train.push_back(t);
    } else if ((k - first_held) % 2 == 0) {
      kb.test.push_back(t);
    } else {
      kb.valid.push_back(t);
    }
  }
  return kb;
}

LinkPredConfig two_hop_budget(std::int32_t num_layers, std::uint64_t seed) {
  LinkPredConfig c;
  c.num_layers = num_layers;
  c.embedding_dim = 32;
  c.decomposition = Decomposition::full;
  c.num_components = 0;
  c.projection_input = true;
  c.normalization = NormalizationMode::per_relation;
  c.edge_dropout = 0.4;
  c.self_loop_dropout = 0.2;
  c.epochs = 500;
  c.eval_every = 10;
  c.seed = seed;
  return c;
}

ToyClassification two_component_graph(std::int32_t per_component, std::uint64_t seed) {
  if (per_component < 2) throw UsageError("two_component_graph: need two nodes per component");
  Rng rng(seed, 0x746f79);
  ToyClassification toy;
  toy.num_nodes = 2 * per_component;
  toy.labels.num_classes = 2;
  for (std::int32_t c = 0; c < 2; ++c) {
    const NodeId base = c * per_component;
    for (NodeId k = 1; k < per_component; ++k) {
      const auto parent = static_cast<NodeId>(rng.index(static_cast<std::uint64_t>(k)));
      toy.triples.push_back({base + parent, c, base + k});
    }
    for (NodeId k = 0; k < per_component; ++k) {
      toy.labels.nodes.push_back(base + k);
      toy.labels.classes.push_back(c);
    }
  }
  return toy;
}

std::vector<Triple> random_triples(std::int32_t num_nodes, std::int32_t num_relations,
                                   std::size_t num_triples, Rng& rng) {
  std::vector<Triple> out;
  out.reserve(num_triples);
  for (std::size_t k = 0; k < num_triples; ++k) {
    const auto s = static_cast<NodeId>(rng.index(static_cast<std::uint64_t>(num_nodes)));
    const auto r = static_cast<RelId>(rng.index(static_cast<std::uint64_t>(num_relations)));
    const auto o = static_cast<NodeId>(rng.index(static_cast<std::uint64_t>(num_nodes)));
    out.push_back({s, r, o});
  }
  return out;
}

DatasetBundle synthetic_bundle(const std::string& name, std::uint64_t seed) {
  DatasetBundle b;
  b.name = name;
  auto name_entities = [&](std::int32_t n) {
    for (std::int32_t v = 0; v < n; ++v) b.entities.intern("e" + std::to_string(v));
  };
  if (name == "two-hop") {
    const auto kb = two_hop_kb(TwoHopOptions{}, seed);
    name_entities(kb.num_entities);
    for (const char* r : {"points_to", "member_of", "reaches"}) b.relations.intern(r);
    b.train = kb.train;
    b.valid = kb.valid;
    b.test = kb.test;
  } else if (name == "two-component") {
    const auto toy = two_component_graph(12, seed);
    name_entities(toy.num_nodes);
    for (const char* r : {"left", "right"}) b.relations.intern(r);
    b.train = toy.triples;
    b.class_names = {"component0", "component1"};
    b.train_labels.num_classes = b.test_labels.num_classes = 2;
    for (std::size_t k = 0; k < toy.labels.size(); ++k) {
      auto& dst = k % 2 == 0 ? b.train_labels : b.test_labels;
      dst.nodes.push_back(toy.labels.nodes[k]);
      dst.classes.push_back(toy.labels.classes[k]);
    }
  } else {
    throw UsageError("unknown synthetic dataset '" + name +
                     "' (accepted: two-hop, two-component)");
  }
  return b;
}

}  // namespace rgcn
