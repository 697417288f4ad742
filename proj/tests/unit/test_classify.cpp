#include <doctest.h>

#include <cmath>
#include <set>

#include "rgcn/classify.hpp"
#include "rgcn/error.hpp"
#include "rgcn/synthetic.hpp"

using namespace rgcn;
using M = Matrix<double>;

TEST_CASE("classification loss is the summed negative log-probability of labeled rows") {
  M probs(4, 3);
  probs << 0.7, 0.2, 0.1,
           0.1, 0.1, 0.8,
           0.3, 0.3, 0.4,
           0.5, 0.25, 0.25;
  const LabelSet labels{{0, 1, 3}, {0, 2, 1}, 3};
  Tape<double> tape;
  const auto loss = classification_loss(tape, Tensor<double>::constant(probs), labels);
  CHECK(loss.item() == doctest::Approx(-std::log(0.7) - std::log(0.8) - std::log(0.25)));
}

TEST_CASE("argmax ties go to the lowest class") {
  const double a[] = {0.2, 0.4, 0.4};
  const double b[] = {0.5, 0.5};
  const double c[] = {0.1, 0.2, 0.7};
  CHECK(argmax_lowest(a, 3) == 1);
  CHECK(argmax_lowest(b, 2) == 0);
  CHECK(argmax_lowest(c, 3) == 2);
}

TEST_CASE("accuracy counts labeled nodes only") {
  ClassPredictions p;
  p.predicted = {0, 1, 1, 0};
  const LabelSet labels{{1, 2, 3}, {1, 0, 0}, 2};
  CHECK(accuracy(p, labels) == doctest::Approx(2.0 / 3.0));
  CHECK(accuracy(p, LabelSet{{}, {}, 2}) == 0.0);
}

TEST_CASE("label set validation") {
  CHECK_THROWS_AS((LabelSet{{0}, {0}, 1}).validate(), DataError);
  CHECK_THROWS_AS((LabelSet{{0, 1}, {0}, 2}).validate(), DataError);
  CHECK_THROWS_AS((LabelSet{{0}, {2}, 2}).validate(), DataError);
  CHECK_NOTHROW((LabelSet{{0, 1}, {0, 1}, 2}).validate());
}

TEST_CASE("validation split partitions the labels deterministically") {
  LabelSet labels{{}, {}, 3};
  for (int k = 0; k < 37; ++k) {
    labels.nodes.push_back(100 + k);
    labels.classes.push_back(k % 3);
  }
  for (double f : {0.0, 0.2, 0.5, 0.9}) {
    const auto [train, valid] = split_validation(labels, f, 4);
    CHECK(valid.size() == static_cast<std::size_t>(std::lround(f * 37)));
    CHECK(train.size() + valid.size() == 37);
    std::set<int> all(train.nodes.begin(), train.nodes.end());
    all.insert(valid.nodes.begin(), valid.nodes.end());
    CHECK(all.size() == 37);
    for (std::size_t k = 0; k < valid.size(); ++k) CHECK(valid.classes[k] == (valid.nodes[k] - 100) % 3);
    const auto again = split_validation(labels, f, 4);
    CHECK(again.second.nodes == valid.nodes);
  }
  CHECK(split_validation(labels, 0.3, 4).second.nodes != split_validation(labels, 0.3, 5).second.nodes);
  CHECK_THROWS_AS(split_validation(labels, 1.0, 0), UsageError);
}

TEST_CASE("dataset presets") {
  const auto aifb = classifier_preset("aifb");
  CHECK(aifb.num_layers == 2);
  CHECK(aifb.hidden_dim == 16);
  CHECK(aifb.epochs == 50);
  CHECK(aifb.learning_rate == 0.01);
  CHECK(aifb.l2_first_layer == 0.0);
  CHECK(aifb.basis_count == 0);
  CHECK(aifb.normalization == NormalizationMode::per_relation);
  CHECK(classifier_preset("mutag").basis_count == 30);
  CHECK(classifier_preset("mutag").l2_first_layer == 5e-4);
  CHECK(classifier_preset("bgs").basis_count == 40);
  CHECK(classifier_preset("am").basis_count == 40);
  CHECK(classifier_preset("am").hidden_dim == 10);
  CHECK_THROWS_AS(classifier_preset("cora"), UsageError);
}

TEST_CASE("model shape") {
  const auto toy = two_component_graph(6, 0);
  const auto g = KnowledgeGraph::build(toy.triples, toy.num_nodes, toy.num_relations);
  ClassifierConfig cfg;
  cfg.basis_count = 2;
  const auto model = ClassifierModel<double>::create(g, 2, cfg);
  REQUIRE(model.encoder.layers().size() == 2);
  CHECK(model.encoder.input().kind == InputMode::Kind::one_hot);
  CHECK(model.encoder.layers()[0].spec.in_dim == toy.num_nodes);
  CHECK(model.encoder.layers()[0].spec.activation == Activation::relu);
  CHECK(model.encoder.layers()[1].spec.activation == Activation::softmax);
  CHECK(model.encoder.layers()[1].spec.out_dim == 2);
  CHECK(model.encoder.layers()[0].spec.decomposition == Decomposition::basis);
}

TEST_CASE("first epoch loss equals NLL at initialization plus the l2 term") {
  const auto toy = two_component_graph(8, 1);
  const auto g = KnowledgeGraph::build(toy.triples, toy.num_nodes, toy.num_relations);
  ClassifierConfig cfg;
  cfg.epochs = 1;
  cfg.l2_first_layer = 0.01;
  cfg.basis_count = 1;
  cfg.seed = 3;
  const auto init = ClassifierModel<double>::create(g, 2, cfg);
  const auto probs = predict_classes(init, g).probabilities;
  double expected = 0.0;
  for (std::size_t k = 0; k < toy.labels.size(); ++k) {
    expected -= std::log(probs(toy.labels.nodes[k], toy.labels.classes[k]));
  }
  for (const auto& w : init.encoder.layers()[0].weight_matrices()) {
    expected += 0.01 * w.value().squaredNorm();
  }
  const auto run = train_classifier<double>(g, toy.labels, cfg);
  REQUIRE(run.trace.size() == 1);
  CHECK(run.trace[0].loss == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("two-component graph is learned perfectly") {
  const auto toy = two_component_graph(20, 2);
  const auto g = KnowledgeGraph::build(toy.triples, toy.num_nodes, toy.num_relations);
  const auto [train, valid] = split_validation(toy.labels, 0.5, 0);
  const auto run = train_classifier<double>(g, train, ClassifierConfig{}, &valid);
  CHECK(run.trace.size() == 50);
  CHECK(run.trace.back().loss < run.trace.front().loss);
  REQUIRE(run.trace.back().validation_accuracy.has_value());
  const auto pred = predict_classes(run.model, g);
  CHECK(accuracy(pred, valid) == 1.0);
  CHECK(accuracy(pred, toy.labels) == 1.0);
  for (std::int64_t i = 0; i < pred.probabilities.rows(); ++i) {
    CHECK(pred.probabilities.row(i).sum() == doctest::Approx(1.0));
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto toy = two_component_graph(10, 3);
  const auto g = KnowledgeGraph::build(toy.triples, toy.num_nodes, toy.num_relations);
  ClassifierConfig cfg;
  cfg.epochs = 10;
  cfg.seed = 9;
  const auto a = train_classifier<double>(g, toy.labels, cfg);
  const auto b = train_classifier<double>(g, toy.labels, cfg);
  for (std::size_t k = 0; k < a.trace.size(); ++k) CHECK(a.trace[k].loss == b.trace[k].loss);
  cfg.seed = 10;
  const auto c = train_classifier<double>(g, toy.labels, cfg);
  CHECK(a.trace.back().loss != c.trace.back().loss);
}

TEST_CASE("float training follows double training") {
  const auto toy = two_component_graph(10, 4);
  const auto g = KnowledgeGraph::build(toy.triples, toy.num_nodes, toy.num_relations);
  ClassifierConfig cfg;
  cfg.epochs = 5;
  const auto a = train_classifier<double>(g, toy.labels, cfg);
  const auto b = train_classifier<float>(g, toy.labels, cfg);
  for (std::size_t k = 0; k < a.trace.size(); ++k) {
    CHECK(b.trace[k].loss == doctest::Approx(a.trace[k].loss).epsilon(1e-4));
  }
}

TEST_CASE("training input errors") {
  const auto toy = two_component_graph(4, 0);
  const auto g = KnowledgeGraph::build(toy.triples, toy.num_nodes, toy.num_relations);
  CHECK_THROWS_AS(train_classifier<double>(g, LabelSet{{}, {}, 2}, ClassifierConfig{}), DataError);
  ClassifierConfig bad;
  bad.l2_first_layer = -1.0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("hyperparameter selection keeps the earlier entry on ties") {
  const auto toy = two_component_graph(12, 5);
  const auto g = KnowledgeGraph::build(toy.triples, toy.num_nodes, toy.num_relations);
  ClassifierConfig base;
  base.epochs = 30;
  const auto out = select_classifier_hyperparameters<double>(g, toy.labels, base, {0.0, 5e-4}, {0, 1}, 0.25);
  REQUIRE(out.table.size() == 4);
  double best = -1.0;
  std::size_t first_best = 0;
  for (std::size_t k = 0; k < out.table.size(); ++k) {
    if (out.table[k].validation_accuracy > best) {
      best = out.table[k].validation_accuracy;
      first_best = k;
    }
  }
  CHECK(out.chosen.l2_first_layer == out.table[first_best].l2_first_layer);
  CHECK(out.chosen.basis_count == out.table[first_best].basis_count);
  CHECK(out.chosen.epochs == 30);
}
