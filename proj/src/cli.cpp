#include "rgcn/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rgcn/checkpoint.hpp"
#include "rgcn/classify.hpp"
#include "rgcn/dataset.hpp"
#include "rgcn/linkpred.hpp"
#include "rgcn/ranking.hpp"
#include "rgcn/synthetic.hpp"

namespace rgcn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return kUsage;
    case ErrorKind::numerical: return kNumerical;
    case ErrorKind::data:
    case ErrorKind::shape: return kData;
  }
  return kData;
}

namespace {

constexpr const char* kUnspecified = "default (unspecified in paper)";

const std::vector<std::string> kClassifyPresets = {"aifb", "mutag", "bgs", "am"};
const std::vector<std::string> kLinkPresets = {"fb15k", "wn18", "fb15k-237"};

bool contains(const std::vector<std::string>& list, const std::string& name) {
  return std::find(list.begin(), list.end(), name) != list.end();
}

template <typename F>
decltype(auto) with_precision(int bits, F&& f) {
  if (bits == 32) return f(float{});
  return f(double{});
}

// Dataset selection ----------------------------------------------------------

struct DataOptions {
  std::string preset;
  std::string data_dir;
  std::string dataset;
  std::string synthetic;

  json to_json() const {
    return {{"preset", preset}, {"data_dir", data_dir}, {"dataset", dataset},
            {"synthetic", synthetic}};
  }
  static DataOptions from_json(const json& j) {
    DataOptions d;
    d.preset = j.value("preset", "");
    d.data_dir = j.value("data_dir", "");
    d.dataset = j.value("dataset", "");
    d.synthetic = j.value("synthetic", "");
    return d;
  }
};

void add_data_options(CLI::App* cmd, DataOptions& d, bool with_preset) {
  if (with_preset) {
    std::vector<std::string> all = kClassifyPresets;
    all.insert(all.end(), kLinkPresets.begin(), kLinkPresets.end());
    cmd->add_option("--preset", d.preset,
                    "dataset preset: aifb, mutag, bgs, am (classification) or fb15k, wn18, "
                    "fb15k-237 (link prediction); selects the published hyperparameters")
        ->check(CLI::IsMember(all));
  }
  cmd->add_option("--data-dir", d.data_dir,
                  "root holding one directory per preset (e.g. <root>/fb15k-237/train.txt, "
                  "<root>/aifb/aifb.nt)")
      ->envname("RGCN_DATA_DIR");
  cmd->add_option("--dataset", d.dataset,
                  "dataset directory: train.txt/valid.txt/test.txt triples or a canonical TSV "
                  "export (entities.tsv, ...); overrides --data-dir");
  cmd->add_option("--synthetic", d.synthetic, "built-in generated dataset")
      ->check(CLI::IsMember({"two-hop", "two-component"}));
}

DatasetBundle load_bundle(const DataOptions& d, std::uint64_t seed) {
  if (!d.synthetic.empty()) return synthetic_bundle(d.synthetic, seed);
  fs::path dir;
  if (!d.dataset.empty()) {
    dir = d.dataset;
  } else if (!d.preset.empty()) {
    if (d.data_dir.empty()) {
      throw DataError("no data location for preset '" + d.preset +
                      "': pass --data-dir (or set RGCN_DATA_DIR) or --dataset");
    }
    if (contains(kClassifyPresets, d.preset)) {
      const auto bench = rdf_benchmark(d.preset, d.data_dir);
      if (!fs::exists(bench.graph_file)) {
        throw DataError("dataset file '" + bench.graph_file.string() + "' does not exist");
      }
      auto b = load_rdf_classification(bench.graph_file, bench.labels, bench.leak);
      b.name = d.preset;
      return b;
    }
    dir = fs::path(d.data_dir) / d.preset;
  } else {
    throw UsageError("no dataset given: pass --preset with --data-dir, --dataset, or --synthetic");
  }
  if (!fs::is_directory(dir)) {
    throw DataError("dataset directory '" + dir.string() + "' does not exist");
  }
  DatasetBundle b;
  if (fs::exists(dir / "entities.tsv")) {
    b = load_canonical_tsv(dir);
  } else if (fs::exists(dir / "train.txt")) {
    b = load_triple_dir(dir);
  } else if (contains(kClassifyPresets, d.preset) &&
             fs::exists(dir / (d.preset + ".nt"))) {
    const auto bench = rdf_benchmark(d.preset, dir.parent_path());
    b = load_rdf_classification(bench.graph_file, bench.labels, bench.leak);
  } else {
    throw DataError("dataset directory '" + dir.string() +
                    "' holds neither entities.tsv nor train.txt");
  }
  if (b.name.empty()) b.name = d.preset.empty() ? dir.filename().string() : d.preset;
  return b;
}

void check_vocabulary(const std::vector<std::string>& names, const Vocabulary& vocab,
                      const std::string& what, const std::string& source) {
  if (names == vocab.names()) return;
  std::ostringstream msg;
  msg << "vocabulary mismatch: " << source << " has " << names.size() << " " << what
      << ", dataset has " << vocab.size();
  const std::size_t n = std::min(names.size(), vocab.names().size());
  for (std::size_t k = 0; k < n; ++k) {
    if (names[k] != vocab.names()[k]) {
      msg << " (first difference at id " << k << ": '" << names[k] << "' vs '"
          << vocab.names()[k] << "')";
      break;
    }
  }
  throw DataError(msg.str());
}

std::span<const Triple> split_triples(const DatasetBundle& b, const std::string& split) {
  if (split == "train") return b.train;
  if (split == "valid") return b.valid;
  return b.test;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  return f;
}

// Training -------------------------------------------------------------------

struct TrainOptions {
  DataOptions data;
  std::string task;
  std::string output = "run";
  int precision = 64;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  std::optional<std::int32_t> epochs;
  std::optional<double> learning_rate;
  std::optional<std::int32_t> layers;
  std::optional<std::string> normalization;

  // classification
  std::optional<std::int64_t> hidden_dim;
  std::optional<double> l2;
  std::optional<std::int64_t> bases;
  std::optional<double> validation_fraction;

  // link prediction
  std::optional<std::int64_t> embedding_dim;
  std::optional<std::string> decomposition;
  std::optional<std::int64_t> components;
  std::optional<bool> projection_input;
  std::optional<double> self_loop_dropout;
  std::optional<double> edge_dropout;
  std::optional<double> decoder_l2;
  std::optional<double> embedding_l2;
  std::optional<std::int32_t> omega;
  std::optional<std::int32_t> eval_every;
  std::optional<std::size_t> validation_limit;
};

const std::vector<std::string> kClassifyOnly = {"--hidden-dim", "--l2", "--bases",
                                                "--validation-fraction"};
const std::vector<std::string> kLinkOnly = {
    "--embedding-dim", "--decomposition",  "--components",  "--projection-input",
    "--self-loop-dropout", "--edge-dropout", "--decoder-l2", "--embedding-l2",
    "--omega",         "--eval-every",     "--validation-limit"};

void add_train_options(CLI::App* cmd, TrainOptions& o) {
  add_data_options(cmd, o.data, true);
  cmd->add_option("--task", o.task, "classify or linkpred; inferred from the preset or data")
      ->check(CLI::IsMember({"classify", "linkpred"}));
  cmd->add_option("--output", o.output, "output directory")->capture_default_str();
  cmd->add_option("--precision", o.precision, "scalar width in bits")
      ->check(CLI::IsMember({32, 64}))
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, std::string("master seed; ") + kUnspecified + ": 0");
  cmd->add_option("--threads", o.threads, "ranking worker threads")->capture_default_str();

  cmd->add_option("--epochs", o.epochs,
                  std::string("training epochs; classification presets: 50; link prediction ") +
                      kUnspecified + ": 500");
  cmd->add_option("--lr", o.learning_rate, "Adam learning rate; presets: 0.01");
  cmd->add_option("--layers", o.layers,
                  "encoder layers; classification presets: 2; fb15k/wn18: 1; fb15k-237: 2; "
                  "0 trains plain DistMult");
  cmd->add_option("--normalization", o.normalization,
                  "c_{i,r}: per-relation (|N_i^r|, classification presets) or across-relations "
                  "(sum over relations, link prediction presets)")
      ->check(CLI::IsMember({"per-relation", "across-relations"}));

  cmd->add_option("--hidden-dim", o.hidden_dim, "hidden units; presets: 16 (am: 10)");
  cmd->add_option("--l2", o.l2,
                  "l2 penalty on first-layer weights; presets: aifb 0, mutag/bgs/am 5e-4");
  cmd->add_option("--bases", o.bases,
                  "basis functions, 0 for full weights; presets: aifb 0, mutag 30, bgs/am 40");
  cmd->add_option("--validation-fraction", o.validation_fraction,
                  "hold out this fraction of training labels and trace its accuracy; "
                  "hyperparameter selection holds out 0.2; run default 0");

  cmd->add_option("--embedding-dim", o.embedding_dim,
                  "embedding width; fb15k/wn18: 200; fb15k-237: 500");
  cmd->add_option("--decomposition", o.decomposition,
                  "full, basis or block; fb15k/wn18: basis; fb15k-237: block")
      ->check(CLI::IsMember({"full", "basis", "block"}));
  cmd->add_option("--components", o.components,
                  "bases or blocks; fb15k/wn18: 2 bases; fb15k-237: 100 blocks of 5x5");
  cmd->add_option("--projection-input", o.projection_input,
                  std::string("learned embedding table in front of the first layer; on for "
                              "fb15k-237 and for 0 layers, otherwise one-hot; ") +
                      kUnspecified + " outside fb15k-237");
  cmd->add_option("--self-loop-dropout", o.self_loop_dropout, "self-loop dropout rate; 0.2");
  cmd->add_option("--edge-dropout", o.edge_dropout, "edge dropout rate; 0.4");
  cmd->add_option("--decoder-l2", o.decoder_l2, "l2 penalty on relation diagonals; 0.01");
  cmd->add_option("--embedding-l2", o.embedding_l2,
                  std::string("l2 penalty on the projection table; ") + kUnspecified + ": 0");
  cmd->add_option("--omega", o.omega, "negative samples per positive; 1");
  cmd->add_option("--eval-every", o.eval_every,
                  std::string("validation MRR every n epochs, 0 disables; ") + kUnspecified +
                      ": 10");
  cmd->add_option("--validation-limit", o.validation_limit,
                  std::string("rank at most this many validation triples, 0 for all; ") +
                      kUnspecified + ": 0");
}

std::string resolve_task(const TrainOptions& o, const DatasetBundle& b) {
  if (!o.task.empty()) {
    if (!o.data.preset.empty()) {
      const bool preset_classify = contains(kClassifyPresets, o.data.preset);
      if ((o.task == "classify") != preset_classify) {
        throw UsageError("--task " + o.task + " contradicts --preset " + o.data.preset);
      }
    }
    return o.task;
  }
  if (contains(kClassifyPresets, o.data.preset)) return "classify";
  if (contains(kLinkPresets, o.data.preset)) return "linkpred";
  return b.train_labels.empty() ? "linkpred" : "classify";
}

void reject_foreign_flags(const CLI::App* cmd, const std::vector<std::string>& names,
                          const std::string& task) {
  for (const auto& name : names) {
    if (cmd->count(name) > 0) {
      throw UsageError(name + " does not apply to task '" + task + "'");
    }
  }
}

ClassifierConfig resolve_classifier(const TrainOptions& o) {
  ClassifierConfig c = o.data.preset.empty() ? ClassifierConfig{} : classifier_preset(o.data.preset);
  if (o.epochs) c.epochs = *o.epochs;
  if (o.learning_rate) c.learning_rate = *o.learning_rate;
  if (o.layers) c.num_layers = *o.layers;
  if (o.normalization) c.normalization = parse_normalization(*o.normalization);
  if (o.hidden_dim) c.hidden_dim = *o.hidden_dim;
  if (o.l2) c.l2_first_layer = *o.l2;
  if (o.bases) c.basis_count = *o.bases;
  c.seed = o.seed;
  c.validate();
  return c;
}

LinkPredConfig resolve_linkpred(const TrainOptions& o) {
  LinkPredConfig c;
  if (!o.data.preset.empty()) {
    c = linkpred_preset(o.data.preset);
  } else if (o.data.synthetic == "two-hop") {
    c = two_hop_budget(2, o.seed);
  }
  if (o.epochs) c.epochs = *o.epochs;
  if (o.learning_rate) c.learning_rate = *o.learning_rate;
  if (o.layers) c.num_layers = *o.layers;
  if (o.normalization) c.normalization = parse_normalization(*o.normalization);
  if (o.embedding_dim) c.embedding_dim = *o.embedding_dim;
  if (o.decomposition) c.decomposition = parse_decomposition(*o.decomposition);
  if (o.components) c.num_components = *o.components;
  if (o.projection_input) c.projection_input = *o.projection_input;
  if (o.self_loop_dropout) c.self_loop_dropout = *o.self_loop_dropout;
  if (o.edge_dropout) c.edge_dropout = *o.edge_dropout;
  if (o.decoder_l2) c.decoder_l2 = *o.decoder_l2;
  if (o.embedding_l2) c.embedding_l2 = *o.embedding_l2;
  if (o.omega) c.omega = *o.omega;
  if (o.eval_every) c.eval_every = *o.eval_every;
  if (o.validation_limit) c.validation_limit = *o.validation_limit;
  c.seed = o.seed;
  c.validate();
  return c;
}

json classifier_json(const ClassifierConfig& c) {
  return {{"hidden_dim", c.hidden_dim},
          {"num_layers", c.num_layers},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"l2_first_layer", c.l2_first_layer},
          {"basis_count", c.basis_count},
          {"normalization", to_string(c.normalization)},
          {"seed", c.seed}};
}

json linkpred_json(const LinkPredConfig& c) {
  return {{"num_layers", c.num_layers},
          {"embedding_dim", c.embedding_dim},
          {"decomposition", to_string(c.decomposition)},
          {"num_components", c.num_components},
          {"projection_input", c.projection_input},
          {"self_loop_dropout", c.self_loop_dropout},
          {"edge_dropout", c.edge_dropout},
          {"decoder_l2", c.decoder_l2},
          {"embedding_l2", c.embedding_l2},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"omega", c.omega},
          {"normalization", to_string(c.normalization)},
          {"eval_every", c.eval_every},
          {"validation_limit", c.validation_limit},
          {"seed", c.seed}};
}

// INI snapshot that `train --config` reads back to the same resolved run.
std::string snapshot_ini(const json& snap) {
  std::ostringstream ini;
  ini << "[train]\n";
  auto put = [&](const std::string& key, const json& value) {
    ini << key << "=" << (value.is_string() ? value.get<std::string>() : value.dump()) << "\n";
  };
  put("task", snap["task"]);
  for (const char* key : {"preset", "data_dir", "dataset", "synthetic"}) {
    const auto& v = snap["data"][key];
    if (!v.get<std::string>().empty()) {
      std::string flag = key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      put(flag, v);
    }
  }
  put("output", snap["output"]);
  put("precision", snap["precision"]);
  put("seed", snap["seed"]);
  put("threads", snap["threads"]);
  const auto& m = snap["model"];
  put("epochs", m["epochs"]);
  put("lr", m["learning_rate"]);
  put("layers", m["num_layers"]);
  put("normalization", m["normalization"]);
  if (snap["task"] == "classify") {
    put("hidden-dim", m["hidden_dim"]);
    put("l2", m["l2_first_layer"]);
    put("bases", m["basis_count"]);
    put("validation-fraction", snap["validation_fraction"]);
  } else {
    put("embedding-dim", m["embedding_dim"]);
    put("decomposition", m["decomposition"]);
    put("components", m["num_components"]);
    put("projection-input", m["projection_input"]);
    put("self-loop-dropout", m["self_loop_dropout"]);
    put("edge-dropout", m["edge_dropout"]);
    put("decoder-l2", m["decoder_l2"]);
    put("embedding-l2", m["embedding_l2"]);
    put("omega", m["omega"]);
    put("eval-every", m["eval_every"]);
    put("validation-limit", m["validation_limit"]);
  }
  return ini.str();
}

template <typename S>
int train_classify(const TrainOptions& o, const DatasetBundle& b, const ClassifierConfig& cfg,
                   json snap, std::ostream& out) {
  if (b.train_labels.empty()) throw DataError("dataset '" + b.name + "' has no training labels");
  const auto graph = b.train_graph();
  LabelSet train = b.train_labels;
  std::optional<LabelSet> validation;
  const double fraction = o.validation_fraction.value_or(0.0);
  if (fraction > 0.0) {
    auto [t, v] = split_validation(b.train_labels, fraction, o.seed);
    train = std::move(t);
    validation = std::move(v);
  }
  auto run = train_classifier<S>(graph, train, cfg, validation ? &*validation : nullptr);

  const fs::path dir = o.output;
  {
    auto f = open_out(dir / "metrics.jsonl");
    for (const auto& e : run.trace) {
      json line = {{"epoch", e.epoch}, {"loss", e.loss}, {"train_accuracy", e.train_accuracy}};
      if (e.validation_accuracy) line["validation_accuracy"] = *e.validation_accuracy;
      f << line.dump() << "\n";
    }
  }
  const auto predictions = predict_classes(run.model, graph);
  json summary = {{"task", "classify"}, {"epochs", cfg.epochs}};
  summary["train_accuracy"] = accuracy(predictions, b.train_labels);
  if (!b.test_labels.empty()) summary["test_accuracy"] = accuracy(predictions, b.test_labels);
  if (!run.trace.empty()) summary["final_loss"] = run.trace.back().loss;
  open_out(dir / "summary.json") << summary.dump(2) << "\n";

  ModelCheckpoint<S> ck;
  ck.task = TaskKind::classify;
  ck.entities = b.entities.names();
  ck.relations = b.relations.names();
  ck.classes = b.class_names;
  ck.normalization = cfg.normalization;
  ck.config_json = snap.dump();
  ck.encoder = run.model.encoder;
  save_checkpoint(dir / "model.ckpt", ck);

  out << "trained classifier on '" << b.name << "' for " << cfg.epochs << " epochs";
  if (summary.contains("final_loss")) out << ", final loss " << summary["final_loss"].get<double>();
  out << "\ntrain accuracy " << summary["train_accuracy"].get<double>();
  if (summary.contains("test_accuracy")) {
    out << ", test accuracy " << summary["test_accuracy"].get<double>();
  }
  out << "\nwrote " << (dir / "model.ckpt").string() << "\n";
  return kSuccess;
}

template <typename S>
int train_link(const TrainOptions& o, const DatasetBundle& b, const LinkPredConfig& cfg,
               json snap, std::ostream& out) {
  if (b.train.empty()) throw DataError("dataset '" + b.name + "' has no training triples");
  const auto graph = b.train_graph();
  const auto all = b.all_triples();
  const FilterSet filter(all);
  auto run = train_linkpred<S>(graph, cfg, b.valid, &filter);

  const fs::path dir = o.output;
  {
    auto f = open_out(dir / "metrics.jsonl");
    for (const auto& e : run.trace) {
      json line = {{"epoch", e.epoch}, {"loss", e.loss}};
      if (e.validation_mrr) line["validation_mrr"] = *e.validation_mrr;
      f << line.dump() << "\n";
    }
  }
  json summary = {{"task", "linkpred"}, {"epochs", cfg.epochs}, {"best_epoch", run.best_epoch}};
  if (run.best_validation_mrr) summary["best_validation_mrr"] = *run.best_validation_mrr;
  if (!run.trace.empty()) summary["final_loss"] = run.trace.back().loss;
  summary["parameters"] = run.model.parameter_count();
  open_out(dir / "summary.json") << summary.dump(2) << "\n";

  ModelCheckpoint<S> ck;
  ck.task = TaskKind::linkpred;
  ck.entities = b.entities.names();
  ck.relations = b.relations.names();
  ck.normalization = cfg.normalization;
  ck.config_json = snap.dump();
  ck.encoder = run.model.encoder;
  ck.diagonals = run.model.diagonals;
  save_checkpoint(dir / "model.ckpt", ck);

  out << "trained " << (cfg.num_layers == 0 ? "DistMult" : "R-GCN") << " on '" << b.name
      << "' for " << cfg.epochs << " epochs";
  if (summary.contains("final_loss")) out << ", final loss " << summary["final_loss"].get<double>();
  if (run.best_validation_mrr) {
    out << "\nbest validation filtered MRR " << *run.best_validation_mrr << " at epoch "
        << run.best_epoch;
  }
  out << "\nwrote " << (dir / "model.ckpt").string() << "\n";
  return kSuccess;
}

int cmd_train(const CLI::App* cmd, const TrainOptions& o, std::ostream& out) {
  const auto bundle = load_bundle(o.data, o.seed);
  const std::string task = resolve_task(o, bundle);
  json snap = {{"command", "train"}, {"task", task},         {"data", o.data.to_json()},
               {"output", o.output}, {"precision", o.precision}, {"seed", o.seed},
               {"threads", o.threads}};
  if (task == "classify") {
    reject_foreign_flags(cmd, kLinkOnly, task);
    const auto cfg = resolve_classifier(o);
    const double fraction = o.validation_fraction.value_or(0.0);
    if (fraction < 0.0 || fraction >= 1.0) {
      throw UsageError("--validation-fraction must lie in [0, 1)");
    }
    snap["model"] = classifier_json(cfg);
    snap["validation_fraction"] = fraction;
    ensure_dir(o.output);
    open_out(fs::path(o.output) / "config.json") << snap.dump(2) << "\n";
    open_out(fs::path(o.output) / "config.ini") << snapshot_ini(snap);
    return with_precision(o.precision, [&](auto tag) {
      return train_classify<decltype(tag)>(o, bundle, cfg, snap, out);
    });
  }
  reject_foreign_flags(cmd, kClassifyOnly, task);
  const auto cfg = resolve_linkpred(o);
  snap["model"] = linkpred_json(cfg);
  ensure_dir(o.output);
  open_out(fs::path(o.output) / "config.json") << snap.dump(2) << "\n";
  open_out(fs::path(o.output) / "config.ini") << snapshot_ini(snap);
  return with_precision(o.precision, [&](auto tag) {
    return train_link<decltype(tag)>(o, bundle, cfg, snap, out);
  });
}

// Loading trained models -------------------------------------------------------

struct LoadedModel {
  TaskKind task = TaskKind::linkpred;
  json config;
  std::vector<std::string> classes;
  std::unique_ptr<CandidateScorer> scorer;  // link prediction
  std::function<ClassPredictions(const KnowledgeGraph&)> classify;
};

template <typename S>
LoadedModel load_model_as(const fs::path& path, const DatasetBundle& b) {
  auto ck = load_checkpoint<S>(path);
  check_vocabulary(ck.entities, b.entities, "entities", path.string());
  check_vocabulary(ck.relations, b.relations, "relations", path.string());
  LoadedModel m;
  m.task = ck.task;
  m.config = json::parse(ck.config_json, nullptr, false);
  m.classes = ck.classes;
  const auto graph = b.train_graph();
  if (ck.task == TaskKind::linkpred) {
    LinkPredModel<S> model{ck.encoder, *ck.diagonals, ck.normalization};
    m.scorer = std::make_unique<DistMultScorer<S>>(model.scorer(graph));
  } else {
    if (!b.class_names.empty() && b.class_names != ck.classes) {
      throw DataError("vocabulary mismatch: " + path.string() +
                      " was trained on different classes than the dataset");
    }
    ClassifierModel<S> model{ck.encoder, static_cast<std::int32_t>(ck.classes.size()),
                             ck.normalization};
    m.classify = [model](const KnowledgeGraph& g) { return predict_classes(model, g); };
  }
  return m;
}

LoadedModel load_model(const fs::path& path, const DatasetBundle& b) {
  const auto header = read_checkpoint_header(path);
  return with_precision(header.precision,
                        [&](auto tag) { return load_model_as<decltype(tag)>(path, b); });
}

// Dataset options stored in a checkpoint, used when none are given.
DataOptions data_from_checkpoint(const fs::path& path, std::uint64_t& seed) {
  const auto header = read_checkpoint_header(path);
  const std::string text = with_precision(header.precision, [&](auto tag) {
    return load_checkpoint<decltype(tag)>(path).config_json;
  });
  const auto j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.contains("data")) {
    throw UsageError("checkpoint " + path.string() +
                     " records no dataset; pass --preset/--data-dir, --dataset or --synthetic");
  }
  seed = j.value("seed", std::uint64_t{0});
  return DataOptions::from_json(j["data"]);
}

// A bare data root (often just RGCN_DATA_DIR) relocates the checkpoint's own
// dataset instead of replacing it.
DatasetBundle bundle_for(const DataOptions& given, const fs::path& checkpoint) {
  if (!given.dataset.empty() || !given.synthetic.empty() ||
      (!given.preset.empty() && !given.data_dir.empty())) {
    return load_bundle(given, 0);
  }
  std::uint64_t seed = 0;
  DataOptions d = data_from_checkpoint(checkpoint, seed);
  if (!given.preset.empty()) d.preset = given.preset;
  if (!given.data_dir.empty() && d.dataset.empty() && d.synthetic.empty()) d.data_dir = given.data_dir;
  return load_bundle(d, seed);
}

std::vector<double> parse_boundaries(const std::vector<double>& raw) {
  for (std::size_t k = 1; k < raw.size(); ++k) {
    if (!(raw[k] > raw[k - 1])) {
      throw UsageError("--degree-buckets: boundaries must strictly increase");
    }
  }
  return raw;
}

json metrics_json(const RankingMetrics& m) {
  return {{"queries", m.queries},       {"mrr_raw", m.mrr_raw},     {"mrr_filtered", m.mrr_filtered},
          {"hits1", m.hits1},           {"hits3", m.hits3},         {"hits10", m.hits10},
          {"hits1_raw", m.hits1_raw},   {"hits3_raw", m.hits3_raw}, {"hits10_raw", m.hits10_raw}};
}

// Evaluate ---------------------------------------------------------------------

struct EvalOptions {
  DataOptions data;
  std::string checkpoint;
  std::string split = "test";
  std::string output;
  std::vector<double> degree_buckets;
  unsigned threads = 1;
};

fs::path output_or_default(const std::string& output, const fs::path& checkpoint) {
  if (!output.empty()) return output;
  const auto parent = checkpoint.parent_path();
  return parent.empty() ? fs::path(".") : parent;
}

int cmd_evaluate(const CLI::App* cmd, const EvalOptions& o, std::ostream& out) {
  const fs::path ckpt = o.checkpoint;
  const auto bundle = bundle_for(o.data, ckpt);
  const auto model = load_model(ckpt, bundle);
  const fs::path dir = output_or_default(o.output, ckpt);
  ensure_dir(dir);

  if (model.task == TaskKind::classify) {
    if (cmd->count("--degree-buckets") > 0) {
      throw UsageError("--degree-buckets applies to link prediction checkpoints only");
    }
    if (o.split == "valid") throw UsageError("classification datasets have no valid split");
    const auto& labels = o.split == "train" ? bundle.train_labels : bundle.test_labels;
    if (labels.empty()) throw DataError("dataset has no " + o.split + " labels");
    const auto predictions = model.classify(bundle.train_graph());
    const double acc = accuracy(predictions, labels);
    json report = {{"task", "classify"}, {"split", o.split}, {"labeled", labels.size()},
                   {"accuracy", acc}};
    open_out(dir / "eval_metrics.json") << report.dump(2) << "\n";
    out << "accuracy on " << o.split << " (" << labels.size() << " nodes): " << acc << "\n";
    return kSuccess;
  }

  const auto triples = split_triples(bundle, o.split);
  if (triples.empty()) throw DataError("split '" + o.split + "' is empty");
  const auto all = bundle.all_triples();
  const FilterSet filter(all);
  const auto report = rank_triples(*model.scorer, triples, &filter, o.threads);
  const auto metrics = aggregate(report);
  {
    auto f = open_out(dir / "ranking.jsonl");
    write_ranking_jsonl(f, report, &bundle.entities.names(), &bundle.relations.names());
  }
  json record = metrics_json(metrics);
  record["split"] = o.split;
  open_out(dir / "eval_metrics.json") << record.dump(2) << "\n";
  out << format_metrics_table({{model.config.value("model", json::object()).value("num_layers", 1) == 0
                                    ? "DistMult"
                                    : "R-GCN",
                                metrics}});
  if (cmd->count("--degree-buckets") > 0) {
    const auto boundaries = parse_boundaries(o.degree_buckets);
    const auto buckets = degree_bucket_mrr(report, bundle.train_graph(), boundaries);
    const auto table = format_degree_table(buckets);
    open_out(dir / "degree_buckets.tsv") << table;
    out << "\n" << table;
  }
  return kSuccess;
}

// Predict ----------------------------------------------------------------------

struct PredictOptions {
  DataOptions data;
  std::string checkpoint;
  std::string split = "test";
  std::string output;
  std::int32_t top_k = 10;
};

int cmd_predict(const PredictOptions& o, std::ostream& out) {
  const fs::path ckpt = o.checkpoint;
  const auto bundle = bundle_for(o.data, ckpt);
  const auto model = load_model(ckpt, bundle);
  const fs::path path =
      o.output.empty() ? output_or_default("", ckpt) / "predictions.jsonl" : fs::path(o.output);
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  auto f = open_out(path);
  std::size_t lines = 0;

  if (model.task == TaskKind::classify) {
    const auto predictions = model.classify(bundle.train_graph());
    const auto& labels = o.split == "train" ? bundle.train_labels : bundle.test_labels;
    std::vector<NodeId> nodes = labels.nodes;
    if (o.split == "all") {
      nodes.resize(static_cast<std::size_t>(bundle.entities.size()));
      std::iota(nodes.begin(), nodes.end(), 0);
    }
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const NodeId v = nodes[k];
      json probs = json::object();
      for (std::size_t c = 0; c < model.classes.size(); ++c) {
        probs[model.classes[c]] = predictions.probabilities(v, static_cast<Eigen::Index>(c));
      }
      json line = {{"entity", bundle.entities.name(v)},
                   {"predicted", model.classes.at(static_cast<std::size_t>(predictions.predicted[v]))},
                   {"probabilities", probs}};
      if (o.split != "all") line["label"] = model.classes.at(static_cast<std::size_t>(labels.classes[k]));
      f << line.dump() << "\n";
      ++lines;
    }
  } else {
    if (o.split == "all") throw UsageError("--split all applies to classification only");
    const auto triples = split_triples(bundle, o.split);
    std::vector<double> scores;
    for (const auto& t : triples) {
      model.scorer->score_candidates(t, Side::object, scores);
      std::vector<NodeId> order(scores.size());
      std::iota(order.begin(), order.end(), 0);
      const auto k = std::min<std::size_t>(static_cast<std::size_t>(o.top_k), order.size());
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                        [&](NodeId a, NodeId b) {
                          return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
                        });
      json candidates = json::array();
      for (std::size_t j = 0; j < k; ++j) {
        candidates.push_back({{"entity", bundle.entities.name(order[j])}, {"score", scores[order[j]]}});
      }
      f << json{{"subject", bundle.entities.name(t.subject)},
                {"relation", bundle.relations.name(t.relation)},
                {"object", bundle.entities.name(t.object)},
                {"score", scores[t.object]},
                {"top", candidates}}
               .dump()
        << "\n";
      ++lines;
    }
  }
  out << "wrote " << lines << " predictions to " << path.string() << "\n";
  return kSuccess;
}

// Ensemble ---------------------------------------------------------------------

struct EnsembleOptions {
  DataOptions data;
  std::string rgcn;
  std::string distmult;
  double alpha = 0.4;
  std::string split = "test";
  std::string output = "ensemble";
  unsigned threads = 1;
};

int cmd_ensemble(const EnsembleOptions& o, std::ostream& out) {
  if (!(o.alpha >= 0.0 && o.alpha <= 1.0)) throw UsageError("--alpha must lie in [0, 1]");
  const auto bundle = bundle_for(o.data, o.rgcn);
  const auto first = load_model(o.rgcn, bundle);
  const auto second = load_model(o.distmult, bundle);
  if (first.task != TaskKind::linkpred || second.task != TaskKind::linkpred) {
    throw UsageError("ensemble needs two link prediction checkpoints");
  }
  const auto triples = split_triples(bundle, o.split);
  if (triples.empty()) throw DataError("split '" + o.split + "' is empty");
  const auto all = bundle.all_triples();
  const FilterSet filter(all);
  const EnsembleScorer combined(*first.scorer, *second.scorer, o.alpha);

  const fs::path dir = o.output;
  ensure_dir(dir);
  json snap = {{"command", "ensemble"}, {"rgcn", o.rgcn}, {"distmult", o.distmult},
               {"alpha", o.alpha},      {"split", o.split}, {"data", o.data.to_json()},
               {"threads", o.threads}};
  open_out(dir / "config.json") << snap.dump(2) << "\n";

  const auto report = rank_triples(combined, triples, &filter, o.threads);
  {
    auto f = open_out(dir / "ranking.jsonl");
    write_ranking_jsonl(f, report, &bundle.entities.names(), &bundle.relations.names());
  }
  const auto m1 = aggregate(rank_triples(*first.scorer, triples, &filter, o.threads));
  const auto m2 = aggregate(rank_triples(*second.scorer, triples, &filter, o.threads));
  const auto m = aggregate(report);
  json record = {{"alpha", o.alpha},
                 {"split", o.split},
                 {"rgcn", metrics_json(m1)},
                 {"distmult", metrics_json(m2)},
                 {"ensemble", metrics_json(m)}};
  open_out(dir / "eval_metrics.json") << record.dump(2) << "\n";
  out << format_metrics_table({{"R-GCN", m1}, {"DistMult", m2}, {"R-GCN+", m}});
  return kSuccess;
}

// Gradient check ---------------------------------------------------------------

struct GradcheckOptions {
  int precision = 64;
  std::uint64_t seed = 0;
  std::size_t max_coordinates = 64;
  bool inject_fault = false;
};

// Adds 0.5 * ||p||^2 to `loss` with a backward pass that returns 2p instead of p.
template <typename S>
Tensor<S> faulty_term(Tape<S>& tape, const Tensor<S>& loss, const Tensor<S>& p) {
  Matrix<S> v(1, 1);
  v(0, 0) = static_cast<S>(0.5) * p.value().squaredNorm();
  auto bad = tape.record(std::move(v), {p}, [p](const Tensor<S>& out) {
    p.grad() += static_cast<S>(2) * out.grad()(0, 0) * p.value();
  });
  return ad::add(tape, loss, bad);
}

template <typename S>
int gradcheck_as(const GradcheckOptions& o, std::ostream& out) {
  const double threshold = sizeof(S) == 4 ? 1e-2 : 1e-4;
  const double step = sizeof(S) == 4 ? 1e-3 : 1e-6;
  // At 32 bits the step is wide enough to straddle ReLU boundaries.
  const double kink_tolerance = sizeof(S) == 4 ? threshold : 0.0;
  Rng rng(o.seed, 0x6763);
  const std::int32_t nodes = 8;
  const std::int32_t relations = 3;
  const auto graph = KnowledgeGraph::build(random_triples(nodes, relations, 16, rng), nodes, relations);
  LabelSet labels;
  labels.num_classes = 3;
  for (NodeId v = 0; v < nodes; v += 2) {
    labels.nodes.push_back(v);
    labels.classes.push_back(static_cast<std::int32_t>(rng.index(3)));
  }
  std::vector<Triple> positives(graph.triples().begin(), graph.triples().end());
  const auto negatives = sample_negatives(positives, nodes, 2, rng);

  struct Case {
    std::string name;
    std::function<Tensor<S>(Tape<S>&)> loss;
    std::vector<Tensor<S>> params;
  };
  std::vector<Case> cases;

  for (std::int64_t bases : {std::int64_t{0}, std::int64_t{2}}) {
    ClassifierConfig c;
    c.hidden_dim = 4;
    c.basis_count = bases;
    c.l2_first_layer = 0.01;
    c.seed = o.seed;
    c.normalization = bases == 0 ? NormalizationMode::per_relation
                                 : NormalizationMode::across_relations;
    auto model = ClassifierModel<S>::create(graph, labels.num_classes, c);
    auto norm = std::make_shared<Normalization>(graph, c.normalization);
    const double l2 = c.l2_first_layer;
    cases.push_back({bases == 0 ? "classify/full" : "classify/basis",
                     [model, norm, &graph, labels, l2](Tape<S>& tape) {
                       auto probs = model.encoder.encode(tape, graph, *norm, false);
                       auto loss = classification_loss(tape, probs, labels);
                       for (const auto& w : model.encoder.layers().front().weight_matrices()) {
                         loss = ad::add(tape, loss,
                                        ad::scale(tape, ad::l2_norm_sq(tape, w), static_cast<S>(l2)));
                       }
                       return loss;
                     },
                     model.encoder.parameters()});
  }
  struct LinkCase {
    const char* name;
    std::int32_t layers;
    Decomposition decomposition;
    std::int64_t components;
    bool projection;
  };
  for (const auto& lc : {LinkCase{"linkpred/basis", 1, Decomposition::basis, 2, false},
                         LinkCase{"linkpred/block", 2, Decomposition::block, 2, true},
                         LinkCase{"linkpred/distmult", 0, Decomposition::full, 0, true}}) {
    LinkPredConfig c;
    c.num_layers = lc.layers;
    c.embedding_dim = 4;
    c.decomposition = lc.decomposition;
    c.num_components = lc.components;
    c.projection_input = lc.projection;
    c.seed = o.seed;
    auto model = LinkPredModel<S>::create(graph, c);
    auto norm = std::make_shared<Normalization>(graph, c.normalization);
    cases.push_back({lc.name,
                     [model, norm, &graph, positives, negatives](Tape<S>& tape) {
                       auto emb = model.encoder.encode(tape, graph, *norm, false);
                       return linkpred_loss(tape, emb, model.diagonals, positives, negatives, 0.01);
                     },
                     model.parameters()});
  }

  if (o.inject_fault) {
    auto& target = cases.front();
    auto inner = target.loss;
    auto p = target.params.front();
    target.loss = [inner, p](Tape<S>& tape) { return faulty_term(tape, inner(tape), p); };
  }

  double worst = 0.0;
  for (const auto& c : cases) {
    const auto report = finite_difference_check<S>(c.loss, c.params, step, o.max_coordinates,
                                                    o.seed, kink_tolerance);
    for (const auto& e : report.entries) {
      out << c.name << "/" << e.name << "  max_rel_err " << e.max_relative_error << "  ("
          << e.coordinates_checked << " coords";
      if (e.coordinates_skipped > 0) out << ", " << e.coordinates_skipped << " at kinks skipped";
      out << ")\n";
    }
    worst = std::max(worst, report.max_relative_error);
  }
  const bool pass = worst < threshold;
  out << "max relative error " << worst << " (threshold " << threshold << ", " << 8 * sizeof(S)
      << "-bit): " << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? kSuccess : kNumerical;
}

// Stats ------------------------------------------------------------------------

struct StatsOptions {
  DataOptions data;
  std::string expect;
  std::string export_dir;
};

int cmd_stats(const StatsOptions& o, std::ostream& out) {
  const auto bundle = load_bundle(o.data, 0);
  const auto stats = compute_stats(bundle);
  out << stats_to_json(stats) << "\n";
  for (const auto& line : bundle.log) out << "# " << line << "\n";
  if (!o.export_dir.empty()) {
    write_canonical_tsv(bundle, o.export_dir);
    out << "exported canonical TSV to " << o.export_dir << "\n";
  }
  const std::string name = !o.expect.empty() ? o.expect : o.data.preset;
  if (name.empty()) return kSuccess;
  const auto expected = published_stats(name);
  if (!expected) throw UsageError("no published statistics for '" + name + "'");
  const auto diff = validate_stats(stats, *expected);
  if (diff.pass) {
    out << "matches published statistics for " << name << "\n";
    return kSuccess;
  }
  for (const auto& line : diff.mismatches) out << "mismatch " << line << "\n";
  return kData;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Relational graph convolutional networks: entity classification and link "
               "prediction"};
  app.name("rgcn");
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from an INI file ([train], [evaluate], ...)");

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  add_train_options(train_cmd, train);

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "rank a split or score classification accuracy");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint file")->required();
  add_data_options(eval_cmd, eval.data, true);
  eval_cmd->add_option("--split", eval.split, "split to evaluate")
      ->check(CLI::IsMember({"train", "valid", "test"}))
      ->capture_default_str();
  eval_cmd->add_option("--output", eval.output, "output directory (default: checkpoint's)");
  eval_cmd->add_option("--degree-buckets", eval.degree_buckets,
                       "interior degree boundaries, comma separated; adds a per-bucket MRR table")
      ->delimiter(',');
  eval_cmd->add_option("--threads", eval.threads, "ranking worker threads")->capture_default_str();

  PredictOptions predict;
  auto* predict_cmd = app.add_subcommand("predict", "dump per-node or per-triple predictions");
  predict_cmd->add_option("--checkpoint", predict.checkpoint, "checkpoint file")->required();
  add_data_options(predict_cmd, predict.data, true);
  predict_cmd->add_option("--split", predict.split, "labels or triples to predict ('all' nodes)")
      ->check(CLI::IsMember({"train", "valid", "test", "all"}))
      ->capture_default_str();
  predict_cmd->add_option("--output", predict.output, "JSONL file (default: next to checkpoint)");
  predict_cmd->add_option("--top-k", predict.top_k, "candidate objects per triple")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  EnsembleOptions ens;
  auto* ens_cmd = app.add_subcommand("ensemble", "rank with alpha * R-GCN + (1 - alpha) * DistMult");
  ens_cmd->add_option("--rgcn", ens.rgcn, "R-GCN checkpoint")->required();
  ens_cmd->add_option("--distmult", ens.distmult, "DistMult checkpoint")->required();
  ens_cmd->add_option("--alpha", ens.alpha, "mixing weight; 0.4 (selected on FB15k)")
      ->capture_default_str();
  add_data_options(ens_cmd, ens.data, true);
  ens_cmd->add_option("--split", ens.split, "split to rank")
      ->check(CLI::IsMember({"train", "valid", "test"}))
      ->capture_default_str();
  ens_cmd->add_option("--output", ens.output, "output directory")->capture_default_str();
  ens_cmd->add_option("--threads", ens.threads, "ranking worker threads")->capture_default_str();

  GradcheckOptions grad;
  auto* grad_cmd = app.add_subcommand(
      "gradcheck", "finite-difference check of both task losses on a small random graph");
  grad_cmd->add_option("--precision", grad.precision, "32 (threshold 1e-2) or 64 (threshold 1e-4)")
      ->check(CLI::IsMember({32, 64}))
      ->capture_default_str();
  grad_cmd->add_option("--seed", grad.seed, std::string("graph and init seed; ") + kUnspecified)
      ->capture_default_str();
  grad_cmd->add_option("--max-coordinates", grad.max_coordinates,
                       "sampled coordinates per parameter")
      ->capture_default_str();
  grad_cmd->add_flag("--inject-fault", grad.inject_fault)->group("");

  StatsOptions stats;
  auto* stats_cmd = app.add_subcommand("stats", "dataset counts, optionally checked against "
                                                "published ones");
  add_data_options(stats_cmd, stats.data, true);
  stats_cmd->add_option("--expect", stats.expect, "compare with published counts of this dataset");
  stats_cmd->add_option("--export", stats.export_dir, "also write a canonical TSV export here");

  // `rgcn train --config f.ini` reads as naturally as `rgcn --config f.ini train`.
  std::vector<std::string> argv_storage{"rgcn"};
  std::vector<std::string> rest;
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--config" && k + 1 < args.size()) {
      argv_storage.push_back(args[k]);
      argv_storage.push_back(args[++k]);
    } else if (args[k].rfind("--config=", 0) == 0) {
      argv_storage.push_back(args[k]);
    } else {
      rest.push_back(args[k]);
    }
  }
  argv_storage.insert(argv_storage.end(), rest.begin(), rest.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_cmd, train, out);
    if (eval_cmd->parsed()) return cmd_evaluate(eval_cmd, eval, out);
    if (predict_cmd->parsed()) return cmd_predict(predict, out);
    if (ens_cmd->parsed()) return cmd_ensemble(ens, out);
    if (grad_cmd->parsed()) {
      return with_precision(grad.precision,
                            [&](auto tag) { return gradcheck_as<decltype(tag)>(grad, out); });
    }
    if (stats_cmd->parsed()) return cmd_stats(stats, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

}  // namespace rgcn::cli
