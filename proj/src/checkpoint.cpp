#include "rgcn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "rgcn/error.hpp"

namespace rgcn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(TaskKind task) {
  return task == TaskKind::classify ? "classify" : "linkpred";
}

namespace {

constexpr char kMagic[8] = {'R', 'G', 'C', 'N', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const char* data, std::size_t size) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (std::size_t k = 0; k < size; ++k) {
    hash ^= static_cast<unsigned char>(data[k]);
    hash *= 0x100000001b3ull;
  }
  return hash;
}

template <typename T>
void put(std::string& buf, const T& value) {
  buf.append(reinterpret_cast<const char*>(&value), sizeof(T));
}

[[noreturn]] void corrupt(const fs::path& path, const std::string& what) {
  throw DataError("checkpoint " + path.string() + ": " + what);
}

class Reader {
 public:
  Reader(const fs::path& path, const std::string& bytes) : path_(path), bytes_(bytes) {}

  template <typename T>
  T get() {
    T value;
    std::memcpy(&value, take(sizeof(T)), sizeof(T));
    return value;
  }
  const char* take(std::size_t n) {
    if (bytes_.size() - pos_ < n) corrupt(path_, "truncated");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const fs::path& path_;
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint " + path.string() + ": cannot open");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

/// Verifies magic, version and checksum; returns the metadata and the offset
/// of the tensor payload.
std::pair<json, std::size_t> open_container(const fs::path& path, const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) + 4 + 8 + 8) corrupt(path, "truncated");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) corrupt(path, "bad magic");
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, 8);
  if (stored != fnv1a(bytes.data(), body)) corrupt(path, "checksum mismatch");
  Reader reader(path, bytes);
  reader.take(sizeof(kMagic));
  const auto version = reader.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    corrupt(path, "unsupported version " + std::to_string(version));
  }
  const auto length = reader.get<std::uint64_t>();
  if (length > reader.remaining()) corrupt(path, "truncated metadata");
  const char* text = reader.take(static_cast<std::size_t>(length));
  json meta = json::parse(text, text + length, nullptr, false);
  if (meta.is_discarded() || !meta.is_object()) corrupt(path, "metadata is not valid JSON");
  return {std::move(meta), sizeof(kMagic) + 4 + 8 + static_cast<std::size_t>(length)};
}

TaskKind parse_task(const fs::path& path, const json& meta) {
  const auto task = meta.value("task", std::string());
  if (task == "classify") return TaskKind::classify;
  if (task == "linkpred") return TaskKind::linkpred;
  corrupt(path, "unknown task '" + task + "'");
}

template <typename S>
std::vector<Tensor<S>> ordered_tensors(const ModelCheckpoint<S>& ckpt) {
  std::vector<Tensor<S>> all = ckpt.encoder.parameters();
  if (ckpt.diagonals) all.push_back(*ckpt.diagonals);
  return all;
}

}  // namespace

template <typename S>
void save_checkpoint(const fs::path& path, const ModelCheckpoint<S>& ckpt) {
  const auto& enc = ckpt.encoder;
  json meta;
  meta["task"] = to_string(ckpt.task);
  meta["precision"] = static_cast<int>(sizeof(S) * 8);
  meta["num_nodes"] = enc.num_nodes();
  meta["num_relations"] = enc.num_relations();
  meta["entities"] = ckpt.entities;
  meta["relations"] = ckpt.relations;
  meta["classes"] = ckpt.classes;
  meta["normalization"] = ckpt.normalization == NormalizationMode::per_relation
                              ? "per-relation"
                              : "across-relations";
  meta["input"] = {{"kind", enc.input().kind == InputMode::Kind::one_hot ? "one-hot" : "projection"},
                   {"dim", enc.input().dim}};
  meta["layers"] = json::array();
  for (const auto& layer : enc.layers()) {
    const auto& s = layer.spec;
    meta["layers"].push_back({{"in_dim", s.in_dim},
                              {"out_dim", s.out_dim},
                              {"decomposition", to_string(s.decomposition)},
                              {"num_components", s.num_components},
                              {"activation", to_string(s.activation)}});
  }
  if (enc.dropout()) {
    const auto& d = *enc.dropout();
    meta["dropout"] = {{"self_loop_rate", d.self_loop_rate},
                       {"edge_rate", d.edge_rate},
                       {"seed", d.seed},
                       {"rescale", d.rescale}};
  } else {
    meta["dropout"] = nullptr;
  }
  meta["has_diagonals"] = ckpt.diagonals.has_value();
  const json config = json::parse(ckpt.config_json, nullptr, false);
  if (config.is_discarded()) throw UsageError("save_checkpoint: config_json is not valid JSON");
  meta["config"] = config;
  const auto tensors = ordered_tensors(ckpt);
  meta["tensors"] = json::array();
  for (const auto& t : tensors) {
    meta["tensors"].push_back({{"name", t.name()}, {"rows", t.rows()}, {"cols", t.cols()}});
  }

  const std::string text = meta.dump();
  std::string buf(kMagic, sizeof(kMagic));
  put(buf, kCheckpointVersion);
  put(buf, static_cast<std::uint64_t>(text.size()));
  buf += text;
  for (const auto& t : tensors) {
    buf.append(reinterpret_cast<const char*>(t.value().data()),
               static_cast<std::size_t>(t.value().size()) * sizeof(S));
  }
  put(buf, fnv1a(buf.data(), buf.size()));

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("checkpoint " + path.string() + ": cannot write");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("checkpoint " + path.string() + ": write failed");
}

CheckpointHeader read_checkpoint_header(const fs::path& path) {
  const auto bytes = read_file(path);
  const auto [meta, offset] = open_container(path, bytes);
  CheckpointHeader h;
  h.version = kCheckpointVersion;
  h.task = parse_task(path, meta);
  h.precision = meta.value("precision", 0);
  if (h.precision != 32 && h.precision != 64) corrupt(path, "unknown precision");
  return h;
}

template <typename S>
ModelCheckpoint<S> load_checkpoint(const fs::path& path) {
  const auto bytes = read_file(path);
  const auto [meta, offset] = open_container(path, bytes);
  try {
    if (meta.at("precision").get<int>() != static_cast<int>(sizeof(S) * 8)) {
      corrupt(path, "stores " + std::to_string(meta.at("precision").get<int>()) +
                        "-bit values, requested " + std::to_string(sizeof(S) * 8));
    }
    ModelCheckpoint<S> ckpt;
    ckpt.task = parse_task(path, meta);
    ckpt.entities = meta.at("entities").get<std::vector<std::string>>();
    ckpt.relations = meta.at("relations").get<std::vector<std::string>>();
    ckpt.classes = meta.at("classes").get<std::vector<std::string>>();
    ckpt.normalization = meta.at("normalization").get<std::string>() == "per-relation"
                             ? NormalizationMode::per_relation
                             : NormalizationMode::across_relations;
    ckpt.config_json = meta.at("config").dump();
    const auto num_nodes = meta.at("num_nodes").get<std::int32_t>();
    const auto num_relations = meta.at("num_relations").get<std::int32_t>();
    const auto& in = meta.at("input");
    const InputMode input = in.at("kind").get<std::string>() == "one-hot"
                                ? InputMode::one_hot()
                                : InputMode::projection(in.at("dim").get<std::int64_t>());

    // Tensor payload, in metadata order.
    const auto& listing = meta.at("tensors");
    std::size_t pos = offset;
    std::size_t next = 0;
    auto take = [&](std::int64_t rows, std::int64_t cols) {
      if (next >= listing.size()) corrupt(path, "fewer tensors than the model needs");
      const auto& entry = listing[next++];
      if (entry.at("rows").get<std::int64_t>() != rows ||
          entry.at("cols").get<std::int64_t>() != cols) {
        corrupt(path, "tensor '" + entry.at("name").get<std::string>() +
                          "' does not match its layer spec");
      }
      const std::size_t n = static_cast<std::size_t>(rows * cols) * sizeof(S);
      if (bytes.size() - 8 - pos < n) corrupt(path, "truncated tensor data");
      Matrix<S> value(rows, cols);
      std::memcpy(value.data(), bytes.data() + pos, n);
      pos += n;
      return Tensor<S>::parameter(std::move(value), entry.at("name").get<std::string>());
    };

    std::optional<Tensor<S>> embedding;
    if (input.kind == InputMode::Kind::projection) embedding = take(num_nodes, input.dim);
    std::vector<LayerParams<S>> layers;
    for (const auto& l : meta.at("layers")) {
      LayerParams<S> p;
      p.spec.in_dim = l.at("in_dim").get<std::int64_t>();
      p.spec.out_dim = l.at("out_dim").get<std::int64_t>();
      p.spec.decomposition = parse_decomposition(l.at("decomposition").get<std::string>());
      p.spec.num_components = l.at("num_components").get<std::int64_t>();
      p.spec.activation = parse_activation(l.at("activation").get<std::string>());
      p.spec.validate();
      p.num_relations = 2 * num_relations;
      const auto in_dim = p.spec.in_dim;
      const auto out_dim = p.spec.out_dim;
      switch (p.spec.decomposition) {
        case Decomposition::full:
          for (std::int32_t r = 0; r < p.num_relations; ++r) p.weights.push_back(take(in_dim, out_dim));
          break;
        case Decomposition::basis:
          for (std::int64_t b = 0; b < p.spec.num_components; ++b) {
            p.weights.push_back(take(in_dim, out_dim));
          }
          p.coefficients = take(p.num_relations, p.spec.num_components);
          break;
        case Decomposition::block:
          for (std::int32_t r = 0; r < p.num_relations; ++r) {
            p.weights.push_back(take(out_dim, in_dim / p.spec.num_components));
          }
          break;
      }
      p.self_weight = take(in_dim, out_dim);
      layers.push_back(std::move(p));
    }
    ckpt.encoder = Encoder<S>::assemble(num_nodes, num_relations, input, std::move(embedding),
                                        std::move(layers));
    if (!meta.at("dropout").is_null()) {
      const auto& d = meta.at("dropout");
      ckpt.encoder.set_dropout(DropoutPolicy{d.at("self_loop_rate").get<double>(),
                                             d.at("edge_rate").get<double>(),
                                             d.at("seed").get<std::uint64_t>(),
                                             d.at("rescale").get<bool>()});
    }
    if (meta.at("has_diagonals").get<bool>()) {
      ckpt.diagonals = take(num_relations, ckpt.encoder.output_dim());
    }
    if (next != listing.size() || pos != bytes.size() - 8) {
      corrupt(path, "tensor payload does not match the metadata");
    }
    if (static_cast<std::int32_t>(ckpt.entities.size()) != num_nodes ||
        static_cast<std::int32_t>(ckpt.relations.size()) != num_relations) {
      corrupt(path, "vocabulary sizes do not match the model");
    }
    return ckpt;
  } catch (const json::exception& e) {
    corrupt(path, std::string("malformed metadata: ") + e.what());
  } catch (const UsageError& e) {
    corrupt(path, std::string("inconsistent model: ") + e.what());
  } catch (const ShapeError& e) {
    corrupt(path, std::string("inconsistent model: ") + e.what());
  }
}

template void save_checkpoint<float>(const fs::path&, const ModelCheckpoint<float>&);
template void save_checkpoint<double>(const fs::path&, const ModelCheckpoint<double>&);
template ModelCheckpoint<float> load_checkpoint<float>(const fs::path&);
template ModelCheckpoint<double> load_checkpoint<double>(const fs::path&);

}  // namespace rgcn
