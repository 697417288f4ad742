#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "rgcn/checkpoint.hpp"
#include "rgcn/classify.hpp"
#include "rgcn/error.hpp"
#include "rgcn/linkpred.hpp"
#include "rgcn/random.hpp"

using namespace rgcn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("rgcn_ckpt_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const fs::path& p, const std::vector<char>& b) {
  std::ofstream(p, std::ios::binary).write(b.data(), static_cast<std::streamsize>(b.size()));
}

std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 14695981039346656037ull;
  for (std::size_t k = 0; k < n; ++k) {
    h ^= static_cast<unsigned char>(data[k]);
    h *= 1099511628211ull;
  }
  return h;
}

void reseal(std::vector<char>& b) {
  const auto h = fnv1a(b.data(), b.size() - 8);
  std::memcpy(b.data() + b.size() - 8, &h, 8);
}

KnowledgeGraph graph() {
  Rng rng(1);
  std::vector<Triple> t;
  for (int k = 0; k < 20; ++k) {
    t.push_back({static_cast<int>(rng.index(6)), static_cast<int>(rng.index(2)), static_cast<int>(rng.index(6))});
  }
  return KnowledgeGraph::build(t, 6, 2);
}

template <typename S>
ModelCheckpoint<S> linkpred_checkpoint(const KnowledgeGraph& g) {
  LinkPredConfig c;
  c.embedding_dim = 4;
  c.num_layers = 2;
  c.decomposition = Decomposition::block;
  c.num_components = 2;
  c.projection_input = true;
  const auto m = LinkPredModel<S>::create(g, c);
  ModelCheckpoint<S> ck;
  ck.task = TaskKind::linkpred;
  ck.entities = {"a", "b", "c", "d", "e", "f"};
  ck.relations = {"r", "s"};
  ck.normalization = NormalizationMode::across_relations;
  ck.config_json = R"({"epochs": 3, "note": "x"})";
  ck.encoder = m.encoder;
  ck.diagonals = m.diagonals;
  return ck;
}

template <typename S>
ModelCheckpoint<S> classify_checkpoint(const KnowledgeGraph& g) {
  ClassifierConfig c;
  c.basis_count = 2;
  const auto m = ClassifierModel<S>::create(g, 3, c);
  ModelCheckpoint<S> ck;
  ck.task = TaskKind::classify;
  ck.entities = {"a", "b", "c", "d", "e", "f"};
  ck.relations = {"r", "s"};
  ck.classes = {"x", "y", "z"};
  ck.encoder = m.encoder;
  return ck;
}

template <typename S>
void check_same(const ModelCheckpoint<S>& a, const ModelCheckpoint<S>& b) {
  CHECK(a.task == b.task);
  CHECK(a.entities == b.entities);
  CHECK(a.relations == b.relations);
  CHECK(a.classes == b.classes);
  CHECK(a.normalization == b.normalization);
  CHECK(nlohmann::json::parse(a.config_json) == nlohmann::json::parse(b.config_json));
  CHECK(a.encoder.input() == b.encoder.input());
  REQUIRE(a.encoder.layers().size() == b.encoder.layers().size());
  for (std::size_t l = 0; l < a.encoder.layers().size(); ++l) {
    CHECK(a.encoder.layers()[l].spec == b.encoder.layers()[l].spec);
  }
  const auto pa = a.encoder.parameters();
  const auto pb = b.encoder.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t k = 0; k < pa.size(); ++k) {
    CHECK(pa[k].name() == pb[k].name());
    CHECK(pa[k].value() == pb[k].value());  // bit-exact
  }
  CHECK(a.diagonals.has_value() == b.diagonals.has_value());
  if (a.diagonals) CHECK(a.diagonals->value() == b.diagonals->value());
}

}  // namespace

TEST_CASE_TEMPLATE("checkpoints round trip bit-exactly", S, float, double) {
  TempDir d;
  const auto g = graph();
  for (const auto& ck : {linkpred_checkpoint<S>(g), classify_checkpoint<S>(g)}) {
    const auto p = d.path / "m.ckpt";
    save_checkpoint(p, ck);
    check_same(ck, load_checkpoint<S>(p));
    const auto h = read_checkpoint_header(p);
    CHECK(h.version == kCheckpointVersion);
    CHECK(h.task == ck.task);
    CHECK(h.precision == static_cast<int>(8 * sizeof(S)));
  }
}

TEST_CASE("a loaded link-prediction model scores like the original") {
  TempDir d;
  const auto g = graph();
  const auto ck = linkpred_checkpoint<double>(g);
  save_checkpoint(d.path / "m.ckpt", ck);
  const auto back = load_checkpoint<double>(d.path / "m.ckpt");
  const Normalization norm(g, back.normalization);
  Tape<double> t1(false), t2(false);
  CHECK(ck.encoder.encode(t1, g, norm, false).value() == back.encoder.encode(t2, g, norm, false).value());
}

TEST_CASE("corrupted checkpoints are data errors") {
  TempDir d;
  const auto g = graph();
  const auto p = d.path / "m.ckpt";
  save_checkpoint(p, linkpred_checkpoint<double>(g));
  const auto good = read_bytes(p);
  auto expect = [&](const std::vector<char>& bytes, const std::string& fragment) {
    write_bytes(p, bytes);
    try {
      load_checkpoint<double>(p);
      FAIL("expected DataError for " << fragment);
    } catch (const DataError& e) {
      CHECK_MESSAGE(std::string(e.what()).find(fragment) != std::string::npos, e.what());
    }
  };

  auto flipped = good;
  flipped[flipped.size() / 2] ^= 0x40;
  expect(flipped, "checksum mismatch");

  expect(std::vector<char>(good.begin(), good.begin() + static_cast<long>(good.size() - 100)),
         "checksum mismatch");
  expect(std::vector<char>(good.begin(), good.begin() + 10), "truncated");

  auto magic = good;
  magic[0] = 'X';
  expect(magic, "bad magic");

  auto version = good;
  version[8] = 9;
  reseal(version);
  expect(version, "unsupported version 9");

  // Drop one tensor's worth of payload but keep the checksum valid.
  auto short_payload = good;
  short_payload.erase(short_payload.end() - 8 - 16, short_payload.end() - 8);
  reseal(short_payload);
  expect(short_payload, "tensor");

  write_bytes(p, good);
  try {
    load_checkpoint<float>(p);
    FAIL("expected a precision mismatch");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("stores 64") != std::string::npos);
  }
  CHECK_THROWS_AS(load_checkpoint<double>(d.path / "missing.ckpt"), DataError);
  CHECK_THROWS_AS(read_checkpoint_header(d.path / "missing.ckpt"), DataError);
}

TEST_CASE("metadata is length-prefixed JSON after the magic") {
  TempDir d;
  const auto p = d.path / "m.ckpt";
  save_checkpoint(p, classify_checkpoint<double>(graph()));
  const auto b = read_bytes(p);
  CHECK(std::string(b.data(), 8) == "RGCNCKPT");
  std::uint32_t version;
  std::uint64_t n;
  std::memcpy(&version, b.data() + 8, 4);
  std::memcpy(&n, b.data() + 12, 8);
  CHECK(version == kCheckpointVersion);
  const auto meta = nlohmann::json::parse(std::string(b.data() + 20, n));
  CHECK(meta.is_object());
  std::uint64_t stored;
  std::memcpy(&stored, b.data() + b.size() - 8, 8);
  CHECK(stored == fnv1a(b.data(), b.size() - 8));
}

TEST_CASE("invalid config JSON is refused on save") {
  TempDir d;
  auto ck = classify_checkpoint<double>(graph());
  ck.config_json = "{not json";
  CHECK_THROWS_AS(save_checkpoint(d.path / "m.ckpt", ck), UsageError);
}
