#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "rgcn/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = rgcn::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("rgcn_cli_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
    ::unsetenv("RGCN_DATA_DIR");
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& rel) const { return (path / rel).string(); }
  void write(const std::string& rel, const std::string& text) const {
    fs::create_directories((path / rel).parent_path());
    std::ofstream(path / rel) << text;
  }
};

json read_json(const std::string& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::vector<json> read_jsonl(const std::string& p) {
  std::ifstream in(p);
  std::vector<json> rows;
  std::string line;
  while (std::getline(in, line)) rows.push_back(json::parse(line));
  return rows;
}

std::string slurp(const std::string& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("classification train, evaluate, predict") {
  TempDir t;
  auto r = cli({"train", "--synthetic", "two-component", "--output", t / "c"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (const char* f : {"config.json", "config.ini", "metrics.jsonl", "summary.json", "model.ckpt"}) {
    CHECK(fs::exists(t.path / "c" / f));
  }
  const auto cfg = read_json(t / "c/config.json");
  CHECK(cfg["task"] == "classify");
  CHECK(cfg["model"]["epochs"] == 50);
  CHECK(read_jsonl(t / "c/metrics.jsonl").size() == 50);
  CHECK(read_json(t / "c/summary.json")["test_accuracy"].get<double>() >= 0.9);

  r = cli({"evaluate", "--checkpoint", t / "c/model.ckpt"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("accuracy on test") != std::string::npos);
  CHECK(read_json(t / "c/eval_metrics.json")["task"] == "classify");

  r = cli({"predict", "--checkpoint", t / "c/model.ckpt", "--split", "all"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto rows = read_jsonl(t / "c/predictions.jsonl");
  REQUIRE_FALSE(rows.empty());
  CHECK(rows[0].contains("predicted"));
  CHECK(rows[0]["probabilities"].size() == 2);

  CHECK(cli({"evaluate", "--checkpoint", t / "c/model.ckpt", "--degree-buckets", "2"}).code == 1);
}

TEST_CASE("link prediction train, evaluate, ensemble") {
  TempDir t;
  auto r = cli({"train", "--synthetic", "two-hop", "--layers", "1", "--epochs", "15", "--output", t / "r"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  r = cli({"train", "--synthetic", "two-hop", "--layers", "0", "--epochs", "15", "--output", t / "d"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(read_jsonl(t / "r/metrics.jsonl").size() == 15);
  CHECK(read_json(t / "r/config.json")["task"] == "linkpred");

  r = cli({"evaluate", "--checkpoint", t / "r/model.ckpt", "--degree-buckets", "2,4,8"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (const char* col : {"MRR Raw", "MRR Filt", "Hits@1", "Hits@3", "Hits@10", "R-GCN"}) {
    CHECK(r.out.find(col) != std::string::npos);
  }
  const auto metrics = read_json(t / "r/eval_metrics.json");
  CHECK(metrics["mrr_filtered"].get<double>() >= metrics["mrr_raw"].get<double>());
  CHECK(fs::exists(t.path / "r/degree_buckets.tsv"));
  const auto rgcn_rows = read_jsonl(t / "r/ranking.jsonl");
  CHECK(rgcn_rows.size() == metrics["queries"].get<std::size_t>());

  r = cli({"ensemble", "--rgcn", t / "r/model.ckpt", "--distmult", t / "d/model.ckpt", "--output", t / "e"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(read_json(t / "e/config.json")["alpha"] == 0.4);
  CHECK(r.out.find("R-GCN+") != std::string::npos);
  const auto ens = read_json(t / "e/eval_metrics.json");
  for (const char* k : {"rgcn", "distmult", "ensemble"}) CHECK(ens.contains(k));
  CHECK(ens["rgcn"]["mrr_filtered"] == metrics["mrr_filtered"]);

  r = cli({"ensemble", "--rgcn", t / "r/model.ckpt", "--distmult", t / "d/model.ckpt", "--alpha", "1",
           "--output", t / "e1"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto alpha_one = read_jsonl(t / "e1/ranking.jsonl");
  REQUIRE(alpha_one.size() == rgcn_rows.size());
  for (std::size_t k = 0; k < rgcn_rows.size(); ++k) {
    CHECK(alpha_one[k]["raw_rank"] == rgcn_rows[k]["raw_rank"]);
    CHECK(alpha_one[k]["filtered_rank"] == rgcn_rows[k]["filtered_rank"]);
  }
  CHECK(cli({"ensemble", "--rgcn", t / "r/model.ckpt", "--distmult", t / "d/model.ckpt", "--alpha", "1.5"}).code == 1);

  // A data root from the environment does not hide the checkpoint's dataset.
  ::setenv("RGCN_DATA_DIR", (t / "elsewhere").c_str(), 1);
  r = cli({"ensemble", "--rgcn", t / "r/model.ckpt", "--distmult", t / "d/model.ckpt", "--output", t / "e2"});
  ::unsetenv("RGCN_DATA_DIR");
  CHECK_MESSAGE(r.code == 0, r.err);

  r = cli({"predict", "--checkpoint", t / "r/model.ckpt", "--top-k", "3"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto preds = read_jsonl(t / "r/predictions.jsonl");
  REQUIRE_FALSE(preds.empty());
  CHECK(preds[0]["top"].size() == 3);
}

TEST_CASE("a config.ini snapshot reproduces the run") {
  TempDir t;
  auto r = cli({"train", "--synthetic", "two-hop", "--layers", "1", "--epochs", "5", "--seed", "3",
                "--output", t / "a"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  r = cli({"train", "--config", t / "a/config.ini", "--output", t / "b"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(slurp(t / "a/metrics.jsonl") == slurp(t / "b/metrics.jsonl"));
  auto a = read_json(t / "a/config.json");
  auto b = read_json(t / "b/config.json");
  CHECK(a["model"] == b["model"]);
}

TEST_CASE("gradcheck exit codes") {
  auto r = cli({"gradcheck"});
  CHECK_MESSAGE(r.code == 0, r.out);
  CHECK(r.out.find("PASS") != std::string::npos);
  r = cli({"gradcheck", "--precision", "32"});
  CHECK_MESSAGE(r.code == 0, r.out);
  CHECK(r.out.find("threshold 0.01, 32-bit): PASS") != std::string::npos);
  CHECK(cli({"gradcheck", "--inject-fault"}).code == 3);
  CHECK(cli({"gradcheck", "--precision", "32", "--inject-fault"}).code == 3);
  CHECK(cli({"gradcheck", "--precision", "16"}).code == 1);
}

TEST_CASE("usage errors exit 1") {
  CHECK(cli({}).code == 1);
  CHECK(cli({"fly"}).code == 1);
  CHECK(cli({"train", "--synthetic", "two-hop", "--bogus"}).code == 1);
  auto r = cli({"train", "--synthetic", "two-hop", "--hidden-dim", "5", "--output", "/tmp/never_used_rgcn"});
  CHECK(r.code == 1);
  CHECK(r.err.find("--hidden-dim") != std::string::npos);
  CHECK(cli({"train", "--synthetic", "two-component", "--edge-dropout", "0.1"}).code == 1);
  CHECK(cli({"train"}).code == 1);
  CHECK(cli({"train", "--preset", "cora"}).code == 1);
  CHECK(cli({"evaluate"}).code == 1);
}

TEST_CASE("help marks defaults that are not fixed by the published setup") {
  auto r = cli({"train", "--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("unspecified in paper") != std::string::npos);
  CHECK(r.out.find("--inject-fault") == std::string::npos);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("missing or inconsistent data exits 2") {
  TempDir t;
  auto r = cli({"train", "--preset", "aifb"});
  CHECK(r.code == 2);
  CHECK(r.err.find("--data-dir") != std::string::npos);
  CHECK(cli({"train", "--preset", "fb15k-237", "--data-dir", t / "nothing"}).code == 2);
  CHECK(cli({"train", "--dataset", t / "nothing"}).code == 2);

  t.write("bad/train.txt", "a\tr\tb\nbroken line\n");
  t.write("bad/valid.txt", "a\tr\tb\n");
  t.write("bad/test.txt", "a\tr\tb\n");
  r = cli({"stats", "--dataset", t / "bad"});
  CHECK(r.code == 2);
  CHECK(r.err.find("train.txt:2") != std::string::npos);
}

TEST_CASE("corrupted checkpoint and vocabulary mismatch exit 2") {
  TempDir t;
  REQUIRE(cli({"train", "--synthetic", "two-component", "--epochs", "2", "--output", t / "c"}).code == 0);
  fs::copy_file(t.path / "c/model.ckpt", t.path / "broken.ckpt");
  {
    std::fstream f(t / "broken.ckpt", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(40);
    f.put('\x7f');
  }
  auto r = cli({"evaluate", "--checkpoint", t / "broken.ckpt", "--synthetic", "two-component"});
  CHECK(r.code == 2);
  CHECK(r.err.find("checksum") != std::string::npos);

  r = cli({"evaluate", "--checkpoint", t / "c/model.ckpt", "--synthetic", "two-hop"});
  CHECK(r.code == 2);
  CHECK(r.err.find("vocabulary mismatch") != std::string::npos);
  CHECK(cli({"evaluate", "--checkpoint", t / "missing.ckpt"}).code == 2);
}

TEST_CASE("presets resolve from a data root") {
  TempDir t;
  t.write("data/fb15k-237/train.txt", "a\tr\tb\nb\ts\tc\nc\tr\ta\nd\ts\ta\n");
  t.write("data/fb15k-237/valid.txt", "a\tr\tc\n");
  t.write("data/fb15k-237/test.txt", "b\tr\td\n");
  auto r = cli({"train", "--preset", "fb15k-237", "--data-dir", t / "data", "--epochs", "1",
                "--output", t / "fb"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto snap = read_json(t / "fb/config.json");
  CHECK(snap["model"]["decomposition"] == "block");
  CHECK(snap["model"]["num_components"] == 100);
  CHECK(snap["model"]["embedding_dim"] == 500);
  CHECK(snap["model"]["num_layers"] == 2);
  CHECK(snap["model"]["normalization"] == "across-relations");
  CHECK(snap["data"]["preset"] == "fb15k-237");

  r = cli({"stats", "--preset", "fb15k-237", "--data-dir", t / "data"});
  CHECK(r.code == 2);
  CHECK(r.out.find("mismatch entities: expected 14541, got 4") != std::string::npos);

  t.write("data/aifb/aifb.nt",
          "<http://e/p1> <http://e/worksAt> <http://e/g1> .\n"
          "<http://e/p2> <http://e/worksAt> <http://e/g2> .\n"
          "<http://e/p3> <http://e/worksAt> <http://e/g1> .\n"
          "<http://e/p4> <http://e/worksAt> <http://e/g2> .\n"
          "<http://e/g1> <http://e/employs> <http://e/p1> .\n"
          "<http://e/p1> <http://e/affiliation> <http://e/g1> .\n");
  t.write("data/aifb/trainingSet.tsv",
          "id\tperson\tlabel_affiliation\n1\thttp://e/p1\tA\n2\thttp://e/p2\tB\n");
  t.write("data/aifb/testSet.tsv",
          "id\tperson\tlabel_affiliation\n3\thttp://e/p3\tA\n4\thttp://e/p4\tB\n");
  r = cli({"train", "--preset", "aifb", "--data-dir", t / "data", "--output", t / "aifb"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto cfg = read_json(t / "aifb/config.json");
  CHECK(cfg["model"]["epochs"] == 50);
  CHECK(cfg["model"]["hidden_dim"] == 16);
  CHECK(cfg["model"]["l2_first_layer"] == 0.0);
  CHECK(cfg["model"]["basis_count"] == 0);
  CHECK(read_jsonl(t / "aifb/metrics.jsonl").size() == 50);
  CHECK(read_json(t / "aifb/summary.json")["test_accuracy"] == 1.0);

  r = cli({"stats", "--preset", "aifb", "--data-dir", t / "data"});
  CHECK(r.out.find("removed 1 statements with http://e/employs") != std::string::npos);
}

TEST_CASE("stats export round trips through --dataset") {
  TempDir t;
  auto r = cli({"stats", "--synthetic", "two-hop", "--export", t / "x"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto first = r.out.substr(0, r.out.find('\n'));
  r = cli({"stats", "--dataset", t / "x"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.substr(0, r.out.find('\n')) == first);
}
