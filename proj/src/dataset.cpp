#include "rgcn/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <unordered_set>

#include <json.hpp>

#include "rgcn/error.hpp"

namespace rgcn {

namespace fs = std::filesystem;

std::int32_t Vocabulary::intern(const std::string& name) {
  auto [it, inserted] = index_.try_emplace(name, size());
  if (inserted) names_.push_back(name);
  return it->second;
}

std::optional<std::int32_t> Vocabulary::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

KnowledgeGraph DatasetBundle::train_graph() const {
  return KnowledgeGraph::build(train, entities.size(), relations.size());
}

std::vector<Triple> DatasetBundle::all_triples() const {
  std::vector<Triple> all = train;
  all.insert(all.end(), valid.begin(), valid.end());
  all.insert(all.end(), test.begin(), test.end());
  return all;
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::string where(const fs::path& file, std::size_t line) {
  return file.string() + ":" + std::to_string(line);
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

void read_triple_split(const fs::path& path, bool is_train, UnseenPolicy unseen,
                       DatasetBundle& bundle, std::vector<Triple>& out) {
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
      throw DataError(where(path, line_no) + ": expected subject<TAB>relation<TAB>object, got " +
                      std::to_string(fields.size()) + " field(s)");
    }
    const std::string s(fields[0]), r(fields[1]), o(fields[2]);
    if (!is_train && unseen == UnseenPolicy::reject) {
      for (const auto* name : {&s, &o}) {
        if (!bundle.entities.find(*name)) {
          throw DataError(where(path, line_no) + ": entity '" + *name +
                          "' does not occur in the training split");
        }
      }
      if (!bundle.relations.find(r)) {
        throw DataError(where(path, line_no) + ": relation '" + r +
                        "' does not occur in the training split");
      }
    }
    out.push_back({bundle.entities.intern(s), bundle.relations.intern(r),
                   bundle.entities.intern(o)});
  }
  if (out.empty()) throw DataError(path.string() + ": no triples");
}

}  // namespace

DatasetBundle load_triple_tsv(const fs::path& train, const fs::path& valid,
                              const fs::path& test, UnseenPolicy unseen) {
  DatasetBundle bundle;
  bundle.name = train.parent_path().filename().string();
  read_triple_split(train, true, unseen, bundle, bundle.train);
  const auto train_entities = bundle.entities.size();
  const auto train_relations = bundle.relations.size();
  read_triple_split(valid, false, unseen, bundle, bundle.valid);
  read_triple_split(test, false, unseen, bundle, bundle.test);
  bundle.unseen_entities = static_cast<std::size_t>(bundle.entities.size() - train_entities);
  bundle.unseen_relations = static_cast<std::size_t>(bundle.relations.size() - train_relations);
  if (bundle.unseen_entities > 0 || bundle.unseen_relations > 0) {
    bundle.log.push_back(std::to_string(bundle.unseen_entities) + " entities and " +
                         std::to_string(bundle.unseen_relations) +
                         " relations occur only in valid/test");
  }
  return bundle;
}

DatasetBundle load_triple_dir(const fs::path& dir, UnseenPolicy unseen) {
  auto bundle = load_triple_tsv(dir / "train.txt", dir / "valid.txt", dir / "test.txt", unseen);
  bundle.name = dir.filename().string();
  return bundle;
}

// N-Triples -------------------------------------------------------------------

namespace {

class LineCursor {
 public:
  LineCursor(std::string_view text, std::size_t line_number)
      : text_(text), line_(line_number) {}

  void skip_space() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }
  bool done() const { return pos_ >= text_.size(); }
  char peek() const { return done() ? '\0' : text_[pos_]; }

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("N-Triples line " + std::to_string(line_) + ", column " +
                    std::to_string(pos_ + 1) + ": " + what);
  }

  RdfTerm iri() {
    const auto start = ++pos_;
    while (pos_ < text_.size() && text_[pos_] != '>') {
      if (text_[pos_] == ' ' || text_[pos_] == '<') fail("malformed IRI");
      ++pos_;
    }
    if (done()) fail("unterminated IRI");
    RdfTerm term{RdfTerm::Kind::iri, std::string(text_.substr(start, pos_ - start))};
    ++pos_;
    return term;
  }

  RdfTerm blank() {
    const auto start = pos_;
    if (text_.substr(pos_, 2) != "_:") fail("expected blank node");
    pos_ += 2;
    while (pos_ < text_.size() && text_[pos_] != ' ' && text_[pos_] != '\t' &&
           !(text_[pos_] == '.' && rest_is_terminator(pos_))) {
      ++pos_;
    }
    if (pos_ == start + 2) fail("empty blank node label");
    return {RdfTerm::Kind::blank, std::string(text_.substr(start, pos_ - start))};
  }

  RdfTerm literal() {
    const auto start = pos_++;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\') ++pos_;
      ++pos_;
    }
    if (done()) fail("unterminated literal");
    ++pos_;
    if (peek() == '@') {
      ++pos_;
      const auto tag = pos_;
      while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                     text_[pos_] == '-')) {
        ++pos_;
      }
      if (pos_ == tag) fail("empty language tag");
    } else if (text_.substr(pos_, 2) == "^^") {
      pos_ += 2;
      if (peek() != '<') fail("datatype must be an IRI");
      iri();
    }
    return {RdfTerm::Kind::literal, std::string(text_.substr(start, pos_ - start))};
  }

  RdfTerm term(bool allow_literal, bool allow_blank) {
    skip_space();
    const char c = peek();
    if (c == '<') return iri();
    if (c == '_' && allow_blank) return blank();
    if (c == '"' && allow_literal) return literal();
    fail(done() ? "unexpected end of line" : std::string("unexpected '") + c + "'");
  }

  void terminator() {
    skip_space();
    if (peek() != '.') fail("expected '.' at end of statement");
    ++pos_;
    skip_space();
    if (!done() && peek() != '#') fail("trailing content after '.'");
  }

 private:
  bool rest_is_terminator(std::size_t at) const {
    for (auto k = at + 1; k < text_.size(); ++k) {
      if (text_[k] == '#') return true;
      if (text_[k] != ' ' && text_[k] != '\t') return false;
    }
    return true;
  }

  std::string_view text_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

}  // namespace

std::optional<RdfStatement> parse_ntriples_line(std::string_view line, std::size_t line_number) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  LineCursor cursor(line, line_number);
  cursor.skip_space();
  if (cursor.done() || cursor.peek() == '#') return std::nullopt;
  RdfStatement st;
  st.subject = cursor.term(false, true);
  st.predicate = cursor.term(false, false);
  st.object = cursor.term(true, true);
  cursor.terminator();
  return st;
}

std::string local_name(std::string_view iri) {
  const auto cut = iri.find_last_of("#/");
  if (cut == std::string_view::npos || cut + 1 == iri.size()) return std::string(iri);
  return std::string(iri.substr(cut + 1));
}

namespace {

std::string strip_brackets(std::string_view s) {
  if (s.size() >= 2 && s.front() == '<' && s.back() == '>') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

struct LabelRow {
  std::string entity;
  std::string label;
  std::size_t line = 0;
};

std::vector<LabelRow> read_label_file(const fs::path& path, const std::string& entity_column,
                                      const std::string& label_column) {
  auto in = open_input(path);
  std::string line;
  if (!next_line(in, line)) throw DataError(path.string() + ": empty label file");
  const auto header = split_tabs(line);
  std::optional<std::size_t> ecol, lcol;
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == entity_column) ecol = k;
    if (header[k] == label_column) lcol = k;
  }
  if (!ecol || !lcol) {
    throw DataError(path.string() + ": header lacks column '" +
                    (!ecol ? entity_column : label_column) + "'");
  }
  std::vector<LabelRow> rows;
  std::size_t line_no = 1;
  while (next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() <= std::max(*ecol, *lcol)) {
      throw DataError(where(path, line_no) + ": expected at least " +
                      std::to_string(std::max(*ecol, *lcol) + 1) + " columns");
    }
    rows.push_back({strip_brackets(fields[*ecol]), std::string(fields[*lcol]), line_no});
  }
  if (rows.empty()) throw DataError(path.string() + ": no labeled entities");
  return rows;
}

bool matches_relation(const std::set<std::string>& names, const std::string& iri) {
  return names.contains(iri) || names.contains(local_name(iri));
}

}  // namespace

DatasetBundle load_rdf_classification(const fs::path& graph_file, const LabelSpec& labels,
                                      const LabelLeakPolicy& leak, const RdfOptions& options) {
  const auto train_rows = read_label_file(labels.train_file, labels.entity_column,
                                          labels.label_column);
  const auto test_rows = read_label_file(labels.test_file, labels.entity_column,
                                         labels.label_column);
  std::unordered_set<std::string> labeled;
  for (const auto* rows : {&train_rows, &test_rows}) {
    for (const auto& row : *rows) labeled.insert(row.entity);
  }

  auto in = open_input(graph_file);
  std::vector<RdfStatement> kept;
  std::unordered_set<std::string> seen_statements;
  std::unordered_set<std::string> removed_only_nodes;
  std::map<std::string, std::size_t> removed;
  std::size_t duplicates = 0;
  std::string line;
  std::size_t line_no = 0;
  while (next_line(in, line)) {
    ++line_no;
    auto st = parse_ntriples_line(line, line_no);
    if (!st) continue;
    std::string key = st->subject.text + '\x1f' + st->predicate.text + '\x1f' + st->object.text;
    if (!seen_statements.insert(std::move(key)).second) {
      ++duplicates;
      continue;
    }
    if (matches_relation(leak.relations_to_remove, st->predicate.text)) {
      const bool drop = leak.mode == LeakMode::remove_relation_entirely ||
                        labeled.contains(st->subject.text);
      if (drop) {
        ++removed[st->predicate.text];
        removed_only_nodes.insert(st->subject.text);
        continue;
      }
    }
    kept.push_back(std::move(*st));
  }
  if (kept.empty()) throw DataError(graph_file.string() + ": no statements");

  DatasetBundle bundle;
  bundle.name = graph_file.stem().string();
  auto node_name = [&](const RdfTerm& term, const RdfTerm& predicate) {
    if (term.kind == RdfTerm::Kind::literal && options.literal_scope == LiteralScope::per_predicate) {
      return predicate.text + ' ' + term.text;
    }
    return term.text;
  };
  bundle.train.reserve(kept.size());
  for (const auto& st : kept) {
    const auto s = bundle.entities.intern(node_name(st.subject, st.predicate));
    const auto r = bundle.relations.intern(st.predicate.text);
    const auto o = bundle.entities.intern(node_name(st.object, st.predicate));
    bundle.train.push_back({s, r, o});
  }
  if (duplicates > 0) {
    bundle.log.push_back("collapsed " + std::to_string(duplicates) + " duplicate statements");
  }
  for (const auto& [rel, count] : removed) {
    bundle.log.push_back("removed " + std::to_string(count) + " statements with " + rel);
  }

  std::set<std::string> classes;
  for (const auto* rows : {&train_rows, &test_rows}) {
    for (const auto& row : *rows) classes.insert(row.label);
  }
  bundle.class_names.assign(classes.begin(), classes.end());
  auto build_labels = [&](const std::vector<LabelRow>& rows, const fs::path& file) {
    LabelSet set;
    set.num_classes = static_cast<std::int32_t>(bundle.class_names.size());
    for (const auto& row : rows) {
      auto id = bundle.entities.find(row.entity);
      if (!id) {
        if (!removed_only_nodes.contains(row.entity)) {
          throw DataError(where(file, row.line) + ": labeled entity '" + row.entity +
                          "' does not occur in " + graph_file.string());
        }
        id = bundle.entities.intern(row.entity);
        bundle.log.push_back("labeled entity " + row.entity +
                             " kept as an isolated node after leak removal");
      }
      const auto cls = std::lower_bound(bundle.class_names.begin(), bundle.class_names.end(),
                                        row.label) - bundle.class_names.begin();
      set.nodes.push_back(*id);
      set.classes.push_back(static_cast<std::int32_t>(cls));
    }
    return set;
  };
  bundle.train_labels = build_labels(train_rows, labels.train_file);
  bundle.test_labels = build_labels(test_rows, labels.test_file);
  return bundle;
}

RdfBenchmark rdf_benchmark(const std::string& name, const fs::path& root) {
  RdfBenchmark b;
  b.name = name;
  const fs::path dir = root / name;
  b.graph_file = dir / (name + ".nt");
  b.labels.train_file = dir / "trainingSet.tsv";
  b.labels.test_file = dir / "testSet.tsv";
  if (name == "aifb") {
    b.labels.entity_column = "person";
    b.labels.label_column = "label_affiliation";
    b.leak.relations_to_remove = {"employs", "affiliation"};
  } else if (name == "mutag") {
    b.labels.entity_column = "bond";
    b.labels.label_column = "label_mutagenic";
    b.leak.relations_to_remove = {"isMutagenic"};
    b.leak.mode = LeakMode::remove_target_triples_only;
  } else if (name == "bgs") {
    b.labels.entity_column = "rock";
    b.labels.label_column = "label_lithogenesis";
    b.leak.relations_to_remove = {"hasLithogenesis"};
  } else if (name == "am") {
    b.labels.entity_column = "proxy";
    b.labels.label_column = "label_cateogory";
    b.leak.relations_to_remove = {"objectCategory", "material"};
  } else {
    throw UsageError("unknown classification dataset '" + name +
                     "' (accepted: aifb, mutag, bgs, am)");
  }
  return b;
}

// Statistics -------------------------------------------------------------------

DatasetStats compute_stats(const DatasetBundle& bundle) {
  DatasetStats s;
  s.entities = bundle.entities.size();
  s.relations = bundle.relations.size();
  s.train_edges = static_cast<std::int64_t>(bundle.train.size());
  s.valid_edges = static_cast<std::int64_t>(bundle.valid.size());
  s.test_edges = static_cast<std::int64_t>(bundle.test.size());
  if (!bundle.class_names.empty()) {
    s.labeled = static_cast<std::int64_t>(bundle.train_labels.size() + bundle.test_labels.size());
    s.classes = static_cast<std::int64_t>(bundle.class_names.size());
  }
  return s;
}

std::optional<DatasetStats> published_stats(const std::string& name) {
  auto classification = [](std::int64_t e, std::int64_t r, std::int64_t edges, std::int64_t l,
                           std::int64_t c) {
    DatasetStats s;
    s.entities = e;
    s.relations = r;
    s.train_edges = edges;
    s.labeled = l;
    s.classes = c;
    return s;
  };
  auto triples = [](std::int64_t e, std::int64_t r, std::int64_t tr, std::int64_t va,
                    std::int64_t te) {
    DatasetStats s;
    s.entities = e;
    s.relations = r;
    s.train_edges = tr;
    s.valid_edges = va;
    s.test_edges = te;
    return s;
  };
  if (name == "aifb") return classification(8285, 45, 29043, 176, 4);
  if (name == "mutag") return classification(23644, 23, 74227, 340, 2);
  if (name == "bgs") return classification(333845, 103, 916199, 146, 2);
  if (name == "am") return classification(1666764, 133, 5988321, 1000, 11);
  if (name == "wn18") return triples(40943, 18, 141442, 5000, 5000);
  if (name == "fb15k") return triples(14951, 1345, 483142, 50000, 59071);
  if (name == "fb15k-237") return triples(14541, 237, 272115, 17535, 20466);
  return std::nullopt;
}

StatsDiff validate_stats(const DatasetStats& actual, const DatasetStats& expected) {
  StatsDiff diff;
  auto check = [&](const char* field, const std::optional<std::int64_t>& want,
                   const std::optional<std::int64_t>& got) {
    if (!want) return;
    if (!got) {
      diff.pass = false;
      diff.mismatches.push_back(std::string(field) + ": expected " + std::to_string(*want) +
                                ", got nothing");
      return;
    }
    if (*want != *got) {
      diff.pass = false;
      const auto delta = *got - *want;
      diff.mismatches.push_back(std::string(field) + ": expected " + std::to_string(*want) +
                                ", got " + std::to_string(*got) + " (" +
                                (delta > 0 ? "+" : "") + std::to_string(delta) + ")");
    }
  };
  check("entities", expected.entities, actual.entities);
  check("relations", expected.relations, actual.relations);
  check("edges", expected.train_edges, actual.train_edges);
  check("valid_edges", expected.valid_edges, actual.valid_edges);
  check("test_edges", expected.test_edges, actual.test_edges);
  check("labeled", expected.labeled, actual.labeled);
  check("classes", expected.classes, actual.classes);
  return diff;
}

std::string stats_to_json(const DatasetStats& stats) {
  nlohmann::json j = nlohmann::json::object();
  auto put = [&](const char* key, const std::optional<std::int64_t>& v) {
    if (v) j[key] = *v;
  };
  put("entities", stats.entities);
  put("relations", stats.relations);
  put("edges", stats.train_edges);
  put("valid_edges", stats.valid_edges);
  put("test_edges", stats.test_edges);
  put("labeled", stats.labeled);
  put("classes", stats.classes);
  return j.dump();
}

// Canonical serialization ------------------------------------------------------

namespace {

void require_plain(const std::string& name) {
  if (name.find_first_of("\t\n\r") != std::string::npos) {
    throw DataError("cannot serialize name containing a tab or newline: " + name);
  }
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void write_vocab(const Vocabulary& vocab, const fs::path& path) {
  auto out = open_output(path);
  for (std::int32_t id = 0; id < vocab.size(); ++id) {
    require_plain(vocab.name(id));
    out << id << '\t' << vocab.name(id) << '\n';
  }
}

Vocabulary read_vocab(const fs::path& path) {
  auto in = open_input(path);
  Vocabulary vocab;
  std::string line;
  std::size_t line_no = 0;
  while (next_line(in, line)) {
    ++line_no;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(where(path, line_no) + ": expected id<TAB>name");
    const auto id = std::stoll(line.substr(0, tab));
    if (id != vocab.size() || vocab.intern(line.substr(tab + 1)) != id) {
      throw DataError(where(path, line_no) + ": ids must be dense, ascending and unique");
    }
  }
  return vocab;
}

void write_split(const DatasetBundle& b, const std::vector<Triple>& split, const fs::path& path) {
  auto out = open_output(path);
  for (const auto& t : split) {
    out << b.entities.name(t.subject) << '\t' << b.relations.name(t.relation) << '\t'
        << b.entities.name(t.object) << '\n';
  }
}

std::vector<Triple> read_split(const DatasetBundle& b, const fs::path& path) {
  std::vector<Triple> out;
  if (!fs::exists(path)) return out;
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (next_line(in, line)) {
    ++line_no;
    const auto f = split_tabs(line);
    if (f.size() != 3) throw DataError(where(path, line_no) + ": expected three fields");
    const auto s = b.entities.find(std::string(f[0]));
    const auto r = b.relations.find(std::string(f[1]));
    const auto o = b.entities.find(std::string(f[2]));
    if (!s || !r || !o) throw DataError(where(path, line_no) + ": name missing from vocabulary");
    out.push_back({*s, *r, *o});
  }
  return out;
}

void write_labels(const DatasetBundle& b, const LabelSet& labels, const fs::path& path) {
  auto out = open_output(path);
  for (std::size_t k = 0; k < labels.size(); ++k) {
    out << b.entities.name(labels.nodes[k]) << '\t' << b.class_names.at(labels.classes[k])
        << '\n';
  }
}

LabelSet read_labels(const DatasetBundle& b, const fs::path& path) {
  LabelSet labels;
  labels.num_classes = static_cast<std::int32_t>(b.class_names.size());
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (next_line(in, line)) {
    ++line_no;
    const auto f = split_tabs(line);
    if (f.size() != 2) throw DataError(where(path, line_no) + ": expected entity<TAB>class");
    const auto e = b.entities.find(std::string(f[0]));
    const auto c = std::find(b.class_names.begin(), b.class_names.end(), f[1]);
    if (!e || c == b.class_names.end()) {
      throw DataError(where(path, line_no) + ": unknown entity or class");
    }
    labels.nodes.push_back(*e);
    labels.classes.push_back(static_cast<std::int32_t>(c - b.class_names.begin()));
  }
  return labels;
}

}  // namespace

void write_canonical_tsv(const DatasetBundle& bundle, const fs::path& dir) {
  fs::create_directories(dir);
  write_vocab(bundle.entities, dir / "entities.tsv");
  write_vocab(bundle.relations, dir / "relations.tsv");
  write_split(bundle, bundle.train, dir / "train.tsv");
  write_split(bundle, bundle.valid, dir / "valid.tsv");
  write_split(bundle, bundle.test, dir / "test.tsv");
  if (!bundle.class_names.empty()) {
    auto out = open_output(dir / "classes.tsv");
    for (const auto& c : bundle.class_names) {
      require_plain(c);
      out << c << '\n';
    }
    write_labels(bundle, bundle.train_labels, dir / "labels_train.tsv");
    write_labels(bundle, bundle.test_labels, dir / "labels_test.tsv");
  }
}

DatasetBundle load_canonical_tsv(const fs::path& dir) {
  DatasetBundle b;
  b.name = dir.filename().string();
  b.entities = read_vocab(dir / "entities.tsv");
  b.relations = read_vocab(dir / "relations.tsv");
  b.train = read_split(b, dir / "train.tsv");
  b.valid = read_split(b, dir / "valid.tsv");
  b.test = read_split(b, dir / "test.tsv");
  if (fs::exists(dir / "classes.tsv")) {
    auto in = open_input(dir / "classes.tsv");
    std::string line;
    while (next_line(in, line)) b.class_names.push_back(line);
    b.train_labels = read_labels(b, dir / "labels_train.tsv");
    b.test_labels = read_labels(b, dir / "labels_test.tsv");
  }
  return b;
}

}  // namespace rgcn
