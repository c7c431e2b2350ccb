#include <set>

#include "doctest.h"
#include "stance/corpus.hpp"
#include "stance/rng.hpp"
#include "stance/text.hpp"
#include "support.hpp"

using namespace stance;
using namespace stance::corpus;
using testing::TempDir;
using testing::write_file;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a stance::Error");
  return ErrorCode::FormatError;
}

CorpusAdapterConfig csv_adapter() {
  return adapter_from_json(nlohmann::json::parse(R"({
    "corpus_name": "toy",
    "format": "csv",
    "files": {"train": "train.csv", "test": "test.csv"},
    "columns": {"text": "Tweet", "target": "Target", "label": "Stance"},
    "label_map": {"FAVOR": "FAVOR", "AGAINST": "AGAINST", "NONE": "NONE", "NEUTRAL": "NEUTRAL"},
    "domain": "twitter"
  })"));
}

StanceRecord rec(std::string id, std::string text, std::string target, StanceLabel l) {
  return {std::move(id), std::move(text), std::move(target), l, "toy", Split::Train, "d"};
}

// n train records over a handful of targets; texts never mention other targets
Dataset synthetic_train(std::size_t n, std::uint64_t seed) {
  const std::vector<std::string> targets = {"Atheism", "Climate Change", "Feminist Movement",
                                            "Hillary Clinton", "Legalization of Abortion"};
  const std::vector<std::string> words = {"we", "should", "really", "think", "about", "this",
                                          "today", "never", "again", "#tcot", "@user", "!!"};
  Rng rng(seed);
  std::vector<StanceRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string text;
    const std::size_t len = 4 + rng.uniform_index(8);
    for (std::size_t k = 0; k < len; ++k) text += (k ? " " : "") + words[rng.uniform_index(words.size())];
    const auto& target = targets[rng.uniform_index(targets.size())];
    // some texts mention their own target, so mention checks have work to do
    if (rng.uniform01() < 0.3) text += " " + target;
    out.push_back(rec("r" + std::to_string(i), text, target, kAllLabels[rng.uniform_index(3)]));
  }
  return Dataset("toy", std::move(out));
}

}  // namespace

TEST_CASE("parse_delimited handles quoting") {
  const auto rows = parse_delimited("a,b\n\"x, y\",\"he said \"\"hi\"\"\"\n\"multi\nline\",z\r\n", ',', true);
  REQUIRE(rows.size() == 3);
  CHECK(rows[1][0] == "x, y");
  CHECK(rows[1][1] == "he said \"hi\"");
  CHECK(rows[2][0] == "multi\nline");
  CHECK(rows[2][1] == "z");

  const auto tsv = parse_delimited("a\tb\n\"q\tr\n", '\t', false);
  REQUIRE(tsv.size() == 2);
  CHECK(tsv[1][0] == "\"q");
}

TEST_CASE("latin-1 decoding") {
  CHECK(latin1_to_utf8("caf\xe9") == "caf\xc3\xa9");
  CHECK(latin1_to_utf8("plain") == "plain");
}

TEST_CASE("ingest CSV with generated ids") {
  TempDir dir;
  write_file(dir / "train.csv",
             "\xEF\xBB\xBFTweet,Target,Stance\n"
             "\"So can unborn children have rights now?\",Abortion,AGAINST\n"
             "I wear a mask,Dr. Fauci,FAVOR\n"
             "\"no view, really\",Dr. Fauci,NEUTRAL\n");
  write_file(dir / "test.csv", "Tweet,Target,Stance\nwhatever,Trump,NONE\n");
  const auto ds = ingest(dir.path(), csv_adapter());
  REQUIRE(ds.size() == 4);
  CHECK(ds[0].id == "toy:train:2");
  CHECK(ds[0].label == StanceLabel::Against);
  CHECK(ds[2].text == "no view, really");
  CHECK(ds[2].label == StanceLabel::None);
  CHECK(ds.source_class(2) == SourceClass::Neutral);
  CHECK(ds[3].split == Split::Test);
  CHECK(ds[3].domain == "twitter");
  CHECK(ds.split_indices(Split::Train).size() == 3);
  CHECK(ds.split_indices(Split::Valid).empty());

  const auto unified = unify_labels(ds);
  CHECK(unified.source_class(2) == SourceClass::None);
  CHECK(unified.records() == ds.records());
}

TEST_CASE("unify_labels is the identity on polar data") {
  Dataset ds("p", {rec("1", "a", "t", StanceLabel::Favor), rec("2", "b", "t", StanceLabel::Favor)});
  CHECK(unify_labels(ds).records() == ds.records());
}

TEST_CASE("ingest errors") {
  TempDir dir;
  auto cfg = csv_adapter();
  write_file(dir / "test.csv", "Tweet,Target,Stance\nx,y,NONE\n");

  SUBCASE("unmapped label names the string") {
    write_file(dir / "train.csv", "Tweet,Target,Stance\nx,y,MAYBE\n");
    try {
      ingest(dir.path(), cfg);
      FAIL("expected UnmappedLabel");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnmappedLabel);
      CHECK(std::string(e.what()).find("MAYBE") != std::string::npos);
    }
  }
  SUBCASE("missing column") {
    write_file(dir / "train.csv", "Tweet,Stance\nx,NONE\n");
    CHECK(code_of([&] { ingest(dir.path(), cfg); }) == ErrorCode::MissingColumn);
  }
  SUBCASE("invalid UTF-8") {
    write_file(dir / "train.csv", "Tweet,Target,Stance\ncaf\xe9,y,NONE\n");
    CHECK(code_of([&] { ingest(dir.path(), cfg); }) == ErrorCode::EncodingError);
  }
  SUBCASE("missing file") {
    CHECK(code_of([&] { ingest(dir.path(), cfg); }) == ErrorCode::FileUnreadable);
  }
  SUBCASE("duplicate ids") {
    cfg.columns.id = "ID";
    write_file(dir / "test.csv", "ID,Tweet,Target,Stance\n9,x,y,NONE\n");
    write_file(dir / "train.csv", "ID,Tweet,Target,Stance\n1,a,t,NONE\n1,b,t,NONE\n");
    CHECK(code_of([&] { ingest(dir.path(), cfg); }) == ErrorCode::FormatError);
  }
}

TEST_CASE("ingest latin-1 TSV and multi-file splits") {
  TempDir dir;
  write_file(dir / "a.txt", "ID\tTarget\tTweet\tStance\n10\tAtheism\tcaf\xe9 time\tFAVOR\n");
  write_file(dir / "b.txt", "ID\tTarget\tTweet\tStance\n11\tAtheism\tsecond\tAGAINST\n");
  auto cfg = adapter_from_json(nlohmann::json::parse(R"({
    "corpus_name": "sem", "format": "tsv", "encoding": "latin-1",
    "files": {"train": ["a.txt", "b.txt"]},
    "columns": {"text": "Tweet", "target": "Target", "label": "Stance"},
    "label_map": {"FAVOR": "FAVOR", "AGAINST": "AGAINST"}
  })"));
  const auto ds = ingest(dir.path(), cfg);
  REQUIRE(ds.size() == 2);
  CHECK(ds[0].text == "caf\xc3\xa9 time");
  CHECK(ds[0].id == "sem:train:0:2");
  CHECK(ds[1].id == "sem:train:1:2");
  CHECK(adapter_from_json(to_json(cfg)).files == cfg.files);
}

TEST_CASE("ingest JSONL") {
  TempDir dir;
  write_file(dir / "v.jsonl",
             "{\"post\": \"text one\", \"topic_str\": \"guns\", \"label\": 1}\n\n"
             "{\"post\": \"text two\", \"topic_str\": \"guns\", \"label\": 2}\n");
  auto cfg = adapter_from_json(nlohmann::json::parse(R"({
    "corpus_name": "vast", "format": "jsonl",
    "files": {"valid": "v.jsonl"},
    "columns": {"text": "post", "target": "topic_str", "label": "label"},
    "label_map": {"1": "FAVOR", "0": "AGAINST", "2": "NEUTRAL"}
  })"));
  const auto ds = ingest(dir.path(), cfg);
  REQUIRE(ds.size() == 2);
  CHECK(ds[0].label == StanceLabel::Favor);
  CHECK(ds[1].label == StanceLabel::None);
  CHECK(ds[1].id == "vast:valid:3");
}

TEST_CASE("adapter config validation") {
  auto j = nlohmann::json::parse(R"({"corpus_name": "x", "files": {"train": "a"},
    "columns": {"text": "t", "target": "g", "label": "l"}, "label_map": {"F": "FAVOR"}})");
  CHECK_NOTHROW(adapter_from_json(j));
  auto bad = j;
  bad["format"] = "xml";
  CHECK(code_of([&] { adapter_from_json(bad); }) == ErrorCode::ConfigError);
  bad = j;
  bad["label_map"]["F"] = "LIKE";
  CHECK(code_of([&] { adapter_from_json(bad); }) == ErrorCode::ConfigError);
  bad = j;
  bad.erase("columns");
  CHECK(code_of([&] { adapter_from_json(bad); }) == ErrorCode::ConfigError);
}

TEST_CASE("None extension contract") {
  const auto train = synthetic_train(503, 11);
  NoneExtensionOptions opts{0.2, 7};
  const auto ext = extend_none_subset(train, opts);
  REQUIRE(ext.size() == 503 + 100);  // floor(0.2 * 503)

  std::set<std::string> ids;
  for (std::size_t i = 0; i < ext.size(); ++i) ids.insert(ext[i].id);
  CHECK(ids.size() == ext.size());
  for (std::size_t i = 0; i < train.size(); ++i) CHECK(ext[i] == train[i]);
  for (std::size_t i = train.size(); i < ext.size(); ++i) {
    const auto& r = ext[i];
    CHECK(r.label == StanceLabel::None);
    CHECK(ext.source_class(i) == SourceClass::None);
    CHECK_FALSE(text::contains_mention(r.text, r.target));
    CHECK(r.split == Split::Train);
  }
  CHECK(to_jsonl(extend_none_subset(train, opts)) == to_jsonl(ext));
  opts.seed = 8;
  CHECK(to_jsonl(extend_none_subset(train, opts)) != to_jsonl(ext));
}

TEST_CASE("None extension errors") {
  Dataset one("one", {rec("1", "hello there", "t", StanceLabel::Favor)});
  CHECK(code_of([&] { extend_none_subset(one, {0.2, 1}); }) == ErrorCode::InsufficientDiversity);
  // every other target is mentioned in the host text
  Dataset crowded("c", {rec("1", "alpha beta", "alpha", StanceLabel::Favor),
                        rec("2", "alpha beta", "beta", StanceLabel::Against)});
  CHECK(code_of([&] { extend_none_subset(crowded, {1.0, 1}); }) == ErrorCode::InsufficientDiversity);
  CHECK(code_of([&] { extend_none_subset(crowded, {0.0, 1}); }) == ErrorCode::PreconditionViolated);
}

TEST_CASE("stats") {
  CHECK(stats(Dataset()).total == 0);
  CHECK(stats(Dataset()).split_counts == std::array<std::size_t, 3>{0, 0, 0});

  std::vector<StanceRecord> rs = {rec("1", "a", "X", StanceLabel::Favor), rec("2", "b", "X", StanceLabel::None),
                                  rec("3", "c", "Y", StanceLabel::Against)};
  rs[2].split = Split::Test;
  const auto rep = stats(Dataset("toy", rs));
  CHECK(rep.split_counts == std::array<std::size_t, 3>{2, 0, 1});
  CHECK(rep.targets.at("X").count == 2);
  CHECK(rep.targets.at("X").labels[index_of(StanceLabel::None)] == 1);

  const auto table = format_stats_table({rep});
  CHECK(table.find("Train") != std::string::npos);
  CHECK(table.find("X, Y") != std::string::npos);
  CHECK(to_json(rep)["splits"]["test"] == 1);

  StatsReport big;
  big.name = "big";
  big.split_counts = {2914, 0, 1249};
  const auto t2 = format_stats_table({big});
  CHECK(t2.find("2,914") != std::string::npos);
  CHECK(t2.find("1,249") != std::string::npos);
}

TEST_CASE("JSONL round trip") {
  TempDir dir;
  const auto ds = synthetic_train(40, 3);
  write_jsonl(ds, dir / "d.jsonl");
  const auto back = read_jsonl(dir / "d.jsonl", "toy");
  CHECK(back.records() == ds.records());
  CHECK(to_jsonl(back) == to_jsonl(ds));
}

TEST_CASE("subset and concat") {
  const auto ds = synthetic_train(10, 5);
  const auto sub = ds.subset(std::vector<std::size_t>{1, 3});
  REQUIRE(sub.size() == 2);
  CHECK(sub[1] == ds[3]);
  const auto first = ds.subset(std::vector<std::size_t>{0});
  const auto both = concat("both", {&sub, &first});
  CHECK(both.size() == 3);
  CHECK(code_of([&] { concat("dup", {&ds, &ds}); }) == ErrorCode::FormatError);
}
