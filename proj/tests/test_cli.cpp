#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cstdio>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"

using nlohmann::json;
using testing::read_file;
using testing::TempDir;
using testing::write_file;

namespace {

struct Run {
  int exit_code = -1;
  std::string output;  // stdout and stderr
};

Run run(const std::string& args) {
  const std::string cmd = args + " 2>&1";
  Run r;
  std::FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.output.append(buf.data(), n);
  const int status = ::pclose(p);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string cli(const std::string& args) { return std::string(STANCE_CLI_PATH) + " " + args; }

std::size_t line_count(const std::filesystem::path& p) {
  const auto s = read_file(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

// Small generated benchmark shared by the pipeline cases.
struct Workspace {
  TempDir dir{"stance-cli"};
  std::filesystem::path syn = dir / "syn";

  Workspace() {
    write_file(dir / "synth.json", R"({"seed": 3, "clusters": 3, "objects_per_cluster": 6,
      "test_targets_per_cluster": 2, "train_records": 300, "valid_records": 60, "test_records": 90})");
    const auto r = run(std::string(STANCE_SYNTH_PATH) + " --output " + syn.string() + " --settings " +
                       (dir / "synth.json").string());
    REQUIRE_MESSAGE(r.exit_code == 0, r.output);
    json job = {{"seed", 3},
                {"paths", {{"embeddings", (syn / "embeddings.txt").string()}, {"output", (dir / "out").string()}}},
                {"model", {{"embedding_dim", 16}, {"hidden", 4}, {"attention_dim", 4}, {"layers", 1}}},
                {"train", {{"learning_rate", 0.01}, {"batch_size", 16}, {"epochs", 2}, {"weight_decay", 0.0}}}};
    write_file(dir / "job.json", job.dump());
  }

  std::string with_config(const std::string& args) const {
    return cli("--config " + (dir / "job.json").string() + " " + args);
  }
};

}  // namespace

TEST_CASE("unknown command") {
  const auto r = run(cli("frobnicate"));
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("unknown command 'frobnicate'") != std::string::npos);
  CHECK(r.output.find("Usage") != std::string::npos);

  const auto none = run(cli(""));
  CHECK(none.exit_code != 0);
  CHECK(none.output.find("Usage") != std::string::npos);
}

TEST_CASE("errors are structured") {
  TempDir dir;
  const auto r = run(cli("stats --input " + (dir / "missing.jsonl").string()));
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("error: {\"code\":\"FileUnreadable\"") != std::string::npos);

  write_file(dir / "bad.json", R"({"seed": 1, "bogus": true})");
  const auto c = run(cli("--config " + (dir / "bad.json").string() + " stats"));
  CHECK(c.exit_code == 2);
  CHECK(c.output.find("ConfigError") != std::string::npos);
}

TEST_CASE("data pipeline") {
  Workspace ws;
  const auto train = ws.syn / "train.jsonl";
  REQUIRE(std::filesystem::exists(train));

  SUBCASE("stats") {
    const auto r = run(cli("stats --input " + train.string()));
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("Train") != std::string::npos);
  }

  SUBCASE("extend-none is deterministic") {
    const auto a = ws.dir / "a.jsonl", b = ws.dir / "b.jsonl";
    const auto base = ws.syn / "train_polar.jsonl";
    for (const auto& out : {a, b}) {
      const auto r = run(cli("extend-none --fraction 0.2 --seed 7 --input " + base.string() + " --output " + out.string()));
      REQUIRE_MESSAGE(r.exit_code == 0, r.output);
    }
    CHECK(read_file(a) == read_file(b));
    const auto n = line_count(base);
    CHECK(line_count(a) == n + n / 5);
  }

  SUBCASE("extract, pair and kappa") {
    const auto r = run(cli("extract --input " + (ws.syn / "train_polar.jsonl").string() + " --output " +
                           (ws.dir / "batch.jsonl").string()));
    REQUIRE_MESSAGE(r.exit_code == 0, r.output);
    CHECK(read_file(ws.dir / "batch.jsonl") == read_file(ws.syn / "batch.jsonl"));

    const auto p = run(cli("pair --batch " + (ws.syn / "batch.jsonl").string() + " --votes " +
                           (ws.syn / "votes.jsonl").string() + " --output-dir " + (ws.dir / "pairs").string()));
    REQUIRE_MESSAGE(p.exit_code == 0, p.output);
    CHECK(line_count(ws.dir / "pairs" / "paired.jsonl") == line_count(ws.syn / "pool.jsonl"));

    const auto k = run(cli("kappa --votes " + (ws.syn / "votes.jsonl").string()));
    CHECK(k.exit_code == 0);
    CHECK(k.output.find("kappa") != std::string::npos);
  }
}

TEST_CASE("train, evaluate and kl") {
  Workspace ws;
  const auto ckpt = ws.dir / "model.ckpt";
  const auto t = run(ws.with_config("train --train " + (ws.syn / "train.jsonl").string() + " --valid " +
                                    (ws.syn / "valid.jsonl").string() + " --vocab-from " +
                                    (ws.syn / "test.jsonl").string() + " --output " + ckpt.string()));
  REQUIRE_MESSAGE(t.exit_code == 0, t.output);
  REQUIRE(std::filesystem::exists(ckpt));

  const auto e = run(ws.with_config("evaluate --model " + ckpt.string() + " --input unseen=" +
                                    (ws.syn / "test.jsonl").string()));
  CHECK(e.exit_code == 0);
  CHECK(e.output.find("unseen") != std::string::npos);
  CHECK(e.output.find("Precision") != std::string::npos);

  const auto e2 = run(ws.with_config("evaluate --classes 2 --model " + ckpt.string() + " --input " +
                                     (ws.syn / "test.jsonl").string()));
  CHECK(e2.exit_code == 0);

  const auto k = run(ws.with_config("kl --model " + ckpt.string() + " --input " + (ws.syn / "test.jsonl").string()));
  CHECK(k.exit_code == 0);
}
