// Acceptance checks: one PASS / FAIL / SKIP line per criterion.
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "httplib.h"
#include "oracles.hpp"
#include "stance/enrich.hpp"
#include "stance/eval.hpp"
#include "stance/job.hpp"
#include "stance/kernels.hpp"
#include "stance/rng.hpp"
#include "stance/service.hpp"
#include "stance/synth.hpp"
#include "stance/text.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stance;

namespace {

constexpr StanceLabel F = StanceLabel::Favor;
constexpr StanceLabel A = StanceLabel::Against;
constexpr StanceLabel N = StanceLabel::None;

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status = Status::Fail;
  std::string detail;
};

Outcome pass(std::string d) { return {Status::Pass, std::move(d)}; }
Outcome fail(std::string d) { return {Status::Fail, std::move(d)}; }
Outcome verdict(bool ok, std::string d) { return {ok ? Status::Pass : Status::Fail, std::move(d)}; }

std::string fmt(double x, int digits = 4) {
  std::ostringstream os;
  os << std::setprecision(digits) << x;
  return os.str();
}

int failures = 0;

// Runs one criterion; a time limit of 0 means none.
void criterion(const std::string& name, double limit_s, const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = fn();
  } catch (const std::exception& e) {
    out = fail(std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (out.status == Status::Pass && limit_s > 0 && secs > limit_s) {
    out.status = Status::Fail;
    out.detail += "; over the " + fmt(limit_s) + " s limit";
  }
  const char* tag = out.status == Status::Pass ? "PASS" : out.status == Status::Fail ? "FAIL" : "SKIP";
  if (out.status == Status::Fail) ++failures;
  std::cout << tag << "  " << name << "  (" << out.detail << "; " << fmt(secs, 3) << " s)" << std::endl;
}

std::optional<ErrorCode> error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

// --- label algebra -----------------------------------------------------------

Outcome label_algebra() {
  using Al = Alignment;
  std::size_t cases = 0, bad = 0;
  // explicit label x alignment -> target label, nullopt for the error cases
  const std::vector<std::tuple<StanceLabel, Al, std::optional<StanceLabel>>> compose = {
      {F, Al::Same, F}, {F, Al::Opposite, A}, {F, Al::Unrelated, N},
      {A, Al::Same, A}, {A, Al::Opposite, F}, {A, Al::Unrelated, N},
      {N, Al::Same, {}}, {N, Al::Opposite, {}}, {N, Al::Unrelated, N},
  };
  for (const auto& [e, al, want] : compose) {
    ++cases;
    if (want) {
      bad += error_of([&] { bad += compose_label(e, al) != *want; }).has_value();
    } else {
      bad += error_of([&] { compose_label(e, al); }) != ErrorCode::UndefinedComposition;
    }
  }
  const std::vector<std::tuple<StanceLabel, StanceLabel, std::optional<Al>>> derive = {
      {F, F, Al::Same}, {F, A, Al::Opposite}, {F, N, Al::Unrelated},
      {A, F, Al::Opposite}, {A, A, Al::Same}, {A, N, Al::Unrelated},
      {N, F, {}}, {N, A, {}}, {N, N, Al::Unrelated},
  };
  for (const auto& [e, t, want] : derive) {
    ++cases;
    if (want) {
      bad += error_of([&] { bad += derive_alignment(e, t) != *want; }).has_value();
    } else {
      bad += error_of([&] { derive_alignment(e, t); }) != ErrorCode::UndefinedAlignment;
    }
  }
  // round trips over every defined input
  std::size_t trips = 0;
  for (auto e : kAllLabels) {
    for (auto al : {Al::Opposite, Al::Unrelated, Al::Same}) {
      if (e == N && al != Al::Unrelated) continue;
      const auto t = compose_label(e, al);
      ++trips;
      if (e != N && derive_alignment(e, t) != al) ++bad;
    }
    for (auto t : kAllLabels) {
      if (e == N && t != N) continue;
      ++trips;
      if (compose_label(e, derive_alignment(e, t)) != t) ++bad;
    }
  }
  return verdict(bad == 0, std::to_string(cases) + " table cases, " + std::to_string(trips) +
                               " round trips, " + std::to_string(bad) + " mismatches");
}

// --- metrics -------------------------------------------------------------------

Outcome metric_oracle() {
  Rng rng(2024);
  std::size_t mismatches = 0, two_class = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(50);
    std::vector<StanceLabel> p(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = kAllLabels[rng.uniform_index(3)];
      g[i] = kAllLabels[rng.uniform_index(3)];
    }
    const auto same = [](const eval::MetricsReport& r, const oracle::Scores& o) {
      return r.macro_f1 == o.f1 && r.macro_precision == o.precision && r.macro_recall == o.recall;
    };
    mismatches += !same(eval::macro_metrics(p, g, eval::ClassSet::ThreeClass), oracle::macro_scores(p, g, false));
    if (std::all_of(g.begin(), g.end(), [](StanceLabel l) { return l == N; })) continue;
    ++two_class;
    mismatches += !same(eval::macro_metrics(p, g, eval::ClassSet::TwoClass), oracle::macro_scores(p, g, true));
  }
  return verdict(mismatches == 0, "500 instances, " + std::to_string(two_class) + " also 2-class, " +
                                      std::to_string(mismatches) + " mismatches");
}

// --- kappa ---------------------------------------------------------------------

Outcome kappa_oracle() {
  using V = std::vector<StanceLabel>;
  const std::vector<std::tuple<V, V, double>> fixtures = {
      {{F, A, N, F, A}, {F, A, N, F, A}, 1.0},
      {{F, F, A, A}, {F, A, A, F}, 0.0},
      {{F, F, F, A, N, N}, {F, F, A, A, N, F}, 11.0 / 23.0},
      {{F, A, N, F, A, N, F, A, N, F}, {F, A, N, A, N, F, F, A, N, N}, 27.0 / 67.0},
      {{F, F, A, N}, {A, A, F, N}, -1.0 / 11.0},
  };
  double worst_fixture = 0.0;
  for (const auto& [a, b, want] : fixtures)
    worst_fixture = std::max(worst_fixture, std::abs(enrich::cohen_kappa(a, b) - want));

  Rng rng(77);
  double worst_random = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(60);
    V a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = kAllLabels[rng.uniform_index(3)];
      b[i] = rng.uniform01() < 0.5 ? a[i] : kAllLabels[rng.uniform_index(3)];
    }
    worst_random = std::max(worst_random, std::abs(enrich::cohen_kappa(a, b) - oracle::kappa(a, b)));
  }
  return verdict(worst_fixture <= 1e-12 && worst_random <= 1e-12,
                 "fixture error " + fmt(worst_fixture) + ", random error " + fmt(worst_random));
}

// --- gradient check ---------------------------------------------------------------

Outcome gradient_check() {
  const std::vector<std::tuple<const char*, const char*, StanceLabel>> rows = {
      {"we support the law", "gun control", F},
      {"they hate taxes", "tax reform", A},
      {"nothing here folks", "climate", N},
  };
  std::vector<StanceRecord> recs;
  for (const auto& [text, target, label] : rows)
    recs.push_back({"g" + std::to_string(recs.size()), text, target, label, "grad", Split::Train, ""});
  const corpus::Dataset ds("grad", recs);
  const auto vocab = model::build_vocab(ds, 1);

  double worst = 0.0, weakest_control = std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    model::ModelConfig mc;
    mc.vocab_size = vocab.size();
    mc.embedding_dim = 4;
    mc.hidden = 4;
    mc.attention_dim = 4;
    mc.layers = 2;
    mc.train_embeddings = seed % 2 == 1;
    const auto params = model::init_params(mc, model::random_embeddings(vocab, 4, seed), seed);
    auto examples = model::make_examples(ds, vocab, mc, true);
    if (seed % 4 == 3) examples[1].bias_log_probs = std::array<double, 3>{-0.2, -1.5, -3.0};

    model::GradCheckOptions opts;
    opts.samples = 100;
    opts.seed = seed;
    worst = std::max(worst, model::grad_check(params, examples, opts));

    opts.samples = 20;
    const auto corrupted = [](const model::ModelParams& p, std::span<const model::Example> b, std::span<double> g) {
      kernels::batch_gradient_naive(p, b, g);
      for (double& x : g) x *= 1.1;
    };
    weakest_control = std::min(weakest_control, model::grad_check(params, examples, opts, corrupted));
  }
  return verdict(worst < 1e-6 && weakest_control > 1e-2,
                 "20 seeds, max rel error " + fmt(worst) + ", weakest negative control " + fmt(weakest_control));
}

// --- KL ------------------------------------------------------------------------------

Outcome kl_properties() {
  const std::vector<std::string> words = {"we", "support", "hate", "the", "law", "taxes", "now", "never", "rules"};
  const std::vector<std::string> targets = {"law", "the taxes", "new rules", "taxes now"};
  std::vector<StanceRecord> all;
  for (const auto& t : targets) all.push_back({"v" + t, "new " + t, t, F, "kl", Split::Train, ""});
  for (const auto& w : words) all.push_back({"w" + w, w, w, F, "kl", Split::Train, ""});
  const auto vocab = model::build_vocab(corpus::Dataset("kl", all), 1);

  Rng rng(5);
  double minimum = std::numeric_limits<double>::infinity();
  for (int draw = 0; draw < 1000; ++draw) {
    std::vector<StanceRecord> recs;
    const std::size_t n = 1 + rng.uniform_index(6);
    for (std::size_t i = 0; i < n; ++i) {
      std::string text;
      const std::size_t len = 1 + rng.uniform_index(7);
      for (std::size_t k = 0; k < len; ++k) text += (k ? " " : "") + words[rng.uniform_index(words.size())];
      recs.push_back({"r" + std::to_string(i), text, targets[rng.uniform_index(targets.size())],
                      kAllLabels[rng.uniform_index(3)], "kl", Split::Test, ""});
    }
    model::ModelConfig mc;
    mc.vocab_size = vocab.size();
    mc.embedding_dim = 2 + rng.uniform_index(4);
    mc.hidden = 1 + rng.uniform_index(4);
    mc.attention_dim = 1 + rng.uniform_index(4);
    mc.layers = 1 + rng.uniform_index(2);
    mc.recurrent_scope = rng.uniform01() < 0.5 ? model::Scope::Full : model::Scope::TextOnly;
    mc.attention_scope = rng.uniform01() < 0.5 ? model::Scope::Full : model::Scope::TextOnly;
    const auto emb = model::random_embeddings(vocab, mc.embedding_dim, rng.next_u64());
    const model::Classifier clf{vocab, model::init_params(mc, emb, rng.next_u64())};
    minimum = std::min(minimum, eval::kl_target_dependency(clf, corpus::Dataset("kl", recs)));
  }

  // constructed case: attention and recurrence see only the text span, and
  // every target word has a zero embedding
  const corpus::Dataset ds("kl", {{"z0", "we support the law now", "new rules", F, "kl", Split::Test, ""},
                                  {"z1", "never the taxes", "taxes now", A, "kl", Split::Test, ""}});
  model::ModelConfig mc;
  mc.vocab_size = vocab.size();
  mc.embedding_dim = 4;
  mc.hidden = 3;
  mc.attention_dim = 3;
  mc.layers = 2;
  mc.recurrent_scope = model::Scope::TextOnly;
  mc.attention_scope = model::Scope::TextOnly;
  auto emb = model::random_embeddings(vocab, 4, 11);
  for (const auto& r : ds.records())
    for (const auto& t : text::token_strings(r.target)) {
      auto row = emb.row(static_cast<std::size_t>(vocab.lookup(t)));
      std::fill(row.begin(), row.end(), 0.0);
    }
  const double zero = eval::kl_target_dependency(model::Classifier{vocab, model::init_params(mc, emb, 4)}, ds);
  return verdict(minimum >= 0.0 && std::abs(zero) <= 1e-12,
                 "min over 1000 draws " + fmt(minimum) + ", constructed case " + fmt(zero));
}

// --- synthetic benchmark ----------------------------------------------------------

struct SeedRun {
  std::uint64_t seed = 0;
  double base_f1 = 0, enriched_f1 = 0, base_kl = 0, enriched_kl = 0, seconds = 0;
};

struct Synthetic {
  job::JobConfig job;
  std::vector<SeedRun> runs;
};

model::ModelConfig model_for(const job::JobConfig& job, const model::Vocab& vocab) {
  auto mc = job.model;
  mc.vocab_size = vocab.size();
  return mc;
}

SeedRun run_seed(const job::JobConfig& job, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  synth::SynthConfig sc;
  sc.seed = seed;
  sc.none_fraction = job.none_fraction;
  const auto b = synth::generate(sc);
  const auto vocab = synth::benchmark_vocab(b);
  const auto emb = synth::embedding_matrix(b.world, vocab, seed);
  const auto mc = model_for(job, vocab);
  auto tc = job.train;
  tc.seed = seed;

  SeedRun r;
  r.seed = seed;
  const auto base = model::train(b.train, b.valid, vocab, mc, emb, tc);
  r.base_f1 = eval::evaluate(base.classifier, b.test, eval::ClassSet::ThreeClass).macro_f1;
  r.base_kl = eval::kl_target_dependency(base.classifier, b.test);
  const auto enriched = model::train(synth::training_set(b, sc, b.pool), b.valid, vocab, mc, emb, tc);
  r.enriched_f1 = eval::evaluate(enriched.classifier, b.test, eval::ClassSet::ThreeClass).macro_f1;
  r.enriched_kl = eval::kl_target_dependency(enriched.classifier, b.test);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

Synthetic& synthetic() {
  static Synthetic s = [] {
    Synthetic out;
    out.job = job::load_job(STANCE_SYNTHETIC_CONFIG);
    for (std::uint64_t seed : {out.job.seed, out.job.seed + 1, out.job.seed + 2})
      out.runs.push_back(run_seed(out.job, seed));
    return out;
  }();
  return s;
}

Outcome cross_target_gain() {
  const auto& s = synthetic();
  bool ok = true;
  std::string detail;
  for (const auto& r : s.runs) {
    ok &= r.enriched_f1 - r.base_f1 >= 0.10 && r.seconds < 600;
    detail += (detail.empty() ? "" : ", ") + std::string("seed ") + std::to_string(r.seed) + ": " +
              fmt(r.base_f1) + " -> " + fmt(r.enriched_f1) + " in " + fmt(r.seconds, 3) + " s";
  }
  return verdict(ok, "unseen-target 3-class macro-F1 " + detail);
}

Outcome kl_enriched_exceeds_base() {
  const auto& s = synthetic();
  bool ok = true;
  std::string detail;
  for (const auto& r : s.runs) {
    ok &= r.enriched_kl > r.base_kl;
    detail += (detail.empty() ? "" : ", ") + std::string("seed ") + std::to_string(r.seed) + ": " +
              fmt(r.base_kl) + (r.enriched_kl > r.base_kl ? " < " : " >= ") + fmt(r.enriched_kl);
  }
  return verdict(ok, "KL base vs enriched " + detail);
}

Outcome ablation_curve() {
  const auto job = job::load_job(STANCE_SYNTHETIC_CONFIG);
  synth::SynthConfig sc;
  sc.seed = job.seed;
  sc.none_fraction = job.none_fraction;
  const auto b = synth::generate(sc);
  eval::AblationSetup setup;
  setup.valid = &b.valid;
  setup.test_sets = {{"unseen", &b.test}};
  setup.vocab = synth::benchmark_vocab(b);
  setup.embeddings = synth::embedding_matrix(b.world, setup.vocab, sc.seed);
  setup.model_config = model_for(job, setup.vocab);
  setup.train_config = job.train;
  setup.shuffle_seed = job.seed;
  setup.none_extension = synth::none_extension(sc);
  const std::vector<std::size_t> sizes = {0, 150, 300, 600};
  if (job.ablation_sizes != sizes) return fail("config ablation sizes differ from {0, 150, 300, 600}");
  const auto curve = eval::run_ablation(b.train_polar, b.pool, sizes, setup);
  std::string detail;
  for (const auto& p : curve.points)
    detail += (detail.empty() ? "" : ", ") + std::to_string(p.enriched_size) + ": " +
              fmt(p.results.at("unseen").macro_f1);
  const double gain = curve.points.back().results.at("unseen").macro_f1 - curve.points.front().results.at("unseen").macro_f1;
  return verdict(gain >= 0.05, "F1 by size " + detail + "; gain " + fmt(gain));
}

// --- None extension -------------------------------------------------------------------

std::string check_none_extension(const corpus::Dataset& train, std::uint64_t seed) {
  corpus::NoneExtensionOptions opts;
  opts.fraction = 0.2;
  opts.seed = seed;
  const auto out = corpus::extend_none_subset(train, opts);
  const std::size_t added = out.size() - train.size();
  std::size_t wrong = 0;
  for (std::size_t i = train.size(); i < out.size(); ++i) {
    const auto& r = out[i];
    wrong += r.label != N || enrich::detect_explicit_mention(r.text, r.target);
  }
  const bool same = corpus::to_jsonl(out) == corpus::to_jsonl(corpus::extend_none_subset(train, opts));
  const bool ok = added == static_cast<std::size_t>(std::floor(0.2 * static_cast<double>(train.size()))) &&
                  wrong == 0 && same;
  return std::string(ok ? "" : "!") + std::to_string(train.size()) + " -> +" + std::to_string(added) +
         ", " + std::to_string(wrong) + " invalid, " + (same ? "deterministic" : "NOT deterministic");
}

fs::path corpora_dir() {
  if (const char* env = std::getenv("STANCE_CORPORA_DIR"); env && *env) return env;
  return fs::path(STANCE_SOURCE_DIR) / "data" / "corpora";
}

bool files_present(const corpus::CorpusAdapterConfig& cfg, const fs::path& dir) {
  for (const auto& [split, files] : cfg.files)
    for (const auto& f : files)
      if (!fs::exists(dir / f)) return false;
  return true;
}

corpus::CorpusAdapterConfig adapter(const std::string& name) {
  return corpus::load_adapter(fs::path(STANCE_SOURCE_DIR) / "configs" / "adapters" / (name + ".json"));
}

Outcome none_extension_contract() {
  synth::SynthConfig sc;
  sc.seed = 4;
  sc.train_records = 2914;
  const auto b = synth::generate(sc);
  std::string detail = "synthetic " + check_none_extension(b.train_polar, 7);
  bool ok = detail.find('!') == std::string::npos;
  const auto sem = adapter("semeval16a");
  if (files_present(sem, corpora_dir())) {
    const auto ds = corpus::unify_labels(corpus::ingest(corpora_dir(), sem));
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (ds[i].split == Split::Train) idx.push_back(i);
    const auto part = check_none_extension(ds.subset(idx), 7);
    ok &= part.find('!') == std::string::npos;
    detail += "; SemEval-16 A " + part;
  } else {
    detail += "; official SemEval-16 A files absent";
  }
  if (b.train_polar.size() != 2914) return fail("generated train has " + std::to_string(b.train_polar.size()));
  return verdict(ok, detail);
}

// --- corpus stats ---------------------------------------------------------------------------

Outcome corpus_stats() {
  const std::vector<std::pair<std::string, std::array<std::size_t, 3>>> expected = {
      {"semeval16a", {2914, 0, 1249}},
      {"semeval16b", {0, 0, 707}},
      {"pstance", {19228, 2462, 2374}},
      {"vast", {13477, 2062, 3006}},
      {"tweet_covid", {4533, 800, 800}},
  };
  const auto dir = corpora_dir();
  std::size_t present = 0;
  bool ok = true;
  std::string detail;
  for (const auto& [name, want] : expected) {
    const auto cfg = adapter(name);
    if (!files_present(cfg, dir)) continue;
    ++present;
    const auto got = corpus::stats(corpus::unify_labels(corpus::ingest(dir, cfg))).split_counts;
    ok &= got == want;
    detail += (detail.empty() ? "" : ", ") + name + " " + std::to_string(got[0]) + "/" + std::to_string(got[1]) +
              "/" + std::to_string(got[2]) + (got == want ? "" : " (mismatch)");
  }
  if (present == 0) return {Status::Skip, "official corpus files not found under " + dir.string()};
  if (!ok) return fail(detail);
  if (present < expected.size())
    return {Status::Skip, "only " + std::to_string(present) + " of 5 corpora present, all matching: " + detail};
  return pass(detail);
}

// --- service replay -------------------------------------------------------------------------

struct Server {
  pid_t pid = -1;
  int port = 0;
};

Server start_server(const fs::path& state_dir, const std::optional<fs::path>& batch) {
  int fds[2];
  if (::pipe(fds) != 0) throw std::runtime_error("pipe failed");
  const pid_t pid = ::fork();
  if (pid == 0) {
    ::dup2(fds[1], STDOUT_FILENO);
    ::close(fds[0]);
    ::close(fds[1]);
    std::vector<std::string> args = {STANCE_CLI_PATH, "serve", "--state-dir", state_dir.string(),
                                     "--port", "0", "--snapshot-every", "5"};
    if (batch) {
      args.push_back("--batch");
      args.push_back(batch->string());
    }
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    ::execv(argv[0], argv.data());
    std::_Exit(127);
  }
  ::close(fds[1]);
  std::string line;
  char c;
  while (::read(fds[0], &c, 1) == 1 && c != '\n') line += c;
  ::close(fds[0]);
  const auto colon = line.find(':', line.find("listening on"));
  if (line.find("listening on") == std::string::npos || colon == std::string::npos) {
    ::kill(pid, SIGKILL);
    ::waitpid(pid, nullptr, 0);
    throw std::runtime_error("serve did not start: " + line);
  }
  return {pid, std::stoi(line.substr(colon + 1))};
}

void stop_server(Server& s, int sig) {
  ::kill(s.pid, sig);
  ::waitpid(s.pid, nullptr, 0);
  s.pid = -1;
}

json request(httplib::Client& cli, const std::string& method, const std::string& path, const json& body = {}) {
  auto res = method == "GET" ? cli.Get(path) : cli.Post(path, body.dump(), "application/json");
  if (!res) throw std::runtime_error(method + " " + path + " failed");
  if (res->status != 200) throw std::runtime_error(method + " " + path + " -> " + res->body);
  return json::parse(res->body);
}

std::string body_of(httplib::Client& cli, const std::string& path) {
  auto res = cli.Get(path);
  if (!res || res->status != 200) throw std::runtime_error("GET " + path + " failed");
  return res->body;
}

// Votes on every candidate of the next `items` items; the last one is served
// but left unvoted when `leave_pending` is set.
void annotate(httplib::Client& cli, const std::string& sid, std::size_t items, bool leave_pending, std::size_t salt) {
  for (std::size_t k = 0; k < items; ++k) {
    const auto next = request(cli, "GET", "/api/v1/sessions/" + sid + "/next");
    if (next["done"].get<bool>()) return;
    if (leave_pending && k + 1 == items) return;
    const auto& item = next["item"];
    for (std::size_t c = 0; c < item["candidates"].size(); ++c) {
      const auto label = std::string(to_string(kAllLabels[(k + c + salt) % 3]));
      request(cli, "POST", "/api/v1/sessions/" + sid + "/votes",
              {{"record_id", item["record"]["id"]},
               {"object_surface", item["candidates"][c]["surface"]},
               {"label", label}});
    }
  }
}

Outcome service_replay() {
  testing::TempDir dir("stance-accept");
  synth::SynthConfig sc;
  sc.seed = 2;
  sc.clusters = 3;
  sc.objects_per_cluster = 6;
  sc.test_targets_per_cluster = 2;
  sc.train_records = 300;
  sc.valid_records = 30;
  sc.test_records = 30;
  const auto b = synth::generate(sc);
  const auto batch_path = dir / "batch.jsonl";
  service::write_batch(b.batch, batch_path);
  const auto state_dir = dir / "state";

  auto server = start_server(state_dir, batch_path);
  std::string pre_state, pre_export;
  {
    httplib::Client cli("127.0.0.1", server.port);
    const auto s1 = request(cli, "POST", "/api/v1/sessions", {{"annotator_id", "ann1"}})["session_id"].get<std::string>();
    const auto s2 = request(cli, "POST", "/api/v1/sessions", {{"annotator_id", "ann2"}})["session_id"].get<std::string>();
    annotate(cli, s1, 7, true, 0);
    annotate(cli, s2, 5, false, 1);
    pre_state = body_of(cli, "/api/v1/state");
    pre_export = body_of(cli, "/api/v1/export");
  }
  stop_server(server, SIGKILL);
  if (!fs::exists(state_dir / "snapshot.json")) return fail("no snapshot was written before the kill");

  const auto batch = service::read_batch(state_dir / "batch.jsonl");
  const auto replayed = service::to_json(service::replay(state_dir, batch, {})).dump();
  if (replayed != pre_state) return fail("replay(state dir) differs from the pre-kill /state");
  const auto seq = json::parse(pre_state)["seq"].get<std::uint64_t>();
  const auto snap_seq = json::parse(testing::read_file(state_dir / "snapshot.json"))["seq"].get<std::uint64_t>();

  server = start_server(state_dir, std::nullopt);
  std::string mid_state;
  {
    httplib::Client cli("127.0.0.1", server.port);
    if (body_of(cli, "/api/v1/state") != pre_state) return fail("restarted /state differs");
    if (body_of(cli, "/api/v1/export") != pre_export) return fail("restarted /export differs");
    annotate(cli, "s1", 3, false, 2);
    mid_state = body_of(cli, "/api/v1/state");
  }
  stop_server(server, SIGKILL);

  // a write cut short by the kill leaves a torn final line
  {
    std::ofstream log(state_dir / "events.jsonl", std::ios::app | std::ios::binary);
    log << R"({"type":"vote","session_id":"s2","vo)";
  }
  server = start_server(state_dir, std::nullopt);
  bool torn_ok;
  {
    httplib::Client cli("127.0.0.1", server.port);
    torn_ok = body_of(cli, "/api/v1/state") == mid_state;
  }
  stop_server(server, SIGTERM);
  if (!torn_ok) return fail("state after a torn log line differs");
  return pass("kill -9 at seq " + std::to_string(seq) + " (snapshot at " + std::to_string(snap_seq) +
              "), replay, /state and /export byte-identical; second kill with torn line recovered");
}

}  // namespace

int main() {
  std::cout << "acceptance: " << kernels::max_threads() << " OpenMP threads" << std::endl;
  criterion("label algebra", 1, label_algebra);
  criterion("metric oracle equivalence", 10, metric_oracle);
  criterion("kappa oracle", 5, kappa_oracle);
  criterion("gradient check", 120, gradient_check);
  criterion("KL properties", 60, kl_properties);
  criterion("synthetic cross-target gain", 0, cross_target_gain);
  criterion("KL target dependency grows with enrichment", 0, kl_enriched_exceeds_base);
  criterion("enrichment size ablation", 0, ablation_curve);
  criterion("None-extension contract", 0, none_extension_contract);
  criterion("corpus stats", 0, corpus_stats);
  criterion("service replay", 0, service_replay);
  std::cout << (failures == 0 ? "acceptance: all criteria met" : "acceptance: " + std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
