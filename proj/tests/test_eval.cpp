#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "stance/eval.hpp"
#include "stance/rng.hpp"
#include "stance/text.hpp"

using namespace stance;
using namespace stance::eval;

namespace {

constexpr StanceLabel F = StanceLabel::Favor;
constexpr StanceLabel A = StanceLabel::Against;
constexpr StanceLabel N = StanceLabel::None;

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a stance::Error");
  return ErrorCode::FormatError;
}

corpus::Dataset random_dataset(std::size_t n, std::uint64_t seed, const std::string& prefix = "r") {
  const std::vector<std::string> words = {"we", "support", "hate", "the", "law", "taxes", "now", "never"};
  const std::vector<std::string> targets = {"law", "the taxes", "new rules"};
  Rng rng(seed);
  std::vector<StanceRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string text;
    const std::size_t len = 2 + rng.uniform_index(8);
    for (std::size_t k = 0; k < len; ++k) text += (k ? " " : "") + words[rng.uniform_index(words.size())];
    out.push_back({prefix + std::to_string(i), text, targets[rng.uniform_index(targets.size())],
                   kAllLabels[rng.uniform_index(3)], "toy", Split::Train, ""});
  }
  return corpus::Dataset("toy", std::move(out));
}

model::Vocab vocab_for(const corpus::Dataset& ds) {
  auto v = model::build_vocab(ds, 1);
  std::vector<std::string> tokens = v.tokens();
  tokens.push_back("rules");
  tokens.push_back("new");
  std::sort(tokens.begin() + model::Vocab::kNumReserved, tokens.end());
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
  return model::Vocab(tokens);
}

model::ModelConfig tiny(std::size_t vocab_size) {
  model::ModelConfig c;
  c.vocab_size = vocab_size;
  c.embedding_dim = 4;
  c.hidden = 3;
  c.attention_dim = 3;
  c.layers = 1;
  return c;
}

}  // namespace

TEST_CASE("metrics on fixed cases") {
  const std::vector<StanceLabel> golds = {F, A, N, F, A, N};
  for (auto cs : {ClassSet::ThreeClass, ClassSet::TwoClass}) CHECK(macro_metrics(golds, golds, cs).macro_f1 == 1.0);

  // every prediction wrong
  const std::vector<StanceLabel> wrong = {A, N, F, A, N, F};
  CHECK(macro_metrics(wrong, golds, ClassSet::ThreeClass).macro_f1 == 0.0);

  // 2-class: gold None dropped, predicted None counts as a miss
  const auto r = macro_metrics(std::vector{F, N, A}, std::vector{F, A, N}, ClassSet::TwoClass);
  CHECK(r.count == 2);
  CHECK(r.per_class[index_of(F)].f1 == 1.0);
  CHECK(r.per_class[index_of(A)].recall == 0.0);
  CHECK(r.macro_f1 == 0.5);

  CHECK(code_of([] { macro_metrics(std::vector{F}, std::vector{N}, ClassSet::TwoClass); }) ==
        ErrorCode::EmptyAfterFiltering);
  CHECK(code_of([] { macro_metrics(std::vector{F}, std::vector{F, A}, ClassSet::ThreeClass); }) ==
        ErrorCode::LengthMismatch);
}

TEST_CASE("metrics equal the brute-force oracle") {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(20);
    std::vector<StanceLabel> p(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = kAllLabels[rng.uniform_index(3)];
      g[i] = kAllLabels[rng.uniform_index(3)];
    }
    const auto three = macro_metrics(p, g, ClassSet::ThreeClass);
    const auto o3 = oracle::macro_scores(p, g, false);
    CHECK(three.macro_f1 == o3.f1);
    CHECK(three.macro_precision == o3.precision);
    CHECK(three.macro_recall == o3.recall);
    CHECK(three.matrix.total() == n);

    bool any_polar = false;
    for (auto l : g) any_polar |= l != N;
    if (!any_polar) continue;
    const auto two = macro_metrics(p, g, ClassSet::TwoClass);
    const auto o2 = oracle::macro_scores(p, g, true);
    CHECK(two.macro_f1 == o2.f1);
    CHECK(two.macro_precision == o2.precision);
    CHECK(two.macro_recall == o2.recall);
  }
}

TEST_CASE("metrics table and JSON") {
  const auto r = macro_metrics(std::vector{F, A, N}, std::vector{F, A, A}, ClassSet::ThreeClass);
  const auto table = format_metrics_table({{"semeval16b", r}}, "3-class");
  CHECK(table.rfind("3-class\n", 0) == 0);
  CHECK(table.find("Test Set") != std::string::npos);
  CHECK(table.find("semeval16b") != std::string::npos);
  const auto j = to_json(r);
  CHECK(j["macro"]["f1"].get<double>() == r.macro_f1);
  CHECK(j["confusion"][1][2] == 1);
  CHECK(j["confusion"][2][2] == 0);
  CHECK(j["confusion"][1][1] == 1);
  CHECK(to_json(macro_metrics(std::vector{F}, std::vector{F}, ClassSet::TwoClass))["per_class"].size() == 2);
}

TEST_CASE("KL divergence") {
  const model::Distribution p = {0.2, 0.5, 0.3};
  CHECK(kl_divergence(p, p) == 0.0);
  // analytic value with both inputs floored at 1e-12 and renormalised
  const double z = 1.0 + 2e-12;
  const double q = 1.0 / 3.0;
  const double expected = (1.0 / z) * std::log((1.0 / z) / q) + 2 * (1e-12 / z) * std::log((1e-12 / z) / q);
  const double got = kl_divergence({1.0, 0.0, 0.0}, {q, q, q});
  CHECK(got == doctest::Approx(expected).epsilon(1e-14));
  CHECK(std::abs(got - std::log(3.0)) < 1e-9);
  CHECK(std::isfinite(kl_divergence({1.0, 0.0, 0.0}, {0.0, 1.0, 0.0})));

  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    model::Distribution a{}, b{};
    double sa = 0, sb = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      a[c] = rng.uniform01();
      b[c] = rng.uniform01();
      sa += a[c];
      sb += b[c];
    }
    for (std::size_t c = 0; c < 3; ++c) {
      a[c] /= sa;
      b[c] /= sb;
    }
    CHECK(kl_divergence(a, b) >= 0.0);
  }
}

TEST_CASE("KL target dependency") {
  const auto ds = random_dataset(25, 5);
  const auto vocab = vocab_for(ds);
  auto emb = model::random_embeddings(vocab, 4, 2);

  SUBCASE("full scope model depends on the target") {
    const model::Classifier clf{vocab, model::init_params(tiny(vocab.size()), emb, 3)};
    const double kl = kl_target_dependency(clf, ds);
    CHECK(kl > 0.0);
    CHECK(kl == kl_target_dependency(clf, ds, false));
  }

  SUBCASE("target slot cut off from the encoder gives exactly zero") {
    auto cfg = tiny(vocab.size());
    cfg.recurrent_scope = model::Scope::TextOnly;
    cfg.attention_scope = model::Scope::TextOnly;
    for (const auto& r : ds.records())
      for (const auto& t : text::token_strings(r.target)) {
        auto row = emb.row(static_cast<std::size_t>(vocab.lookup(t)));
        std::fill(row.begin(), row.end(), 0.0);
      }
    const model::Classifier clf{vocab, model::init_params(cfg, emb, 3)};
    CHECK(kl_target_dependency(clf, ds) == 0.0);
  }

  CHECK(code_of([&] {
          const model::Classifier clf{vocab, model::init_params(tiny(vocab.size()), emb, 3)};
          kl_target_dependency(clf, corpus::Dataset());
        }) == ErrorCode::PreconditionViolated);
}

TEST_CASE("ablation") {
  const auto train = random_dataset(30, 1, "t");
  const auto pool = random_dataset(20, 2, "p");
  const auto valid = random_dataset(10, 3, "v");
  const auto test = random_dataset(15, 4, "x");
  corpus::Dataset all("all", [&] {
    auto v = train.records();
    for (const auto* d : {&pool, &valid, &test}) v.insert(v.end(), d->records().begin(), d->records().end());
    return v;
  }());
  AblationSetup setup;
  setup.valid = &valid;
  setup.test_sets = {{"x", &test}};
  setup.vocab = vocab_for(all);
  setup.model_config = tiny(setup.vocab.size());
  setup.embeddings = model::random_embeddings(setup.vocab, 4, 1);
  setup.train_config.epochs = 2;
  setup.train_config.batch_size = 8;
  setup.train_config.learning_rate = 1e-2;

  SUBCASE("size 0 is plain base training") {
    const std::vector<std::size_t> sizes = {0};
    const auto curve = run_ablation(train, pool, sizes, setup);
    REQUIRE(curve.points.size() == 1);
    const auto base = model::train(train, valid, setup.vocab, setup.model_config, setup.embeddings,
                                   setup.train_config);
    CHECK(curve.points[0].results.at("x").macro_f1 == evaluate(base.classifier, test, ClassSet::ThreeClass).macro_f1);
  }

  SUBCASE("curve and CSV") {
    const std::vector<std::size_t> sizes = {0, 10, 20};
    const auto curve = run_ablation(train, pool, sizes, setup);
    REQUIRE(curve.points.size() == 3);
    const auto csv = ablation_csv(curve);
    CHECK(csv.rfind("size,f1_x\n0,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(to_json(curve).size() == 3);
  }

  SUBCASE("bad sizes") {
    CHECK(code_of([&] { run_ablation(train, pool, std::vector<std::size_t>{0, 0}, setup); }) ==
          ErrorCode::PreconditionViolated);
    CHECK(code_of([&] { run_ablation(train, pool, std::vector<std::size_t>{0, 21}, setup); }) ==
          ErrorCode::SizeExceedsPool);
    setup.valid = nullptr;
    CHECK(code_of([&] { run_ablation(train, pool, std::vector<std::size_t>{0}, setup); }) ==
          ErrorCode::PreconditionViolated);
  }
}
