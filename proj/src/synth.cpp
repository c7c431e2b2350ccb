#include "stance/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "stance/rng.hpp"
#include "stance/text.hpp"

namespace stance::synth {

namespace {

const std::vector<std::string> kPositiveVerbs = {"support", "love", "praise", "back",
                                                 "defend", "applaud", "endorse", "trust"};
const std::vector<std::string> kNegativeVerbs = {"oppose", "hate", "reject", "condemn",
                                                 "attack", "distrust", "denounce", "mock"};
const std::vector<std::string> kSubjects = {"i", "we", "they", "you"};
const std::vector<std::string> kOpeners = {"honestly", "well", "so", "rt", "oh"};
const std::vector<std::string> kAdverbs = {"really", "truly", "strongly", "totally", "fully"};
const std::vector<std::string> kClosers = {"!", ".", "!!", "#vote", "#news", "#truth"};
const std::vector<std::string> kSyllables = {"ka",  "lo",  "vi",  "ter", "mon", "dra", "sel",
                                             "pu",  "rin", "zor", "bel", "tam", "quo", "fen",
                                             "gal", "nir", "vex", "dul", "mar", "sko", "tri"};

template <class T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[rng.uniform_index(v.size())];
}

std::vector<double> random_vector(Rng& rng, std::size_t dim, double scale) {
  std::vector<double> v(dim);
  for (auto& x : v) x = scale * rng.normal() / std::sqrt(static_cast<double>(dim));
  return v;
}

std::vector<double> unit_vector(Rng& rng, std::size_t dim) {
  auto v = random_vector(rng, dim, 1.0);
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (auto& x : v) x /= n;
  return v;
}

StanceLabel sentiment_label(int e) { return e > 0 ? StanceLabel::Favor : StanceLabel::Against; }

// One generated mention: an entity and the direct sentiment toward it.
struct Mention {
  std::size_t entity;
  int sentiment;
};

class Generator {
 public:
  Generator(const SynthConfig& cfg, const World& world, Rng& rng)
      : cfg_(cfg), world_(world), rng_(rng) {
    for (std::size_t i = 0; i < world.entities.size(); ++i) {
      const auto& e = world.entities[i];
      if (e.role == Role::Object) objects_by_cluster_[e.cluster].push_back(i);
    }
  }

  std::string verb(int e) { return e > 0 ? pick(rng_, kPositiveVerbs) : pick(rng_, kNegativeVerbs); }

  std::string phrase(const Mention& m) {
    std::string s;
    if (rng_.uniform01() < 0.3) s += pick(rng_, kAdverbs) + " ";
    s += verb(m.sentiment) + " ";
    if (rng_.uniform01() < 0.2) s += "the ";
    s += world_.entities[m.entity].name;
    return s;
  }

  std::string text(const std::vector<Mention>& ms) {
    std::string s;
    if (rng_.uniform01() < 0.3) s += pick(rng_, kOpeners) + " ";
    s += pick(rng_, kSubjects) + " " + phrase(ms[0]);
    for (std::size_t k = 1; k < ms.size(); ++k) s += " and " + phrase(ms[k]);
    if (rng_.uniform01() < 0.8) s += " " + pick(rng_, kClosers);
    return s;
  }

  std::size_t object_in(std::size_t cluster, int side) {
    std::vector<std::size_t> c;
    for (auto i : objects_by_cluster_.at(cluster))
      if (world_.entities[i].side == side) c.push_back(i);
    return pick(rng_, c);
  }

  int random_sign() { return rng_.uniform01() < 0.5 ? 1 : -1; }

  // Mentions expressing stance `stance` (+1/-1) toward target t. Explicit
  // records name t itself first.
  std::vector<Mention> polar_mentions(std::size_t target, int stance, bool explicit_mention,
                                      double disaligned) {
    const auto& t = world_.entities[target];
    std::vector<Mention> ms;
    const std::size_t count = rng_.uniform01() < cfg_.two_object_fraction ? 2 : 1;
    for (std::size_t k = 0; k < count; ++k) {
      if (k == 0 && explicit_mention) {
        ms.push_back({target, stance});
        continue;
      }
      const int side = rng_.uniform01() < disaligned ? -t.side : t.side;
      const std::size_t o = object_in(t.cluster, side);
      // stance = e * s(t) * s(o)  =>  e = stance * s(t) * s(o)
      ms.push_back({o, stance * t.side * world_.entities[o].side});
    }
    return ms;
  }

  std::vector<Mention> unrelated_mentions(std::size_t target) {
    const auto& t = world_.entities[target];
    std::size_t c = rng_.uniform_index(cfg_.clusters - 1);
    if (c >= t.cluster) ++c;
    std::vector<Mention> ms;
    const std::size_t count = rng_.uniform01() < cfg_.two_object_fraction ? 2 : 1;
    for (std::size_t k = 0; k < count; ++k) ms.push_back({object_in(c, random_sign()), random_sign()});
    return ms;
  }

  StanceRecord record(std::string id, std::string text, std::size_t target, StanceLabel label,
                      Split split) {
    StanceRecord r;
    r.id = std::move(id);
    r.text = std::move(text);
    r.target = world_.entities[target].name;
    r.label = label;
    r.corpus = "synthetic";
    r.split = split;
    r.domain = "cluster" + std::to_string(world_.entities[target].cluster);
    return r;
  }

 private:
  const SynthConfig& cfg_;
  const World& world_;
  Rng& rng_;
  std::map<std::size_t, std::vector<std::size_t>> objects_by_cluster_;
};

std::string make_name(Rng& rng, const std::set<std::string>& taken) {
  static const enrich::HeuristicTagger tagger;
  for (;;) {
    std::string s;
    const std::size_t n = 2 + rng.uniform_index(2);
    for (std::size_t k = 0; k < n; ++k) s += pick(rng, kSyllables);
    if (s.size() < 4 || taken.count(s)) continue;
    if (tagger.tag_word(s) != enrich::Pos::Noun) continue;
    return s;
  }
}

}  // namespace

nlohmann::json to_json(const SynthConfig& c) {
  return {{"seed", c.seed},
          {"clusters", c.clusters},
          {"objects_per_cluster", c.objects_per_cluster},
          {"test_targets_per_cluster", c.test_targets_per_cluster},
          {"embedding_dim", c.embedding_dim},
          {"embedding_noise", c.embedding_noise},
          {"train_records", c.train_records},
          {"valid_records", c.valid_records},
          {"test_records", c.test_records},
          {"explicit_fraction", c.explicit_fraction},
          {"two_object_fraction", c.two_object_fraction},
          {"disaligned_fraction", c.disaligned_fraction},
          {"none_fraction", c.none_fraction},
          {"annotators", c.annotators},
          {"annotator_error", c.annotator_error}};
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.seed = j.value("seed", c.seed);
  c.clusters = j.value("clusters", c.clusters);
  c.objects_per_cluster = j.value("objects_per_cluster", c.objects_per_cluster);
  c.test_targets_per_cluster = j.value("test_targets_per_cluster", c.test_targets_per_cluster);
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.embedding_noise = j.value("embedding_noise", c.embedding_noise);
  c.train_records = j.value("train_records", c.train_records);
  c.valid_records = j.value("valid_records", c.valid_records);
  c.test_records = j.value("test_records", c.test_records);
  c.explicit_fraction = j.value("explicit_fraction", c.explicit_fraction);
  c.two_object_fraction = j.value("two_object_fraction", c.two_object_fraction);
  c.disaligned_fraction = j.value("disaligned_fraction", c.disaligned_fraction);
  c.none_fraction = j.value("none_fraction", c.none_fraction);
  c.annotators = j.value("annotators", c.annotators);
  c.annotator_error = j.value("annotator_error", c.annotator_error);
  if (c.clusters < 2) throw Error(ErrorCode::ConfigError, "synthetic benchmark needs >= 2 clusters");
  if (c.objects_per_cluster < 2)
    throw Error(ErrorCode::ConfigError, "objects_per_cluster must be >= 2");
  if (c.annotators < 2) throw Error(ErrorCode::ConfigError, "annotators must be >= 2");
  return c;
}

const Entity* World::find(std::string_view name) const {
  auto it = by_name.find(std::string(name));
  return it == by_name.end() ? nullptr : &entities[it->second];
}

std::vector<std::size_t> World::with_role(Role role) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entities.size(); ++i)
    if (entities[i].role == role) out.push_back(i);
  return out;
}

World make_world(const SynthConfig& cfg) {
  Rng rng(cfg.seed * 0x2545F4914F6CDD1DULL + 11);
  const std::size_t dim = cfg.embedding_dim;
  World w;
  std::set<std::string> taken;
  const auto side_dir = unit_vector(rng, dim);
  const auto sentiment_dir = unit_vector(rng, dim);

  for (std::size_t c = 0; c < cfg.clusters; ++c) {
    const auto centre = unit_vector(rng, dim);
    auto add = [&](Role role, int side) {
      Entity e;
      e.name = make_name(rng, taken);
      taken.insert(e.name);
      e.cluster = c;
      e.side = side;
      e.role = role;
      auto v = random_vector(rng, dim, cfg.embedding_noise);
      for (std::size_t k = 0; k < dim; ++k) v[k] += centre[k] + 0.8 * side * side_dir[k];
      w.embeddings[e.name] = std::move(v);
      w.by_name[e.name] = w.entities.size();
      w.entities.push_back(std::move(e));
    };
    add(Role::TrainTarget, 1);
    for (std::size_t k = 0; k < cfg.objects_per_cluster; ++k) add(Role::Object, k % 2 == 0 ? 1 : -1);
    for (std::size_t k = 0; k < cfg.test_targets_per_cluster; ++k)
      add(Role::TestTarget, k % 2 == 0 ? 1 : -1);
  }
  auto add_word = [&](const std::string& word, const std::vector<double>& base, double sign) {
    auto v = random_vector(rng, dim, cfg.embedding_noise);
    for (std::size_t k = 0; k < dim; ++k) v[k] += sign * base[k];
    w.embeddings[word] = std::move(v);
  };
  for (const auto& v : kPositiveVerbs) add_word(v, sentiment_dir, 1.0);
  for (const auto& v : kNegativeVerbs) add_word(v, sentiment_dir, -1.0);
  const std::vector<double> zero(dim, 0.0);
  for (const auto* list : {&kSubjects, &kOpeners, &kAdverbs, &kClosers})
    for (const auto& word : *list) add_word(word, zero, 0.0);
  add_word("and", zero, 0.0);
  add_word("the", zero, 0.0);
  return w;
}

StanceLabel object_truth(const World& world, const StanceRecord& rec, std::string_view surface) {
  const Entity* entity = nullptr;
  for (const auto& word : text::normalized_words(surface))
    if (const auto* e = world.find(word)) entity = e;
  if (!entity) return StanceLabel::None;
  // the verb right before the entity (optionally across "the") carries the sentiment
  const auto words = text::normalized_words(rec.text);
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (words[i] != entity->name) continue;
    for (std::size_t back = 1; back <= 2 && back <= i; ++back) {
      const auto& w = words[i - back];
      if (std::find(kPositiveVerbs.begin(), kPositiveVerbs.end(), w) != kPositiveVerbs.end())
        return StanceLabel::Favor;
      if (std::find(kNegativeVerbs.begin(), kNegativeVerbs.end(), w) != kNegativeVerbs.end())
        return StanceLabel::Against;
    }
  }
  return StanceLabel::None;
}

Benchmark generate(const SynthConfig& cfg) {
  Benchmark b;
  b.world = make_world(cfg);
  const World& w = b.world;
  Rng rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 3);
  Generator gen(cfg, w, rng);

  const auto train_targets = w.with_role(Role::TrainTarget);
  const auto test_targets = w.with_role(Role::TestTarget);

  auto polar_record = [&](const std::string& id, std::size_t target, Split split) {
    const int stance = gen.random_sign();
    const bool explicit_mention = rng.uniform01() < cfg.explicit_fraction;
    const auto ms = gen.polar_mentions(target, stance, explicit_mention, cfg.disaligned_fraction);
    return gen.record(id, gen.text(ms), target, sentiment_label(stance), split);
  };
  auto none_record = [&](const std::string& id, std::size_t target, Split split) {
    return gen.record(id, gen.text(gen.unrelated_mentions(target)), target, StanceLabel::None, split);
  };

  std::vector<StanceRecord> train;
  for (std::size_t i = 0; i < cfg.train_records; ++i)
    train.push_back(polar_record("syn:train:" + std::to_string(i), pick(rng, train_targets), Split::Train));
  b.train_polar = corpus::Dataset("synthetic-train", std::move(train));
  b.train = corpus::extend_none_subset(b.train_polar, none_extension(cfg));

  std::vector<StanceRecord> valid;
  for (std::size_t i = 0; i < cfg.valid_records; ++i) {
    const auto t = pick(rng, train_targets);
    const std::string id = "syn:valid:" + std::to_string(i);
    valid.push_back(rng.uniform01() < cfg.none_fraction ? none_record(id, t, Split::Valid)
                                                         : polar_record(id, t, Split::Valid));
  }
  b.valid = corpus::Dataset("synthetic-valid", std::move(valid));

  std::vector<StanceRecord> test;
  for (std::size_t i = 0; i < cfg.test_records; ++i) {
    const auto t = pick(rng, test_targets);
    const std::string id = "syn:test:" + std::to_string(i);
    // unseen targets: implicit mentions are equally likely to be on either side
    if (rng.uniform01() < 0.3) {
      test.push_back(none_record(id, t, Split::Test));
    } else {
      const int stance = gen.random_sign();
      const bool explicit_mention = rng.uniform01() < cfg.explicit_fraction;
      const auto ms = gen.polar_mentions(t, stance, explicit_mention, 0.5);
      test.push_back(gen.record(id, gen.text(ms), t, sentiment_label(stance), Split::Test));
    }
  }
  b.test = corpus::Dataset("synthetic-test", std::move(test));

  // enrichment: extract, annotate, resolve, pair
  const enrich::HeuristicTagger tagger;
  b.batch = enrich::build_annotation_batch(b.train.records(), tagger);
  std::int64_t clock = 1'700'000'000'000;
  std::vector<std::vector<StanceLabel>> per_annotator(cfg.annotators);
  for (const auto& item : b.batch) {
    for (const auto& cand : item.candidates) {
      const auto truth = object_truth(w, item.record, cand.surface);
      for (std::size_t a = 0; a < cfg.annotators; ++a) {
        StanceLabel label = truth;
        if (rng.uniform01() < cfg.annotator_error) {
          const auto shift = 1 + rng.uniform_index(kNumLabels - 1);
          label = kAllLabels[(index_of(truth) + shift) % kNumLabels];
        }
        per_annotator[a].push_back(label);
        b.votes.push_back({item.record.id, cand.surface, "annotator" + std::to_string(a + 1), label,
                           clock++});
      }
    }
  }
  double kappa_sum = 0.0;
  std::size_t kappa_pairs = 0;
  for (std::size_t a = 0; a < cfg.annotators; ++a)
    for (std::size_t c = a + 1; c < cfg.annotators; ++c) {
      kappa_sum += enrich::cohen_kappa(per_annotator[a], per_annotator[c]);
      ++kappa_pairs;
    }
  b.mean_kappa = kappa_pairs ? kappa_sum / static_cast<double>(kappa_pairs) : 1.0;

  const auto resolved = enrich::resolve_votes(b.votes);
  std::vector<StanceRecord> pool;
  for (const auto& item : b.batch) {
    std::vector<ExplicitObject> labeled;
    for (auto obj : item.candidates) {
      auto it = resolved.find({item.record.id, obj.surface});
      if (it == resolved.end()) continue;
      obj.label = it->second;
      labeled.push_back(obj);
    }
    if (labeled.empty()) continue;
    try {
      auto er = enrich::propose_adversarial_pair(item.record, labeled);
      pool.push_back(enrich::paired_record(er));
      b.enriched.push_back(std::move(er));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoDisalignedObject) throw;
    }
  }
  b.pool = corpus::Dataset("synthetic-enriched", std::move(pool));
  return b;
}

corpus::NoneExtensionOptions none_extension(const SynthConfig& cfg) {
  corpus::NoneExtensionOptions opts;
  opts.fraction = cfg.none_fraction;
  opts.seed = cfg.seed;
  return opts;
}

corpus::Dataset training_set(const Benchmark& b, const SynthConfig& cfg,
                             const corpus::Dataset& extra) {
  const auto combined = corpus::concat(b.train_polar.name(), {&b.train_polar, &extra});
  return corpus::extend_none_subset(combined, none_extension(cfg));
}

model::EmbeddingMatrix embedding_matrix(const World& world, const model::Vocab& vocab,
                                        std::uint64_t seed) {
  const std::size_t dim = world.embeddings.empty() ? 0 : world.embeddings.begin()->second.size();
  model::EmbeddingMatrix m;
  m.rows = vocab.size();
  m.dim = dim;
  m.values.assign(m.rows * dim, 0.0);
  Rng rng(seed);
  for (std::size_t r = 0; r < vocab.size(); ++r) {
    auto row = m.row(r);
    auto it = world.embeddings.find(vocab.token(static_cast<std::int32_t>(r)));
    if (it != world.embeddings.end()) {
      std::copy(it->second.begin(), it->second.end(), row.begin());
    } else {
      for (auto& x : row) x = rng.uniform(-0.05, 0.05);
    }
  }
  return m;
}

void write_embeddings(const World& world, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::FileUnreadable, "cannot write " + path.string());
  out.precision(17);
  for (const auto& [word, vec] : world.embeddings) {
    out << word;
    for (double x : vec) out << ' ' << x;
    out << '\n';
  }
}

model::Vocab benchmark_vocab(const Benchmark& b) {
  const auto all = corpus::concat("synthetic-all", {&b.train, &b.valid, &b.test, &b.pool});
  return model::build_vocab(all, 1);
}

}  // namespace stance::synth
