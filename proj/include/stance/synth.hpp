#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "stance/corpus.hpp"
#include "stance/enrich.hpp"
#include "stance/model.hpp"

// Generated cross-target benchmark. Entities live in topic clusters and take a
// side (+1 / -1) within their cluster. A text expresses direct sentiment e
// toward the objects it names; its stance toward target t is e * s(t) * s(o)
// when t and o share a cluster and None otherwise.
namespace stance::synth {

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t clusters = 5;
  std::size_t objects_per_cluster = 12;
  std::size_t test_targets_per_cluster = 4;  // half per side, never seen in training
  std::size_t embedding_dim = 16;
  double embedding_noise = 0.35;
  std::size_t train_records = 2400;  // before the None extension
  std::size_t valid_records = 400;
  std::size_t test_records = 900;
  double explicit_fraction = 0.25;
  double two_object_fraction = 0.25;
  double disaligned_fraction = 0.6;  // implicit objects on the opposite side
  double none_fraction = 0.2;
  std::size_t annotators = 3;
  double annotator_error = 0.04;
};

nlohmann::json to_json(const SynthConfig& c);
SynthConfig synth_config_from_json(const nlohmann::json& j);

enum class Role : std::uint8_t { TrainTarget, Object, TestTarget };

struct Entity {
  std::string name;
  std::size_t cluster = 0;
  int side = 1;
  Role role = Role::Object;
};

struct World {
  std::vector<Entity> entities;
  std::map<std::string, std::size_t> by_name;
  std::map<std::string, std::vector<double>> embeddings;  // every generated word

  const Entity* find(std::string_view name) const;
  std::vector<std::size_t> with_role(Role role) const;
};

World make_world(const SynthConfig& cfg);

struct Benchmark {
  World world;
  corpus::Dataset train_polar;  // base single-target data before the None extension
  corpus::Dataset train;        // train_polar plus its None extension
  corpus::Dataset valid;
  corpus::Dataset test;   // unseen targets
  std::vector<enrich::AnnotationItem> batch;
  std::vector<enrich::AnnotationVote> votes;
  std::vector<EnrichedRecord> enriched;
  corpus::Dataset pool;   // second records of the adversarial pairs
  double mean_kappa = 0.0;
};

Benchmark generate(const SynthConfig& cfg);

corpus::NoneExtensionOptions none_extension(const SynthConfig& cfg);

// train_polar plus the given enriched records, then the None extension over
// the combined set. With no extra records this equals b.train.
corpus::Dataset training_set(const Benchmark& b, const SynthConfig& cfg,
                             const corpus::Dataset& extra);

// Direct stance the text takes toward the entity named in the surface; None
// when the surface names no entity or the text does not mention it.
StanceLabel object_truth(const World& world, const StanceRecord& rec, std::string_view surface);

// Rows for each vocabulary token; tokens outside the world get seeded
// uniform(-0.05, 0.05) rows, as with a loaded word-vector file.
model::EmbeddingMatrix embedding_matrix(const World& world, const model::Vocab& vocab,
                                        std::uint64_t seed);
void write_embeddings(const World& world, const std::filesystem::path& path);

// Vocabulary over every split and the pool; the embeddings are frozen, so
// covering test words leaks no labels.
model::Vocab benchmark_vocab(const Benchmark& b);

}  // namespace stance::synth
