#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stance/corpus.hpp"
#include "stance/enrich.hpp"
#include "stance/model.hpp"
#include "stance/service.hpp"

namespace stance::job {

// Job configuration: one JSON tree. Relative paths resolve against the
// config file's directory. Only the output root may come from the
// environment (STANCE_OUT).
struct JobConfig {
  std::uint64_t seed = 0;
  std::filesystem::path corpora_dir;
  std::optional<std::filesystem::path> embeddings;
  std::filesystem::path output_dir = "out";
  std::vector<corpus::CorpusAdapterConfig> adapters;
  double none_fraction = 0.2;
  enrich::ExtractionOptions extraction;
  model::ModelConfig model;
  model::TrainConfig train;
  std::vector<std::size_t> ablation_sizes = {0, 150, 300, 600};
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> service_state_dir;  // default: <output>/service
  std::size_t snapshot_every = 100;
  service::AssignmentConfig assignment;
};

// Throws ConfigError on a missing seed, undeclared paths, or malformed keys.
JobConfig parse_job(const nlohmann::json& j, const std::filesystem::path& base_dir);
JobConfig load_job(const std::filesystem::path& path);

// STANCE_OUT overrides output_dir when set and non-empty.
std::filesystem::path output_root(const JobConfig& cfg);

}  // namespace stance::job
