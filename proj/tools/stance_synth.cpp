#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "stance/service.hpp"
#include "stance/synth.hpp"

namespace fs = std::filesystem;
using namespace stance;

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic cross-target stance benchmark."};
  std::string out_dir = "out/synthetic";
  std::string settings;
  std::optional<std::uint64_t> seed;
  app.add_option("--output", out_dir, "Output directory");
  app.add_option("--settings", settings, "Generator settings (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Random seed");
  CLI11_PARSE(app, argc, argv);

  try {
    nlohmann::json j = nlohmann::json::object();
    if (!settings.empty()) {
      std::ifstream in(settings);
      j = nlohmann::json::parse(in);
    }
    if (seed) j["seed"] = *seed;
    const auto cfg = synth::synth_config_from_json(j);
    const auto b = synth::generate(cfg);
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    corpus::write_jsonl(b.train_polar, dir / "train_polar.jsonl");
    corpus::write_jsonl(b.train, dir / "train.jsonl");
    corpus::write_jsonl(b.valid, dir / "valid.jsonl");
    corpus::write_jsonl(b.test, dir / "test.jsonl");
    corpus::write_jsonl(b.pool, dir / "pool.jsonl");
    const auto enriched_train = synth::training_set(b, cfg, b.pool);
    corpus::write_jsonl(enriched_train, dir / "train_enriched.jsonl");
    service::write_batch(b.batch, dir / "batch.jsonl");
    std::ofstream votes(dir / "votes.jsonl");
    for (const auto& v : b.votes) votes << enrich::to_json(v).dump() << '\n';
    synth::write_embeddings(b.world, dir / "embeddings.txt");
    std::ofstream(dir / "settings.json") << synth::to_json(cfg).dump(2) << '\n';
    std::cout << "synth: train " << b.train.size() << ", valid " << b.valid.size() << ", test "
              << b.test.size() << ", pool " << b.pool.size() << ", kappa " << b.mean_kappa << " -> "
              << dir.string() << '\n';
  } catch (const Error& e) {
    std::cerr << "error: " << nlohmann::json{{"code", to_string(e.code())}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
  return 0;
}
