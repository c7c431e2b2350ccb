#include "stance/job.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace stance::job {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileUnreadable, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw Error(ErrorCode::ConfigError, "unknown key '" + key + "' in " + where);
}

}  // namespace

JobConfig parse_job(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "job config must be a JSON object");
  check_keys(j, {"seed", "paths", "adapters", "none_extension", "extraction", "model", "train",
                 "ablation", "service"},
             "job config");
  if (!j.contains("seed") || !j["seed"].is_number_unsigned())
    throw Error(ErrorCode::ConfigError, "job config needs a non-negative integer 'seed'");
  try {
    JobConfig c;
    c.seed = j["seed"].get<std::uint64_t>();
    const json paths = j.value("paths", json::object());
    check_keys(paths, {"corpora", "embeddings", "output"}, "paths");
    if (paths.contains("corpora")) c.corpora_dir = resolve(base_dir, paths["corpora"].get<std::string>());
    if (paths.contains("embeddings")) c.embeddings = resolve(base_dir, paths["embeddings"].get<std::string>());
    if (paths.contains("output")) c.output_dir = resolve(base_dir, paths["output"].get<std::string>());
    else c.output_dir = base_dir / "out";

    for (const auto& a : j.value("adapters", json::array())) {
      if (a.is_string()) c.adapters.push_back(corpus::load_adapter(resolve(base_dir, a.get<std::string>())));
      else c.adapters.push_back(corpus::adapter_from_json(a));
    }
    if (!c.adapters.empty() && c.corpora_dir.empty())
      throw Error(ErrorCode::ConfigError, "adapters are configured but paths.corpora is not declared");

    const json none = j.value("none_extension", json::object());
    check_keys(none, {"fraction"}, "none_extension");
    c.none_fraction = none.value("fraction", c.none_fraction);
    if (!(c.none_fraction >= 0.0)) throw Error(ErrorCode::ConfigError, "none_extension.fraction must be >= 0");

    const json ex = j.value("extraction", json::object());
    check_keys(ex, {"verb_window", "min_chars", "polar_only"}, "extraction");
    c.extraction.filter.verb_window = ex.value("verb_window", c.extraction.filter.verb_window);
    c.extraction.filter.min_chars = ex.value("min_chars", c.extraction.filter.min_chars);
    c.extraction.polar_only = ex.value("polar_only", c.extraction.polar_only);

    if (j.contains("model")) c.model = model::model_config_from_json(j["model"]);
    json train = j.value("train", json::object());
    if (!train.contains("seed")) train["seed"] = c.seed;
    c.train = model::train_config_from_json(train);

    const json abl = j.value("ablation", json::object());
    check_keys(abl, {"sizes"}, "ablation");
    if (abl.contains("sizes")) c.ablation_sizes = abl["sizes"].get<std::vector<std::size_t>>();

    const json svc = j.value("service", json::object());
    check_keys(svc, {"host", "port", "state_dir", "snapshot_every", "assignment"}, "service");
    c.host = svc.value("host", c.host);
    c.port = svc.value("port", c.port);
    if (svc.contains("state_dir")) c.service_state_dir = resolve(base_dir, svc["state_dir"].get<std::string>());
    c.snapshot_every = svc.value("snapshot_every", c.snapshot_every);
    if (svc.contains("assignment")) {
      json as = svc["assignment"];
      if (!as.contains("seed")) as["seed"] = c.seed;
      c.assignment = service::assignment_from_json(as);
    } else {
      c.assignment.seed = c.seed;
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("job config: ") + e.what());
  }
}

JobConfig load_job(const fs::path& path) {
  return parse_job(read_json(path), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

fs::path output_root(const JobConfig& cfg) {
  if (const char* env = std::getenv("STANCE_OUT"); env && *env) return fs::path(env);
  return cfg.output_dir;
}

}  // namespace stance::job
