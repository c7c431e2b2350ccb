#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "stance/corpus.hpp"
#include "stance/enrich.hpp"
#include "stance/eval.hpp"
#include "stance/job.hpp"
#include "stance/model.hpp"
#include "stance/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stance;

namespace {

struct Failure {
  ErrorCode code;
  std::string message;
};

void print_error(std::string_view code, const std::string& message) {
  std::cerr << "error: " << json{{"code", code}, {"message", message}}.dump() << '\n';
}

std::optional<job::JobConfig> maybe_job(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return job::load_job(path);
}

job::JobConfig require_job(const std::string& path, const char* command) {
  if (path.empty()) throw Error(ErrorCode::ConfigError, std::string(command) + " needs --config");
  return job::load_job(path);
}

fs::path out_root(const std::optional<job::JobConfig>& cfg) {
  if (const char* env = std::getenv("STANCE_OUT"); env && *env) return env;
  return cfg ? cfg->output_dir : fs::path("out");
}

std::uint64_t seed_of(const std::optional<job::JobConfig>& cfg, const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (cfg) return cfg->seed;
  throw Error(ErrorCode::ConfigError, "a seed is required (--seed or a config with 'seed')");
}

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::FileUnreadable, "cannot write " + path.string());
  out << content;
}

std::vector<enrich::AnnotationVote> read_votes(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileUnreadable, "cannot read votes " + path.string());
  std::vector<enrich::AnnotationVote> votes;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) votes.push_back(enrich::vote_from_json(json::parse(line)));
  return votes;
}

std::vector<enrich::AnnotationVote> votes_from(const std::string& votes_path, const std::string& state_dir) {
  if (!votes_path.empty()) return read_votes(votes_path);
  if (state_dir.empty()) throw Error(ErrorCode::ConfigError, "need --votes or --state-dir");
  const auto batch = service::read_batch(fs::path(state_dir) / "batch.jsonl");
  const auto state = service::replay(state_dir, batch, {});
  std::vector<enrich::AnnotationVote> votes;
  for (const auto& lv : state.votes) votes.push_back(lv.vote);
  return votes;
}

// "name=path" or "path" (name = file stem)
std::pair<std::string, fs::path> named_path(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos) return {fs::path(arg).stem().string(), arg};
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

corpus::Dataset load_dataset(const std::string& path) { return corpus::read_jsonl(path); }

model::Vocab vocab_for(const corpus::Dataset& train, const std::vector<std::string>& extra) {
  std::vector<corpus::Dataset> parts;
  for (const auto& p : extra) parts.push_back(load_dataset(p));
  std::vector<const corpus::Dataset*> ptrs{&train};
  for (const auto& d : parts) ptrs.push_back(&d);
  return model::build_vocab(corpus::concat("vocab", ptrs), 1);
}

model::EmbeddingMatrix embeddings_for(const job::JobConfig& cfg, const model::Vocab& vocab) {
  if (cfg.embeddings) return model::load_embeddings(*cfg.embeddings, vocab, cfg.seed);
  return model::random_embeddings(vocab, cfg.model.embedding_dim, cfg.seed);
}

service::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stance detection toolkit: corpora, enrichment, training, evaluation, annotation service."};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "Job configuration (JSON)")->check(CLI::ExistingFile);

  std::function<void()> action;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Ingest configured corpora into unified JSONL");
  std::string ingest_only;
  ingest->add_option("--corpus", ingest_only, "Only this corpus");
  ingest->callback([&] {
    action = [&] {
      const auto cfg = require_job(config_path, "ingest");
      if (cfg.adapters.empty()) throw Error(ErrorCode::ConfigError, "no adapters configured");
      std::size_t done = 0;
      for (const auto& a : cfg.adapters) {
        if (!ingest_only.empty() && a.corpus_name != ingest_only) continue;
        const auto ds = corpus::ingest(cfg.corpora_dir, a);
        const auto path = out_root(cfg) / "corpora" / (a.corpus_name + ".jsonl");
        corpus::write_jsonl(ds, path);
        const auto st = corpus::stats(ds);
        std::cout << "ingested " << a.corpus_name << ": " << ds.size() << " records (train "
                  << st.split_counts[0] << ", valid " << st.split_counts[1] << ", test "
                  << st.split_counts[2] << ") -> " << path.string() << '\n';
        ++done;
      }
      if (done == 0) throw Error(ErrorCode::ConfigError, "no adapter named '" + ingest_only + "'");
    };
  });

  // stats
  auto* stats = app.add_subcommand("stats", "Per-split and per-target counts");
  std::vector<std::string> stats_inputs;
  stats->add_option("--input", stats_inputs, "Unified JSONL corpora (default: ingested corpora)");
  stats->callback([&] {
    action = [&] {
      const auto cfg = maybe_job(config_path);
      std::vector<std::string> inputs = stats_inputs;
      if (inputs.empty()) {
        if (!cfg) throw Error(ErrorCode::ConfigError, "stats needs --input or --config");
        for (const auto& a : cfg->adapters)
          inputs.push_back((out_root(cfg) / "corpora" / (a.corpus_name + ".jsonl")).string());
      }
      std::vector<corpus::StatsReport> reports;
      json all = json::array();
      for (const auto& p : inputs) {
        auto ds = corpus::read_jsonl(p, fs::path(p).stem().string());
        reports.push_back(corpus::stats(ds));
        all.push_back(corpus::to_json(reports.back()));
      }
      std::cout << corpus::format_stats_table(reports);
      const auto path = out_root(cfg) / "stats.json";
      write_text(path, all.dump(2) + "\n");
      std::cout << "stats: " << reports.size() << " corpora -> " << path.string() << '\n';
    };
  });

  // extend-none
  auto* extend = app.add_subcommand("extend-none", "Add None records with irrelevant targets");
  std::string extend_input, extend_output;
  std::optional<double> fraction;
  std::optional<std::uint64_t> seed;
  extend->add_option("--input", extend_input, "Unified JSONL corpus")->required();
  extend->add_option("--output", extend_output, "Output JSONL");
  extend->add_option("--fraction", fraction, "Fraction of the train split to add");
  extend->add_option("--seed", seed, "Random seed");
  extend->callback([&] {
    action = [&] {
      const auto cfg = maybe_job(config_path);
      corpus::NoneExtensionOptions opts;
      opts.fraction = fraction ? *fraction : (cfg ? cfg->none_fraction : 0.2);
      opts.seed = seed_of(cfg, seed);
      const auto ds = corpus::read_jsonl(extend_input);
      const auto out = corpus::extend_none_subset(ds, opts);
      const fs::path path = extend_output.empty()
                                ? out_root(cfg) / (fs::path(extend_input).stem().string() + ".none.jsonl")
                                : fs::path(extend_output);
      corpus::write_jsonl(out, path);
      std::cout << "extend-none: added " << out.size() - ds.size() << " None records -> "
                << path.string() << '\n';
    };
  });

  // extract
  auto* extract = app.add_subcommand("extract", "Build the annotation batch of candidate explicit objects");
  std::string extract_input, extract_output;
  extract->add_option("--input", extract_input, "Unified JSONL corpus")->required();
  extract->add_option("--output", extract_output, "Batch JSONL");
  extract->callback([&] {
    action = [&] {
      const auto cfg = maybe_job(config_path);
      const auto ds = corpus::read_jsonl(extract_input);
      const auto train = ds.subset(Split::Train);
      const enrich::HeuristicTagger tagger;
      const auto batch = enrich::build_annotation_batch(train.records(), tagger,
                                                        cfg ? cfg->extraction : enrich::ExtractionOptions{});
      std::size_t candidates = 0;
      for (const auto& item : batch) candidates += item.candidates.size();
      const fs::path path = extract_output.empty() ? out_root(cfg) / "batch.jsonl" : fs::path(extract_output);
      service::write_batch(batch, path);
      std::cout << "extract: " << batch.size() << " items, " << candidates << " candidate objects -> "
                << path.string() << '\n';
    };
  });

  // pair
  auto* pair = app.add_subcommand("pair", "Resolve votes and build adversarial dis-aligned pairs");
  std::string pair_batch, pair_votes, pair_state, pair_out;
  pair->add_option("--batch", pair_batch, "Annotation batch JSONL");
  pair->add_option("--votes", pair_votes, "Vote JSONL");
  pair->add_option("--state-dir", pair_state, "Annotation service state directory");
  pair->add_option("--output-dir", pair_out, "Directory for enriched.jsonl and paired.jsonl");
  pair->callback([&] {
    action = [&] {
      const auto cfg = maybe_job(config_path);
      std::string batch_path = pair_batch;
      if (batch_path.empty() && !pair_state.empty()) batch_path = (fs::path(pair_state) / "batch.jsonl").string();
      if (batch_path.empty()) throw Error(ErrorCode::ConfigError, "pair needs --batch or --state-dir");
      const auto batch = service::read_batch(batch_path);
      const auto resolved = enrich::resolve_votes(votes_from(pair_votes, pair_state));
      std::string enriched_lines;
      std::vector<StanceRecord> paired;
      std::size_t skipped = 0;
      for (const auto& item : batch) {
        std::vector<ExplicitObject> labeled;
        for (auto obj : item.candidates) {
          auto it = resolved.find({item.record.id, obj.surface});
          if (it == resolved.end()) continue;
          obj.label = it->second;
          labeled.push_back(obj);
        }
        if (labeled.empty()) continue;
        try {
          const auto er = enrich::propose_adversarial_pair(item.record, labeled);
          enriched_lines += to_json(er).dump() + "\n";
          paired.push_back(enrich::paired_record(er));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::NoDisalignedObject) throw;
          ++skipped;
        }
      }
      const fs::path dir = pair_out.empty() ? out_root(cfg) : fs::path(pair_out);
      write_text(dir / "enriched.jsonl", enriched_lines);
      corpus::write_jsonl(corpus::Dataset("paired", paired), dir / "paired.jsonl");
      std::cout << "pair: " << paired.size() << " adversarial pairs, " << skipped
                << " items without a dis-aligned object -> " << (dir / "paired.jsonl").string() << '\n';
    };
  });

  // kappa
  auto* kappa = app.add_subcommand("kappa", "Pairwise Cohen's kappa over shared annotations");
  std::string kappa_votes, kappa_state;
  kappa->add_option("--votes", kappa_votes, "Vote JSONL");
  kappa->add_option("--state-dir", kappa_state, "Annotation service state directory");
  kappa->callback([&] {
    action = [&] {
      const auto votes = votes_from(kappa_votes, kappa_state);
      const auto latest = enrich::latest_votes(votes);
      std::set<std::string> annotators;
      for (const auto& v : votes) annotators.insert(v.annotator_id);
      json pairs = json::array();
      double sum = 0.0;
      for (auto a = annotators.begin(); a != annotators.end(); ++a)
        for (auto b = std::next(a); b != annotators.end(); ++b) {
          std::vector<StanceLabel> la, lb;
          for (const auto& [key, per] : latest) {
            auto ia = per.find(*a), ib = per.find(*b);
            if (ia == per.end() || ib == per.end()) continue;
            la.push_back(ia->second);
            lb.push_back(ib->second);
          }
          if (la.empty()) continue;
          const double k = enrich::cohen_kappa(la, lb);
          sum += k;
          pairs.push_back({{"annotator_a", *a}, {"annotator_b", *b}, {"shared_items", la.size()}, {"kappa", k}});
        }
      std::cout << pairs.dump(2) << '\n';
      if (pairs.empty()) throw Error(ErrorCode::PreconditionViolated, "no annotator pair shares an item");
      std::cout << "kappa: mean " << sum / static_cast<double>(pairs.size()) << " over " << pairs.size()
                << " annotator pairs\n";
    };
  });

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP annotation service");
  std::string serve_batch, serve_state, serve_host;
  int serve_port = -1;
  std::optional<std::size_t> snapshot_every;
  serve->add_option("--batch", serve_batch, "Annotation batch JSONL (first start only)");
  serve->add_option("--state-dir", serve_state, "State directory (log, snapshots)");
  serve->add_option("--host", serve_host, "Bind address");
  serve->add_option("--port", serve_port, "Port");
  serve->add_option("--snapshot-every", snapshot_every, "Events between snapshots");
  serve->callback([&] {
    action = [&] {
      const auto cfg = maybe_job(config_path);
      service::ServiceOptions opts;
      opts.state_dir = !serve_state.empty() ? fs::path(serve_state)
                       : (cfg && cfg->service_state_dir) ? *cfg->service_state_dir
                                                         : out_root(cfg) / "service";
      if (cfg) {
        opts.assignment = cfg->assignment;
        opts.snapshot_every = cfg->snapshot_every;
      }
      if (snapshot_every) opts.snapshot_every = *snapshot_every;
      std::vector<enrich::AnnotationItem> batch;
      if (!serve_batch.empty()) batch = service::read_batch(serve_batch);
      service::AnnotationService svc(opts, std::move(batch));
      service::HttpServer server(svc);
      const std::string host = !serve_host.empty() ? serve_host : (cfg ? cfg->host : "127.0.0.1");
      const int port = serve_port >= 0 ? serve_port : (cfg ? cfg->port : 8080);
      int bound = port;
      if (port == 0) bound = server.bind_to_any_port(host);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "serve: listening on " << host << ":" << bound << " with " << svc.batch().size()
                << " items, state in " << opts.state_dir.string() << std::endl;
      const bool ok = port == 0 ? server.listen_after_bind() : server.listen(host, port);
      g_server = nullptr;
      if (!ok) throw Error(ErrorCode::ConfigError, "cannot bind " + host + ":" + std::to_string(port));
      svc.write_snapshot();
    };
  });

  // train
  auto* train = app.add_subcommand("train", "Train the target-aware classifier");
  std::string train_path, valid_path, model_out;
  std::vector<std::string> vocab_from;
  std::optional<bool> poe;
  train->add_option("--train", train_path, "Training JSONL")->required();
  train->add_option("--valid", valid_path, "Validation JSONL")->required();
  train->add_option("--vocab-from", vocab_from, "Extra JSONL files whose tokens join the vocabulary");
  train->add_option("--output", model_out, "Checkpoint path");
  train->add_option("--poe", poe, "Product-of-experts de-biasing (true/false)");
  train->callback([&] {
    action = [&] {
      auto cfg = require_job(config_path, "train");
      if (poe) cfg.train.poe_enabled = *poe;
      const auto tr = load_dataset(train_path);
      const auto va = load_dataset(valid_path);
      const auto vocab = vocab_for(tr, vocab_from);
      const auto emb = embeddings_for(cfg, vocab);
      const auto result = model::train(tr, va, vocab, cfg.model, emb, cfg.train);
      const fs::path path = model_out.empty() ? out_root(cfg) / "model.ckpt" : fs::path(model_out);
      model::save_checkpoint(result.classifier, path);
      json hist = json::array();
      for (const auto& e : result.history)
        hist.push_back({{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"valid_macro_f1", e.valid_macro_f1},
                        {"learning_rate", e.learning_rate}});
      write_text(path.string() + ".history.json",
                 json{{"best_epoch", result.best_epoch}, {"history", hist}}.dump(2) + "\n");
      const double best = result.best_epoch ? result.history[result.best_epoch - 1].valid_macro_f1 : 0.0;
      std::cout << "train: best epoch " << result.best_epoch << " valid macro-F1 " << best << " -> "
                << path.string() << '\n';
    };
  });

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Macro P/R/F1 on test sets");
  std::string eval_model;
  std::vector<std::string> eval_inputs;
  int classes = 3;
  evaluate->add_option("--model", eval_model, "Checkpoint")->required();
  evaluate->add_option("--input", eval_inputs, "Test JSONL, optionally name=path")->required();
  evaluate->add_option("--classes", classes, "3 or 2")->check(CLI::IsMember({2, 3}));
  evaluate->callback([&] {
    action = [&] {
      const auto cfg = maybe_job(config_path);
      const auto clf = model::load_checkpoint(eval_model);
      const auto cs = classes == 2 ? eval::ClassSet::TwoClass : eval::ClassSet::ThreeClass;
      std::vector<std::pair<std::string, eval::MetricsReport>> rows;
      json out = json::object();
      for (const auto& arg : eval_inputs) {
        const auto [name, path] = named_path(arg);
        rows.emplace_back(name, eval::evaluate(clf, corpus::read_jsonl(path), cs));
        out[name] = eval::to_json(rows.back().second);
      }
      std::cout << eval::format_metrics_table(rows);
      const auto path = out_root(cfg) / "metrics.json";
      write_text(path, out.dump(2) + "\n");
      double sum = 0.0;
      for (const auto& [_, r] : rows) sum += r.macro_f1;
      std::cout << "evaluate: " << rows.size() << " test sets, mean macro-F1 "
                << sum / static_cast<double>(rows.size()) << " -> " << path.string() << '\n';
    };
  });

  // kl
  auto* kl = app.add_subcommand("kl", "Target-dependency KL divergence");
  std::string kl_model;
  std::vector<std::string> kl_inputs;
  kl->add_option("--model", kl_model, "Checkpoint")->required();
  kl->add_option("--input", kl_inputs, "Test JSONL, optionally name=path")->required();
  kl->callback([&] {
    action = [&] {
      const auto cfg = maybe_job(config_path);
      const auto clf = model::load_checkpoint(kl_model);
      json out = json::object();
      for (const auto& arg : kl_inputs) {
        const auto [name, path] = named_path(arg);
        const double v = eval::kl_target_dependency(clf, corpus::read_jsonl(path));
        out[name] = v;
        std::cout << "kl: " << name << " " << v << '\n';
      }
      write_text(out_root(cfg) / "kl.json", out.dump(2) + "\n");
    };
  });

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Enrichment-size ablation curve");
  std::string abl_base, abl_pool, abl_valid, abl_out, abl_sizes;
  std::vector<std::string> abl_tests;
  bool abl_extend = false;
  ablate->add_option("--base", abl_base, "Base training JSONL")->required();
  ablate->add_option("--pool", abl_pool, "Enriched pool JSONL")->required();
  ablate->add_option("--valid", abl_valid, "Validation JSONL")->required();
  ablate->add_option("--test", abl_tests, "Test JSONL, optionally name=path")->required();
  ablate->add_option("--sizes", abl_sizes, "Comma-separated sizes (default from config)");
  ablate->add_option("--output", abl_out, "CSV path");
  ablate->add_flag("--extend-none", abl_extend, "Apply the None extension after adding enriched records");
  ablate->callback([&] {
    action = [&] {
      const auto cfg = require_job(config_path, "ablate");
      std::vector<std::size_t> sizes = cfg.ablation_sizes;
      if (!abl_sizes.empty()) {
        sizes.clear();
        std::stringstream ss(abl_sizes);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
          try {
            sizes.push_back(std::stoull(tok));
          } catch (const std::exception&) {
            throw Error(ErrorCode::ConfigError, "bad size '" + tok + "'");
          }
        }
      }
      const auto base = load_dataset(abl_base);
      const auto pool = load_dataset(abl_pool);
      const auto valid = load_dataset(abl_valid);
      std::vector<corpus::Dataset> tests;
      std::vector<std::string> names, vocab_files{abl_pool, abl_valid};
      for (const auto& arg : abl_tests) {
        const auto [name, path] = named_path(arg);
        names.push_back(name);
        tests.push_back(corpus::read_jsonl(path));
        vocab_files.push_back(path.string());
      }
      eval::AblationSetup setup;
      setup.valid = &valid;
      for (std::size_t i = 0; i < tests.size(); ++i) setup.test_sets.emplace_back(names[i], &tests[i]);
      setup.vocab = vocab_for(base, vocab_files);
      setup.embeddings = embeddings_for(cfg, setup.vocab);
      setup.model_config = cfg.model;
      setup.train_config = cfg.train;
      setup.shuffle_seed = cfg.seed;
      if (abl_extend) setup.none_extension = corpus::NoneExtensionOptions{cfg.none_fraction, cfg.seed, 100};
      const auto curve = eval::run_ablation(base, pool, sizes, setup);
      const fs::path path = abl_out.empty() ? out_root(cfg) / "ablation.csv" : fs::path(abl_out);
      write_text(path, eval::ablation_csv(curve));
      std::cout << eval::ablation_csv(curve);
      std::cout << "ablate: " << curve.points.size() << " sizes -> " << path.string() << '\n';
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const bool unknown_command =
        dynamic_cast<const CLI::ExtrasError*>(&e) != nullptr ||
        dynamic_cast<const CLI::RequiredError*>(&e) != nullptr && app.get_subcommands().empty();
    std::cerr << app.help();
    std::string message = e.what();
    if (unknown_command) {
      for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--config") {
          ++i;
        } else if (!arg.starts_with("-")) {
          message = "unknown command '" + arg + "'";
          break;
        }
      }
    }
    print_error(unknown_command ? "UnknownCommand" : "ConfigError", message);
    return 2;
  }
  try {
    action();
  } catch (const Error& e) {
    print_error(to_string(e.code()), e.what());
    return e.code() == ErrorCode::ConfigError ? 2 : 1;
  } catch (const json::exception& e) {
    print_error("FormatError", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("InternalError", e.what());
    return 1;
  }
  return 0;
}
