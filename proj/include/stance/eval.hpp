#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "stance/core.hpp"
#include "stance/corpus.hpp"
#include "stance/model.hpp"

namespace stance::eval {

enum class ClassSet { ThreeClass, TwoClass };

std::string_view to_string(ClassSet cs);

// Rows are gold labels, columns predicted labels.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumLabels>, kNumLabels> counts{};
  std::size_t total() const;
};

ConfusionMatrix confusion(std::span<const StanceLabel> preds, std::span<const StanceLabel> golds);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricsReport {
  ClassSet class_set = ClassSet::ThreeClass;
  std::array<ClassScores, kNumLabels> per_class{};  // None unused in 2-class mode
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::size_t count = 0;  // records evaluated after filtering
  ConfusionMatrix matrix;
};

// Per-class P/R/F1 (0 on zero denominators) and their unweighted means over
// the class set. Two-class mode drops gold-None rows and counts a None
// prediction as a miss.
MetricsReport macro_metrics(std::span<const StanceLabel> preds, std::span<const StanceLabel> golds,
                            ClassSet class_set);

nlohmann::json to_json(const MetricsReport& r);

// Rows of (test set name, report) laid out as Test Set | F1 | Precision | Recall.
std::string format_metrics_table(const std::vector<std::pair<std::string, MetricsReport>>& rows,
                                 const std::string& title = {});

// KL(P || Q) over three classes; both floored at 1e-12 and renormalised.
double kl_divergence(const model::Distribution& p, const model::Distribution& q);

// Mean per-record KL between predictions with the target (P) and with an
// empty target slot (Q).
double kl_target_dependency(const model::Classifier& clf, const corpus::Dataset& test_ds,
                            bool parallel = true);

std::vector<StanceLabel> predict_labels(const model::Classifier& clf, const corpus::Dataset& ds,
                                        bool with_target = true, bool parallel = true);

MetricsReport evaluate(const model::Classifier& clf, const corpus::Dataset& ds, ClassSet cs,
                       bool parallel = true);

struct AblationPoint {
  std::size_t enriched_size = 0;
  std::map<std::string, MetricsReport> results;  // per test set
};

struct AblationCurve {
  std::vector<AblationPoint> points;
};

struct AblationSetup {
  const corpus::Dataset* valid = nullptr;
  std::vector<std::pair<std::string, const corpus::Dataset*>> test_sets;
  model::Vocab vocab;
  model::ModelConfig model_config;
  model::EmbeddingMatrix embeddings;
  model::TrainConfig train_config;
  std::uint64_t shuffle_seed = 0;
  ClassSet class_set = ClassSet::ThreeClass;
  // When set, each training set (base + enriched subset) gets its None
  // extension after the enriched records are added; base_train is then the
  // set before extension.
  std::optional<corpus::NoneExtensionOptions> none_extension;
};

// For each size s: train on base + the first s records of the seeded
// shuffle of the pool, evaluate every test set.
AblationCurve run_ablation(const corpus::Dataset& base_train, const corpus::Dataset& enriched_pool,
                           std::span<const std::size_t> sizes, const AblationSetup& setup);

// Header "size,<test>..." then one row of macro-F1 values per point.
std::string ablation_csv(const AblationCurve& curve);
nlohmann::json to_json(const AblationCurve& curve);

}  // namespace stance::eval
