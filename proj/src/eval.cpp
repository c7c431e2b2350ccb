#include "stance/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "stance/kernels.hpp"
#include "stance/rng.hpp"

namespace stance::eval {

std::string_view to_string(ClassSet cs) {
  return cs == ClassSet::ThreeClass ? "3-class" : "2-class";
}

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts)
    for (auto c : row) n += c;
  return n;
}

ConfusionMatrix confusion(std::span<const StanceLabel> preds, std::span<const StanceLabel> golds) {
  if (preds.size() != golds.size())
    throw Error(ErrorCode::LengthMismatch, "predictions and golds differ in length");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < preds.size(); ++i) ++m.counts[index_of(golds[i])][index_of(preds[i])];
  return m;
}

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

MetricsReport macro_metrics(std::span<const StanceLabel> preds, std::span<const StanceLabel> golds,
                            ClassSet class_set) {
  if (preds.size() != golds.size() || preds.empty())
    throw Error(ErrorCode::LengthMismatch,
                "macro_metrics needs equal, non-empty lengths (got " + std::to_string(preds.size()) +
                    " and " + std::to_string(golds.size()) + ")");
  MetricsReport rep;
  rep.class_set = class_set;
  rep.matrix = confusion(preds, golds);
  auto& m = rep.matrix.counts;

  const bool two = class_set == ClassSet::TwoClass;
  if (two) {
    m[index_of(StanceLabel::None)] = {};  // drop gold-None rows
    if (rep.matrix.total() == 0)
      throw Error(ErrorCode::EmptyAfterFiltering, "no gold Favor/Against records to evaluate");
  }
  rep.count = rep.matrix.total();

  const std::vector<StanceLabel> classes =
      two ? std::vector<StanceLabel>{StanceLabel::Favor, StanceLabel::Against}
          : std::vector<StanceLabel>(kAllLabels.begin(), kAllLabels.end());
  for (auto c : classes) {
    const std::size_t k = index_of(c);
    double tp = static_cast<double>(m[k][k]);
    double pred_pos = 0.0, gold_pos = 0.0;
    for (std::size_t j = 0; j < kNumLabels; ++j) {
      pred_pos += static_cast<double>(m[j][k]);
      gold_pos += static_cast<double>(m[k][j]);
    }
    auto& s = rep.per_class[k];
    s.precision = safe_div(tp, pred_pos);
    s.recall = safe_div(tp, gold_pos);
    s.f1 = safe_div(2.0 * s.precision * s.recall, s.precision + s.recall);
    rep.macro_precision += s.precision;
    rep.macro_recall += s.recall;
    rep.macro_f1 += s.f1;
  }
  const double nc = static_cast<double>(classes.size());
  rep.macro_precision /= nc;
  rep.macro_recall /= nc;
  rep.macro_f1 /= nc;
  return rep;
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["class_set"] = std::string(to_string(r.class_set));
  j["count"] = r.count;
  j["macro"] = {{"precision", r.macro_precision}, {"recall", r.macro_recall}, {"f1", r.macro_f1}};
  for (auto l : kAllLabels) {
    if (r.class_set == ClassSet::TwoClass && l == StanceLabel::None) continue;
    const auto& s = r.per_class[index_of(l)];
    j["per_class"][std::string(to_string(l))] = {
        {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
  }
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.matrix.counts) rows.push_back(row);
  j["confusion"] = rows;
  return j;
}

std::string format_metrics_table(const std::vector<std::pair<std::string, MetricsReport>>& rows,
                                 const std::string& title) {
  std::size_t w = std::string("Test Set").size();
  for (const auto& [name, _] : rows) w = std::max(w, name.size());
  std::ostringstream out;
  if (!title.empty()) out << title << '\n';
  out << std::left << std::setw(static_cast<int>(w)) << "Test Set" << " | " << std::setw(9) << "F1"
      << " | " << std::setw(9) << "Precision" << " | " << "Recall" << '\n';
  out << std::string(w, '-') << "-+-" << std::string(9, '-') << "-+-" << std::string(9, '-')
      << "-+-" << std::string(9, '-') << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& [name, r] : rows) {
    out << std::left << std::setw(static_cast<int>(w)) << name << " | " << std::setw(9)
        << r.macro_f1 << " | " << std::setw(9) << r.macro_precision << " | " << r.macro_recall
        << '\n';
  }
  return out.str();
}

double kl_divergence(const model::Distribution& p, const model::Distribution& q) {
  model::Distribution pf{}, qf{};
  double zp = 0.0, zq = 0.0;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    pf[c] = std::max(p[c], model::kProbFloor);
    qf[c] = std::max(q[c], model::kProbFloor);
    zp += pf[c];
    zq += qf[c];
  }
  double kl = 0.0;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    const double pc = pf[c] / zp;
    const double qc = qf[c] / zq;
    kl += pc * std::log(pc / qc);
  }
  // exact zero for identical inputs; clamp tiny negative rounding
  return std::max(kl, 0.0);
}

namespace {

std::vector<model::Distribution> predict_all(const model::Classifier& clf,
                                             const corpus::Dataset& ds, bool with_target,
                                             bool parallel) {
  std::vector<model::EncodedInput> inputs;
  inputs.reserve(ds.size());
  for (const auto& r : ds.records())
    inputs.push_back(model::encode_input(r, clf.vocab, with_target,
                                         clf.params.config().max_text_tokens));
  return parallel ? kernels::predict_parallel(clf.params, inputs)
                  : kernels::predict_serial(clf.params, inputs);
}

StanceLabel argmax(const model::Distribution& p) {
  return kAllLabels[static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin())];
}

}  // namespace

double kl_target_dependency(const model::Classifier& clf, const corpus::Dataset& test_ds,
                            bool parallel) {
  if (test_ds.empty()) throw Error(ErrorCode::PreconditionViolated, "empty test set");
  const auto with = predict_all(clf, test_ds, true, parallel);
  const auto without = predict_all(clf, test_ds, false, parallel);
  double total = 0.0;
  for (std::size_t i = 0; i < with.size(); ++i) total += kl_divergence(with[i], without[i]);
  return total / static_cast<double>(with.size());
}

std::vector<StanceLabel> predict_labels(const model::Classifier& clf, const corpus::Dataset& ds,
                                        bool with_target, bool parallel) {
  const auto probs = predict_all(clf, ds, with_target, parallel);
  std::vector<StanceLabel> out;
  out.reserve(probs.size());
  for (const auto& p : probs) out.push_back(argmax(p));
  return out;
}

MetricsReport evaluate(const model::Classifier& clf, const corpus::Dataset& ds, ClassSet cs,
                       bool parallel) {
  const auto preds = predict_labels(clf, ds, true, parallel);
  std::vector<StanceLabel> golds;
  golds.reserve(ds.size());
  for (const auto& r : ds.records()) golds.push_back(r.label);
  return macro_metrics(preds, golds, cs);
}

AblationCurve run_ablation(const corpus::Dataset& base_train, const corpus::Dataset& enriched_pool,
                           std::span<const std::size_t> sizes, const AblationSetup& setup) {
  if (setup.valid == nullptr) throw Error(ErrorCode::PreconditionViolated, "ablation needs a valid set");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i > 0 && sizes[i] <= sizes[i - 1])
      throw Error(ErrorCode::PreconditionViolated,
                  "ablation sizes must be strictly increasing (" + std::to_string(sizes[i - 1]) +
                      " then " + std::to_string(sizes[i]) + ")");
    if (sizes[i] > enriched_pool.size())
      throw Error(ErrorCode::SizeExceedsPool, "size " + std::to_string(sizes[i]) +
                                                  " exceeds enriched pool of " +
                                                  std::to_string(enriched_pool.size()));
  }
  std::vector<std::size_t> order(enriched_pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(setup.shuffle_seed);
  rng.shuffle(order);

  AblationCurve curve;
  for (auto s : sizes) {
    std::vector<std::size_t> pick(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(s));
    const auto extra = enriched_pool.subset(pick);
    auto train_ds = corpus::concat(base_train.name(), {&base_train, &extra});
    if (setup.none_extension) train_ds = corpus::extend_none_subset(train_ds, *setup.none_extension);
    auto result = model::train(train_ds, *setup.valid, setup.vocab, setup.model_config,
                               setup.embeddings, setup.train_config);
    AblationPoint pt;
    pt.enriched_size = s;
    for (const auto& [name, ds] : setup.test_sets)
      pt.results[name] = evaluate(result.classifier, *ds, setup.class_set, setup.train_config.parallel);
    curve.points.push_back(std::move(pt));
  }
  return curve;
}

std::string ablation_csv(const AblationCurve& curve) {
  std::ostringstream out;
  out << "size";
  if (!curve.points.empty())
    for (const auto& [name, _] : curve.points.front().results) out << ",f1_" << name;
  out << '\n';
  out << std::setprecision(6) << std::fixed;
  for (const auto& pt : curve.points) {
    out << pt.enriched_size;
    for (const auto& [_, r] : pt.results) out << ',' << r.macro_f1;
    out << '\n';
  }
  return out.str();
}

nlohmann::json to_json(const AblationCurve& curve) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& pt : curve.points) {
    nlohmann::json pj;
    pj["enriched_size"] = pt.enriched_size;
    for (const auto& [name, r] : pt.results) pj["results"][name] = to_json(r);
    j.push_back(pj);
  }
  return j;
}

}  // namespace stance::eval
