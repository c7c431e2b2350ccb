#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

#include "stance/eval.hpp"
#include "stance/kernels.hpp"
#include "stance/model.hpp"
#include "stance/rng.hpp"

namespace stance::model {

nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"epochs", c.epochs},               {"lr_decay", c.lr_decay},
          {"weight_decay", c.weight_decay},   {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},       {"adam_eps", c.adam_eps},
          {"seed", c.seed},                   {"with_target", c.with_target},
          {"poe_enabled", c.poe_enabled},     {"reduction_groups", c.reduction_groups},
          {"parallel", c.parallel}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.lr_decay = j.value("lr_decay", c.lr_decay);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.seed = j.value("seed", c.seed);
  c.with_target = j.value("with_target", c.with_target);
  c.poe_enabled = j.value("poe_enabled", c.poe_enabled);
  c.reduction_groups = j.value("reduction_groups", c.reduction_groups);
  c.parallel = j.value("parallel", c.parallel);
  c.verbose = j.value("verbose", c.verbose);
  validate(c);
  return c;
}

void validate(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0)) throw Error(ErrorCode::ConfigError, "learning_rate must be > 0");
  if (c.batch_size < 1) throw Error(ErrorCode::ConfigError, "batch_size must be >= 1");
  if (!(c.lr_decay > 0.0 && c.lr_decay <= 1.0))
    throw Error(ErrorCode::ConfigError, "lr_decay must be in (0, 1]");
  if (c.weight_decay < 0.0) throw Error(ErrorCode::ConfigError, "weight_decay must be >= 0");
  if (c.reduction_groups < 1) throw Error(ErrorCode::ConfigError, "reduction_groups must be >= 1");
}

Distribution Classifier::predict(const StanceRecord& rec, bool with_target) const {
  return forward(params, encode_input(rec, vocab, with_target, params.config().max_text_tokens)).probs;
}

StanceLabel Classifier::predict_label(const StanceRecord& rec, bool with_target) const {
  const auto p = predict(rec, with_target);
  return kAllLabels[static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin())];
}

std::size_t select_best_epoch(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (best == 0 || scores[i] > scores[best - 1]) best = i + 1;
  return best;
}

std::vector<Example> make_examples(const corpus::Dataset& ds, const Vocab& vocab,
                                   const ModelConfig& config, bool with_target) {
  std::vector<Example> out;
  out.reserve(ds.size());
  for (const auto& r : ds.records())
    out.push_back(Example{encode_input(r, vocab, with_target, config.max_text_tokens), r.label, {}});
  return out;
}

namespace {

double validation_f1(const Classifier& clf, const corpus::Dataset& valid, bool with_target,
                     bool parallel) {
  const auto preds = eval::predict_labels(clf, valid, with_target, parallel);
  std::vector<StanceLabel> golds;
  for (const auto& r : valid.records()) golds.push_back(r.label);
  return eval::macro_metrics(preds, golds, eval::ClassSet::ThreeClass).macro_f1;
}

}  // namespace

TrainResult train(const corpus::Dataset& train_ds, const corpus::Dataset& valid_ds,
                  const Vocab& vocab, const ModelConfig& model_config,
                  const EmbeddingMatrix& embeddings, const TrainConfig& config) {
  validate(config);
  if (train_ds.empty() || valid_ds.empty())
    throw Error(ErrorCode::PreconditionViolated, "train and valid sets must be non-empty");
  ModelConfig mc = model_config;
  mc.vocab_size = vocab.size();
  mc.embedding_dim = embeddings.dim;

  std::optional<Classifier> bias_model;
  if (config.poe_enabled) {
    TrainConfig bias_cfg = config;
    bias_cfg.poe_enabled = false;
    bias_cfg.with_target = false;
    bias_model = train(train_ds, valid_ds, vocab, mc, embeddings, bias_cfg).classifier;
  }

  std::vector<Example> examples = make_examples(train_ds, vocab, mc, config.with_target);
  if (bias_model) {
    for (std::size_t i = 0; i < examples.size(); ++i) {
      const auto p = bias_model->predict(train_ds[i], false);
      std::array<double, kNumLabels> lp{};
      for (std::size_t c = 0; c < kNumLabels; ++c) lp[c] = std::log(std::max(p[c], kProbFloor));
      examples[i].bias_log_probs = lp;
    }
  }

  Classifier clf{vocab, init_params(mc, embeddings, config.seed)};
  Rng shuffle_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);

  const std::size_t n_params = clf.params.size();
  const std::size_t first = clf.params.trainable_begin();
  std::vector<double> grad(n_params), m1(n_params, 0.0), m2(n_params, 0.0);
  kernels::GradientWorkspace ws;
  std::uint64_t step = 0;
  double lr = config.learning_rate;

  TrainResult result{clf, {}, 0, bias_model};
  double best_score = -1.0;
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<Example> batch;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(examples[order[k]]);
      const double batch_loss =
          config.parallel
              ? kernels::batch_gradient_parallel(clf.params, batch, grad, config.reduction_groups, ws)
              : kernels::batch_gradient_serial(clf.params, batch, grad, config.reduction_groups, ws);
      if (!std::isfinite(batch_loss))
        throw Error(ErrorCode::NonFiniteLoss, "non-finite loss at epoch " + std::to_string(epoch) +
                                                  ", batch " + std::to_string(n_batches + 1));
      ++step;
      const double bc1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(step));
      auto theta = clf.params.values();
      for (std::size_t j = first; j < n_params; ++j) {
        const double g = grad[j];
        m1[j] = config.adam_beta1 * m1[j] + (1.0 - config.adam_beta1) * g;
        m2[j] = config.adam_beta2 * m2[j] + (1.0 - config.adam_beta2) * g * g;
        const double mhat = m1[j] / bc1;
        const double vhat = m2[j] / bc2;
        theta[j] -= lr * (mhat / (std::sqrt(vhat) + config.adam_eps) + config.weight_decay * theta[j]);
      }
      loss_sum += batch_loss;
      ++n_batches;
    }
    EpochStats st;
    st.epoch = epoch;
    st.mean_loss = loss_sum / static_cast<double>(std::max<std::size_t>(1, n_batches));
    st.learning_rate = lr;
    st.valid_macro_f1 = validation_f1(clf, valid_ds, config.with_target, config.parallel);
    result.history.push_back(st);
    if (config.verbose)
      std::cerr << "epoch " << epoch << " loss " << st.mean_loss << " valid-f1 "
                << st.valid_macro_f1 << " lr " << lr << '\n';
    if (st.valid_macro_f1 > best_score) {
      best_score = st.valid_macro_f1;
      result.best_epoch = epoch;
      result.classifier.params = clf.params;
    }
    lr *= config.lr_decay;
  }
  if (config.epochs == 0) result.classifier = clf;
  return result;
}

// --- gradient check ------------------------------------------------------------

double mean_batch_loss(const ModelParams& params, std::span<const Example> batch) {
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ex : batch) total += example_loss(params, ex);
  return total / static_cast<double>(batch.size());
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  if (analytic.size() != numeric.size())
    throw Error(ErrorCode::LengthMismatch, "gradient vectors differ in length");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i], n = numeric[i];
    worst = std::max(worst, std::abs(a - n) / std::max(1e-8, std::abs(a) + std::abs(n)));
  }
  return worst;
}

double grad_check(const ModelParams& params, std::span<const Example> batch,
                  const GradCheckOptions& opts, const GradientFn& gradient) {
  if (!(opts.epsilon > 0.0)) throw Error(ErrorCode::PreconditionViolated, "epsilon must be > 0");
  const std::size_t first = params.trainable_begin();
  const std::size_t range = params.size() - first;
  const std::size_t count = std::min(opts.samples, range);
  if (count == 0) return 0.0;

  std::vector<std::size_t> idx;
  if (count == range) {
    for (std::size_t j = first; j < params.size(); ++j) idx.push_back(j);
  } else {
    Rng rng(opts.seed);
    std::set<std::size_t> chosen;
    while (chosen.size() < count) chosen.insert(first + rng.uniform_index(range));
    idx.assign(chosen.begin(), chosen.end());
  }

  std::vector<double> full(params.size(), 0.0);
  if (gradient) {
    gradient(params, batch, full);
  } else {
    kernels::batch_gradient_naive(params, batch, full);
  }

  ModelParams probe = params;
  auto theta = probe.values();
  std::vector<double> analytic, numeric;
  for (auto j : idx) {
    analytic.push_back(full[j]);
    if (opts.quad_reference) {
      numeric.push_back(central_difference(probe, batch, j, opts.epsilon));
      continue;
    }
    const double orig = theta[j];
    theta[j] = orig + opts.epsilon;
    const double up = mean_batch_loss(probe, batch);
    theta[j] = orig - opts.epsilon;
    const double down = mean_batch_loss(probe, batch);
    theta[j] = orig;
    numeric.push_back((up - down) / (2.0 * opts.epsilon));
  }
  return max_relative_error(analytic, numeric);
}

}  // namespace stance::model
