#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "stance/core.hpp"
#include "stance/corpus.hpp"

namespace stance::model {

// Token <-> index table. Indices 0..4 are reserved markers.
class Vocab {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::int32_t kTargetOpen = 2;
  static constexpr std::int32_t kTargetClose = 3;
  static constexpr std::int32_t kSep = 4;
  static constexpr std::int32_t kNumReserved = 5;

  Vocab();  // reserved markers only
  explicit Vocab(std::vector<std::string> tokens);  // must start with the reserved markers

  std::int32_t lookup(std::string_view token) const;  // kUnk when absent
  bool contains(std::string_view token) const;
  const std::string& token(std::int32_t index) const { return tokens_.at(index); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }
  std::uint64_t hash() const;  // FNV-1a over the ordered token list

  static const std::array<std::string, kNumReserved>& reserved();

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

// Tokens from record texts and targets with frequency >= min_freq, ordered
// by frequency (descending) then lexicographically.
Vocab build_vocab(const corpus::Dataset& ds, std::size_t min_freq);

struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> values;  // row-major rows x dim

  std::span<const double> row(std::size_t r) const { return {values.data() + r * dim, dim}; }
  std::span<double> row(std::size_t r) { return {values.data() + r * dim, dim}; }
};

// Standard word-vector text file ("token v1 ... vD" per line; an optional
// "count dim" header line is skipped). Missing tokens get seeded
// uniform(-0.05, 0.05) rows.
EmbeddingMatrix load_embeddings(const std::filesystem::path& path, const Vocab& vocab,
                                std::uint64_t seed);
EmbeddingMatrix random_embeddings(const Vocab& vocab, std::size_t dim, std::uint64_t seed);

// Marker-delimited sequence: <t> target </t> <sep> text.
struct EncodedInput {
  std::vector<std::int32_t> ids;
  std::size_t target_begin = 1;  // target span [target_begin, target_end)
  std::size_t target_end = 1;
  std::size_t text_begin = 3;    // text span [text_begin, ids.size())
};

EncodedInput encode_input(const StanceRecord& rec, const Vocab& vocab, bool with_target,
                          std::size_t max_text_tokens = 128);

enum class Scope : std::uint8_t { Full, TextOnly };

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embedding_dim = 300;
  std::size_t hidden = 300;         // per direction
  std::size_t attention_dim = 300;
  std::size_t layers = 2;
  // Full runs the recurrent encoder over the whole marker sequence; TextOnly
  // encodes the text alone and lets the target enter through attention only.
  Scope recurrent_scope = Scope::Full;
  Scope attention_scope = Scope::Full;
  bool train_embeddings = false;
  std::size_t max_text_tokens = 128;

  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
};

// Flat parameter storage: embeddings, per-layer/direction recurrent weights,
// attention projection, output head.
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(const ModelConfig& config);  // zero-initialised

  const ModelConfig& config() const { return config_; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  const ParamBlock& block(std::string_view name) const;
  std::span<double> view(const ParamBlock& b) { return {values_.data() + b.offset, b.size()}; }
  std::span<const double> view(const ParamBlock& b) const {
    return {values_.data() + b.offset, b.size()};
  }

  // Range of values that receive gradient updates.
  std::size_t trainable_begin() const;
  bool all_finite() const;

  struct LstmBlocks {
    const ParamBlock& w;  // 4H x in
    const ParamBlock& u;  // 4H x H
    const ParamBlock& b;  // 4H
  };
  const ParamBlock& embeddings() const { return blocks_[0]; }
  LstmBlocks lstm(std::size_t layer, std::size_t direction) const;
  const ParamBlock& attn_hidden() const { return blocks_[head_index_ - 4]; }  // K x 2H
  const ParamBlock& attn_target() const { return blocks_[head_index_ - 3]; }  // K x D
  const ParamBlock& attn_bias() const { return blocks_[head_index_ - 2]; }    // K
  const ParamBlock& attn_score() const { return blocks_[head_index_ - 1]; }   // K
  const ParamBlock& head_weight() const { return blocks_[head_index_]; }      // 3 x 2H
  const ParamBlock& head_bias() const { return blocks_[head_index_ + 1]; }    // 3

  bool operator==(const ModelParams& o) const {
    return config_ == o.config_ && values_ == o.values_;
  }

 private:
  ModelConfig config_;
  std::vector<double> values_;
  std::vector<ParamBlock> blocks_;
  std::size_t head_index_ = 0;
};

// Random recurrent/attention/head weights around the supplied embeddings.
ModelParams init_params(const ModelConfig& config, const EmbeddingMatrix& embeddings,
                        std::uint64_t seed);

using Distribution = std::array<double, kNumLabels>;

struct ForwardResult {
  std::vector<double> v_enc;        // 2H
  std::vector<double> attention;    // weights over attended positions
  std::array<double, kNumLabels> logits{};
  Distribution probs{};
};

ForwardResult forward(const ModelParams& params, const EncodedInput& input);

inline constexpr double kProbFloor = 1e-12;

double loss(const Distribution& pred, StanceLabel gold);

Distribution softmax(const std::array<double, kNumLabels>& logits);

// Product of experts: softmax(log main + log bias).
Distribution poe_combine(const Distribution& main, const Distribution& bias);

// One labelled training example. bias_log_probs, when present, are added to
// the logits before the softmax (PoE training).
struct Example {
  EncodedInput input;
  StanceLabel gold = StanceLabel::None;
  std::optional<std::array<double, kNumLabels>> bias_log_probs;
};

// Loss of one example and its gradient accumulated into grad (same layout
// as params). Gradient accumulation skips frozen embeddings.
double loss_and_gradient(const ModelParams& params, const Example& ex, std::span<double> grad);
double example_loss(const ModelParams& params, const Example& ex);

struct TrainConfig {
  double learning_rate = 3e-4;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  double lr_decay = 0.9;  // multiplied into the learning rate after each epoch
  double weight_decay = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  bool with_target = true;
  bool poe_enabled = false;
  std::size_t reduction_groups = 8;  // fixed gradient partition; independent of thread count
  bool parallel = true;
  bool verbose = false;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
void validate(const TrainConfig& c);

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double valid_macro_f1 = 0.0;
  double learning_rate = 0.0;
};

struct Classifier {
  Vocab vocab;
  ModelParams params;

  Distribution predict(const StanceRecord& rec, bool with_target = true) const;
  StanceLabel predict_label(const StanceRecord& rec, bool with_target = true) const;
};

struct TrainResult {
  Classifier classifier;
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;  // 1-based
  std::optional<Classifier> bias_model;  // PoE only
};

// First epoch with the highest score (1-based); 0 for an empty list.
std::size_t select_best_epoch(std::span<const double> scores);

std::vector<Example> make_examples(const corpus::Dataset& ds, const Vocab& vocab,
                                   const ModelConfig& config, bool with_target);

// Mini-batch AdamW with per-epoch learning-rate decay; returns the snapshot
// with the best validation 3-class macro-F1.
TrainResult train(const corpus::Dataset& train_ds, const corpus::Dataset& valid_ds,
                  const Vocab& vocab, const ModelConfig& model_config,
                  const EmbeddingMatrix& embeddings, const TrainConfig& config);

// Analytic gradient vs central finite differences on sampled parameters.
struct GradCheckOptions {
  double epsilon = 1e-5;
  std::size_t samples = 200;  // clamped to the number of trainable parameters
  std::uint64_t seed = 0;
  // Evaluate the finite-difference losses in quadruple precision. In double
  // the roundoff term eps_mach / epsilon swamps gradients below ~1e-5.
  bool quad_reference = true;
};

// Gradient of the mean batch loss; the function under test in grad_check.
using GradientFn = std::function<void(const ModelParams&, std::span<const Example>, std::span<double>)>;

double grad_check(const ModelParams& params, std::span<const Example> batch,
                  const GradCheckOptions& opts, const GradientFn& gradient = {});

// max |a - n| / max(1e-8, |a| + |n|) over paired entries; 0 for empty input.
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric);

double mean_batch_loss(const ModelParams& params, std::span<const Example> batch);

// (L(theta + eps e_i) - L(theta - eps e_i)) / (2 eps) for the mean batch loss,
// with both losses computed in quadruple precision. probe is restored.
double central_difference(ModelParams& probe, std::span<const Example> batch, std::size_t index,
                          double epsilon);

// Checkpoint container: magic, version, JSON header (config, vocab, vocab
// hash, layout), then little-endian float64 parameter values.
void save_checkpoint(const Classifier& clf, const std::filesystem::path& path);
Classifier load_checkpoint(const std::filesystem::path& path);

}  // namespace stance::model
