#include <algorithm>
#include <cmath>
#include <numeric>

#include <quadmath.h>

#include "stance/model.hpp"
#include "stance/rng.hpp"

namespace stance::model {

namespace {

constexpr std::size_t kGates = 4;  // i, f, g, o

using quad = __float128;

inline double exp_of(double x) { return std::exp(x); }
inline double tanh_of(double x) { return std::tanh(x); }
inline double log_of(double x) { return std::log(x); }
inline quad exp_of(quad x) { return expq(x); }
inline quad tanh_of(quad x) { return tanhq(x); }
inline quad log_of(quad x) { return logq(x); }

// y += W x, W row-major rows x cols.
template <class T>
void gemv_add(std::span<const double> w, std::size_t rows, std::size_t cols, const T* x, T* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w.data() + r * cols;
    T acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += static_cast<T>(wr[c]) * x[c];
    y[r] += acc;
  }
}

// x += W^T y.
void gemv_t_add(std::span<const double> w, std::size_t rows, std::size_t cols, const double* y,
                double* x) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w.data() + r * cols;
    const double yr = y[r];
    for (std::size_t c = 0; c < cols; ++c) x[c] += wr[c] * yr;
  }
}

// G += y x^T.
void ger_add(double* g, std::size_t rows, std::size_t cols, const double* y, const double* x) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* gr = g + r * cols;
    const double yr = y[r];
    for (std::size_t c = 0; c < cols; ++c) gr[c] += yr * x[c];
  }
}

template <class T>
T sigmoid(T z) {
  return T(1.0) / (T(1.0) + exp_of(-z));
}

}  // namespace

// --- config -----------------------------------------------------------------

nlohmann::json to_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size},
          {"embedding_dim", c.embedding_dim},
          {"hidden", c.hidden},
          {"attention_dim", c.attention_dim},
          {"layers", c.layers},
          {"recurrent_scope", c.recurrent_scope == Scope::Full ? "full" : "text"},
          {"attention_scope", c.attention_scope == Scope::Full ? "full" : "text"},
          {"train_embeddings", c.train_embeddings},
          {"max_text_tokens", c.max_text_tokens}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  auto scope = [](const std::string& s) {
    if (s == "full") return Scope::Full;
    if (s == "text") return Scope::TextOnly;
    throw Error(ErrorCode::ConfigError, "scope must be 'full' or 'text', got '" + s + "'");
  };
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.attention_dim = j.value("attention_dim", c.attention_dim);
  c.layers = j.value("layers", c.layers);
  c.recurrent_scope = scope(j.value("recurrent_scope", std::string("full")));
  c.attention_scope = scope(j.value("attention_scope", std::string("full")));
  c.train_embeddings = j.value("train_embeddings", c.train_embeddings);
  c.max_text_tokens = j.value("max_text_tokens", c.max_text_tokens);
  return c;
}

// --- parameters -------------------------------------------------------------

ModelParams::ModelParams(const ModelConfig& config) : config_(config) {
  if (config.layers == 0 || config.hidden == 0 || config.embedding_dim == 0 ||
      config.attention_dim == 0)
    throw Error(ErrorCode::ConfigError, "model dimensions must be positive");
  const std::size_t h = config.hidden;
  std::size_t offset = 0;
  auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
    blocks_.push_back(ParamBlock{std::move(name), offset, rows, cols});
    offset += rows * cols;
  };
  add("embeddings", config.vocab_size, config.embedding_dim);
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::size_t in = l == 0 ? config.embedding_dim : 2 * h;
    for (std::size_t d = 0; d < 2; ++d) {
      const std::string prefix = "lstm" + std::to_string(l) + (d == 0 ? ".fwd." : ".bwd.");
      add(prefix + "W", kGates * h, in);
      add(prefix + "U", kGates * h, h);
      add(prefix + "b", kGates * h, 1);
    }
  }
  add("attn.W_h", config.attention_dim, 2 * h);
  add("attn.W_t", config.attention_dim, config.embedding_dim);
  add("attn.b", config.attention_dim, 1);
  add("attn.w", config.attention_dim, 1);
  head_index_ = blocks_.size();
  add("head.W", kNumLabels, 2 * h);
  add("head.b", kNumLabels, 1);
  values_.assign(offset, 0.0);
}

const ParamBlock& ModelParams::block(std::string_view name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return b;
  throw Error(ErrorCode::PreconditionViolated, "no parameter block '" + std::string(name) + "'");
}

ModelParams::LstmBlocks ModelParams::lstm(std::size_t layer, std::size_t direction) const {
  const std::size_t base = 1 + (layer * 2 + direction) * 3;
  return {blocks_[base], blocks_[base + 1], blocks_[base + 2]};
}

std::size_t ModelParams::trainable_begin() const {
  return config_.train_embeddings ? 0 : embeddings().size();
}

bool ModelParams::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ModelParams init_params(const ModelConfig& config, const EmbeddingMatrix& embeddings,
                        std::uint64_t seed) {
  if (embeddings.rows != config.vocab_size || embeddings.dim != config.embedding_dim)
    throw Error(ErrorCode::DimensionMismatch,
                "embedding matrix is " + std::to_string(embeddings.rows) + "x" +
                    std::to_string(embeddings.dim) + ", model expects " +
                    std::to_string(config.vocab_size) + "x" + std::to_string(config.embedding_dim));
  ModelParams p(config);
  auto emb = p.view(p.embeddings());
  std::copy(embeddings.values.begin(), embeddings.values.end(), emb.begin());

  Rng rng(seed);
  auto fill = [&](const ParamBlock& b, double scale) {
    for (auto& v : p.view(b)) v = rng.uniform(-scale, scale);
  };
  const double h = static_cast<double>(config.hidden);
  for (std::size_t l = 0; l < config.layers; ++l) {
    for (std::size_t d = 0; d < 2; ++d) {
      const auto blk = p.lstm(l, d);
      fill(blk.w, 1.0 / std::sqrt(h));
      fill(blk.u, 1.0 / std::sqrt(h));
      auto bias = p.view(blk.b);
      std::fill(bias.begin(), bias.end(), 0.0);
      // forget gate starts open
      std::fill(bias.begin() + config.hidden, bias.begin() + 2 * config.hidden, 1.0);
    }
  }
  fill(p.attn_hidden(), 1.0 / std::sqrt(2.0 * h));
  fill(p.attn_target(), 1.0 / std::sqrt(static_cast<double>(config.embedding_dim)));
  fill(p.attn_score(), 1.0 / std::sqrt(static_cast<double>(config.attention_dim)));
  fill(p.head_weight(), 1.0 / std::sqrt(2.0 * h));
  return p;
}

// --- forward / backward -------------------------------------------------------

namespace {

template <class T>
struct DirectionTrace {
  std::vector<T> gates;   // T x 4H, post-activation
  std::vector<T> c;       // T x H
  std::vector<T> tanh_c;  // T x H
  std::vector<T> h;       // T x H
};

template <class T>
struct Trace {
  std::size_t scope_begin = 0;
  std::size_t steps = 0;        // recurrent positions
  std::size_t attn_begin = 0;   // attended positions [attn_begin, steps) in scope coords
  std::vector<std::vector<T>> inputs;  // per layer: T x in
  std::vector<std::array<DirectionTrace<T>, 2>> dirs;
  std::vector<T> outputs;  // T x 2H, top layer
  std::vector<T> u;        // D
  std::vector<T> m;        // A x K, tanh activations
  std::vector<T> alpha;    // A
  std::vector<T> v;        // 2H
  std::array<T, kNumLabels> logits{};
};

template <class T>
void run_direction(const ModelParams& p, std::size_t layer, std::size_t dir,
                   const std::vector<T>& in, std::size_t in_dim, std::size_t steps,
                   DirectionTrace<T>& tr) {
  const std::size_t h = p.config().hidden;
  const auto blk = p.lstm(layer, dir);
  const auto w = p.view(blk.w);
  const auto u = p.view(blk.u);
  const auto b = p.view(blk.b);
  tr.gates.assign(steps * kGates * h, T(0.0));
  tr.c.assign(steps * h, 0.0);
  tr.tanh_c.assign(steps * h, 0.0);
  tr.h.assign(steps * h, 0.0);
  std::vector<T> z(kGates * h);
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = dir == 0 ? s : steps - 1 - s;
    const bool has_prev = s > 0;
    const std::size_t prev = dir == 0 ? t - 1 : t + 1;
    for (std::size_t r = 0; r < b.size(); ++r) z[r] = static_cast<T>(b[r]);
    gemv_add(w, kGates * h, in_dim, in.data() + t * in_dim, z.data());
    if (has_prev) gemv_add(u, kGates * h, h, tr.h.data() + prev * h, z.data());
    T* g = tr.gates.data() + t * kGates * h;
    for (std::size_t k = 0; k < h; ++k) {
      g[k] = sigmoid(z[k]);
      g[h + k] = sigmoid(z[h + k]);
      g[2 * h + k] = tanh_of(z[2 * h + k]);
      g[3 * h + k] = sigmoid(z[3 * h + k]);
      const T c_prev = has_prev ? tr.c[prev * h + k] : 0.0;
      const T c = g[h + k] * c_prev + g[k] * g[2 * h + k];
      tr.c[t * h + k] = c;
      tr.tanh_c[t * h + k] = tanh_of(c);
      tr.h[t * h + k] = g[3 * h + k] * tr.tanh_c[t * h + k];
    }
  }
}

template <class T>
void run_forward(const ModelParams& p, const EncodedInput& input, Trace<T>& tr) {
  const auto& cfg = p.config();
  const std::size_t h = cfg.hidden;
  const std::size_t dim = cfg.embedding_dim;
  const std::size_t k_dim = cfg.attention_dim;
  const auto emb = p.view(p.embeddings());
  const std::size_t n = input.ids.size();
  for (auto id : input.ids)
    if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size)
      throw Error(ErrorCode::PreconditionViolated, "token index " + std::to_string(id) +
                                                       " outside vocabulary");

  tr.scope_begin = cfg.recurrent_scope == Scope::Full ? 0 : input.text_begin;
  tr.steps = n - std::min(n, tr.scope_begin);
  if (cfg.attention_scope == Scope::TextOnly && cfg.recurrent_scope == Scope::Full)
    tr.attn_begin = std::min(input.text_begin, n);
  else
    tr.attn_begin = 0;
  const std::size_t steps = tr.steps;

  tr.inputs.assign(cfg.layers, {});
  tr.dirs.assign(cfg.layers, {});
  tr.inputs[0].assign(steps * dim, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto id = static_cast<std::size_t>(input.ids[tr.scope_begin + t]);
    for (std::size_t k = 0; k < dim; ++k) tr.inputs[0][t * dim + k] = static_cast<T>(emb[id * dim + k]);
  }
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::size_t in_dim = l == 0 ? dim : 2 * h;
    for (std::size_t d = 0; d < 2; ++d) run_direction(p, l, d, tr.inputs[l], in_dim, steps, tr.dirs[l][d]);
    auto& out = l + 1 < cfg.layers ? tr.inputs[l + 1] : tr.outputs;
    out.assign(steps * 2 * h, 0.0);
    for (std::size_t t = 0; t < steps; ++t) {
      std::copy_n(tr.dirs[l][0].h.data() + t * h, h, out.data() + t * 2 * h);
      std::copy_n(tr.dirs[l][1].h.data() + t * h, h, out.data() + t * 2 * h + h);
    }
  }

  // mean-pooled target embedding
  tr.u.assign(dim, 0.0);
  const std::size_t m_tokens = input.target_end - input.target_begin;
  if (m_tokens > 0) {
    for (std::size_t j = input.target_begin; j < input.target_end; ++j) {
      const auto id = static_cast<std::size_t>(input.ids[j]);
      for (std::size_t k = 0; k < dim; ++k) tr.u[k] += static_cast<T>(emb[id * dim + k]);
    }
    for (auto& x : tr.u) x /= static_cast<T>(m_tokens);
  }

  const std::size_t a_count = steps - tr.attn_begin;
  const auto wh = p.view(p.attn_hidden());
  const auto wt = p.view(p.attn_target());
  const auto ab = p.view(p.attn_bias());
  const auto ws = p.view(p.attn_score());
  std::vector<T> target_term(ab.size());
  for (std::size_t k = 0; k < ab.size(); ++k) target_term[k] = static_cast<T>(ab[k]);
  gemv_add(wt, k_dim, dim, tr.u.data(), target_term.data());
  tr.m.assign(a_count * k_dim, 0.0);
  tr.alpha.assign(a_count, 0.0);
  T max_score = -INFINITY;
  for (std::size_t a = 0; a < a_count; ++a) {
    T* m = tr.m.data() + a * k_dim;
    std::copy(target_term.begin(), target_term.end(), m);
    gemv_add(wh, k_dim, 2 * h, tr.outputs.data() + (tr.attn_begin + a) * 2 * h, m);
    T score = 0.0;
    for (std::size_t k = 0; k < k_dim; ++k) {
      m[k] = tanh_of(m[k]);
      score += static_cast<T>(ws[k]) * m[k];
    }
    tr.alpha[a] = score;
    max_score = std::max(max_score, score);
  }
  T z = 0.0;
  for (auto& s : tr.alpha) {
    s = exp_of(s - max_score);
    z += s;
  }
  for (auto& s : tr.alpha) s /= z;

  tr.v.assign(2 * h, 0.0);
  for (std::size_t a = 0; a < a_count; ++a) {
    const T* hp = tr.outputs.data() + (tr.attn_begin + a) * 2 * h;
    for (std::size_t k = 0; k < 2 * h; ++k) tr.v[k] += tr.alpha[a] * hp[k];
  }
  const auto hw = p.view(p.head_weight());
  const auto hb = p.view(p.head_bias());
  for (std::size_t c = 0; c < kNumLabels; ++c) tr.logits[c] = static_cast<T>(hb[c]);
  gemv_add(hw, kNumLabels, 2 * h, tr.v.data(), tr.logits.data());
}

void backward_direction(const ModelParams& p, std::size_t layer, std::size_t dir,
                        const std::vector<double>& in, std::size_t in_dim, std::size_t steps,
                        const DirectionTrace<double>& tr, const std::vector<double>& dh_ext,
                        std::size_t dh_stride, std::size_t dh_offset, std::vector<double>& d_in,
                        std::span<double> grad) {
  const std::size_t h = p.config().hidden;
  const auto blk = p.lstm(layer, dir);
  const auto w = p.view(blk.w);
  const auto u = p.view(blk.u);
  double* gw = grad.data() + blk.w.offset;
  double* gu = grad.data() + blk.u.offset;
  double* gb = grad.data() + blk.b.offset;
  std::vector<double> dh_rec(h, 0.0), dc_next(h, 0.0), dz(kGates * h), dh(h);
  // reverse processing order
  for (std::size_t s = steps; s-- > 0;) {
    const std::size_t t = dir == 0 ? s : steps - 1 - s;
    const bool has_prev = s > 0;
    const std::size_t prev = dir == 0 ? t - 1 : t + 1;
    const double* g = tr.gates.data() + t * kGates * h;
    for (std::size_t k = 0; k < h; ++k) {
      dh[k] = dh_ext[t * dh_stride + dh_offset + k] + dh_rec[k];
      const double i = g[k], f = g[h + k], gg = g[2 * h + k], o = g[3 * h + k];
      const double tc = tr.tanh_c[t * h + k];
      const double c_prev = has_prev ? tr.c[prev * h + k] : 0.0;
      const double dc = dc_next[k] + dh[k] * o * (1.0 - tc * tc);
      dz[k] = dc * gg * i * (1.0 - i);
      dz[h + k] = dc * c_prev * f * (1.0 - f);
      dz[2 * h + k] = dc * i * (1.0 - gg * gg);
      dz[3 * h + k] = dh[k] * tc * o * (1.0 - o);
      dc_next[k] = dc * f;
    }
    for (std::size_t r = 0; r < kGates * h; ++r) gb[r] += dz[r];
    ger_add(gw, kGates * h, in_dim, dz.data(), in.data() + t * in_dim);
    gemv_t_add(w, kGates * h, in_dim, dz.data(), d_in.data() + t * in_dim);
    std::fill(dh_rec.begin(), dh_rec.end(), 0.0);
    if (has_prev) {
      ger_add(gu, kGates * h, h, dz.data(), tr.h.data() + prev * h);
      gemv_t_add(u, kGates * h, h, dz.data(), dh_rec.data());
    }
  }
}

void run_backward(const ModelParams& p, const EncodedInput& input, const Trace<double>& tr,
                  const std::array<double, kNumLabels>& dlogits, std::span<double> grad) {
  const auto& cfg = p.config();
  const std::size_t h = cfg.hidden;
  const std::size_t dim = cfg.embedding_dim;
  const std::size_t k_dim = cfg.attention_dim;
  const std::size_t steps = tr.steps;
  const std::size_t a_count = steps - tr.attn_begin;

  // head
  const auto& hw_blk = p.head_weight();
  ger_add(grad.data() + hw_blk.offset, kNumLabels, 2 * h, dlogits.data(), tr.v.data());
  for (std::size_t c = 0; c < kNumLabels; ++c) grad[p.head_bias().offset + c] += dlogits[c];
  std::vector<double> dv(2 * h, 0.0);
  gemv_t_add(p.view(hw_blk), kNumLabels, 2 * h, dlogits.data(), dv.data());

  // attention
  std::vector<double> d_out(steps * 2 * h, 0.0);
  std::vector<double> dalpha(a_count, 0.0);
  double weighted = 0.0;
  for (std::size_t a = 0; a < a_count; ++a) {
    const double* hp = tr.outputs.data() + (tr.attn_begin + a) * 2 * h;
    double acc = 0.0;
    for (std::size_t k = 0; k < 2 * h; ++k) {
      acc += dv[k] * hp[k];
      d_out[(tr.attn_begin + a) * 2 * h + k] += tr.alpha[a] * dv[k];
    }
    dalpha[a] = acc;
    weighted += tr.alpha[a] * acc;
  }
  const auto ws = p.view(p.attn_score());
  const auto wh = p.view(p.attn_hidden());
  const auto wt = p.view(p.attn_target());
  double* g_ws = grad.data() + p.attn_score().offset;
  double* g_wh = grad.data() + p.attn_hidden().offset;
  double* g_ab = grad.data() + p.attn_bias().offset;
  std::vector<double> da_sum(k_dim, 0.0), da(k_dim);
  for (std::size_t a = 0; a < a_count; ++a) {
    const double ds = tr.alpha[a] * (dalpha[a] - weighted);
    const double* m = tr.m.data() + a * k_dim;
    for (std::size_t k = 0; k < k_dim; ++k) {
      g_ws[k] += ds * m[k];
      da[k] = ds * ws[k] * (1.0 - m[k] * m[k]);
      da_sum[k] += da[k];
      g_ab[k] += da[k];
    }
    const double* hp = tr.outputs.data() + (tr.attn_begin + a) * 2 * h;
    ger_add(g_wh, k_dim, 2 * h, da.data(), hp);
    gemv_t_add(wh, k_dim, 2 * h, da.data(), d_out.data() + (tr.attn_begin + a) * 2 * h);
  }
  ger_add(grad.data() + p.attn_target().offset, k_dim, dim, da_sum.data(), tr.u.data());

  // recurrent layers, top down
  std::vector<double> d_next = std::move(d_out);
  for (std::size_t l = cfg.layers; l-- > 0;) {
    const std::size_t in_dim = l == 0 ? dim : 2 * h;
    std::vector<double> d_in(steps * in_dim, 0.0);
    for (std::size_t d = 0; d < 2; ++d)
      backward_direction(p, l, d, tr.inputs[l], in_dim, steps, tr.dirs[l][d], d_next, 2 * h,
                         d * h, d_in, grad);
    d_next = std::move(d_in);
  }

  if (!cfg.train_embeddings) return;
  double* g_emb = grad.data() + p.embeddings().offset;
  for (std::size_t t = 0; t < steps; ++t) {
    const auto id = static_cast<std::size_t>(input.ids[tr.scope_begin + t]);
    for (std::size_t k = 0; k < dim; ++k) g_emb[id * dim + k] += d_next[t * dim + k];
  }
  const std::size_t m_tokens = input.target_end - input.target_begin;
  if (m_tokens > 0) {
    std::vector<double> du(dim, 0.0);
    gemv_t_add(wt, k_dim, dim, da_sum.data(), du.data());
    const double scale = 1.0 / static_cast<double>(m_tokens);
    for (std::size_t j = input.target_begin; j < input.target_end; ++j) {
      const auto id = static_cast<std::size_t>(input.ids[j]);
      for (std::size_t k = 0; k < dim; ++k) g_emb[id * dim + k] += du[k] * scale;
    }
  }
}

template <class T>
std::array<T, kNumLabels> training_logits(const Trace<T>& tr, const Example& ex) {
  auto logits = tr.logits;
  if (ex.bias_log_probs)
    for (std::size_t c = 0; c < kNumLabels; ++c) logits[c] += static_cast<T>((*ex.bias_log_probs)[c]);
  return logits;
}

quad quad_loss(const ModelParams& params, const Example& ex) {
  Trace<quad> tr;
  run_forward(params, ex.input, tr);
  const auto logits = training_logits(tr, ex);
  quad mx = logits[0];
  for (auto l : logits) mx = l > mx ? l : mx;
  quad z = 0.0;
  for (auto l : logits) z += exp_of(l - mx);
  quad pg = exp_of(logits[index_of(ex.gold)] - mx) / z;
  if (pg < quad(kProbFloor)) pg = kProbFloor;
  return -log_of(pg);
}

quad quad_mean_loss(const ModelParams& params, std::span<const Example> batch) {
  quad total = 0.0;
  for (const auto& ex : batch) total += quad_loss(params, ex);
  return total / static_cast<quad>(batch.size());
}

}  // namespace

Distribution softmax(const std::array<double, kNumLabels>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  Distribution p{};
  double z = 0.0;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    p[c] = std::exp(logits[c] - mx);
    z += p[c];
  }
  for (auto& x : p) x /= z;
  return p;
}

double loss(const Distribution& pred, StanceLabel gold) {
  return -std::log(std::max(pred[index_of(gold)], kProbFloor));
}

Distribution poe_combine(const Distribution& main, const Distribution& bias) {
  std::array<double, kNumLabels> logits{};
  for (std::size_t c = 0; c < kNumLabels; ++c)
    logits[c] = std::log(std::max(main[c], kProbFloor)) + std::log(std::max(bias[c], kProbFloor));
  return softmax(logits);
}

ForwardResult forward(const ModelParams& params, const EncodedInput& input) {
  Trace<double> tr;
  run_forward(params, input, tr);
  ForwardResult out;
  out.v_enc = std::move(tr.v);
  out.attention = std::move(tr.alpha);
  out.logits = tr.logits;
  out.probs = softmax(tr.logits);
  return out;
}

double example_loss(const ModelParams& params, const Example& ex) {
  Trace<double> tr;
  run_forward(params, ex.input, tr);
  return loss(softmax(training_logits(tr, ex)), ex.gold);
}

double loss_and_gradient(const ModelParams& params, const Example& ex, std::span<double> grad) {
  Trace<double> tr;
  run_forward(params, ex.input, tr);
  const auto probs = softmax(training_logits(tr, ex));
  const std::size_t gold = index_of(ex.gold);
  std::array<double, kNumLabels> dlogits{};
  // below the floor the loss is constant
  if (probs[gold] >= kProbFloor) {
    for (std::size_t c = 0; c < kNumLabels; ++c) dlogits[c] = probs[c] - (c == gold ? 1.0 : 0.0);
  }
  run_backward(params, ex.input, tr, dlogits, grad);
  return loss(probs, ex.gold);
}

double central_difference(ModelParams& probe, std::span<const Example> batch, std::size_t index,
                          double epsilon) {
  if (batch.empty()) return 0.0;
  auto theta = probe.values();
  const double orig = theta[index];
  const double up_value = orig + epsilon;
  const double down_value = orig - epsilon;
  theta[index] = up_value;
  const quad up = quad_mean_loss(probe, batch);
  theta[index] = down_value;
  const quad down = quad_mean_loss(probe, batch);
  theta[index] = orig;
  // realised step, exact in quad
  const quad span = static_cast<quad>(up_value) - static_cast<quad>(down_value);
  return static_cast<double>((up - down) / span);
}

}  // namespace stance::model
