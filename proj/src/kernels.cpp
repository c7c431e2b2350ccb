#include "stance/kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace stance::kernels {

namespace {

std::size_t chunk_begin(std::size_t g, std::size_t groups, std::size_t n) { return g * n / groups; }

void prepare(GradientWorkspace& ws, std::size_t groups, std::size_t size) {
  ws.groups.resize(groups);
  for (auto& buf : ws.groups) buf.assign(size, 0.0);
  ws.losses.assign(groups, 0.0);
}

void accumulate_group(const model::ModelParams& params, std::span<const model::Example> batch,
                      std::size_t g, std::size_t groups, GradientWorkspace& ws) {
  const std::size_t lo = chunk_begin(g, groups, batch.size());
  const std::size_t hi = chunk_begin(g + 1, groups, batch.size());
  double loss = 0.0;
  for (std::size_t i = lo; i < hi; ++i) loss += model::loss_and_gradient(params, batch[i], ws.groups[g]);
  ws.losses[g] = loss;
}

double reduce_loss(const GradientWorkspace& ws, std::size_t n) {
  double total = 0.0;
  for (double l : ws.losses) total += l;
  return total / static_cast<double>(n);
}

std::size_t effective_groups(std::size_t groups, std::size_t n) {
  return std::max<std::size_t>(1, std::min(groups, n));
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

double batch_gradient_serial(const model::ModelParams& params,
                             std::span<const model::Example> batch, std::span<double> grad,
                             std::size_t groups, GradientWorkspace& ws) {
  std::fill(grad.begin(), grad.end(), 0.0);
  if (batch.empty()) return 0.0;
  groups = effective_groups(groups, batch.size());
  prepare(ws, groups, grad.size());
  for (std::size_t g = 0; g < groups; ++g) accumulate_group(params, batch, g, groups, ws);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (std::size_t j = 0; j < grad.size(); ++j) {
    double acc = 0.0;
    for (std::size_t g = 0; g < groups; ++g) acc += ws.groups[g][j];
    grad[j] = acc * scale;
  }
  return reduce_loss(ws, batch.size());
}

double batch_gradient_parallel(const model::ModelParams& params,
                               std::span<const model::Example> batch, std::span<double> grad,
                               std::size_t groups, GradientWorkspace& ws) {
  std::fill(grad.begin(), grad.end(), 0.0);
  if (batch.empty()) return 0.0;
  groups = effective_groups(groups, batch.size());
  prepare(ws, groups, grad.size());
  const auto n_groups = static_cast<std::ptrdiff_t>(groups);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t g = 0; g < n_groups; ++g)
    accumulate_group(params, batch, static_cast<std::size_t>(g), groups, ws);

  const double scale = 1.0 / static_cast<double>(batch.size());
  const auto size = static_cast<std::ptrdiff_t>(grad.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < size; ++j) {
    double acc = 0.0;
    for (std::size_t g = 0; g < groups; ++g) acc += ws.groups[g][static_cast<std::size_t>(j)];
    grad[static_cast<std::size_t>(j)] = acc * scale;
  }
  return reduce_loss(ws, batch.size());
}

double batch_gradient_naive(const model::ModelParams& params,
                            std::span<const model::Example> batch, std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  if (batch.empty()) return 0.0;
  double loss = 0.0;
  for (const auto& ex : batch) loss += model::loss_and_gradient(params, ex, grad);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (auto& g : grad) g *= scale;
  return loss * scale;
}

std::vector<model::Distribution> predict_serial(const model::ModelParams& params,
                                                std::span<const model::EncodedInput> inputs) {
  std::vector<model::Distribution> out(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) out[i] = model::forward(params, inputs[i]).probs;
  return out;
}

std::vector<model::Distribution> predict_parallel(const model::ModelParams& params,
                                                  std::span<const model::EncodedInput> inputs) {
  std::vector<model::Distribution> out(inputs.size());
  const auto n = static_cast<std::ptrdiff_t>(inputs.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = model::forward(params, inputs[static_cast<std::size_t>(i)]).probs;
  return out;
}

}  // namespace stance::kernels
