#pragma once

#include <span>
#include <vector>

#include "stance/model.hpp"

// Batch-level kernels. Each has an OpenMP version and a serial reference that
// performs the same arithmetic in the same order; the two must agree bitwise.
namespace stance::kernels {

// Per-group gradient buffers, reused across batches.
struct GradientWorkspace {
  std::vector<std::vector<double>> groups;
  std::vector<double> losses;
};

// Mean loss over the batch; grad receives the mean gradient. Examples are
// split into `groups` contiguous chunks, each chunk is accumulated in order,
// and the chunk sums are added in chunk order.
double batch_gradient_serial(const model::ModelParams& params,
                             std::span<const model::Example> batch, std::span<double> grad,
                             std::size_t groups, GradientWorkspace& ws);
double batch_gradient_parallel(const model::ModelParams& params,
                               std::span<const model::Example> batch, std::span<double> grad,
                               std::size_t groups, GradientWorkspace& ws);

// Straight left-to-right accumulation with no grouping. Agrees with the
// grouped kernels only up to rounding.
double batch_gradient_naive(const model::ModelParams& params,
                            std::span<const model::Example> batch, std::span<double> grad);

std::vector<model::Distribution> predict_serial(const model::ModelParams& params,
                                                std::span<const model::EncodedInput> inputs);
std::vector<model::Distribution> predict_parallel(const model::ModelParams& params,
                                                  std::span<const model::EncodedInput> inputs);

int max_threads();

}  // namespace stance::kernels
