// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "engine/schedule.hpp"
#include "network/network.hpp"
#include "objective/loss.hpp"

namespace mgc {

/// Momentum buffers aligned with ModelParams::arrays (empty for buffers).
template <typename T>
struct OptimizerState {
  std::vector<std::vector<T>> velocity;
  std::int64_t step = 0;

  static OptimizerState zeros_like(const nn::ModelParams<T>& p) {
    OptimizerState s;
    for (const auto& a : p.arrays) s.velocity.emplace_back(a.trainable ? a.size() : 0, T(0));
    return s;
  }
};

/// v <- momentum * v + g + weight_decay * theta;  theta <- theta - lr * v.
template <typename T>
void sgd_momentum_update(nn::ModelParams<T>& params, OptimizerState<T>& state,
                         const nn::Gradients<T>& grads, double lr, double momentum,
                         double weight_decay);

/// Inputs of one optimisation step.
template <typename T>
struct TrainBatch {
  const nn::Activation<T>* volumes = nullptr;
  std::span<const int> labels;
};

/// Forward in Train mode, loss, backward, running-stat update and SGD step.
/// Throws NonFinite (with step, lr and loss parts) before touching params if
/// the loss is not finite.
template <typename T>
LossBreakdown train_step(const nn::Network<T>& net, nn::ModelParams<T>& params,
                         OptimizerState<T>& state, const TrainBatch<T>& batch,
                         std::span<const T> label_matrix, double alpha, EmbReduction reduction,
                         double lr, const OptimizerConfig& opt);

}  // namespace mgc
