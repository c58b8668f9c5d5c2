// SPDX-License-Identifier: Apache-2.0
#include "engine/optimizer.hpp"

#include <cmath>
#include <sstream>

#include "common/error.hpp"

namespace mgc {

template <typename T>
void sgd_momentum_update(nn::ModelParams<T>& params, OptimizerState<T>& state,
                         const nn::Gradients<T>& grads, double lr, double momentum,
                         double weight_decay) {
  require(state.velocity.size() == params.arrays.size() &&
              grads.arrays.size() == params.arrays.size(),
          ErrorKind::ShapeMismatch, "sgd: optimizer state does not match parameters");
  const T m = static_cast<T>(momentum);
  const T wd = static_cast<T>(weight_decay);
  const T step = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.arrays.size(); ++i) {
    auto& p = params.arrays[i];
    if (!p.trainable) continue;
    auto& v = state.velocity[i];
    const auto& g = grads.arrays[i];
    for (std::size_t k = 0; k < p.values.size(); ++k) {
      v[k] = m * v[k] + g[k] + wd * p.values[k];
      p.values[k] -= step * v[k];
    }
  }
  ++state.step;
}

template <typename T>
LossBreakdown train_step(const nn::Network<T>& net, nn::ModelParams<T>& params,
                         OptimizerState<T>& state, const TrainBatch<T>& batch,
                         std::span<const T> label_matrix, double alpha, EmbReduction reduction,
                         double lr, const OptimizerConfig& opt) {
  require(batch.volumes != nullptr && batch.volumes->n == static_cast<int>(batch.labels.size()),
          ErrorKind::ShapeMismatch, "train_step: batch volume count does not match labels");
  const auto& cfg = net.config();
  nn::Trace<T> trace;
  const auto out = net.forward(params, *batch.volumes, nn::Mode::Train, &trace);
  const auto loss = batch_loss<T>(out.logits, out.z_emb, batch.labels, cfg.n_classes, cfg.sem_dim,
                                  label_matrix, alpha, reduction);
  if (!std::isfinite(loss.loss.total)) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << state.step << " (lr=" << lr
        << ", class_loss=" << loss.loss.class_loss << ", emb_loss=" << loss.loss.emb_loss
        << ", total=" << loss.loss.total << ")";
    fail(ErrorKind::NonFinite, msg.str());
  }
  const auto grads = net.backward(params, trace, loss.d_logits, loss.d_z_emb);
  net.update_running_stats(params, trace);
  sgd_momentum_update(params, state, grads, lr, opt.momentum, opt.weight_decay);
  return loss.loss;
}

template void sgd_momentum_update<float>(nn::ModelParams<float>&, OptimizerState<float>&,
                                         const nn::Gradients<float>&, double, double, double);
template void sgd_momentum_update<double>(nn::ModelParams<double>&, OptimizerState<double>&,
                                          const nn::Gradients<double>&, double, double, double);
template LossBreakdown train_step<float>(const nn::Network<float>&, nn::ModelParams<float>&,
                                         OptimizerState<float>&, const TrainBatch<float>&,
                                         std::span<const float>, double, EmbReduction, double,
                                         const OptimizerConfig&);
template LossBreakdown train_step<double>(const nn::Network<double>&, nn::ModelParams<double>&,
                                          OptimizerState<double>&, const TrainBatch<double>&,
                                          std::span<const double>, double, EmbReduction, double,
                                          const OptimizerConfig&);

}  // namespace mgc
