// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace mgc {

/// How the squared distance between Z_emb and E_emb is reduced over the
/// embedding dimensions. Sum is the plain squared norm.
enum class EmbReduction { Sum, Mean };

EmbReduction parse_emb_reduction(std::string_view name);
std::string_view emb_reduction_name(EmbReduction r);

/// L = class_loss + alpha * emb_loss.
struct LossBreakdown {
  double total = 0.0;
  double class_loss = 0.0;
  double emb_loss = 0.0;
  double alpha = 0.0;
};

/// -log softmax(logits)[label] via log-sum-exp.
/// L = class_loss + alpha * emb_loss.
LossBreakdown compose_loss(double class_loss, double emb_loss, double alpha);

template <typename T>
double cross_entropy(std::span<const T> logits, int label);

/// ||a - b||^2 (Sum) or its per-dimension mean (Mean).
template <typename T>
double embedding_loss(std::span<const T> z_emb, std::span<const T> e_emb,
                      EmbReduction reduction = EmbReduction::Sum);

/// Single-sample loss with E_emb = label_matrix row `label`.
template <typename T>
LossBreakdown total_loss(std::span<const T> logits, int label, std::span<const T> z_emb,
                         std::span<const T> label_matrix, double alpha,
                         EmbReduction reduction = EmbReduction::Sum);

template <typename T>
struct BatchLoss {
  LossBreakdown loss;        // batch means
  std::vector<T> d_logits;   // dL/dlogits, batch x n_classes
  std::vector<T> d_z_emb;    // dL/dz_emb, batch x sem_dim
};

/// Batch-mean loss and its gradient w.r.t. logits and z_emb.
template <typename T>
BatchLoss<T> batch_loss(std::span<const T> logits, std::span<const T> z_emb,
                        std::span<const int> labels, int n_classes, int sem_dim,
                        std::span<const T> label_matrix, double alpha,
                        EmbReduction reduction = EmbReduction::Sum);

}  // namespace mgc
