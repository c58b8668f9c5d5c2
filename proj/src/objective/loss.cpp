// SPDX-License-Identifier: Apache-2.0
#include "objective/loss.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"

namespace mgc {

EmbReduction parse_emb_reduction(std::string_view name) {
  if (name == "sum") return EmbReduction::Sum;
  if (name == "mean") return EmbReduction::Mean;
  fail(ErrorKind::InvalidArgument, "unknown emb_loss_reduction '" + std::string(name) + "'");
}

std::string_view emb_reduction_name(EmbReduction r) {
  return r == EmbReduction::Sum ? "sum" : "mean";
}

namespace {

template <typename T>
double log_sum_exp(std::span<const T> v) {
  double mx = -INFINITY;
  for (T x : v) mx = std::max(mx, static_cast<double>(x));
  double s = 0.0;
  for (T x : v) s += std::exp(static_cast<double>(x) - mx);
  return mx + std::log(s);
}

}  // namespace

LossBreakdown compose_loss(double class_loss, double emb_loss, double alpha) {
  require(alpha >= 0.0, ErrorKind::InvalidArgument, "alpha must be >= 0");
  return {class_loss + alpha * emb_loss, class_loss, emb_loss, alpha};
}

template <typename T>
double cross_entropy(std::span<const T> logits, int label) {
  require(label >= 0 && static_cast<std::size_t>(label) < logits.size(), ErrorKind::InvalidArgument,
          "cross_entropy: label " + std::to_string(label) + " out of range for " +
              std::to_string(logits.size()) + " classes");
  return log_sum_exp(logits) - static_cast<double>(logits[label]);
}

template <typename T>
double embedding_loss(std::span<const T> z_emb, std::span<const T> e_emb, EmbReduction reduction) {
  require(z_emb.size() == e_emb.size(), ErrorKind::ShapeMismatch,
          "embedding_loss: dimension mismatch (" + std::to_string(z_emb.size()) + " vs " +
              std::to_string(e_emb.size()) + ")");
  double s = 0.0;
  for (std::size_t d = 0; d < z_emb.size(); ++d) {
    const double diff = static_cast<double>(z_emb[d]) - static_cast<double>(e_emb[d]);
    s += diff * diff;
  }
  if (reduction == EmbReduction::Mean && !z_emb.empty()) s /= static_cast<double>(z_emb.size());
  return s;
}

template <typename T>
LossBreakdown total_loss(std::span<const T> logits, int label, std::span<const T> z_emb,
                         std::span<const T> label_matrix, double alpha, EmbReduction reduction) {
  require(alpha >= 0.0, ErrorKind::InvalidArgument, "alpha must be >= 0");
  const std::size_t dim = z_emb.size();
  require(dim > 0 && label >= 0 && (static_cast<std::size_t>(label) + 1) * dim <= label_matrix.size(),
          ErrorKind::InvalidArgument, "total_loss: no label embedding row for label " + std::to_string(label));
  return compose_loss(
      cross_entropy(logits, label),
      embedding_loss(z_emb, label_matrix.subspan(static_cast<std::size_t>(label) * dim, dim),
                     reduction),
      alpha);
}

template <typename T>
BatchLoss<T> batch_loss(std::span<const T> logits, std::span<const T> z_emb,
                        std::span<const int> labels, int n_classes, int sem_dim,
                        std::span<const T> label_matrix, double alpha, EmbReduction reduction) {
  require(alpha >= 0.0, ErrorKind::InvalidArgument, "alpha must be >= 0");
  const std::size_t n = labels.size();
  require(n >= 1, ErrorKind::InvalidArgument, "batch_loss: empty batch");
  require(logits.size() == n * n_classes && z_emb.size() == n * sem_dim, ErrorKind::ShapeMismatch,
          "batch_loss: logits/z_emb size does not match batch");
  require(label_matrix.size() == static_cast<std::size_t>(n_classes) * sem_dim,
          ErrorKind::ShapeMismatch, "batch_loss: label matrix must be n_classes x sem_dim");

  BatchLoss<T> out;
  out.d_logits.resize(logits.size());
  out.d_z_emb.resize(z_emb.size());
  double cls = 0.0;
  double emb = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  const double emb_scale = reduction == EmbReduction::Sum ? 1.0 : 1.0 / sem_dim;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = logits.subspan(i * n_classes, n_classes);
    const int y = labels[i];
    cls += cross_entropy(row, y);
    const double lse = log_sum_exp(row);
    for (int k = 0; k < n_classes; ++k) {
      const double p = std::exp(static_cast<double>(row[k]) - lse);
      out.d_logits[i * n_classes + k] = static_cast<T>((p - (k == y ? 1.0 : 0.0)) * inv_n);
    }
    const auto z = z_emb.subspan(i * sem_dim, sem_dim);
    const auto e = label_matrix.subspan(static_cast<std::size_t>(y) * sem_dim, sem_dim);
    emb += embedding_loss(z, e, reduction);
    for (int d = 0; d < sem_dim; ++d) {
      const double diff = static_cast<double>(z[d]) - static_cast<double>(e[d]);
      out.d_z_emb[i * sem_dim + d] = static_cast<T>(2.0 * alpha * emb_scale * diff * inv_n);
    }
  }
  out.loss = compose_loss(cls * inv_n, emb * inv_n, alpha);
  return out;
}

#define MGC_INSTANTIATE_LOSS(T)                                                              \
  template double cross_entropy<T>(std::span<const T>, int);                                 \
  template double embedding_loss<T>(std::span<const T>, std::span<const T>, EmbReduction);   \
  template LossBreakdown total_loss<T>(std::span<const T>, int, std::span<const T>,          \
                                       std::span<const T>, double, EmbReduction);            \
  template BatchLoss<T> batch_loss<T>(std::span<const T>, std::span<const T>,                \
                                      std::span<const int>, int, int, std::span<const T>,    \
                                      double, EmbReduction);

MGC_INSTANTIATE_LOSS(float)
MGC_INSTANTIATE_LOSS(double)

#undef MGC_INSTANTIATE_LOSS

}  // namespace mgc
