// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mgc {

/// True when `label` ranks among the k highest entries of `row`. Ties go to
/// the lower class index: rank = #{j : s_j > s_y} + #{j < y : s_j == s_y}.
bool label_in_topk(std::span<const float> row, int label, int k);

/// Argmax with the same tie rule (lowest index wins).
int top1_class(std::span<const float> row);

/// Fraction of the M rows of an M x N score matrix whose label is in the top k.
double topk_accuracy(std::span<const float> scores, int n_classes, std::span<const int> labels,
                     int k);

struct EvalReport {
  int n_classes = 0;
  int samples = 0;
  double top1 = 0.0;
  double top5 = 0.0;  // top-min(5, N)
  std::vector<std::optional<double>> per_class;  // nullopt for classes absent from the split
  std::vector<std::int64_t> confusion;           // N x N, row = true label, col = top-1 prediction

  std::int64_t confusion_at(int truth, int pred) const {
    return confusion[static_cast<std::size_t>(truth) * n_classes + pred];
  }
};

EvalReport evaluate_scores(std::span<const float> scores, int n_classes,
                           std::span<const int> labels);

}  // namespace mgc
