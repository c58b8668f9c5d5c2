// SPDX-License-Identifier: Apache-2.0
#include "engine/metrics.hpp"

#include <algorithm>

#include "common/error.hpp"

namespace mgc {

bool label_in_topk(std::span<const float> row, int label, int k) {
  const float s = row[label];
  int rank = 0;
  for (int j = 0; j < static_cast<int>(row.size()); ++j) {
    if (row[j] > s || (row[j] == s && j < label)) ++rank;
  }
  return rank < k;
}

int top1_class(std::span<const float> row) {
  int best = 0;
  for (int j = 1; j < static_cast<int>(row.size()); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

namespace {

void check_matrix(std::span<const float> scores, int n_classes, std::span<const int> labels) {
  require(n_classes >= 1, ErrorKind::InvalidArgument, "scores: n_classes must be >= 1");
  require(scores.size() == labels.size() * static_cast<std::size_t>(n_classes),
          ErrorKind::ShapeMismatch, "scores: matrix size does not match labels x classes");
  for (int y : labels) {
    require(y >= 0 && y < n_classes, ErrorKind::InvalidArgument,
            "scores: label " + std::to_string(y) + " out of range");
  }
}

}  // namespace

double topk_accuracy(std::span<const float> scores, int n_classes, std::span<const int> labels,
                     int k) {
  check_matrix(scores, n_classes, labels);
  require(k >= 1 && k <= n_classes, ErrorKind::InvalidArgument,
          "topk_accuracy: k must be in [1, N]");
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    hits += label_in_topk(scores.subspan(i * n_classes, n_classes), labels[i], k) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

EvalReport evaluate_scores(std::span<const float> scores, int n_classes,
                           std::span<const int> labels) {
  check_matrix(scores, n_classes, labels);
  EvalReport r;
  r.n_classes = n_classes;
  r.samples = static_cast<int>(labels.size());
  r.confusion.assign(static_cast<std::size_t>(n_classes) * n_classes, 0);
  if (labels.empty()) {
    r.per_class.assign(n_classes, std::nullopt);
    return r;
  }
  r.top1 = topk_accuracy(scores, n_classes, labels, 1);
  r.top5 = topk_accuracy(scores, n_classes, labels, std::min(5, n_classes));
  std::vector<std::int64_t> count(n_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int pred = top1_class(scores.subspan(i * n_classes, n_classes));
    ++r.confusion[static_cast<std::size_t>(labels[i]) * n_classes + pred];
    ++count[labels[i]];
  }
  for (int c = 0; c < n_classes; ++c) {
    if (count[c] == 0) {
      r.per_class.emplace_back(std::nullopt);
    } else {
      r.per_class.emplace_back(static_cast<double>(r.confusion_at(c, c)) / count[c]);
    }
  }
  return r;
}

}  // namespace mgc
