// SPDX-License-Identifier: Apache-2.0
#include "engine/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "common/error.hpp"

namespace mgc {

void OptimizerConfig::validate() const {
  require(std::isfinite(base_lr) && base_lr > 0.0, ErrorKind::Validation,
          "optimizer: base_lr must be > 0");
  require(momentum >= 0.0 && momentum < 1.0, ErrorKind::Validation,
          "optimizer: momentum must be in [0, 1)");
  require(weight_decay >= 0.0, ErrorKind::Validation, "optimizer: weight_decay must be >= 0");
  require(batch_size >= 1, ErrorKind::Validation, "optimizer: batch_size must be >= 1");
  require(epochs >= 1, ErrorKind::Validation, "optimizer: epochs must be >= 1");
}

double cosine_lr(double epoch, const OptimizerConfig& opt) {
  require(epoch >= 0.0 && epoch <= opt.epochs, ErrorKind::InvalidArgument,
          "cosine_lr: epoch " + std::to_string(epoch) + " outside [0, " +
              std::to_string(opt.epochs) + "]");
  const double lr =
      opt.base_lr * (1.0 + std::cos(std::numbers::pi * epoch / opt.epochs)) / 2.0;
  return std::max(lr, 0.0);
}

}  // namespace mgc
