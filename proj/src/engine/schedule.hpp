// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace mgc {

struct OptimizerConfig {
  double base_lr = 0.2 / 3.0;
  double momentum = 0.9;
  double weight_decay = 3e-4;
  int batch_size = 32;
  int epochs = 100;

  void validate() const;
  bool operator==(const OptimizerConfig&) const = default;
};

/// Cosine annealing from base_lr at epoch 0 to 0 at `epochs`. Accepts a
/// fractional epoch so the rate can be annealed per iteration.
double cosine_lr(double epoch, const OptimizerConfig& opt);

}  // namespace mgc
