// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "network/params.hpp"
#include "network/tensor.hpp"

namespace mgc::nn {

enum class NormKind { Batch, Group };

NormKind parse_norm(std::string_view name);
std::string_view norm_name(NormKind k);

/// SlowOnly-style 3D ResNet: a stem conv, then residual stages of bottleneck
/// blocks (kt x 1 x 1 -> 1 x 3 x 3 -> 1 x 1 x 1). Time is never downsampled;
/// the first block of each stage carries the spatial stride.
struct NetworkConfig {
  int in_channels = 0;
  int n_classes = 0;
  int stem_width = 32;
  std::array<int, 3> stem_kernel{1, 3, 3};
  std::vector<int> stage_widths{64, 128, 512};
  std::vector<int> stage_blocks{1, 1, 1};
  std::vector<int> stage_spatial_strides{1, 2, 2};
  std::vector<int> stage_temporal_kernels{1, 3, 3};
  int bottleneck_ratio = 4;
  int embed_dim = 512;
  int sem_dim = 300;
  NormKind norm = NormKind::Batch;
  int norm_groups = 4;
  double norm_momentum = 0.1;
  double norm_eps = 1e-5;
  /// Lets gradient-check toys shrink embed_dim/sem_dim below 512/300.
  bool allow_dim_override = false;

  void validate() const;
  bool operator==(const NetworkConfig&) const = default;
};

enum class Mode { Train, Eval };

struct ParamSpec {
  enum class Init { KaimingConv, HeadWeight, Zero, One };
  std::string name;
  std::vector<int> shape;
  Init init;
  int fan_in = 1;
  bool trainable = true;
};

template <typename T>
struct ForwardOutput {
  int batch = 0;
  std::vector<T> logits;  // batch x n_classes
  std::vector<T> z;       // batch x embed_dim
  std::vector<T> z_emb;   // batch x sem_dim
};

/// Intermediate activations recorded by a forward pass for backward.
template <typename T>
class Trace {
 public:
  Trace();
  ~Trace();
  Trace(Trace&&) noexcept;
  Trace& operator=(Trace&&) noexcept;

  struct State;
  std::unique_ptr<State> state;
};

template <typename T>
class Network {
 public:
  explicit Network(NetworkConfig config);
  ~Network();
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;

  const NetworkConfig& config() const { return config_; }
  const std::vector<ParamSpec>& param_specs() const { return specs_; }

  /// Batch elements are independent in Eval mode. In Train mode batch norm
  /// uses batch statistics. `trace` (optional) records what backward needs.
  ForwardOutput<T> forward(const ModelParams<T>& params, const Activation<T>& input, Mode mode,
                           Trace<T>* trace = nullptr) const;

  /// Gradient of a loss whose partials w.r.t. logits and z_emb are given.
  Gradients<T> backward(const ModelParams<T>& params, const Trace<T>& trace,
                        std::span<const T> d_logits, std::span<const T> d_z_emb) const;

  /// Folds the batch statistics recorded in a Train-mode trace into the
  /// running mean/var buffers.
  void update_running_stats(ModelParams<T>& params, const Trace<T>& trace) const;

  /// Throws ShapeMismatch unless `params` matches param_specs().
  void check_params(const ModelParams<T>& params) const;

 private:
  struct Impl;
  NetworkConfig config_;
  std::vector<ParamSpec> specs_;
  std::unique_ptr<Impl> impl_;
};

template <typename T>
ModelParams<T> init_params(const Network<T>& net, std::uint64_t seed);

/// Softmax with max subtraction; rows of length n.
template <typename T>
std::vector<T> predict_scores(std::span<const T> logits, int n);

extern template class Trace<float>;
extern template class Trace<double>;
extern template class Network<float>;
extern template class Network<double>;

}  // namespace mgc::nn
