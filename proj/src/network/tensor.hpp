// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

namespace mgc::nn {

/// Activation tensor laid out N x C x T x H x W (W fastest).
template <typename T>
struct Activation {
  int n = 0;
  int c = 0;
  int t = 0;
  int h = 0;
  int w = 0;
  std::vector<T> data;

  Activation() = default;
  Activation(int n_, int c_, int t_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), t(t_), h(h_), w(w_),
        data(static_cast<std::size_t>(n_) * c_ * t_ * h_ * w_, fill) {}

  std::size_t voxels() const { return static_cast<std::size_t>(t) * h * w; }
  std::size_t sample_size() const { return static_cast<std::size_t>(c) * voxels(); }
  T* sample(int i) { return data.data() + static_cast<std::size_t>(i) * sample_size(); }
  const T* sample(int i) const { return data.data() + static_cast<std::size_t>(i) * sample_size(); }
  T* channel(int i, int ch) { return sample(i) + static_cast<std::size_t>(ch) * voxels(); }
  const T* channel(int i, int ch) const {
    return sample(i) + static_cast<std::size_t>(ch) * voxels();
  }
  bool same_shape(const Activation& o) const {
    return n == o.n && c == o.c && t == o.t && h == o.h && w == o.w;
  }
};

}  // namespace mgc::nn
