// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "common/error.hpp"

namespace mgc::nn {

/// A named parameter array. Buffers (running statistics) are stored alongside
/// weights but are not trainable and receive no gradient.
template <typename T>
struct ParamArray {
  std::string name;
  std::vector<int> shape;
  std::vector<T> values;
  bool trainable = true;

  std::size_t size() const { return values.size(); }
};

template <typename T>
struct ModelParams {
  std::vector<ParamArray<T>> arrays;

  std::size_t index_of(std::string_view name) const {
    for (std::size_t i = 0; i < arrays.size(); ++i) {
      if (arrays[i].name == name) return i;
    }
    fail(ErrorKind::InvalidArgument, "no parameter named '" + std::string(name) + "'");
  }
  ParamArray<T>& operator[](std::string_view name) { return arrays[index_of(name)]; }
  const ParamArray<T>& operator[](std::string_view name) const { return arrays[index_of(name)]; }

  std::size_t trainable_count() const {
    std::size_t n = 0;
    for (const auto& a : arrays) n += a.trainable ? a.size() : 0;
    return n;
  }

  bool operator==(const ModelParams& o) const {
    if (arrays.size() != o.arrays.size()) return false;
    for (std::size_t i = 0; i < arrays.size(); ++i) {
      if (arrays[i].name != o.arrays[i].name || arrays[i].shape != o.arrays[i].shape ||
          arrays[i].values != o.arrays[i].values)
        return false;
    }
    return true;
  }
};

/// Gradients aligned with ModelParams::arrays; buffers get empty vectors.
template <typename T>
struct Gradients {
  std::vector<std::vector<T>> arrays;

  static Gradients zeros_like(const ModelParams<T>& p) {
    Gradients g;
    g.arrays.reserve(p.arrays.size());
    for (const auto& a : p.arrays) g.arrays.emplace_back(a.trainable ? a.size() : 0, T(0));
    return g;
  }
};

template <typename U, typename T>
ModelParams<U> cast_params(const ModelParams<T>& p) {
  ModelParams<U> out;
  out.arrays.reserve(p.arrays.size());
  for (const auto& a : p.arrays) {
    ParamArray<U> b{a.name, a.shape, {}, a.trainable};
    b.values.reserve(a.values.size());
    for (T v : a.values) b.values.push_back(static_cast<U>(v));
    out.arrays.push_back(std::move(b));
  }
  return out;
}

}  // namespace mgc::nn
