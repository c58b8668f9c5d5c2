// SPDX-License-Identifier: Apache-2.0
#include "network/network.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace mgc::nn {

NormKind parse_norm(std::string_view name) {
  if (name == "batch") return NormKind::Batch;
  if (name == "group") return NormKind::Group;
  fail(ErrorKind::InvalidArgument, "unknown norm '" + std::string(name) + "'");
}

std::string_view norm_name(NormKind k) { return k == NormKind::Batch ? "batch" : "group"; }

void NetworkConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorKind::Validation, "network: " + m); };
  if (in_channels < 1) bad("in_channels must be >= 1");
  if (n_classes < 2) bad("n_classes must be >= 2");
  if (stem_width < 1) bad("stem_width must be >= 1");
  for (int k : stem_kernel) {
    if (k < 1 || k % 2 == 0) bad("stem kernel sizes must be odd and >= 1");
  }
  if (bottleneck_ratio < 1) bad("bottleneck_ratio must be >= 1");
  const auto s = stage_widths.size();
  if (s == 0) bad("at least one stage is required");
  if (stage_blocks.size() != s || stage_spatial_strides.size() != s ||
      stage_temporal_kernels.size() != s)
    bad("stage_widths, stage_blocks, stage_spatial_strides and stage_temporal_kernels must have equal length");
  for (std::size_t i = 0; i < s; ++i) {
    if (stage_widths[i] < 1 || stage_blocks[i] < 1 || stage_spatial_strides[i] < 1)
      bad("stage widths, block counts and strides must be >= 1");
    if (stage_temporal_kernels[i] < 1 || stage_temporal_kernels[i] % 2 == 0)
      bad("temporal kernels must be odd and >= 1");
    if (stage_widths[i] / bottleneck_ratio < 1) bad("bottleneck_ratio leaves zero mid channels");
  }
  if (stage_widths.back() != embed_dim)
    bad("final stage width " + std::to_string(stage_widths.back()) + " must equal embed_dim " +
        std::to_string(embed_dim));
  if (!allow_dim_override && (embed_dim != 512 || sem_dim != 300))
    bad("embed_dim must be 512 and sem_dim 300 (set allow_dim_override for test toys)");
  if (embed_dim < 1 || sem_dim < 1) bad("embed_dim and sem_dim must be >= 1");
  if (norm == NormKind::Group) {
    auto check = [&](int c) {
      if (c % norm_groups != 0) bad("channel count " + std::to_string(c) + " not divisible by norm_groups");
    };
    if (norm_groups < 1) bad("norm_groups must be >= 1");
    check(stem_width);
    for (int w : stage_widths) {
      check(w);
      check(w / bottleneck_ratio);
    }
  }
  if (!(norm_momentum > 0.0 && norm_momentum <= 1.0)) bad("norm_momentum must be in (0, 1]");
  if (!(norm_eps > 0.0)) bad("norm_eps must be > 0");
}

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using VecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using ConstVecMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

struct ConvGeom {
  int cin = 0;
  int cout = 0;
  int kt = 1;
  int kh = 1;
  int kw = 1;
  int stride = 1;  // spatial only

  int patch() const { return cin * kt * kh * kw; }
  bool pointwise() const { return kt == 1 && kh == 1 && kw == 1 && stride == 1; }
  int out_h(int h) const { return (h + 2 * (kh / 2) - kh) / stride + 1; }
  int out_w(int w) const { return (w + 2 * (kw / 2) - kw) / stride + 1; }
};

struct ConvLayer {
  ConvGeom g;
  std::size_t weight = 0;
};

struct NormLayer {
  int channels = 0;
  std::size_t gamma = 0;
  std::size_t beta = 0;
  std::size_t running_mean = 0;
  std::size_t running_var = 0;
};

struct Unit {
  ConvLayer conv;
  NormLayer norm;
  bool relu = true;
};

struct Block {
  Unit a;
  Unit b;
  Unit c;
  bool has_proj = false;
  Unit proj;
};

// Column layout: row r = ((ci * kt + dt) * kh + dh) * kw + dw, column = output voxel.
template <typename T>
void im2col(const T* x, int t, int h, int w, const ConvGeom& g, int ho, int wo, T* col) {
  const int pt = g.kt / 2;
  const int ph = g.kh / 2;
  const int pw = g.kw / 2;
  const std::size_t cols = static_cast<std::size_t>(t) * ho * wo;
  std::size_t r = 0;
  for (int ci = 0; ci < g.cin; ++ci) {
    const T* xc = x + static_cast<std::size_t>(ci) * t * h * w;
    for (int dt = 0; dt < g.kt; ++dt) {
      for (int dh = 0; dh < g.kh; ++dh) {
        for (int dw = 0; dw < g.kw; ++dw, ++r) {
          T* dst = col + r * cols;
          for (int ot = 0; ot < t; ++ot) {
            const int it = ot + dt - pt;
            for (int oh = 0; oh < ho; ++oh) {
              const int ih = oh * g.stride + dh - ph;
              T* drow = dst + (static_cast<std::size_t>(ot) * ho + oh) * wo;
              if (it < 0 || it >= t || ih < 0 || ih >= h) {
                std::fill_n(drow, wo, T(0));
                continue;
              }
              const T* srow = xc + (static_cast<std::size_t>(it) * h + ih) * w;
              for (int ow = 0; ow < wo; ++ow) {
                const int iw = ow * g.stride + dw - pw;
                drow[ow] = (iw < 0 || iw >= w) ? T(0) : srow[iw];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, int t, int h, int w, const ConvGeom& g, int ho, int wo, T* dx) {
  const int pt = g.kt / 2;
  const int ph = g.kh / 2;
  const int pw = g.kw / 2;
  const std::size_t cols = static_cast<std::size_t>(t) * ho * wo;
  std::size_t r = 0;
  for (int ci = 0; ci < g.cin; ++ci) {
    T* xc = dx + static_cast<std::size_t>(ci) * t * h * w;
    for (int dt = 0; dt < g.kt; ++dt) {
      for (int dh = 0; dh < g.kh; ++dh) {
        for (int dw = 0; dw < g.kw; ++dw, ++r) {
          const T* src = col + r * cols;
          for (int ot = 0; ot < t; ++ot) {
            const int it = ot + dt - pt;
            if (it < 0 || it >= t) continue;
            for (int oh = 0; oh < ho; ++oh) {
              const int ih = oh * g.stride + dh - ph;
              if (ih < 0 || ih >= h) continue;
              const T* srow = src + (static_cast<std::size_t>(ot) * ho + oh) * wo;
              T* drow = xc + (static_cast<std::size_t>(it) * h + ih) * w;
              for (int ow = 0; ow < wo; ++ow) {
                const int iw = ow * g.stride + dw - pw;
                if (iw >= 0 && iw < w) drow[iw] += srow[ow];
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
struct Trace<T>::State {
  struct UnitTrace {
    Activation<T> input;
    Activation<T> xhat;
    std::vector<T> inv_std;     // per channel (batch) or per sample*group (group)
    std::vector<T> batch_mean;  // batch norm, train mode
    std::vector<T> batch_var;   // unbiased
    Activation<T> out;          // kept only when relu follows
  };
  struct BlockTrace {
    UnitTrace a;
    UnitTrace b;
    UnitTrace c;
    UnitTrace proj;
    Activation<T> out;
  };

  Mode mode = Mode::Eval;
  UnitTrace stem;
  std::vector<BlockTrace> blocks;
  std::vector<T> z;
};

template <typename T>
Trace<T>::Trace() : state(std::make_unique<State>()) {}
template <typename T>
Trace<T>::~Trace() = default;
template <typename T>
Trace<T>::Trace(Trace&&) noexcept = default;
template <typename T>
Trace<T>& Trace<T>::operator=(Trace&&) noexcept = default;

template <typename T>
struct Network<T>::Impl {
  using UnitTrace = typename Trace<T>::State::UnitTrace;
  using BlockTrace = typename Trace<T>::State::BlockTrace;

  const NetworkConfig* cfg = nullptr;
  Unit stem;
  std::vector<Block> blocks;
  std::size_t cls_w = 0;
  std::size_t cls_b = 0;
  std::size_t proj_w = 0;
  std::size_t proj_b = 0;

  // ---- convolution ----
  Activation<T> conv_forward(const ModelParams<T>& p, const ConvLayer& L,
                             const Activation<T>& x) const {
    const auto& g = L.g;
    const int ho = g.out_h(x.h);
    const int wo = g.out_w(x.w);
    Activation<T> y(x.n, g.cout, x.t, ho, wo);
    const std::size_t cols = static_cast<std::size_t>(x.t) * ho * wo;
    ConstMatMap<T> W(p.arrays[L.weight].values.data(), g.cout, g.patch());
    std::vector<T> col;
    if (!g.pointwise()) col.resize(static_cast<std::size_t>(g.patch()) * cols);
    for (int i = 0; i < x.n; ++i) {
      MatMap<T> Y(y.sample(i), g.cout, static_cast<Eigen::Index>(cols));
      if (g.pointwise()) {
        Y.noalias() = W * ConstMatMap<T>(x.sample(i), g.cin, static_cast<Eigen::Index>(cols));
      } else {
        im2col(x.sample(i), x.t, x.h, x.w, g, ho, wo, col.data());
        Y.noalias() = W * ConstMatMap<T>(col.data(), g.patch(), static_cast<Eigen::Index>(cols));
      }
    }
    return y;
  }

  Activation<T> conv_backward(const ModelParams<T>& p, const ConvLayer& L, const Activation<T>& x,
                              const Activation<T>& dy, Gradients<T>& grads) const {
    const auto& g = L.g;
    const std::size_t cols = static_cast<std::size_t>(dy.t) * dy.h * dy.w;
    ConstMatMap<T> W(p.arrays[L.weight].values.data(), g.cout, g.patch());
    MatMap<T> dW(grads.arrays[L.weight].data(), g.cout, g.patch());
    Activation<T> dx(x.n, x.c, x.t, x.h, x.w);
    std::vector<T> col;
    if (!g.pointwise()) col.resize(static_cast<std::size_t>(g.patch()) * cols);
    for (int i = 0; i < x.n; ++i) {
      ConstMatMap<T> dY(dy.sample(i), g.cout, static_cast<Eigen::Index>(cols));
      if (g.pointwise()) {
        ConstMatMap<T> X(x.sample(i), g.cin, static_cast<Eigen::Index>(cols));
        dW.noalias() += dY * X.transpose();
        MatMap<T>(dx.sample(i), g.cin, static_cast<Eigen::Index>(cols)).noalias() =
            W.transpose() * dY;
      } else {
        im2col(x.sample(i), x.t, x.h, x.w, g, dy.h, dy.w, col.data());
        MatMap<T> C(col.data(), g.patch(), static_cast<Eigen::Index>(cols));
        dW.noalias() += dY * C.transpose();
        C.noalias() = W.transpose() * dY;
        col2im(col.data(), x.t, x.h, x.w, g, dy.h, dy.w, dx.sample(i));
      }
    }
    return dx;
  }

  // ---- normalization ----
  Activation<T> norm_forward(const ModelParams<T>& p, const NormLayer& L, const Activation<T>& y,
                             Mode mode, UnitTrace* tr) const {
    const T eps = static_cast<T>(cfg->norm_eps);
    const T* gamma = p.arrays[L.gamma].values.data();
    const T* beta = p.arrays[L.beta].values.data();
    Activation<T> xhat(y.n, y.c, y.t, y.h, y.w);
    Activation<T> z(y.n, y.c, y.t, y.h, y.w);
    const std::size_t vox = y.voxels();
    std::vector<T> inv_std;

    if (cfg->norm == NormKind::Batch) {
      inv_std.resize(y.c);
      std::vector<T> bmean;
      std::vector<T> bvar;
      for (int c = 0; c < y.c; ++c) {
        T mean;
        T var;
        if (mode == Mode::Train) {
          const double m = static_cast<double>(y.n) * vox;
          double s = 0.0;
          for (int i = 0; i < y.n; ++i) {
            const T* ch = y.channel(i, c);
            for (std::size_t v = 0; v < vox; ++v) s += ch[v];
          }
          const double mu = s / m;
          double ss = 0.0;
          for (int i = 0; i < y.n; ++i) {
            const T* ch = y.channel(i, c);
            for (std::size_t v = 0; v < vox; ++v) {
              const double d = ch[v] - mu;
              ss += d * d;
            }
          }
          mean = static_cast<T>(mu);
          var = static_cast<T>(ss / m);
          bmean.push_back(mean);
          bvar.push_back(static_cast<T>(m > 1.0 ? ss / (m - 1.0) : 0.0));
        } else {
          mean = p.arrays[L.running_mean].values[c];
          var = p.arrays[L.running_var].values[c];
        }
        const T is = T(1) / std::sqrt(var + eps);
        inv_std[c] = is;
        for (int i = 0; i < y.n; ++i) {
          const T* src = y.channel(i, c);
          T* xh = xhat.channel(i, c);
          T* dst = z.channel(i, c);
          for (std::size_t v = 0; v < vox; ++v) {
            xh[v] = (src[v] - mean) * is;
            dst[v] = gamma[c] * xh[v] + beta[c];
          }
        }
      }
      if (tr) {
        tr->batch_mean = std::move(bmean);
        tr->batch_var = std::move(bvar);
      }
    } else {
      const int groups = cfg->norm_groups;
      const int cpg = y.c / groups;
      const std::size_t gsize = static_cast<std::size_t>(cpg) * vox;
      inv_std.resize(static_cast<std::size_t>(y.n) * groups);
      for (int i = 0; i < y.n; ++i) {
        for (int gi = 0; gi < groups; ++gi) {
          const T* src = y.channel(i, gi * cpg);
          double s = 0.0;
          for (std::size_t v = 0; v < gsize; ++v) s += src[v];
          const double mu = s / static_cast<double>(gsize);
          double ss = 0.0;
          for (std::size_t v = 0; v < gsize; ++v) {
            const double d = src[v] - mu;
            ss += d * d;
          }
          const T is = T(1) / std::sqrt(static_cast<T>(ss / static_cast<double>(gsize)) + eps);
          inv_std[static_cast<std::size_t>(i) * groups + gi] = is;
          const T mean = static_cast<T>(mu);
          for (int c = gi * cpg; c < (gi + 1) * cpg; ++c) {
            const T* sc = y.channel(i, c);
            T* xh = xhat.channel(i, c);
            T* dst = z.channel(i, c);
            for (std::size_t v = 0; v < vox; ++v) {
              xh[v] = (sc[v] - mean) * is;
              dst[v] = gamma[c] * xh[v] + beta[c];
            }
          }
        }
      }
    }
    if (tr) {
      tr->xhat = std::move(xhat);
      tr->inv_std = std::move(inv_std);
    }
    return z;
  }

  Activation<T> norm_backward(const ModelParams<T>& p, const NormLayer& L, const UnitTrace& tr,
                              const Activation<T>& dz, Mode mode, Gradients<T>& grads) const {
    const T* gamma = p.arrays[L.gamma].values.data();
    T* dgamma = grads.arrays[L.gamma].data();
    T* dbeta = grads.arrays[L.beta].data();
    const auto& xhat = tr.xhat;
    Activation<T> dy(dz.n, dz.c, dz.t, dz.h, dz.w);
    const std::size_t vox = dz.voxels();

    for (int c = 0; c < dz.c; ++c) {
      double sg = 0.0;
      double sb = 0.0;
      for (int i = 0; i < dz.n; ++i) {
        const T* d = dz.channel(i, c);
        const T* xh = xhat.channel(i, c);
        for (std::size_t v = 0; v < vox; ++v) {
          sg += static_cast<double>(d[v]) * xh[v];
          sb += d[v];
        }
      }
      dgamma[c] += static_cast<T>(sg);
      dbeta[c] += static_cast<T>(sb);
    }

    if (cfg->norm == NormKind::Batch) {
      for (int c = 0; c < dz.c; ++c) {
        const T is = tr.inv_std[c];
        if (mode == Mode::Eval) {
          for (int i = 0; i < dz.n; ++i) {
            const T* d = dz.channel(i, c);
            T* o = dy.channel(i, c);
            for (std::size_t v = 0; v < vox; ++v) o[v] = d[v] * gamma[c] * is;
          }
          continue;
        }
        const double m = static_cast<double>(dz.n) * vox;
        double s1 = 0.0;
        double s2 = 0.0;
        for (int i = 0; i < dz.n; ++i) {
          const T* d = dz.channel(i, c);
          const T* xh = xhat.channel(i, c);
          for (std::size_t v = 0; v < vox; ++v) {
            const double dxh = static_cast<double>(d[v]) * gamma[c];
            s1 += dxh;
            s2 += dxh * xh[v];
          }
        }
        const T m1 = static_cast<T>(s1 / m);
        const T m2 = static_cast<T>(s2 / m);
        for (int i = 0; i < dz.n; ++i) {
          const T* d = dz.channel(i, c);
          const T* xh = xhat.channel(i, c);
          T* o = dy.channel(i, c);
          for (std::size_t v = 0; v < vox; ++v) {
            o[v] = is * (d[v] * gamma[c] - m1 - xh[v] * m2);
          }
        }
      }
    } else {
      const int groups = cfg->norm_groups;
      const int cpg = dz.c / groups;
      const double m = static_cast<double>(cpg) * vox;
      for (int i = 0; i < dz.n; ++i) {
        for (int gi = 0; gi < groups; ++gi) {
          const T is = tr.inv_std[static_cast<std::size_t>(i) * groups + gi];
          double s1 = 0.0;
          double s2 = 0.0;
          for (int c = gi * cpg; c < (gi + 1) * cpg; ++c) {
            const T* d = dz.channel(i, c);
            const T* xh = xhat.channel(i, c);
            for (std::size_t v = 0; v < vox; ++v) {
              const double dxh = static_cast<double>(d[v]) * gamma[c];
              s1 += dxh;
              s2 += dxh * xh[v];
            }
          }
          const T m1 = static_cast<T>(s1 / m);
          const T m2 = static_cast<T>(s2 / m);
          for (int c = gi * cpg; c < (gi + 1) * cpg; ++c) {
            const T* d = dz.channel(i, c);
            const T* xh = xhat.channel(i, c);
            T* o = dy.channel(i, c);
            for (std::size_t v = 0; v < vox; ++v) {
              o[v] = is * (d[v] * gamma[c] - m1 - xh[v] * m2);
            }
          }
        }
      }
    }
    return dy;
  }

  // ---- conv + norm (+ relu) ----
  Activation<T> unit_forward(const ModelParams<T>& p, const Unit& u, const Activation<T>& x,
                             Mode mode, UnitTrace* tr) const {
    auto y = conv_forward(p, u.conv, x);
    auto z = norm_forward(p, u.norm, y, mode, tr);
    if (u.relu) {
      for (auto& v : z.data) v = v > T(0) ? v : T(0);
    }
    if (tr) {
      tr->input = x;
      if (u.relu) tr->out = z;
    }
    return z;
  }

  Activation<T> unit_backward(const ModelParams<T>& p, const Unit& u, const UnitTrace& tr,
                              Activation<T> dout, Mode mode, Gradients<T>& grads) const {
    if (u.relu) {
      for (std::size_t k = 0; k < dout.data.size(); ++k) {
        if (!(tr.out.data[k] > T(0))) dout.data[k] = T(0);
      }
    }
    auto dy = norm_backward(p, u.norm, tr, dout, mode, grads);
    return conv_backward(p, u.conv, tr.input, dy, grads);
  }

  Activation<T> block_forward(const ModelParams<T>& p, const Block& b, const Activation<T>& x,
                              Mode mode, BlockTrace* tr) const {
    auto ya = unit_forward(p, b.a, x, mode, tr ? &tr->a : nullptr);
    auto yb = unit_forward(p, b.b, ya, mode, tr ? &tr->b : nullptr);
    auto out = unit_forward(p, b.c, yb, mode, tr ? &tr->c : nullptr);
    if (b.has_proj) {
      const auto s = unit_forward(p, b.proj, x, mode, tr ? &tr->proj : nullptr);
      for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] += s.data[k];
    } else {
      for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] += x.data[k];
    }
    for (auto& v : out.data) v = v > T(0) ? v : T(0);
    if (tr) tr->out = out;
    return out;
  }

  Activation<T> block_backward(const ModelParams<T>& p, const Block& b, const BlockTrace& tr,
                               Activation<T> dout, Mode mode, Gradients<T>& grads) const {
    for (std::size_t k = 0; k < dout.data.size(); ++k) {
      if (!(tr.out.data[k] > T(0))) dout.data[k] = T(0);
    }
    auto dc = unit_backward(p, b.c, tr.c, dout, mode, grads);
    auto db = unit_backward(p, b.b, tr.b, std::move(dc), mode, grads);
    auto dx = unit_backward(p, b.a, tr.a, std::move(db), mode, grads);
    if (b.has_proj) {
      const auto ds = unit_backward(p, b.proj, tr.proj, std::move(dout), mode, grads);
      for (std::size_t k = 0; k < dx.data.size(); ++k) dx.data[k] += ds.data[k];
    } else {
      for (std::size_t k = 0; k < dx.data.size(); ++k) dx.data[k] += dout.data[k];
    }
    return dx;
  }

  const std::vector<const NormLayer*> norm_layers() const {
    std::vector<const NormLayer*> out{&stem.norm};
    for (const auto& b : blocks) {
      out.push_back(&b.a.norm);
      out.push_back(&b.b.norm);
      out.push_back(&b.c.norm);
      if (b.has_proj) out.push_back(&b.proj.norm);
    }
    return out;
  }
};

namespace {

class SpecBuilder {
 public:
  SpecBuilder(std::vector<ParamSpec>& specs, NormKind norm) : specs_(specs), norm_(norm) {}

  std::size_t add(std::string name, std::vector<int> shape, ParamSpec::Init init, int fan_in = 1,
                  bool trainable = true) {
    specs_.push_back({std::move(name), std::move(shape), init, fan_in, trainable});
    return specs_.size() - 1;
  }

  ConvLayer conv(const std::string& prefix, ConvGeom g) {
    ConvLayer L{g, 0};
    L.weight = add(prefix + ".conv.weight", {g.cout, g.cin, g.kt, g.kh, g.kw},
                   ParamSpec::Init::KaimingConv, g.patch());
    return L;
  }

  NormLayer norm(const std::string& prefix, int c) {
    NormLayer L;
    L.channels = c;
    L.gamma = add(prefix + ".norm.weight", {c}, ParamSpec::Init::One);
    L.beta = add(prefix + ".norm.bias", {c}, ParamSpec::Init::Zero);
    if (norm_ == NormKind::Batch) {
      L.running_mean = add(prefix + ".norm.running_mean", {c}, ParamSpec::Init::Zero, 1, false);
      L.running_var = add(prefix + ".norm.running_var", {c}, ParamSpec::Init::One, 1, false);
    }
    return L;
  }

  Unit unit(const std::string& prefix, ConvGeom g, bool relu) {
    Unit u;
    u.conv = conv(prefix, g);
    u.norm = norm(prefix, g.cout);
    u.relu = relu;
    return u;
  }

 private:
  std::vector<ParamSpec>& specs_;
  NormKind norm_;
};

}  // namespace

template <typename T>
Network<T>::Network(NetworkConfig config) : config_(std::move(config)), impl_(std::make_unique<Impl>()) {
  config_.validate();
  impl_->cfg = &config_;
  SpecBuilder sb(specs_, config_.norm);

  ConvGeom stem{config_.in_channels, config_.stem_width, config_.stem_kernel[0],
                config_.stem_kernel[1], config_.stem_kernel[2], 1};
  impl_->stem = sb.unit("stem", stem, true);

  int in = config_.stem_width;
  for (std::size_t s = 0; s < config_.stage_widths.size(); ++s) {
    const int out = config_.stage_widths[s];
    const int mid = out / config_.bottleneck_ratio;
    for (int k = 0; k < config_.stage_blocks[s]; ++k) {
      const int stride = k == 0 ? config_.stage_spatial_strides[s] : 1;
      const auto prefix = "stage" + std::to_string(s + 1) + ".block" + std::to_string(k + 1);
      Block b;
      b.a = sb.unit(prefix + ".a", {in, mid, config_.stage_temporal_kernels[s], 1, 1, 1}, true);
      b.b = sb.unit(prefix + ".b", {mid, mid, 1, 3, 3, stride}, true);
      b.c = sb.unit(prefix + ".c", {mid, out, 1, 1, 1, 1}, false);
      b.has_proj = in != out || stride != 1;
      if (b.has_proj) b.proj = sb.unit(prefix + ".proj", {in, out, 1, 1, 1, stride}, false);
      impl_->blocks.push_back(b);
      in = out;
    }
  }
  impl_->cls_w = sb.add("cls_head.weight", {config_.n_classes, config_.embed_dim},
                        ParamSpec::Init::HeadWeight, config_.embed_dim);
  impl_->cls_b = sb.add("cls_head.bias", {config_.n_classes}, ParamSpec::Init::Zero);
  impl_->proj_w = sb.add("sem_head.weight", {config_.sem_dim, config_.embed_dim},
                         ParamSpec::Init::HeadWeight, config_.embed_dim);
  impl_->proj_b = sb.add("sem_head.bias", {config_.sem_dim}, ParamSpec::Init::Zero);
}

template <typename T>
Network<T>::~Network() = default;

template <typename T>
Network<T>::Network(Network&& o) noexcept
    : config_(std::move(o.config_)), specs_(std::move(o.specs_)), impl_(std::move(o.impl_)) {
  if (impl_) impl_->cfg = &config_;
}

template <typename T>
Network<T>& Network<T>::operator=(Network&& o) noexcept {
  config_ = std::move(o.config_);
  specs_ = std::move(o.specs_);
  impl_ = std::move(o.impl_);
  if (impl_) impl_->cfg = &config_;
  return *this;
}

template <typename T>
void Network<T>::check_params(const ModelParams<T>& params) const {
  require(params.arrays.size() == specs_.size(), ErrorKind::ShapeMismatch,
          "parameter count " + std::to_string(params.arrays.size()) + " does not match network (" +
              std::to_string(specs_.size()) + ")");
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const auto& a = params.arrays[i];
    std::size_t n = 1;
    for (int d : specs_[i].shape) n *= static_cast<std::size_t>(d);
    require(a.name == specs_[i].name && a.shape == specs_[i].shape && a.values.size() == n,
            ErrorKind::ShapeMismatch, "parameter '" + a.name + "' does not match '" + specs_[i].name + "'");
  }
}

template <typename T>
ForwardOutput<T> Network<T>::forward(const ModelParams<T>& params, const Activation<T>& input,
                                     Mode mode, Trace<T>* trace) const {
  require(input.c == config_.in_channels, ErrorKind::ShapeMismatch,
          "input has " + std::to_string(input.c) + " channels, network expects " +
              std::to_string(config_.in_channels));
  require(input.n >= 1 && input.t >= 1 && input.h >= 1 && input.w >= 1, ErrorKind::ShapeMismatch,
          "input volume is empty");
  auto* st = trace ? trace->state.get() : nullptr;
  if (st) {
    st->mode = mode;
    st->blocks.assign(impl_->blocks.size(), {});
  }

  auto x = impl_->unit_forward(params, impl_->stem, input, mode, st ? &st->stem : nullptr);
  for (std::size_t b = 0; b < impl_->blocks.size(); ++b) {
    x = impl_->block_forward(params, impl_->blocks[b], x, mode, st ? &st->blocks[b] : nullptr);
  }

  const int n = input.n;
  const int e = config_.embed_dim;
  ForwardOutput<T> out;
  out.batch = n;
  out.z.resize(static_cast<std::size_t>(n) * e);
  const std::size_t vox = x.voxels();
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < e; ++c) {
      const T* ch = x.channel(i, c);
      T s = T(0);
      for (std::size_t v = 0; v < vox; ++v) s += ch[v];
      out.z[static_cast<std::size_t>(i) * e + c] = s / static_cast<T>(vox);
    }
  }

  const int nc = config_.n_classes;
  const int sd = config_.sem_dim;
  ConstMatMap<T> Wc(params.arrays[impl_->cls_w].values.data(), nc, e);
  ConstVecMap<T> bc(params.arrays[impl_->cls_b].values.data(), nc);
  ConstMatMap<T> Wp(params.arrays[impl_->proj_w].values.data(), sd, e);
  ConstVecMap<T> bp(params.arrays[impl_->proj_b].values.data(), sd);
  out.logits.resize(static_cast<std::size_t>(n) * nc);
  out.z_emb.resize(static_cast<std::size_t>(n) * sd);
  for (int i = 0; i < n; ++i) {
    ConstVecMap<T> z(out.z.data() + static_cast<std::size_t>(i) * e, e);
    VecMap<T>(out.logits.data() + static_cast<std::size_t>(i) * nc, nc).noalias() = Wc * z + bc;
    VecMap<T>(out.z_emb.data() + static_cast<std::size_t>(i) * sd, sd).noalias() = Wp * z + bp;
  }
  if (st) st->z = out.z;
  return out;
}

template <typename T>
Gradients<T> Network<T>::backward(const ModelParams<T>& params, const Trace<T>& trace,
                                  std::span<const T> d_logits, std::span<const T> d_z_emb) const {
  const auto& st = *trace.state;
  require(!st.blocks.empty(), ErrorKind::InvalidArgument, "backward: empty trace");
  const auto& feat = st.blocks.back().out;
  const int n = feat.n;
  const int e = config_.embed_dim;
  const int nc = config_.n_classes;
  const int sd = config_.sem_dim;
  require(d_logits.size() == static_cast<std::size_t>(n) * nc &&
              d_z_emb.size() == static_cast<std::size_t>(n) * sd,
          ErrorKind::ShapeMismatch, "backward: gradient sizes do not match batch");

  auto grads = Gradients<T>::zeros_like(params);
  ConstMatMap<T> Wc(params.arrays[impl_->cls_w].values.data(), nc, e);
  ConstMatMap<T> Wp(params.arrays[impl_->proj_w].values.data(), sd, e);
  MatMap<T> dWc(grads.arrays[impl_->cls_w].data(), nc, e);
  MatMap<T> dWp(grads.arrays[impl_->proj_w].data(), sd, e);
  VecMap<T> dbc(grads.arrays[impl_->cls_b].data(), nc);
  VecMap<T> dbp(grads.arrays[impl_->proj_b].data(), sd);

  Activation<T> dfeat(feat.n, feat.c, feat.t, feat.h, feat.w);
  const std::size_t vox = feat.voxels();
  Eigen::Matrix<T, Eigen::Dynamic, 1> dz(e);
  for (int i = 0; i < n; ++i) {
    ConstVecMap<T> z(st.z.data() + static_cast<std::size_t>(i) * e, e);
    ConstVecMap<T> gl(d_logits.data() + static_cast<std::size_t>(i) * nc, nc);
    ConstVecMap<T> ge(d_z_emb.data() + static_cast<std::size_t>(i) * sd, sd);
    dWc.noalias() += gl * z.transpose();
    dWp.noalias() += ge * z.transpose();
    dbc += gl;
    dbp += ge;
    dz.noalias() = Wc.transpose() * gl;
    dz.noalias() += Wp.transpose() * ge;
    for (int c = 0; c < e; ++c) {
      const T v = dz[c] / static_cast<T>(vox);
      std::fill_n(dfeat.channel(i, c), vox, v);
    }
  }

  auto d = std::move(dfeat);
  for (std::size_t b = impl_->blocks.size(); b-- > 0;) {
    d = impl_->block_backward(params, impl_->blocks[b], st.blocks[b], std::move(d), st.mode, grads);
  }
  impl_->unit_backward(params, impl_->stem, st.stem, std::move(d), st.mode, grads);
  return grads;
}

template <typename T>
void Network<T>::update_running_stats(ModelParams<T>& params, const Trace<T>& trace) const {
  if (config_.norm != NormKind::Batch) return;
  const auto& st = *trace.state;
  require(st.mode == Mode::Train, ErrorKind::InvalidArgument,
          "update_running_stats needs a Train-mode trace");
  const T mom = static_cast<T>(config_.norm_momentum);
  auto fold = [&](const NormLayer& L, const typename Impl::UnitTrace& tr) {
    auto& rm = params.arrays[L.running_mean].values;
    auto& rv = params.arrays[L.running_var].values;
    for (int c = 0; c < L.channels; ++c) {
      rm[c] = (T(1) - mom) * rm[c] + mom * tr.batch_mean[c];
      rv[c] = (T(1) - mom) * rv[c] + mom * tr.batch_var[c];
    }
  };
  fold(impl_->stem.norm, st.stem);
  for (std::size_t b = 0; b < impl_->blocks.size(); ++b) {
    const auto& blk = impl_->blocks[b];
    const auto& bt = st.blocks[b];
    fold(blk.a.norm, bt.a);
    fold(blk.b.norm, bt.b);
    fold(blk.c.norm, bt.c);
    if (blk.has_proj) fold(blk.proj.norm, bt.proj);
  }
}

template <typename T>
ModelParams<T> init_params(const Network<T>& net, std::uint64_t seed) {
  ModelParams<T> p;
  const auto& specs = net.param_specs();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    std::size_t n = 1;
    for (int d : s.shape) n *= static_cast<std::size_t>(d);
    ParamArray<T> a{s.name, s.shape, std::vector<T>(n), s.trainable};
    Rng rng(derive_seed(seed, {0x1a17, i}));
    switch (s.init) {
      case ParamSpec::Init::KaimingConv: {
        const double std = std::sqrt(2.0 / s.fan_in);
        for (auto& v : a.values) v = static_cast<T>(std * rng.normal());
        break;
      }
      case ParamSpec::Init::HeadWeight:
        for (auto& v : a.values) v = static_cast<T>(0.01 * rng.normal());
        break;
      case ParamSpec::Init::Zero:
        break;
      case ParamSpec::Init::One:
        std::fill(a.values.begin(), a.values.end(), T(1));
        break;
    }
    p.arrays.push_back(std::move(a));
  }
  return p;
}

template <typename T>
std::vector<T> predict_scores(std::span<const T> logits, int n) {
  require(n >= 1 && logits.size() % static_cast<std::size_t>(n) == 0, ErrorKind::ShapeMismatch,
          "predict_scores: logits length is not a multiple of the class count");
  std::vector<T> out(logits.size());
  for (std::size_t r = 0; r < logits.size(); r += static_cast<std::size_t>(n)) {
    const T mx = *std::max_element(logits.begin() + static_cast<std::ptrdiff_t>(r),
                                   logits.begin() + static_cast<std::ptrdiff_t>(r + n));
    T s = T(0);
    for (int k = 0; k < n; ++k) {
      out[r + k] = std::exp(logits[r + k] - mx);
      s += out[r + k];
    }
    for (int k = 0; k < n; ++k) out[r + k] /= s;
  }
  return out;
}

template class Trace<float>;
template class Trace<double>;
template class Network<float>;
template class Network<double>;
template ModelParams<float> init_params(const Network<float>&, std::uint64_t);
template ModelParams<double> init_params(const Network<double>&, std::uint64_t);
template std::vector<float> predict_scores(std::span<const float>, int);
template std::vector<double> predict_scores(std::span<const double>, int);

}  // namespace mgc::nn
