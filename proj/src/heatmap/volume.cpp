// SPDX-License-Identifier: Apache-2.0
#include "heatmap/volume.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "common/binary_io.hpp"
#include "common/error.hpp"
#include "common/rng.hpp"

namespace mgc {

namespace {

// Gaussian tails below this fraction of the peak are not written.
constexpr double kTailCutoff = 1e-9;

double tail_radius(double sigma) { return sigma * std::sqrt(-2.0 * std::log(kTailCutoff)); }

// Inclusive pixel range whose centers lie within [lo, hi].
std::pair<int, int> pixel_span(double lo, double hi, int n) {
  const double bound = static_cast<double>(n) + 1.0;
  const int a = std::max(0, static_cast<int>(std::floor(std::clamp(lo - 0.5, -1.0, bound))));
  const int b = std::min(n - 1, static_cast<int>(std::ceil(std::clamp(hi - 0.5, -1.0, bound))));
  return {a, b};
}

}  // namespace

Modality parse_modality(std::string_view name) {
  if (name == "joint") return Modality::Joint;
  if (name == "limb") return Modality::Limb;
  fail(ErrorKind::InvalidArgument, "unknown modality '" + std::string(name) + "'");
}

std::string_view modality_name(Modality m) { return m == Modality::Joint ? "joint" : "limb"; }

void VolumeConfig::validate() const {
  require(height >= 1 && width >= 1 && frames >= 1, ErrorKind::Validation,
          "volume: H, W and T_out must be >= 1");
  require(sigma > 0.0 && std::isfinite(sigma), ErrorKind::Validation, "volume: sigma must be > 0");
  require(crop_padding >= 0.0, ErrorKind::Validation, "volume: crop_padding must be >= 0");
}

std::vector<int> uniform_sample_indices(int t_in, int t_out, SampleMode mode,
                                        std::uint64_t seed) {
  require(t_in >= 1 && t_out >= 1, ErrorKind::InvalidArgument,
          "uniform_sample_indices: T_in and T_out must be >= 1");
  std::vector<int> out(t_out);
  if (mode == SampleMode::Test) {
    // floor((s + 1/2) * T_in / T_out) in exact integer arithmetic.
    for (int s = 0; s < t_out; ++s) {
      out[s] = static_cast<int>((static_cast<std::int64_t>(2 * s + 1) * t_in) /
                                (static_cast<std::int64_t>(2) * t_out));
    }
    return out;
  }
  Rng rng(seed);
  const double seg = static_cast<double>(t_in) / t_out;
  for (int s = 0; s < t_out; ++s) {
    const double pos = (s + rng.uniform()) * seg;
    out[s] = std::clamp(static_cast<int>(std::floor(pos)), 0, t_in - 1);
  }
  // Rounding at segment borders could otherwise break monotonicity.
  for (int s = 1; s < t_out; ++s) out[s] = std::max(out[s], out[s - 1]);
  return out;
}

CroppedClip subject_centered_crop(const SkeletonClip& clip, double padding) {
  require(padding >= 0.0, ErrorKind::InvalidArgument, "crop: padding must be >= 0");
  double x0 = std::numeric_limits<double>::infinity();
  double y0 = x0;
  double x1 = -x0;
  double y1 = -x0;
  for (const auto& kp : clip.keypoints) {
    if (kp.conf <= 0.0) continue;
    x0 = std::min(x0, kp.x);
    x1 = std::max(x1, kp.x);
    y0 = std::min(y0, kp.y);
    y1 = std::max(y1, kp.y);
  }
  require(x0 <= x1, ErrorKind::Validation, "clip '" + clip.clip_id + "': empty skeleton");

  auto widen = [](double& lo, double& hi) {
    if (hi - lo <= 0.0) {
      const double c = lo;
      lo = c - 0.5;
      hi = c + 0.5;
    }
  };
  widen(x0, x1);
  widen(y0, y1);
  const double pw = (x1 - x0) * padding;
  const double ph = (y1 - y0) * padding;
  const double w = (x1 - x0) + 2.0 * pw;
  const double h = (y1 - y0) + 2.0 * ph;

  // Offsets from the tight box are exact for grid-aligned input, so a
  // translated skeleton yields bit-identical normalized coordinates.
  CroppedClip out{clip, CropAffine{x0 - pw, y0 - ph, w, h}};
  for (auto& kp : out.clip.keypoints) {
    kp.x = ((kp.x - x0) + pw) / w;
    kp.y = ((kp.y - y0) + ph) / h;
  }
  return out;
}

std::vector<float> joint_heatmap_frame(std::span<const Keypoint> kpts, int height, int width,
                                       double sigma) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  std::vector<float> out(kpts.size() * plane, 0.0f);
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const double r = tail_radius(sigma);
  std::vector<double> gx(width);
  std::vector<double> gy(height);
  for (std::size_t k = 0; k < kpts.size(); ++k) {
    const auto& kp = kpts[k];
    if (kp.conf <= 0.0) continue;
    const double px = kp.x * width;
    const double py = kp.y * height;
    const auto [j0, j1] = pixel_span(px - r, px + r, width);
    const auto [i0, i1] = pixel_span(py - r, py + r, height);
    if (j0 > j1 || i0 > i1) continue;
    for (int j = j0; j <= j1; ++j) {
      const double d = j + 0.5 - px;
      gx[j] = std::exp(-d * d * inv2s2);
    }
    for (int i = i0; i <= i1; ++i) {
      const double d = i + 0.5 - py;
      gy[i] = kp.conf * std::exp(-d * d * inv2s2);
    }
    float* ch = out.data() + k * plane;
    for (int i = i0; i <= i1; ++i) {
      float* row = ch + static_cast<std::size_t>(i) * width;
      for (int j = j0; j <= j1; ++j) row[j] = static_cast<float>(gy[i] * gx[j]);
    }
  }
  return out;
}

std::vector<float> limb_heatmap_frame(std::span<const Keypoint> kpts,
                                      std::span<const std::pair<int, int>> limbs, int height,
                                      int width, double sigma) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  std::vector<float> out(limbs.size() * plane, 0.0f);
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const double r = tail_radius(sigma);
  for (std::size_t l = 0; l < limbs.size(); ++l) {
    const auto& a = kpts[limbs[l].first];
    const auto& b = kpts[limbs[l].second];
    const double c = std::min(a.conf, b.conf);
    if (c <= 0.0) continue;
    const double ax = a.x * width;
    const double ay = a.y * height;
    const double bx = b.x * width;
    const double by = b.y * height;
    const double vx = bx - ax;
    const double vy = by - ay;
    const double len2 = vx * vx + vy * vy;
    const auto [j0, j1] = pixel_span(std::min(ax, bx) - r, std::max(ax, bx) + r, width);
    const auto [i0, i1] = pixel_span(std::min(ay, by) - r, std::max(ay, by) + r, height);
    float* ch = out.data() + l * plane;
    for (int i = i0; i <= i1; ++i) {
      const double py = i + 0.5;
      for (int j = j0; j <= j1; ++j) {
        const double px = j + 0.5;
        double t = 0.0;
        if (len2 > 0.0) t = std::clamp(((px - ax) * vx + (py - ay) * vy) / len2, 0.0, 1.0);
        const double dx = px - (ax + t * vx);
        const double dy = py - (ay + t * vy);
        ch[static_cast<std::size_t>(i) * width + j] =
            static_cast<float>(c * std::exp(-(dx * dx + dy * dy) * inv2s2));
      }
    }
  }
  return out;
}

int volume_channels(const KeypointLayout& layout, Modality modality) {
  return modality == Modality::Joint ? layout.joint_count() : layout.limb_count();
}

HeatmapVolume build_volume(const SkeletonClip& clip, const KeypointLayout& layout,
                           const VolumeConfig& config, SampleMode mode, std::uint64_t seed) {
  config.validate();
  require(clip.num_joints == layout.joint_count(), ErrorKind::ShapeMismatch,
          "clip '" + clip.clip_id + "': joint count does not match layout");
  const auto cropped = subject_centered_crop(clip, config.crop_padding);
  const auto idx = uniform_sample_indices(clip.num_frames, config.frames, mode, seed);

  HeatmapVolume vol;
  vol.channels = volume_channels(layout, config.modality);
  vol.frames = config.frames;
  vol.height = config.height;
  vol.width = config.width;
  vol.modality = config.modality;
  vol.data.assign(static_cast<std::size_t>(vol.channels) * vol.frames * vol.frame_stride(), 0.0f);

  for (int t = 0; t < vol.frames; ++t) {
    const auto kpts = cropped.clip.frame(idx[t]);
    const auto maps =
        config.modality == Modality::Joint
            ? joint_heatmap_frame(kpts, vol.height, vol.width, config.sigma)
            : limb_heatmap_frame(kpts, layout.limb_pairs, vol.height, vol.width, config.sigma);
    for (int c = 0; c < vol.channels; ++c) {
      std::copy_n(maps.begin() + static_cast<std::ptrdiff_t>(c * vol.frame_stride()),
                  vol.frame_stride(), vol.data.begin() + static_cast<std::ptrdiff_t>(vol.index(c, t, 0, 0)));
    }
  }
  return vol;
}

void write_volume(const HeatmapVolume& v, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  for (int d : {v.channels, v.frames, v.height, v.width}) {
    binio::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  }
  binio::write_f32(out, v.data);
  require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
}

HeatmapVolume read_volume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  HeatmapVolume v;
  v.channels = static_cast<int>(binio::read_pod<std::uint32_t>(in, "volume header"));
  v.frames = static_cast<int>(binio::read_pod<std::uint32_t>(in, "volume header"));
  v.height = static_cast<int>(binio::read_pod<std::uint32_t>(in, "volume header"));
  v.width = static_cast<int>(binio::read_pod<std::uint32_t>(in, "volume header"));
  v.data.resize(static_cast<std::size_t>(v.channels) * v.frames * v.frame_stride());
  binio::read_f32(in, v.data, "volume data");
  return v;
}

void write_volume_frames_pgm(const HeatmapVolume& v, const std::filesystem::path& dir,
                             std::string_view stem) {
  std::filesystem::create_directories(dir);
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(v.channels))));
  const int rows = (v.channels + cols - 1) / cols;
  const int gw = cols * v.width;
  const int gh = rows * v.height;
  std::vector<unsigned char> img(static_cast<std::size_t>(gw) * gh);
  for (int t = 0; t < v.frames; ++t) {
    std::fill(img.begin(), img.end(), 0);
    for (int c = 0; c < v.channels; ++c) {
      const int oy = (c / cols) * v.height;
      const int ox = (c % cols) * v.width;
      for (int i = 0; i < v.height; ++i) {
        for (int j = 0; j < v.width; ++j) {
          const float val = std::clamp(v.at(c, t, i, j), 0.0f, 1.0f);
          img[static_cast<std::size_t>(oy + i) * gw + ox + j] =
              static_cast<unsigned char>(std::lround(val * 255.0f));
        }
      }
    }
    const auto path = dir / (std::string(stem) + "_t" + std::to_string(t) + ".pgm");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
    out << "P5\n" << gw << " " << gh << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
  }
}

}  // namespace mgc
