// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "pose_io/manifest.hpp"

namespace mgc {

enum class Modality { Joint, Limb };

Modality parse_modality(std::string_view name);
std::string_view modality_name(Modality m);

enum class SampleMode { Train, Test };

struct VolumeConfig {
  int height = 56;
  int width = 56;
  int frames = 48;  // T_out
  double sigma = 0.6;  // output pixels
  Modality modality = Modality::Joint;
  double crop_padding = 0.1;

  void validate() const;
  bool operator==(const VolumeConfig&) const = default;
};

/// Dense C x T x H x W volume, row-major with W fastest.
struct HeatmapVolume {
  int channels = 0;
  int frames = 0;
  int height = 0;
  int width = 0;
  Modality modality = Modality::Joint;
  std::vector<float> data;

  std::size_t index(int c, int t, int i, int j) const {
    return ((static_cast<std::size_t>(c) * frames + t) * height + i) * width + j;
  }
  float at(int c, int t, int i, int j) const { return data[index(c, t, i, j)]; }
  std::size_t frame_stride() const { return static_cast<std::size_t>(height) * width; }
};

/// Maps image pixels to the unit square: u = (x - origin_x) / scale_x.
/// As a 2x3 matrix: [1/sx 0 -ox/sx; 0 1/sy -oy/sy].
struct CropAffine {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double scale_x = 1.0;
  double scale_y = 1.0;

  std::array<double, 6> matrix() const {
    return {1.0 / scale_x, 0.0, -origin_x / scale_x, 0.0, 1.0 / scale_y, -origin_y / scale_y};
  }
};

struct CroppedClip {
  SkeletonClip clip;  // coordinates in the unit square
  CropAffine affine;
};

/// T_out frame indices in [0, T_in). The clip is cut into T_out equal
/// real-valued segments; test mode takes floor(segment midpoint), train mode
/// draws one index uniformly inside each segment from `seed`.
std::vector<int> uniform_sample_indices(int t_in, int t_out, SampleMode mode,
                                        std::uint64_t seed = 0);

/// Tight box over every conf > 0 keypoint across all frames, grown by
/// `padding` of its extent on each side, mapped onto the unit square. A zero
/// width or height is first widened to 1 px centered on the box.
CroppedClip subject_centered_crop(const SkeletonClip& clip, double padding);

/// K x H x W gaussians for keypoints given in unit-square coordinates. Pixel
/// (i, j) samples the continuous point (j + 0.5, i + 0.5) of a W x H canvas.
std::vector<float> joint_heatmap_frame(std::span<const Keypoint> kpts, int height, int width,
                                       double sigma);

/// L x H x W gaussians of pixel-to-segment distance, scaled by the smaller
/// endpoint confidence.
std::vector<float> limb_heatmap_frame(std::span<const Keypoint> kpts,
                                      std::span<const std::pair<int, int>> limbs, int height,
                                      int width, double sigma);

/// crop -> sample T_out frames -> per-frame heatmaps -> C x T x H x W.
HeatmapVolume build_volume(const SkeletonClip& clip, const KeypointLayout& layout,
                           const VolumeConfig& config, SampleMode mode = SampleMode::Test,
                           std::uint64_t seed = 0);

int volume_channels(const KeypointLayout& layout, Modality modality);

/// Flat dump: 16-byte header of four little-endian u32 (C, T, H, W) followed
/// by C*T*H*W little-endian f32.
void write_volume(const HeatmapVolume& volume, const std::filesystem::path& path);
HeatmapVolume read_volume(const std::filesystem::path& path);

/// Diagnostic export: one binary PGM per frame, channels tiled in a grid.
void write_volume_frames_pgm(const HeatmapVolume& volume, const std::filesystem::path& dir,
                             std::string_view stem);

}  // namespace mgc
