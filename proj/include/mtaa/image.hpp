#pragma once

#include "mtaa/common.hpp"

#include <cstdint>
#include <vector>

namespace mtaa {

inline constexpr int kCanvasHeight = 454;
inline constexpr int kCanvasWidth = 984;

/// 8-bit RGB raster, row-major height x width x 3.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int h, int w) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, 0) {}

  std::uint8_t& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  bool operator==(const Image&) const = default;
};

/// Bilinear resample to the given shape (pixel-center mapping). Resampling
/// to the source shape returns the pixels unchanged.
Image resize_bilinear(const Image& src, int out_height, int out_width);

/// Letterboxes onto the fixed 454 x 984 canvas: scale by the largest factor
/// that fits while preserving aspect ratio, center, fill the rest with black.
Image pad_and_rescale(const Image& src);

struct MultiPatchOptions {
  int n_local = 4;
  int patch_height = 227;
  int patch_width = 492;
  bool with_global = false;
  int n_global = 2;
  /// Upscale inputs smaller than the patch by the minimal factor; when
  /// disabled such inputs are rejected.
  bool allow_upscale = true;
};

/// Random local crops (no resampling) plus, optionally, global patches cut
/// as larger windows with the patch's aspect ratio and rescaled down.
/// Deterministic for a given seed.
std::vector<Image> multi_patch(const Image& src, const MultiPatchOptions& opts,
                               std::uint64_t seed);

/// Desk-scale feature extraction: average-pool onto a grid_h x grid_w grid
/// and flatten to grid_h * grid_w * 3 values in [0, 1].
Vec image_features(const Image& img, int grid_h = 16, int grid_w = 32);

}  // namespace mtaa
