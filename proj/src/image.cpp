#include "mtaa/image.hpp"

#include <algorithm>
#include <cmath>

namespace mtaa {

Image resize_bilinear(const Image& src, int out_height, int out_width) {
  if (src.height <= 0 || src.width <= 0) throw InvalidInput("resize: empty source image");
  if (out_height <= 0 || out_width <= 0) throw InvalidInput("resize: empty target shape");
  if (out_height == src.height && out_width == src.width) return src;

  Image dst(out_height, out_width);
  const double sy = static_cast<double>(src.height) / out_height;
  const double sx = static_cast<double>(src.width) / out_width;
  for (int y = 0; y < out_height; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(src.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_width; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(src.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - wx) * src.at(y0, x0, c) + wx * src.at(y0, x1, c);
        const double bot = (1.0 - wx) * src.at(y1, x0, c) + wx * src.at(y1, x1, c);
        const double v = (1.0 - wy) * top + wy * bot;
        dst.at(y, x, c) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  return dst;
}

Image pad_and_rescale(const Image& src) {
  if (src.height <= 0 || src.width <= 0) throw InvalidInput("pad_and_rescale: empty image");
  const double scale = std::min(static_cast<double>(kCanvasHeight) / src.height,
                                static_cast<double>(kCanvasWidth) / src.width);
  int content_h = static_cast<int>(std::lround(src.height * scale));
  int content_w = static_cast<int>(std::lround(src.width * scale));
  content_h = std::clamp(content_h, 1, kCanvasHeight);
  content_w = std::clamp(content_w, 1, kCanvasWidth);

  const Image content = resize_bilinear(src, content_h, content_w);
  if (content_h == kCanvasHeight && content_w == kCanvasWidth) return content;

  Image canvas(kCanvasHeight, kCanvasWidth);
  const int off_y = (kCanvasHeight - content_h) / 2;
  const int off_x = (kCanvasWidth - content_w) / 2;
  for (int y = 0; y < content_h; ++y) {
    for (int x = 0; x < content_w; ++x) {
      for (int c = 0; c < 3; ++c) canvas.at(off_y + y, off_x + x, c) = content.at(y, x, c);
    }
  }
  return canvas;
}

namespace {

Image crop(const Image& src, int y0, int x0, int h, int w) {
  Image out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = src.at(y0 + y, x0 + x, c);
  return out;
}

}  // namespace

std::vector<Image> multi_patch(const Image& src, const MultiPatchOptions& opts,
                               std::uint64_t seed) {
  if (src.height <= 0 || src.width <= 0) throw InvalidInput("multi_patch: empty image");
  if (opts.patch_height <= 0 || opts.patch_width <= 0) {
    throw InvalidInput("multi_patch: patch size must be positive");
  }
  if (opts.n_local < 0 || opts.n_global < 0) {
    throw InvalidInput("multi_patch: patch counts must be non-negative");
  }

  Image base = src;
  if (src.height < opts.patch_height || src.width < opts.patch_width) {
    if (!opts.allow_upscale) {
      throw InvalidInput("multi_patch: patch larger than image and upscaling disabled");
    }
    const double scale = std::max(static_cast<double>(opts.patch_height) / src.height,
                                  static_cast<double>(opts.patch_width) / src.width);
    const int h = std::max(opts.patch_height, static_cast<int>(std::lround(src.height * scale)));
    const int w = std::max(opts.patch_width, static_cast<int>(std::lround(src.width * scale)));
    base = resize_bilinear(src, h, w);
  }

  Rng rng(seed);
  std::vector<Image> patches;
  patches.reserve(opts.n_local + (opts.with_global ? opts.n_global : 0));

  for (int i = 0; i < opts.n_local; ++i) {
    const int y0 = rng.uniform_int(base.height - opts.patch_height + 1);
    const int x0 = rng.uniform_int(base.width - opts.patch_width + 1);
    patches.push_back(crop(base, y0, x0, opts.patch_height, opts.patch_width));
  }

  if (opts.with_global) {
    // A global patch is a larger window with the patch's aspect ratio,
    // rescaled down to patch size, so content proportions are unchanged.
    const double aspect = static_cast<double>(opts.patch_width) / opts.patch_height;
    const int max_h = std::min(base.height, static_cast<int>(base.width / aspect));
    for (int i = 0; i < opts.n_global; ++i) {
      const int win_h = opts.patch_height + rng.uniform_int(max_h - opts.patch_height + 1);
      int win_w = static_cast<int>(std::lround(win_h * aspect));
      win_w = std::clamp(win_w, opts.patch_width, base.width);
      const int y0 = rng.uniform_int(base.height - win_h + 1);
      const int x0 = rng.uniform_int(base.width - win_w + 1);
      patches.push_back(resize_bilinear(crop(base, y0, x0, win_h, win_w), opts.patch_height,
                                        opts.patch_width));
    }
  }
  return patches;
}

Vec image_features(const Image& img, int grid_h, int grid_w) {
  if (grid_h <= 0 || grid_w <= 0) throw InvalidInput("image_features: bad grid shape");
  Vec out(static_cast<Eigen::Index>(grid_h) * grid_w * 3);
  for (int gy = 0; gy < grid_h; ++gy) {
    const int y0 = gy * img.height / grid_h;
    const int y1 = std::max(y0 + 1, (gy + 1) * img.height / grid_h);
    for (int gx = 0; gx < grid_w; ++gx) {
      const int x0 = gx * img.width / grid_w;
      const int x1 = std::max(x0 + 1, (gx + 1) * img.width / grid_w);
      double acc[3] = {0.0, 0.0, 0.0};
      int count = 0;
      for (int y = y0; y < y1 && y < img.height; ++y) {
        for (int x = x0; x < x1 && x < img.width; ++x) {
          for (int c = 0; c < 3; ++c) acc[c] += img.at(y, x, c);
          ++count;
        }
      }
      const int cell = (gy * grid_w + gx) * 3;
      for (int c = 0; c < 3; ++c) out[cell + c] = count > 0 ? acc[c] / (count * 255.0) : 0.0;
    }
  }
  return out;
}

}  // namespace mtaa
