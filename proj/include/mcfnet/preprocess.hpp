#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mcfnet/autodiff.hpp"
#include "mcfnet/colorspace.hpp"
#include "mcfnet/errors.hpp"
#include "mcfnet/rng.hpp"

// Retina localization and geometry: Hough circle detection over Sobel
// edges, bounding-square crop, bilinear resize, [-1,1] normalization, and
// the training-time flip/drift/rotation augmentations.

namespace mcf {

struct Circle {
  double cx = 0.0;
  double cy = 0.0;
  double r = 0.0;
  double score = 0.0;  // accumulator votes
};

struct PreprocessConfig {
  int out_size = 224;
  double radius_min_frac = 0.25;  // of min(H, W)
  double radius_max_frac = 0.60;
  double edge_threshold_quantile = 0.90;
  double accumulator_step = 2.0;  // px, for both centers and radii

  void validate() const {
    if (out_size < 1) throw Error(ErrorCode::kInvalidConfig, "out_size must be positive");
    if (!(0.0 < radius_min_frac && radius_min_frac < radius_max_frac && radius_max_frac <= 1.0)) {
      throw Error(ErrorCode::kInvalidConfig, "radius range must satisfy 0 < min < max <= 1");
    }
    if (!(edge_threshold_quantile >= 0.0 && edge_threshold_quantile < 1.0)) {
      throw Error(ErrorCode::kInvalidConfig, "edge threshold quantile must lie in [0, 1)");
    }
    if (!(accumulator_step > 0.0)) {
      throw Error(ErrorCode::kInvalidConfig, "accumulator step must be positive");
    }
  }
};

struct AugmentConfig {
  bool flip_h = true;
  bool flip_v = true;
  double max_drift = 0.05;        // fraction of side, per axis
  double rot_min_deg = -180.0;
  double rot_max_deg = 180.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(max_drift >= 0.0 && max_drift <= 0.25)) {
      throw Error(ErrorCode::kInvalidConfig, "max_drift must lie in [0, 0.25]");
    }
    if (!(rot_min_deg <= rot_max_deg)) {
      throw Error(ErrorCode::kInvalidConfig, "rotation range is inverted");
    }
  }
};

// ---------------------------------------------------------------------------
// Hough circle detection
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<double> luma_plane(const ImageBuffer& img) {
  const std::size_t n = img.plane_size();
  std::vector<double> luma(n);
  for (std::size_t i = 0; i < n; ++i) {
    luma[i] = 0.299 * img.planes[i] + 0.587 * img.planes[n + i] + 0.114 * img.planes[2 * n + i];
  }
  return luma;
}

}  // namespace detail

// Sobel-edge voting along the gradient direction (both senses) into a
// center/radius accumulator quantized at cfg.accumulator_step. Returns the
// global accumulator maximum.
inline Circle detect_retina_circle(const ImageBuffer& img, const PreprocessConfig& cfg = {}) {
  detail::require_space(img, ColorSpace::kRgb, "detect_retina_circle");
  cfg.validate();
  const int w = img.width, h = img.height;
  if (w < 32 || h < 32) {
    throw Error(ErrorCode::kShapeMismatch,
                "detect_retina_circle needs at least 32x32, got " + std::to_string(w) + "x" +
                    std::to_string(h));
  }

  const std::vector<double> luma = detail::luma_plane(img);
  auto at = [&](int y, int x) { return luma[static_cast<std::size_t>(y) * w + x]; };

  // Sobel gradients on interior pixels.
  std::vector<double> gx(luma.size(), 0.0), gy(luma.size(), 0.0), mag;
  mag.reserve(static_cast<std::size_t>(w - 2) * (h - 2));
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const double sx = (at(y - 1, x + 1) + 2.0 * at(y, x + 1) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2.0 * at(y, x - 1) + at(y + 1, x - 1));
      const double sy = (at(y + 1, x - 1) + 2.0 * at(y + 1, x) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2.0 * at(y - 1, x) + at(y - 1, x + 1));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      gx[i] = sx;
      gy[i] = sy;
      mag.push_back(std::hypot(sx, sy));
    }
  }

  // Edge set: gradient magnitude strictly above the configured quantile, so
  // a uniform image (all magnitudes equal) yields no edges at all.
  std::vector<double> sorted = mag;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t qi =
      static_cast<std::size_t>(cfg.edge_threshold_quantile * static_cast<double>(sorted.size() - 1));
  const double threshold = sorted[qi];

  const double side = static_cast<double>(std::min(w, h));
  const double r_min = cfg.radius_min_frac * side;
  const double r_max = cfg.radius_max_frac * side;
  const double step = cfg.accumulator_step;
  const int nr = static_cast<int>((r_max - r_min) / step) + 1;
  const int ncx = static_cast<int>(std::ceil(w / step));
  const int ncy = static_cast<int>(std::ceil(h / step));

  std::vector<std::uint32_t> acc(static_cast<std::size_t>(nr) * ncy * ncx, 0);
  std::size_t mi = 0;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x, ++mi) {
      const double m = mag[mi];
      if (!(m > threshold)) continue;
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double dx = gx[i] / m, dy = gy[i] / m;
      for (int ri = 0; ri < nr; ++ri) {
        const double r = r_min + ri * step;
        for (int sgn : {1, -1}) {
          const double cx = x + sgn * r * dx;
          const double cy = y + sgn * r * dy;
          if (cx < 0.0 || cx >= w || cy < 0.0 || cy >= h) continue;
          const int bx = static_cast<int>(cx / step);
          const int by = static_cast<int>(cy / step);
          ++acc[(static_cast<std::size_t>(ri) * ncy + by) * ncx + bx];
        }
      }
    }
  }

  std::uint32_t best = 0;
  std::size_t best_idx = 0;
  for (std::size_t i = 0; i < acc.size(); ++i) {
    if (acc[i] > best) {
      best = acc[i];
      best_idx = i;
    }
  }
  const int ri = static_cast<int>(best_idx / (static_cast<std::size_t>(ncy) * ncx));
  const int by = static_cast<int>(best_idx / ncx % ncy);
  const int bx = static_cast<int>(best_idx % ncx);

  Circle c;
  c.r = r_min + ri * step;
  c.cx = (bx + 0.5) * step;
  c.cy = (by + 0.5) * step;
  c.score = best;

  const double floor_votes = 0.10 * (2.0 * 3.14159265358979323846 * c.r);
  if (best == 0 || static_cast<double>(best) < floor_votes) {
    throw Error(ErrorCode::kNoCircleFound,
                "peak " + std::to_string(best) + " votes below floor " + std::to_string(floor_votes));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Crop and resize
// ---------------------------------------------------------------------------

// Bilinear resample with the half-pixel center convention,
// src = (dst + 0.5) * (in/out) - 0.5, clamped to the source grid.
inline ImageBuffer bilinear_resize(const ImageBuffer& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) {
    throw Error(ErrorCode::kInvalidConfig, "bilinear_resize: output size must be positive");
  }
  ImageBuffer out(out_w, out_h, img.space);
  const double sx_scale = static_cast<double>(img.width) / out_w;
  const double sy_scale = static_cast<double>(img.height) / out_h;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < out_h; ++y) {
      double sy = (y + 0.5) * sy_scale - 0.5;
      sy = std::clamp(sy, 0.0, static_cast<double>(img.height - 1));
      const int y0 = static_cast<int>(sy);
      const int y1 = std::min(y0 + 1, img.height - 1);
      const double fy = sy - y0;
      for (int x = 0; x < out_w; ++x) {
        double sx = (x + 0.5) * sx_scale - 0.5;
        sx = std::clamp(sx, 0.0, static_cast<double>(img.width - 1));
        const int x0 = static_cast<int>(sx);
        const int x1 = std::min(x0 + 1, img.width - 1);
        const double fx = sx - x0;
        const double top = (1.0 - fx) * img.at(c, y0, x0) + fx * img.at(c, y0, x1);
        const double bot = (1.0 - fx) * img.at(c, y1, x0) + fx * img.at(c, y1, x1);
        out.at(c, y, x) = (1.0 - fy) * top + fy * bot;
      }
    }
  }
  return out;
}

// Crops to the circle's bounding square (clipped to the frame) and resizes
// to out_size x out_size.
inline ImageBuffer crop_and_resize(const ImageBuffer& img, const Circle& c, int out_size) {
  detail::require_space(img, ColorSpace::kRgb, "crop_and_resize");
  const int x0 = std::max(0, static_cast<int>(std::floor(c.cx - c.r)));
  const int y0 = std::max(0, static_cast<int>(std::floor(c.cy - c.r)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(c.cx + c.r)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(c.cy + c.r)));
  const int cw = x1 - x0 + 1;
  const int ch = y1 - y0 + 1;
  if (cw < 2 || ch < 2) {
    throw Error(ErrorCode::kDegenerateCrop,
                "clipped crop is " + std::to_string(cw) + "x" + std::to_string(ch));
  }
  ImageBuffer crop(cw, ch, ColorSpace::kRgb);
  for (int c3 = 0; c3 < 3; ++c3) {
    for (int y = 0; y < ch; ++y) {
      for (int x = 0; x < cw; ++x) crop.at(c3, y, x) = img.at(c3, y0 + y, x0 + x);
    }
  }
  return bilinear_resize(crop, out_size, out_size);
}

// ---------------------------------------------------------------------------
// Network input normalization
// ---------------------------------------------------------------------------

// [0,1] channels to a [3 x H x W] tensor in [-1, 1] via t = 2v - 1.
inline Tensor normalize_input(const ImageBuffer& img) {
  detail::require_space(img, ColorSpace::kUnit3, "normalize_input");
  std::vector<double> v(img.planes.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 2.0 * img.planes[i] - 1.0;
  return Tensor({3, img.height, img.width}, std::move(v));
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

inline ImageBuffer flip_horizontal(const ImageBuffer& img) {
  ImageBuffer out(img.width, img.height, img.space);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
    }
  }
  return out;
}

inline ImageBuffer flip_vertical(const ImageBuffer& img) {
  ImageBuffer out(img.width, img.height, img.space);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) out.at(c, y, x) = img.at(c, img.height - 1 - y, x);
    }
  }
  return out;
}

// Rotates by angle_deg about the pixel-center midpoint, then translates by
// (dx, dy); resampled bilinearly, out-of-frame pixels filled black.
inline ImageBuffer rotate_translate(const ImageBuffer& img, double angle_deg, double dx, double dy) {
  ImageBuffer out(img.width, img.height, img.space);
  const double cx = (img.width - 1) / 2.0;
  const double cy = (img.height - 1) / 2.0;
  const double rad = angle_deg * 3.14159265358979323846 / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      // inverse map: undo translation, then rotate backwards about center
      const double ux = x - dx - cx;
      const double uy = y - dy - cy;
      const double sx = cs * ux + sn * uy + cx;
      const double sy = -sn * ux + cs * uy + cy;
      if (sx < 0.0 || sy < 0.0 || sx > img.width - 1 || sy > img.height - 1) continue;
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const int y0 = static_cast<int>(sy);
      const int y1 = std::min(y0 + 1, img.height - 1);
      const double fx = sx - x0, fy = sy - y0;
      for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - fx) * img.at(c, y0, x0) + fx * img.at(c, y0, x1);
        const double bot = (1.0 - fx) * img.at(c, y1, x0) + fx * img.at(c, y1, x1);
        out.at(c, y, x) = (1.0 - fy) * top + fy * bot;
      }
    }
  }
  return out;
}

// Draws, in fixed order: horizontal-flip coin, vertical-flip coin, dx, dy,
// rotation angle. Disabled knobs still consume their draws so enabling one
// never reshuffles the others.
inline ImageBuffer augment(const ImageBuffer& img, const AugmentConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const bool do_h = uniform_unit(rng) < 0.5;
  const bool do_v = uniform_unit(rng) < 0.5;
  const double dx = uniform_range(rng, -cfg.max_drift, cfg.max_drift) * img.width;
  const double dy = uniform_range(rng, -cfg.max_drift, cfg.max_drift) * img.height;
  const double angle = uniform_range(rng, cfg.rot_min_deg, cfg.rot_max_deg);

  ImageBuffer out = img;
  if (cfg.flip_h && do_h) out = flip_horizontal(out);
  if (cfg.flip_v && do_v) out = flip_vertical(out);
  if (angle != 0.0 || dx != 0.0 || dy != 0.0) out = rotate_translate(out, angle, dx, dy);
  return out;
}

// ---------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------

struct BranchInputs {
  Tensor rgb;  // each [3 x S x S], values in [-1, 1]
  Tensor hsv;
  Tensor lab;
};

// detect -> crop/resize -> convert to each color-space -> rescale -> normalize.
inline BranchInputs preprocess_for_network(const ImageBuffer& img, const PreprocessConfig& cfg = {}) {
  const Circle circle = detect_retina_circle(img, cfg);
  const ImageBuffer cropped = crop_and_resize(img, circle, cfg.out_size);
  BranchInputs out;
  out.rgb = normalize_input(scale_channels_unit(cropped));
  out.hsv = normalize_input(scale_channels_unit(rgb_to_hsv(cropped)));
  out.lab = normalize_input(scale_channels_unit(rgb_to_lab(cropped)));
  return out;
}

}  // namespace mcf
