#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mcfnet/errors.hpp"

// Three-plane float images and the RGB -> HSV / CIELAB conversions the
// fusion branches consume, plus the affine rescale that puts every space
// onto a common [0,1] channel range before network normalization.

namespace mcf {

enum class ColorSpace { kRgb, kHsv, kLab, kUnit3 };

inline const char* to_string(ColorSpace s) {
  switch (s) {
    case ColorSpace::kRgb: return "RGB";
    case ColorSpace::kHsv: return "HSV";
    case ColorSpace::kLab: return "LAB";
    case ColorSpace::kUnit3: return "UNIT3";
  }
  return "?";
}

// Declared [min,max] for channel `c` of a space. RGB/UNIT3: [0,1]^3.
// HSV: H in [0,360), S,V in [0,1]. LAB: L in [0,100], a,b in [-128,128].
inline std::pair<double, double> channel_range(ColorSpace s, int c) {
  switch (s) {
    case ColorSpace::kHsv: return c == 0 ? std::pair{0.0, 360.0} : std::pair{0.0, 1.0};
    case ColorSpace::kLab:
      return c == 0 ? std::pair{0.0, 100.0} : std::pair{-128.0, 128.0};
    default: return {0.0, 1.0};
  }
}

// H x W x 3 image stored as three planar row-major channels.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  ColorSpace space = ColorSpace::kRgb;
  std::vector<double> planes;  // size 3*H*W, plane-major

  ImageBuffer() = default;
  ImageBuffer(int w, int h, ColorSpace s) : width(w), height(h), space(s) {
    if (w <= 0 || h <= 0) {
      throw Error(ErrorCode::kShapeMismatch,
                  "image dimensions must be positive, got " + std::to_string(w) + "x" + std::to_string(h));
    }
    planes.assign(static_cast<std::size_t>(3) * w * h, 0.0);
  }

  std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }

  double at(int c, int y, int x) const {
    return planes[static_cast<std::size_t>(c) * plane_size() + static_cast<std::size_t>(y) * width + x];
  }
  double& at(int c, int y, int x) {
    return planes[static_cast<std::size_t>(c) * plane_size() + static_cast<std::size_t>(y) * width + x];
  }
};

namespace detail {

inline void require_space(const ImageBuffer& img, ColorSpace want, const char* op) {
  if (img.space != want) {
    throw Error(ErrorCode::kWrongColorSpace,
                std::string(op) + " expects " + to_string(want) + " input, got " + to_string(img.space));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Hexcone HSV
// ---------------------------------------------------------------------------

// Single-pixel hexcone conversion; achromatic pixels map to H=0, S=0.
inline void rgb_to_hsv_pixel(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max(r, std::max(g, b));
  const double mn = std::min(r, std::min(g, b));
  const double d = mx - mn;
  v = mx;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d == 0.0) {
    h = 0.0;
    return;
  }
  if (mx == r) {
    h = 60.0 * ((g - b) / d);
  } else if (mx == g) {
    h = 60.0 * ((b - r) / d + 2.0);
  } else {
    h = 60.0 * ((r - g) / d + 4.0);
  }
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
}

inline void hsv_to_rgb_pixel(double h, double s, double v, double& r, double& g, double& b) {
  if (s <= 0.0) {
    r = g = b = v;
    return;
  }
  double hp = h / 60.0;
  if (hp >= 6.0) hp -= 6.0;
  const int sector = static_cast<int>(hp);
  const double f = hp - sector;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

inline ImageBuffer rgb_to_hsv(const ImageBuffer& img) {
  detail::require_space(img, ColorSpace::kRgb, "rgb_to_hsv");
  ImageBuffer out(img.width, img.height, ColorSpace::kHsv);
  const std::size_t n = img.plane_size();
  for (std::size_t i = 0; i < n; ++i) {
    rgb_to_hsv_pixel(img.planes[i], img.planes[n + i], img.planes[2 * n + i],
                     out.planes[i], out.planes[n + i], out.planes[2 * n + i]);
  }
  return out;
}

inline ImageBuffer hsv_to_rgb(const ImageBuffer& img) {
  detail::require_space(img, ColorSpace::kHsv, "hsv_to_rgb");
  ImageBuffer out(img.width, img.height, ColorSpace::kRgb);
  const std::size_t n = img.plane_size();
  for (std::size_t i = 0; i < n; ++i) {
    hsv_to_rgb_pixel(img.planes[i], img.planes[n + i], img.planes[2 * n + i],
                     out.planes[i], out.planes[n + i], out.planes[2 * n + i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CIELAB via sRGB linearization and D65 XYZ
// ---------------------------------------------------------------------------

namespace lab {

// sRGB gamma expansion with the linear toe segment.
inline double srgb_linear(double u) {
  return u <= 0.04045 ? u / 12.92 : std::pow((u + 0.055) / 1.055, 2.4);
}

constexpr double kXn = 0.95047;  // D65 reference white
constexpr double kYn = 1.00000;
constexpr double kZn = 1.08883;

// Rows of the sRGB -> XYZ (D65) matrix.
constexpr double kM[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};

inline double f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

}  // namespace lab

// Converts one sRGB pixel (components in [0,1]) to L*a*b*. Returns the
// number of channel values that had to be clamped into the declared ranges.
inline int rgb_to_lab_pixel(double r, double g, double b, double& L, double& a, double& bb) {
  const double rl = lab::srgb_linear(r);
  const double gl = lab::srgb_linear(g);
  const double bl = lab::srgb_linear(b);
  const double x = (lab::kM[0][0] * rl + lab::kM[0][1] * gl + lab::kM[0][2] * bl) / lab::kXn;
  const double y = (lab::kM[1][0] * rl + lab::kM[1][1] * gl + lab::kM[1][2] * bl) / lab::kYn;
  const double z = (lab::kM[2][0] * rl + lab::kM[2][1] * gl + lab::kM[2][2] * bl) / lab::kZn;
  const double fx = lab::f(x), fy = lab::f(y), fz = lab::f(z);
  L = 116.0 * fy - 16.0;
  a = 500.0 * (fx - fy);
  bb = 200.0 * (fy - fz);
  int clamped = 0;
  if (L < 0.0) { L = 0.0; ++clamped; }
  if (L > 100.0) { L = 100.0; ++clamped; }
  if (a < -128.0) { a = -128.0; ++clamped; }
  if (a > 128.0) { a = 128.0; ++clamped; }
  if (bb < -128.0) { bb = -128.0; ++clamped; }
  if (bb > 128.0) { bb = 128.0; ++clamped; }
  return clamped;
}

inline ImageBuffer rgb_to_lab(const ImageBuffer& img, std::size_t* clamp_count = nullptr) {
  detail::require_space(img, ColorSpace::kRgb, "rgb_to_lab");
  ImageBuffer out(img.width, img.height, ColorSpace::kLab);
  const std::size_t n = img.plane_size();
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    clamped += static_cast<std::size_t>(
        rgb_to_lab_pixel(img.planes[i], img.planes[n + i], img.planes[2 * n + i],
                         out.planes[i], out.planes[n + i], out.planes[2 * n + i]));
  }
  if (clamp_count) *clamp_count = clamped;
  return out;
}

// ---------------------------------------------------------------------------
// Common-range rescale
// ---------------------------------------------------------------------------

// Affine map of each channel onto [0,1]: RGB unchanged; H/360, S, V;
// L/100, (a+128)/256, (b+128)/256.
inline ImageBuffer scale_channels_unit(const ImageBuffer& img) {
  if (img.space == ColorSpace::kUnit3) {
    throw Error(ErrorCode::kWrongColorSpace, "scale_channels_unit: input is already UNIT3");
  }
  ImageBuffer out(img.width, img.height, ColorSpace::kUnit3);
  const std::size_t n = img.plane_size();
  for (int c = 0; c < 3; ++c) {
    const auto [lo, hi] = channel_range(img.space, c);
    const double inv = 1.0 / (hi - lo);
    for (std::size_t i = 0; i < n; ++i) {
      out.planes[static_cast<std::size_t>(c) * n + i] =
          (img.planes[static_cast<std::size_t>(c) * n + i] - lo) * inv;
    }
  }
  return out;
}

}  // namespace mcf
