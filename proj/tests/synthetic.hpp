#pragma once

// Synthetic image generators shared by the test suites: an anti-aliased
// disc renderer (ground truth for circle detection) and a three-class
// sample generator whose classes differ by disc brightness.

#include <algorithm>
#include <cmath>
#include <random>

#include "mcfnet/colorspace.hpp"
#include "mcfnet/rng.hpp"

namespace synth {

// Bright disc on black with a ~1 px anti-aliased rim: coverage falls off
// linearly with signed distance to the circle.
inline mcf::ImageBuffer render_disc(int w, int h, double cx, double cy, double r,
                                    double brightness = 0.8) {
  mcf::ImageBuffer img(w, h, mcf::ColorSpace::kRgb);
  const std::size_t n = img.plane_size();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dist = std::hypot(x - cx, y - cy);
      const double coverage = std::clamp(0.5 + (r - dist), 0.0, 1.0);
      const double v = brightness * coverage;
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      img.planes[i] = v;
      img.planes[n + i] = v * 0.85;
      img.planes[2 * n + i] = v * 0.6;
    }
  }
  return img;
}

// Class-separable samples: grade 0/1/2 discs render bright/medium/dim, with
// jittered geometry and pixel noise so the set is not degenerate.
inline mcf::ImageBuffer render_class_sample(int grade, int size, std::mt19937_64& rng) {
  const double brightness = grade == 0 ? 0.9 : grade == 1 ? 0.55 : 0.25;
  const double r = size * (0.32 + 0.05 * mcf::uniform_unit(rng));
  const double cx = size / 2.0 + mcf::uniform_range(rng, -2.0, 2.0);
  const double cy = size / 2.0 + mcf::uniform_range(rng, -2.0, 2.0);
  mcf::ImageBuffer img = render_disc(size, size, cx, cy, r, brightness);
  for (double& v : img.planes) {
    v = std::clamp(v + mcf::uniform_range(rng, -0.03, 0.03), 0.0, 1.0);
  }
  return img;
}

}  // namespace synth
