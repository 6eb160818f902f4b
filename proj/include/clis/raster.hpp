#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "clis/error.hpp"
#include "clis/geometry.hpp"

namespace clis {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

/// Plain 8-bit RGB raster, row-major.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> px;  // 3 * width * height

  Raster() = default;
  Raster(int w, int h, Rgb fill = {255, 255, 255}) : width(w), height(h) {
    if (w <= 0 || h <= 0) fail(ErrorKind::argument, "raster dimensions must be positive");
    px.resize(static_cast<std::size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) set(x, y, fill);
    }
  }

  Rgb get(int x, int y) const {
    std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    return {px[i], px[i + 1], px[i + 2]};
  }

  void set(int x, int y, Rgb c) {
    std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    px[i] = c.r;
    px[i + 1] = c.g;
    px[i + 2] = c.b;
  }

  bool operator==(const Raster&) const = default;
};

struct PixelRect {
  int x = 0, y = 0, w = 0, h = 0;
  bool operator==(const PixelRect&) const = default;
};

inline int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

/// Maps a normalized box to integer pixel bounds: round half-up, clamp to a
/// minimum of 1x1, keep inside the image.
inline PixelRect to_pixel_rect(const BBox& b, int width, int height) {
  PixelRect r;
  r.x = std::clamp(round_half_up(b.x * width), 0, width - 1);
  r.y = std::clamp(round_half_up(b.y * height), 0, height - 1);
  r.w = std::clamp(round_half_up(b.w * width), 1, width - r.x);
  r.h = std::clamp(round_half_up(b.h * height), 1, height - r.y);
  return r;
}

inline Raster crop_region(const Raster& img, const BBox& b) {
  PixelRect r = to_pixel_rect(b, img.width, img.height);
  Raster out(r.w, r.h);
  for (int y = 0; y < r.h; ++y) {
    for (int x = 0; x < r.w; ++x) {
      out.set(x, y, img.get(r.x + x, r.y + y));
    }
  }
  return out;
}

inline void fill_rect(Raster& img, const PixelRect& r, Rgb color) {
  int x1 = std::min(r.x + r.w, img.width);
  int y1 = std::min(r.y + r.h, img.height);
  for (int y = std::max(r.y, 0); y < y1; ++y) {
    for (int x = std::max(r.x, 0); x < x1; ++x) img.set(x, y, color);
  }
}

struct NamedColor {
  std::string_view name;
  Rgb rgb;
};

/// Canonical color vocabulary shared by the toy generator, captioner and the
/// attribute QA answers.
inline std::span<const NamedColor> color_table() {
  static constexpr NamedColor kColors[] = {
      {"red", {220, 40, 40}},    {"green", {40, 160, 60}},
      {"blue", {50, 90, 220}},   {"yellow", {235, 220, 50}},
      {"orange", {240, 150, 40}}, {"purple", {150, 60, 200}},
      {"pink", {240, 130, 180}}, {"brown", {140, 90, 50}},
      {"black", {25, 25, 25}},   {"white", {245, 245, 245}},
      {"gray", {128, 128, 128}}, {"cyan", {60, 200, 220}},
  };
  return kColors;
}

inline const NamedColor* find_color(std::string_view name) {
  for (const auto& c : color_table()) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

inline std::string_view nearest_color_name(Rgb c) {
  std::string_view best;
  long best_d = -1;
  for (const auto& entry : color_table()) {
    long dr = long(c.r) - entry.rgb.r;
    long dg = long(c.g) - entry.rgb.g;
    long db = long(c.b) - entry.rgb.b;
    long d = dr * dr + dg * dg + db * db;
    if (best_d < 0 || d < best_d) {
      best_d = d;
      best = entry.name;
    }
  }
  return best;
}

}  // namespace clis
