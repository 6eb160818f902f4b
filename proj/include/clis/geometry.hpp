#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "clis/error.hpp"

namespace clis {

/// Axis-aligned box in the unit image square, [x, y, w, h] with (x, y) the
/// top-left corner. Valid boxes satisfy x, y, w, h > 0 and x+w < 1, y+h < 1;
/// construction goes through validate_bbox (scene_graph.hpp), everything
/// below assumes validity.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  bool operator==(const BBox&) const = default;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Vec2&) const = default;
};

inline double area(const BBox& b) { return b.w * b.h; }

inline Vec2 center(const BBox& b) {
  return {b.x + b.w / 2.0, b.y + b.h / 2.0};
}

inline double iou(const BBox& a, const BBox& b) {
  double ix = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  double iy = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  double inter = ix * iy;
  return inter / (area(a) + area(b) - inter);
}

/// Distance between box centers, divided by the unit-square diagonal so the
/// result lives in [0, 1) on the same scale as the other similarity inputs.
inline double rel_dist(const BBox& a, const BBox& b) {
  Vec2 ca = center(a);
  Vec2 cb = center(b);
  return std::hypot(cb.x - ca.x, cb.y - ca.y) / std::numbers::sqrt2;
}

/// Unit vector from center(from) to center(to); the zero vector when the
/// centers coincide (policy for that case belongs to the scoring layer).
inline Vec2 direction(const BBox& from, const BBox& to) {
  Vec2 a = center(from);
  Vec2 b = center(to);
  double dx = b.x - a.x;
  double dy = b.y - a.y;
  double len = std::hypot(dx, dy);
  if (len == 0.0) return {0.0, 0.0};
  return {dx / len, dy / len};
}

/// Relative similarity kernel: 1 - |a-b| / max(a,b), on nonnegative scalars.
/// Both zero counts as identical (score 1) to keep "equal inputs score 1"
/// total.
inline double sim_score(double a, double b) {
  if (a < 0.0 || b < 0.0) {
    fail(ErrorKind::argument, "sim_score requires nonnegative inputs");
  }
  double m = std::max(a, b);
  if (m == 0.0) return 1.0;
  return 1.0 - std::abs(a - b) / m;
}

}  // namespace clis
