#pragma once

// Independent reference computations used to cross-check the geometry layer.
// Everything here deliberately avoids the library's own min/max interval
// arithmetic so agreement actually means something.

#include <cstdint>

#include "clis/geometry.hpp"
#include "clis/rng.hpp"

namespace clis::test {

// Boxes on a 1/1000 lattice, expressed in integer thousandths. to_bbox stays
// exactly representable enough that the counting oracle below is exact.
struct LatticeBox {
  int x = 0, y = 0, w = 0, h = 0;  // thousandths of the unit square

  BBox to_bbox() const {
    return BBox{x / 1000.0, y / 1000.0, w / 1000.0, h / 1000.0};
  }
};

/// Draws a valid lattice box: all coordinates positive, x+w and y+h at most
/// 998 thousandths, and sides at least `min_side` thousandths.
inline LatticeBox random_lattice_box(SplitMix64& rng, int min_side = 20) {
  LatticeBox b;
  b.w = min_side + static_cast<int>(rng.next_below(400 - min_side));
  b.h = min_side + static_cast<int>(rng.next_below(400 - min_side));
  b.x = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(998 - b.w)));
  b.y = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(998 - b.h)));
  return b;
}

/// IoU by counting lattice cells whose centers fall inside both boxes. A cell
/// k covers [k, k+1) thousandths, so its center is at k + 0.5; for boxes
/// aligned to the lattice, membership is the integer test k >= x and
/// k < x + w. Exact for lattice boxes, computed without any interval math.
inline double grid_iou(const LatticeBox& a, const LatticeBox& b) {
  auto overlap = [](int a0, int aw, int b0, int bw) {
    long count = 0;
    for (int k = 0; k < 1000; ++k) {
      bool in_a = k >= a0 && k < a0 + aw;
      bool in_b = k >= b0 && k < b0 + bw;
      if (in_a && in_b) ++count;
    }
    return count;
  };
  long ix = overlap(a.x, a.w, b.x, b.w);
  long iy = overlap(a.y, a.h, b.y, b.h);
  long inter = ix * iy;
  long uni = static_cast<long>(a.w) * a.h + static_cast<long>(b.w) * b.h - inter;
  if (uni <= 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace clis::test
